"""Truncated resolvent perturbation series for ``exp(-i (h0 + v) t)``.

The n-th order term of a matrix element ``<Psi_a| U(t) |Phi_b>`` is a sum over
index strings ``a -> mu_1 -> ... -> mu_{n-1} -> b`` of products of perturbation
matrix elements in the eigenbasis of ``h0`` (one overlap division per inserted
resolution of unity), each weighted by the residue sum of the evolution kernel
whose poles are the eigenvalues visited along the string.

Strings visiting the same multiset of eigenvalue clusters share one residue
sum, so the enumeration is carried out as a dynamic program over pole-count
vectors. The result equals the explicit string enumeration term by term.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergentSeriesWarning, IndexOutOfRange, NonFinite
from .linalg import (
    DEFAULT_CLUSTER_TOL,
    BiorthogonalSystem,
    KaonBasis,
    as_matrix,
    eig_biorthogonal,
    eigenvalues_2x2,
    expm,
    kaon_reciprocal,
)
from .residues import (
    Contour,
    PoleConfiguration,
    residue_exp_kernel,
    residue_sum,
    series_convergence_bound,
)


@dataclass(frozen=True)
class PerturbationProblem:
    """``H = h0 + v`` evolved for time ``t`` (natural units)."""

    h0: np.ndarray
    v: np.ndarray
    t: float

    def __post_init__(self):
        h0 = as_matrix(self.h0, "h0")
        v = as_matrix(self.v, "v")
        if h0.shape != v.shape:
            raise ValueError(f"h0 {h0.shape} and v {v.shape} differ in shape")
        t = float(self.t)
        if not np.isfinite(t):
            raise NonFinite("t must be finite")
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "t", t)

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    def exact(self) -> np.ndarray:
        return expm(self.h0 + self.v, self.t)


@dataclass(frozen=True)
class TruncationReport:
    """Per-order partial sums of the series with diagnostics.

    ``elements[n]`` holds the cumulative matrix elements ``<Psi_a|U|Phi_b>`` in
    the eigenbasis of ``h0``; ``partial_sums[n]`` the same operator in the
    original basis.
    """

    order: int
    partial_sums: tuple
    term_norms: tuple
    oracle_error: tuple
    elements: tuple
    bound: float
    divergent: bool
    system: BiorthogonalSystem = field(repr=False)


class _ResidueCache:
    def __init__(self, centers: np.ndarray, t: float):
        self.centers = centers
        self.t = t
        self._cache: dict[tuple, complex] = {}

    def __call__(self, counts: tuple) -> complex:
        value = self._cache.get(counts)
        if value is None:
            cfg = PoleConfiguration(
                [(self.centers[k], m) for k, m in enumerate(counts) if m],
                tol_cluster=0.0,
            )
            value = self._cache[counts] = residue_sum(cfg, self.t)
        return value


def _bump(counts: tuple, k: int) -> tuple:
    return counts[:k] + (counts[k] + 1,) + counts[k + 1 :]


def series_terms(system: BiorthogonalSystem, vmat: np.ndarray, t: float, order: int) -> np.ndarray:
    """Per-order terms ``T[n, a, b]`` of ``<Psi_a| U(t) |Phi_b>``.

    ``vmat[i, j] = <Psi_i| V |Phi_j>`` with the normalisation of ``system``.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    d = system.dim
    ids = system.cluster_ids
    n_clusters = len(system.cluster_centers)
    res = _ResidueCache(np.asarray(system.cluster_centers), t)
    zero = (0,) * n_clusters
    overlaps = np.asarray(system.overlaps)
    terms = np.zeros((order + 1, d, d), dtype=complex)
    for a in range(d):
        terms[0, a, a] = overlaps[a] * res(_bump(zero, ids[a]))
    if order == 0:
        return terms

    # states: counts of clusters visited so far (current end excluded) ->
    # matrix M[a, end] of accumulated string coefficients
    states: dict[tuple, np.ndarray] = {}
    for a in range(d):
        key = _bump(zero, ids[a])
        m = states.setdefault(key, np.zeros((d, d), dtype=complex))
        m[a, :] += vmat[a, :]
    by_cluster = [[b for b in range(d) if ids[b] == k] for k in range(n_clusters)]
    for n in range(1, order + 1):
        term = np.zeros((d, d), dtype=complex)
        for counts, m in states.items():
            for k, members in enumerate(by_cluster):
                r = res(_bump(counts, k))
                term[:, members] += m[:, members] * r
        terms[n] = term
        if n == order:
            break
        grown: dict[tuple, np.ndarray] = {}
        for counts, m in states.items():
            for k, members in enumerate(by_cluster):
                key = _bump(counts, k)
                step = (m[:, members] / overlaps[members]) @ vmat[members, :]
                if key in grown:
                    grown[key] += step
                else:
                    grown[key] = step
        states = grown
    return terms


def _prepare(p: PerturbationProblem, tol_cluster: float, contour: Contour | None):
    system = eig_biorthogonal(p.h0, tol_cluster)
    if contour is None:
        contour = Contour.enclosing(system.eigenvalues)
    bound = series_convergence_bound(p.h0, p.v, contour)
    divergent = bound >= 1.0
    if divergent:
        warnings.warn(
            f"series convergence bound {bound:.3g} >= 1; result is not certified",
            DivergentSeriesWarning,
            stacklevel=3,
        )
    return system, system.in_eigenbasis(p.v), bound, divergent


def propagator_element(
    p: PerturbationProblem,
    alpha: int,
    beta: int,
    order: int,
    tol_cluster: float = DEFAULT_CLUSTER_TOL,
    contour: Contour | None = None,
) -> complex:
    """``<Psi_alpha| exp(-i H t) |Phi_beta>`` summed through ``order``.

    Indices refer to the eigenvalues of ``h0`` in sorted order. Emits
    :class:`DivergentSeriesWarning` when the convergence bound on ``contour``
    (default: the auto circle around the spectrum of ``h0``) is not below one.
    """
    if not (0 <= alpha < p.dim and 0 <= beta < p.dim):
        raise IndexOutOfRange(f"indices ({alpha}, {beta}) out of range for dim {p.dim}")
    system, vmat, _, _ = _prepare(p, tol_cluster, contour)
    terms = series_terms(system, vmat, p.t, order)
    return complex(terms[:, alpha, beta].sum())


def propagator_matrix(
    p: PerturbationProblem,
    order: int,
    tol_cluster: float = DEFAULT_CLUSTER_TOL,
    contour: Contour | None = None,
) -> TruncationReport:
    """Assemble ``U(t)`` order by order and compare each partial sum with expm."""
    system, vmat, bound, divergent = _prepare(p, tol_cluster, contour)
    terms = series_terms(system, vmat, p.t, order)
    inv_o = 1.0 / np.asarray(system.overlaps)
    exact = p.exact()
    partial = np.zeros((p.dim, p.dim), dtype=complex)
    cumulative = np.zeros_like(partial)
    sums, norms, errors, elements = [], [], [], []
    for n in range(order + 1):
        term_op = (system.right * inv_o) @ terms[n] @ (inv_o[:, None] * system.left)
        partial = partial + term_op
        cumulative = cumulative + terms[n]
        sums.append(partial.copy())
        elements.append(cumulative.copy())
        norms.append(float(np.linalg.norm(term_op, 2)))
        errors.append(float(np.linalg.norm(partial - exact, 2)))
    return TruncationReport(
        order=order,
        partial_sums=tuple(sums),
        term_norms=tuple(norms),
        oracle_error=tuple(errors),
        elements=tuple(elements),
        bound=bound,
        divergent=divergent,
        system=system,
    )


def kaon_labels(h0) -> tuple[complex, complex, KaonBasis]:
    """``(lambda_S, lambda_L, basis)`` of a 2x2 ``h0``.

    ``lambda_S`` is the minus-branch root of the closed-form eigenvalue formula.
    """
    lam_s, lam_l = eigenvalues_2x2(h0)
    system = eig_biorthogonal(h0)
    s = int(np.argmin(np.abs(system.eigenvalues - lam_s)))
    basis = kaon_reciprocal(system.right[:, s], system.right[:, 1 - s])
    return lam_s, lam_l, basis


def kaon_second_order(p: PerturbationProblem) -> complex:
    """Second-order term of ``U_{S,L} = <K'_S| U(t) |K_L>``.

    Built directly from the reciprocal basis and pole-order-specific residues:
    the intermediate state is either K_S (double pole at lambda_S) or K_L
    (double pole at lambda_L).
    """
    if p.dim != 2:
        raise ValueError("kaon_second_order needs a 2x2 problem")
    lam_s, lam_l, kb = kaon_labels(p.h0)

    def me(bra, ket):
        return complex(np.vdot(bra, p.v @ ket))

    via_s = PoleConfiguration([(lam_s, 2), (lam_l, 1)], tol_cluster=0.0)
    via_l = PoleConfiguration([(lam_s, 1), (lam_l, 2)], tol_cluster=0.0)
    bracket_s = residue_exp_kernel(via_s, 0, p.t) + residue_exp_kernel(via_s, 1, p.t)
    bracket_l = residue_exp_kernel(via_l, 0, p.t) + residue_exp_kernel(via_l, 1, p.t)
    return (
        me(kb.ks_prime, kb.ks) * me(kb.ks_prime, kb.kl) * bracket_s
        + me(kb.ks_prime, kb.kl) * me(kb.kl_prime, kb.kl) * bracket_l
    ) / kb.norm_factor
