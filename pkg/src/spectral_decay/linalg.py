"""Dense complex linear algebra for non-Hermitian matrices.

Matrices are plain ``numpy`` complex arrays of shape ``(n, n)``. Covectors
(bras) are stored as row vectors that act on kets by ordinary matrix
multiplication, so ``left[i] @ right[:, j]`` is the pairing of the i-th left
eigenvector with the j-th right eigenvector. No complex conjugation is applied
implicitly anywhere except where a ket is turned into its bra (``vdot``).

Conventions
-----------
- Right eigenvectors have unit Euclidean norm.
- Left covectors also have unit norm and are phased so that the overlap
  with their own right eigenvector is real and positive. For a 2x2 matrix this
  reproduces the reciprocal-basis normalisation ``<K'_S|K_S> = sqrt(1-|chi|^2)``.
- Eigenvalues are sorted lexicographically on ``(re, im)``.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateSpectrum,
    Defective,
    NonFinite,
    NotNormalized,
    ParallelStates,
)

DEFAULT_CLUSTER_TOL = 1e-9
DEFECTIVE_OVERLAP = 1e-10


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite complex square array (copied, read-only)."""
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{name} contains NaN or Inf")
    a.setflags(write=False)
    return a


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def cluster_eigenvalues(values, tol: float = DEFAULT_CLUSTER_TOL):
    """Group eigenvalues closer than ``tol * max(1, max|lambda|)``.

    Grouping is transitive (single linkage). Returns ``(ids, centers)`` where
    ``ids[i]`` is the cluster index of ``values[i]`` and ``centers[k]`` is the
    mean of cluster ``k``. Clusters are numbered in order of first appearance.
    """
    values = np.asarray(values, dtype=complex)
    n = len(values)
    scale = max(1.0, float(np.max(np.abs(values)))) if n else 1.0
    threshold = tol * scale
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    roots: dict[int, int] = {}
    ids = []
    for i in range(n):
        ids.append(roots.setdefault(find(i), len(roots)))
    centers = np.array(
        [values[[i for i in range(n) if ids[i] == k]].mean() for k in range(len(roots))],
        dtype=complex,
    )
    return tuple(ids), centers


@dataclass(frozen=True)
class BiorthogonalSystem:
    """Eigenvalues with paired right eigenvectors and left covectors.

    ``right[:, i]`` is the ket of eigenvalue ``i``, ``left[i]`` its covector and
    ``overlaps[i] = left[i] @ right[:, i]``. ``cluster_ids`` maps each eigenvalue
    to a pole of possibly higher multiplicity located at
    ``cluster_centers[cluster_ids[i]]``.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    overlaps: np.ndarray
    cluster_ids: tuple = field(default=())
    cluster_centers: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def projector(self, i: int) -> np.ndarray:
        """Spectral projector ``|Phi_i><Psi_i| / <Psi_i|Phi_i>``."""
        return np.outer(self.right[:, i], self.left[i]) / self.overlaps[i]

    def apply(self, f: Callable[[complex], complex]) -> np.ndarray:
        """Evaluate ``f`` on the matrix through its spectral decomposition."""
        weights = np.array([f(lam) for lam in self.eigenvalues], dtype=complex)
        return (self.right * (weights / self.overlaps)) @ self.left

    def unity(self) -> np.ndarray:
        return self.apply(lambda _: 1.0)

    def reconstruct(self) -> np.ndarray:
        return self.apply(lambda lam: lam)

    def in_eigenbasis(self, m) -> np.ndarray:
        """Matrix elements ``<Psi_i| m |Phi_j>``."""
        return self.left @ np.asarray(m, dtype=complex) @ self.right


def eig_biorthogonal(a, tol_cluster: float = DEFAULT_CLUSTER_TOL) -> BiorthogonalSystem:
    """Biorthogonal eigendecomposition of a diagonalizable matrix.

    Left covectors are the rows of the inverse of the right-eigenvector matrix,
    which makes them dual to the right vectors up to solve error. Both sets are
    then scaled to unit norm.

    Raises
    ------
    NonFinite
        If ``a`` contains NaN or Inf.
    Defective
        If some normalised overlap ``|<Psi_i|Phi_i>|`` falls below 1e-10.
    """
    a = as_matrix(a, "a")
    if tol_cluster < 0:
        raise ValueError("tol_cluster must be non-negative")
    w, vr = np.linalg.eig(a)
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    vr = vr[:, order]
    vr = vr / np.linalg.norm(vr, axis=0)
    try:
        vl = np.linalg.inv(vr)
    except np.linalg.LinAlgError as exc:
        raise Defective("right eigenvectors are linearly dependent") from exc
    if not np.all(np.isfinite(vl)):
        raise Defective("right eigenvectors are linearly dependent")
    # rows of inv(vr) pair to exactly 1 with their ket; the unit-norm row then
    # pairs to 1/|row|, which is real and positive
    row_norms = np.linalg.norm(vl, axis=1)
    vl = vl / row_norms[:, None]
    overlaps = np.einsum("ij,ji->i", vl, vr)
    if np.min(np.abs(overlaps)) < DEFECTIVE_OVERLAP:
        raise Defective(
            f"overlap {np.min(np.abs(overlaps)):.3e} below {DEFECTIVE_OVERLAP:g}; "
            "matrix is not diagonalizable within tolerance"
        )
    ids, centers = cluster_eigenvalues(w, tol_cluster)
    return BiorthogonalSystem(
        eigenvalues=_frozen(w),
        right=_frozen(vr),
        left=_frozen(vl),
        overlaps=_frozen(overlaps),
        cluster_ids=ids,
        cluster_centers=_frozen(centers),
    )


@dataclass(frozen=True)
class KaonBasis:
    """Unit eigenkets of a two-level system with their reciprocal set."""

    ks: np.ndarray
    kl: np.ndarray
    chi: complex
    ks_prime: np.ndarray
    kl_prime: np.ndarray

    @property
    def norm_factor(self) -> float:
        """``sqrt(1 - |chi|^2)``, the overlap ``<K'_S|K_S>``."""
        return float(np.sqrt(1.0 - abs(self.chi) ** 2))

    def unity_forms(self) -> list[np.ndarray]:
        """The four equivalent resolutions of the identity on the pair."""
        s = self.norm_factor
        ket = lambda v: v[:, None]  # noqa: E731
        bra = lambda v: v.conj()[None, :]  # noqa: E731
        return [
            ket(self.ks) @ bra(self.ks) + ket(self.kl_prime) @ bra(self.kl_prime),
            ket(self.kl) @ bra(self.kl) + ket(self.ks_prime) @ bra(self.ks_prime),
            (ket(self.ks) @ bra(self.ks_prime) + ket(self.kl) @ bra(self.kl_prime)) / s,
            (ket(self.ks_prime) @ bra(self.ks) + ket(self.kl_prime) @ bra(self.kl)) / s,
        ]


def _unit_2vector(v, name):
    v = np.array(v, dtype=complex).reshape(-1)
    if v.shape != (2,):
        raise ValueError(f"{name} must be a 2-vector")
    if not np.all(np.isfinite(v)):
        raise NonFinite(f"{name} contains NaN or Inf")
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise NotNormalized(f"{name} has norm {np.linalg.norm(v):.12g}, expected 1")
    return v


def kaon_reciprocal(ks, kl) -> KaonBasis:
    """Build the reciprocal basis ``K'_S, K'_L`` of two unit eigenkets."""
    ks = _unit_2vector(ks, "ks")
    kl = _unit_2vector(kl, "kl")
    chi = complex(np.vdot(kl, ks))
    if abs(chi) >= 1.0 - 1e-12:
        raise ParallelStates(f"|<kl|ks>| = {abs(chi):.15f}; reciprocal basis is singular")
    s = np.sqrt(1.0 - abs(chi) ** 2)
    return KaonBasis(
        ks=_frozen(ks),
        kl=_frozen(kl),
        chi=chi,
        ks_prime=_frozen((ks - chi * kl) / s),
        kl_prime=_frozen((kl - chi.conjugate() * ks) / s),
    )


def eigenvalues_2x2(h0) -> tuple[complex, complex]:
    """Closed-form eigenvalues ``(lambda_S, lambda_L)`` of a 2x2 matrix.

    ``lambda_S`` takes the minus sign in front of the principal square root of
    the discriminant. Which state is physically short-lived is left to the
    caller. The root of larger modulus is evaluated directly and the other one
    through ``det / root`` to avoid cancellation.
    """
    h0 = as_matrix(h0, "h0")
    if h0.shape != (2, 2):
        raise ValueError("eigenvalues_2x2 needs a 2x2 matrix")
    tr = complex(h0[0, 0] + h0[1, 1])
    det = complex(h0[0, 0] * h0[1, 1] - h0[0, 1] * h0[1, 0])
    root = cmath.sqrt(tr * tr - 4.0 * det)
    minus, plus = (tr - root) / 2.0, (tr + root) / 2.0
    if abs(plus) >= abs(minus) and plus != 0:
        minus = det / plus
    elif minus != 0:
        plus = det / minus
    if abs(minus - plus) < 1e-12 * max(1.0, abs(minus)):
        raise DegenerateSpectrum(f"eigenvalues coincide at {minus}")
    return minus, plus


def exp_matrix(x) -> np.ndarray:
    """Plain matrix exponential ``exp(x)``; accepts a stack ``(..., n, n)``."""
    x = np.asarray(x, dtype=complex)
    if not np.all(np.isfinite(x)):
        raise NonFinite("exponent contains NaN or Inf")
    return scipy.linalg.expm(x)


def expm(m, t: float) -> np.ndarray:
    """Evolution operator ``exp(-i t m)``."""
    m = as_matrix(m, "m")
    if not np.isfinite(t):
        raise NonFinite("t must be finite")
    return exp_matrix(-1j * t * m)
