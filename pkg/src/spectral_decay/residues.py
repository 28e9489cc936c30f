"""Residues of the evolution kernel and circular contour quadrature.

The kernel is ``F(z) = exp(-i z t) / prod_k (z - lambda_k)**m_k``. Residues at
poles of any order are read off a truncated Taylor jet, so no numerical
differentiation is involved. Trapezoidal quadrature on a circle serves as the
independent oracle, both for the scalar kernel and for the full matrix
resolvent integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    IndexOutOfRange,
    NonFinite,
    PoleOnContour,
    PoleOutsideContour,
    PolesTooClose,
    SingularSolve,
)
from .jet import Jet
from .linalg import DEFAULT_CLUSTER_TOL, as_matrix

CONTOUR_EXCLUSION = 1e-6


@dataclass(frozen=True)
class PoleConfiguration:
    """Distinct pole locations with their multiplicities."""

    poles: tuple
    tol_cluster: float = DEFAULT_CLUSTER_TOL

    def __init__(self, poles: Sequence, tol_cluster: float = DEFAULT_CLUSTER_TOL):
        cleaned = []
        for loc, mult in poles:
            loc = complex(loc)
            if int(mult) != mult or mult < 1:
                raise ValueError(f"multiplicity must be a positive integer, got {mult!r}")
            if not (math.isfinite(loc.real) and math.isfinite(loc.imag)):
                raise NonFinite("pole location is not finite")
            cleaned.append((loc, int(mult)))
        if not cleaned:
            raise ValueError("a pole configuration needs at least one pole")
        scale = max(1.0, max(abs(loc) for loc, _ in cleaned))
        for i in range(len(cleaned)):
            for j in range(i + 1, len(cleaned)):
                if abs(cleaned[i][0] - cleaned[j][0]) <= tol_cluster * scale:
                    raise PolesTooClose(
                        f"poles {cleaned[i][0]} and {cleaned[j][0]} must be merged first"
                    )
        object.__setattr__(self, "poles", tuple(cleaned))
        object.__setattr__(self, "tol_cluster", tol_cluster)

    @property
    def locations(self) -> np.ndarray:
        return np.array([loc for loc, _ in self.poles], dtype=complex)

    @property
    def multiplicities(self) -> tuple:
        return tuple(m for _, m in self.poles)

    @property
    def total_order(self) -> int:
        return sum(self.multiplicities)

    def kernel(self, z, t: float):
        """``F(z)`` evaluated pointwise (``z`` may be an array)."""
        z = np.asarray(z, dtype=complex)
        out = np.exp(-1j * z * t)
        for loc, m in self.poles:
            out = out / (z - loc) ** m
        return out


def residue_exp_kernel(cfg: PoleConfiguration, j: int, t: float) -> complex:
    """Residue of the evolution kernel at pole ``j`` of ``cfg``.

    For a pole of order ``m`` this is the coefficient of ``h**(m-1)`` in the
    expansion of ``exp(-i z t) * prod_{k != j} (z - lambda_k)**(-m_k)`` around
    ``z = lambda_j``.
    """
    if not 0 <= j < len(cfg.poles):
        raise IndexOutOfRange(f"pole index {j} out of range for {len(cfg.poles)} poles")
    if not math.isfinite(t):
        raise NonFinite("t must be finite")
    at, m = cfg.poles[j]
    z = Jet.variable(at, m)
    f = (z * (-1j * t)).exp()
    for k, (loc, mk) in enumerate(cfg.poles):
        if k != j:
            f = f * (z - loc) ** (-mk)
    return complex(f.coeffs[m - 1])


def residue_sum(cfg: PoleConfiguration, t: float) -> complex:
    """Sum of the kernel residues over every pole, in pole order."""
    return sum((residue_exp_kernel(cfg, j, t) for j in range(len(cfg.poles))), 0j)


@dataclass(frozen=True)
class Contour:
    """Circle ``|z - center| = radius`` sampled at ``nodes`` equispaced points."""

    center: complex
    radius: float
    nodes: int = 128

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise ValueError("contour radius must be positive and finite")
        if int(self.nodes) != self.nodes or self.nodes < 8:
            raise ValueError("contour needs at least 8 nodes")
        object.__setattr__(self, "nodes", int(self.nodes))

    @classmethod
    def enclosing(
        cls, points, nodes: int = 128, scale: float = 1.5, margin: float = 0.5
    ) -> "Contour":
        """Circle centred on the mean of ``points`` with radius
        ``scale * spread + margin``, where ``spread`` is the largest distance
        from the mean."""
        points = np.asarray(points, dtype=complex)
        center = complex(points.mean())
        spread = float(np.max(np.abs(points - center)))
        return cls(center, scale * spread + margin, nodes)

    def points_and_weights(self):
        """Nodes ``z_k`` and weights ``w_k`` with ``sum w_k g(z_k)`` approximating
        ``(1/2 pi i) * contour integral of g``."""
        e = np.exp(2j * np.pi * np.arange(self.nodes) / self.nodes)
        return self.center + self.radius * e, self.radius * e / self.nodes

    def check_encloses(self, points) -> None:
        band = CONTOUR_EXCLUSION * self.radius
        for p in np.atleast_1d(np.asarray(points, dtype=complex)):
            d = abs(p - self.center)
            if abs(d - self.radius) <= band:
                raise PoleOnContour(f"{p} lies within {band:.3g} of the contour")
            if d > self.radius:
                raise PoleOutsideContour(f"{p} lies outside the contour")


def contour_quadrature(g: Callable, contour: Contour):
    """Trapezoidal rule for ``(1/2 pi i) * contour integral of g(z) dz``.

    ``g`` is called once with the full node array and must return values with
    the node axis first. Terms are summed in ascending node order.
    """
    z, w = contour.points_and_weights()
    values = np.asarray(g(z))
    total = np.zeros(values.shape[1:], dtype=complex)
    for k in range(contour.nodes):
        total = total + w[k] * values[k]
    return total


def kernel_quadrature(cfg: PoleConfiguration, t: float, contour: Contour | None = None) -> complex:
    """Quadrature counterpart of :func:`residue_sum`."""
    if contour is None:
        contour = Contour.enclosing(cfg.locations, nodes=512)
    contour.check_encloses(cfg.locations)
    return complex(contour_quadrature(lambda z: cfg.kernel(z, t), contour))


def _resolvents(h: np.ndarray, z: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    eye = np.eye(n, dtype=complex)
    shifted = z[:, None, None] * eye - h
    try:
        g = np.linalg.solve(shifted, np.broadcast_to(eye, shifted.shape))
    except np.linalg.LinAlgError as exc:
        raise SingularSolve("resolvent solve failed at a contour node") from exc
    if not np.all(np.isfinite(g)):
        raise SingularSolve("resolvent is not finite at a contour node")
    return g


def contour_resolvent(h, t: float, contour: Contour) -> np.ndarray:
    """``exp(-i t h)`` from the Cauchy integral of the resolvent ``(zI - h)^-1``."""
    h = as_matrix(h, "h")
    contour.check_encloses(np.linalg.eigvals(h))
    z, _ = contour.points_and_weights()
    g = _resolvents(h, z)
    return contour_quadrature(lambda zz: np.exp(-1j * zz * t)[:, None, None] * g, contour)


def series_convergence_bound(h0, v, contour: Contour) -> float:
    """Largest spectral norm of ``V (zI - h0)^-1`` over the contour nodes.

    A value below one certifies that the geometric expansion of the full
    resolvent in powers of ``V`` converges at every node.
    """
    h0 = as_matrix(h0, "h0")
    v = as_matrix(v, "v")
    if v.shape != h0.shape:
        raise ValueError("h0 and v must have the same shape")
    contour.check_encloses(np.linalg.eigvals(h0))
    z, _ = contour.points_and_weights()
    g0 = _resolvents(h0, z)
    return float(np.max(np.linalg.norm(v @ g0, ord=2, axis=(1, 2))))
