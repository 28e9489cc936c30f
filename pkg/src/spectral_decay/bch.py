"""Factorization ``exp(lambda (A + B)) = exp(lambda A) W(lambda)``.

``W`` obeys the interaction-picture equation
``dW/dlambda = exp(-lambda A) B exp(lambda A) W`` with ``W(0) = I``. Two
integrators are provided: the exact one conjugates ``B`` with true matrix
exponentials; the truncated one keeps ``B - lambda [A, B]`` for a two-level
``B = p sigma_3 + r sigma_1`` whose commutator with ``A`` is the c-number
``kappa`` (acting through the ``sigma_3`` channel). Both use classical fixed-step
RK4.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import (
    GridTooCoarse,
    NonFinite,
    SingularTransform,
    StepCountTooSmall,
    WrongPathMethod,
    ZeroCommutator,
)
from .linalg import as_matrix, exp_matrix, expm

MIN_STEPS = 16
MIN_RESIDUAL_POINTS = 256

SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)


def _finite_complex(x, name):
    x = complex(x)
    if not (np.isfinite(x.real) and np.isfinite(x.imag)):
        raise NonFinite(f"{name} is not finite")
    return x


@dataclass(frozen=True)
class BchParams:
    """Coefficients of ``A = q_shift * 1`` and ``B = p sigma_3 + r sigma_1``.

    ``kappa`` is the c-number commutator that survives the truncation.
    """

    p: complex
    r: complex
    kappa: complex
    q_shift: complex = 0j

    def __post_init__(self):
        for name in ("p", "r", "kappa", "q_shift"):
            object.__setattr__(self, name, _finite_complex(getattr(self, name), name))

    def a_matrix(self) -> np.ndarray:
        return self.q_shift * np.eye(2, dtype=complex)

    def b_matrix(self) -> np.ndarray:
        return self.p * SIGMA_3 + self.r * SIGMA_1

    def generator(self, lam) -> np.ndarray:
        """Right-hand-side matrix ``[[u, r], [r, -u]]`` with ``u = p - lam kappa``.

        ``lam`` may be an array, giving a stack of matrices.
        """
        lam = np.asarray(lam, dtype=float)
        u = self.p - lam * self.kappa
        out = np.empty(lam.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = u
        out[..., 0, 1] = self.r
        out[..., 1, 0] = self.r
        out[..., 1, 1] = -u
        return out


@dataclass(frozen=True)
class WPath:
    lambdas: np.ndarray
    w_values: np.ndarray
    method: str

    @property
    def final(self) -> np.ndarray:
        return self.w_values[-1]


@dataclass(frozen=True)
class TransformPair:
    """Decoupling transformation at the initial and final time."""

    o_initial: np.ndarray
    o_final: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "o_initial", as_matrix(self.o_initial, "o_initial"))
        object.__setattr__(self, "o_final", as_matrix(self.o_final, "o_final"))

    @classmethod
    def identity(cls, dim: int) -> "TransformPair":
        return cls(np.eye(dim), np.eye(dim))


def _grid(lambda_max, steps):
    if int(steps) != steps or steps < MIN_STEPS:
        raise StepCountTooSmall(f"need at least {MIN_STEPS} steps, got {steps}")
    if not np.isfinite(lambda_max) or lambda_max <= 0:
        raise ValueError("lambda_max must be positive and finite")
    return np.linspace(0.0, float(lambda_max), int(steps) + 1)


def _rk4(m0, mh, m1, h):
    """Integrate ``W' = M(lambda) W`` from the identity.

    ``m0``, ``mh``, ``m1`` stack ``M`` at the start, midpoint and end of each
    step. For a linear system one RK4 step is ``W -> P_k W`` with ``P_k`` a
    fixed polynomial in the stage matrices, so all ``P_k`` are formed in one
    batch and then chained.
    """
    dim = m0.shape[-1]
    eye = np.eye(dim, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = m0
        k2 = mh @ (eye + 0.5 * h * k1)
        k3 = mh @ (eye + 0.5 * h * k2)
        k4 = m1 @ (eye + h * k3)
        steps = eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out = np.empty((len(steps) + 1, dim, dim), dtype=complex)
        out[0] = eye
        w = eye
        for k, pk in enumerate(steps):
            w = pk @ w
            out[k + 1] = w
    if not np.all(np.isfinite(out)):
        raise NonFinite("path integration overflowed")
    out.setflags(write=False)
    return out


def _stage_points(lambdas):
    return lambdas[:-1], 0.5 * (lambdas[:-1] + lambdas[1:]), lambdas[1:]


def _uniform_exponentials(a, delta, count, block=64):
    """``exp(k delta a)`` for ``k < count`` as coarse-times-fine products."""
    fine = exp_matrix(np.arange(block)[:, None, None] * delta * a)
    coarse = exp_matrix(np.arange(0, count, block)[:, None, None] * delta * a)
    return (coarse[:, None] @ fine[None, :]).reshape(-1, *a.shape)[:count]


def integrate_w_exact(a, b, lambda_max: float, steps: int) -> WPath:
    """Interaction-picture path with ``exp(-lambda A) B exp(lambda A)`` evaluated
    by matrix exponentials at every RK4 stage."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise ValueError("a and b must have the same shape")
    lambdas = _grid(lambda_max, steps)
    # stage abscissae: every grid point and every midpoint
    n_stage = 2 * (len(lambdas) - 1) + 1
    delta = lambdas[-1] / (n_stage - 1)
    fwd = _uniform_exponentials(a, delta, n_stage)
    bwd = _uniform_exponentials(-a, delta, n_stage)
    rhs = bwd @ b @ fwd
    h = lambdas[1] - lambdas[0]
    lambdas.setflags(write=False)
    return WPath(lambdas, _rk4(rhs[0:-1:2], rhs[1::2], rhs[2::2], h), "exact")


def integrate_w_series(a, b, lambda_max: float, steps: int, depth: int = 1) -> WPath:
    """Path with the conjugated generator replaced by its nested-commutator
    series ``sum_{n <= depth} lambda^n / n! K_n``, ``K_0 = B``, ``K_{n+1} = [K_n, A]``.

    ``depth = 1`` keeps ``B - lambda [A, B]``, which is exact whenever ``[A, B]``
    commutes with ``A``.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise ValueError("a and b must have the same shape")
    lambdas = _grid(lambda_max, steps)
    ks = [b]
    for _ in range(depth):
        ks.append(ks[-1] @ a - a @ ks[-1])

    def generator(lam):
        out = np.zeros((len(lam),) + b.shape, dtype=complex)
        coeff = np.ones(len(lam))
        for n, kn in enumerate(ks):
            if n:
                coeff = coeff * lam / n
            out += coeff[:, None, None] * kn
        return out

    h = lambdas[1] - lambdas[0]
    stages = [generator(x) for x in _stage_points(lambdas)]
    lambdas.setflags(write=False)
    return WPath(lambdas, _rk4(*stages, h), "series")


def integrate_w_truncated(params: BchParams, lambda_max: float, steps: int) -> WPath:
    """Two-level path of ``dW/dlambda = [[u, r], [r, -u]] W``, ``u = p - lambda kappa``."""
    lambdas = _grid(lambda_max, steps)
    h = lambdas[1] - lambdas[0]
    stages = [params.generator(x) for x in _stage_points(lambdas)]
    lambdas.setflags(write=False)
    return WPath(lambdas, _rk4(*stages, h), "truncated")


def _require_truncated(path: WPath, min_points: int = MIN_RESIDUAL_POINTS):
    if path.method != "truncated":
        raise WrongPathMethod(f"expected a truncated path, got method {path.method!r}")
    if len(path.lambdas) < min_points:
        raise GridTooCoarse(f"need at least {min_points} grid points, got {len(path.lambdas)}")
    steps = np.diff(path.lambdas)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise GridTooCoarse("grid must be uniform")
    return float(steps[0])


def second_order_residual(path: WPath, params: BchParams) -> float:
    """Defect of the decoupled second-order equations along a truncated path.

    Checks ``W11'' = (r^2 - kappa + (lambda kappa - p)^2) W11`` and the ``W22``
    twin with ``+kappa`` by central second differences at interior points;
    returns the larger maximum defect divided by ``max |W|``.
    """
    h = _require_truncated(path)
    lam = path.lambdas[1:-1]
    shift = (lam * params.kappa - params.p) ** 2 + params.r**2
    worst = 0.0
    for (i, sign) in ((0, -1.0), (1, 1.0)):
        w = path.w_values[:, i, i]
        d2 = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / h**2
        worst = max(worst, float(np.max(np.abs(d2 - (shift + sign * params.kappa) * w[1:-1]))))
    return worst / float(np.max(np.abs(path.w_values)))


def parabolic_coords(params: BchParams, lam: float) -> tuple[complex, complex]:
    """``theta = r^2 / (2 kappa)`` and ``y = (lam kappa - p) sqrt(2 / kappa)``.

    With ``dy/dlam = kappa sqrt(2/kappa)`` the decoupled equations take the
    parabolic cylinder form ``W'' = (y^2/4 + theta -/+ 1/2) W`` in ``y``.
    """
    if params.kappa == 0:
        raise ZeroCommutator("kappa = 0: the parabolic change of variables is undefined")
    root = cmath.sqrt(2.0 / params.kappa)
    return params.r**2 / (2.0 * params.kappa), (lam * params.kappa - params.p) * root


def dy_dlambda(params: BchParams) -> complex:
    if params.kappa == 0:
        raise ZeroCommutator("kappa = 0: the parabolic change of variables is undefined")
    return params.kappa * cmath.sqrt(2.0 / params.kappa)


def predicted_initial_slopes(params: BchParams) -> tuple[complex, complex]:
    """``(dW11/dy, dW22/dy)`` at ``lambda = 0`` implied by ``W(0) = I``."""
    if params.kappa == 0:
        raise ZeroCommutator("kappa = 0: the parabolic change of variables is undefined")
    s = 0.5 * params.p * cmath.sqrt(2.0 / params.kappa)
    return s, -s


def path_initial_slopes(path: WPath, params: BchParams) -> tuple[complex, complex]:
    """Initial ``y``-slopes of ``W11`` and ``W22`` measured on the path by a
    fifth-order one-sided difference."""
    h = _require_truncated(path, min_points=5)
    c = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    scale = dy_dlambda(params)
    return (
        complex(c @ path.w_values[:5, 0, 0]) / scale,
        complex(c @ path.w_values[:5, 1, 1]) / scale,
    )


def determinant_defect(path: WPath) -> float:
    """``max |det W(lambda) - 1|`` along the path."""
    return float(np.max(np.abs(np.linalg.det(path.w_values) - 1.0)))


def assemble_full_u(a, path: WPath, transforms: TransformPair) -> np.ndarray:
    """``O(t)^-1 exp(A) W(1) O(0)``."""
    a = as_matrix(a, "a")
    if abs(path.lambdas[-1] - 1.0) > 1e-12:
        raise ValueError(f"path must end at lambda = 1, ends at {path.lambdas[-1]}")
    if path.final.shape != a.shape:
        raise ValueError("path and a differ in dimension")
    for name, o in (("O(0)", transforms.o_initial), ("O(t)", transforms.o_final)):
        if o.shape != a.shape:
            raise ValueError(f"{name} has the wrong shape")
        if np.linalg.cond(o) > 1e12:
            raise SingularTransform(f"{name} is numerically singular")
    inner = exp_matrix(a) @ path.final @ transforms.o_initial
    o_t = transforms.o_final
    try:
        out = np.linalg.solve(o_t, inner)
    except np.linalg.LinAlgError as exc:
        raise SingularTransform("O(t) is singular") from exc
    return out


def theta_zero_u(h_cm, v, t: float) -> np.ndarray:
    """Decoupled evolution ``exp(-i t H_cm) exp(-i t V)``."""
    h_cm = as_matrix(h_cm, "h_cm")
    v = as_matrix(v, "v")
    if h_cm.shape != v.shape:
        raise ValueError("h_cm and v must have the same shape")
    return expm(h_cm, t) @ expm(v, t)
