"""Execution of scenario kinds and parameter sweeps."""

from __future__ import annotations

import dataclasses
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bch as bchmod
from .errors import ComputeError, DivergentSeriesWarning
from .propagator import (
    PerturbationProblem,
    kaon_labels,
    kaon_second_order,
    propagator_matrix,
)
from .residues import Contour, contour_resolvent
from .linalg import expm
from .scenario import Scenario, UnknownParameter, ValidationError
from .serialization import csv_text, dumps, matrix_literal

KAON_PAIRS = ("SS", "SL", "LS", "LL")
BCH_FIELDS = ("p", "r", "kappa", "q_shift", "lambda_max", "steps")
SWEEPABLE = {
    "propagate": ("t", "order", "epsilon"),
    "converge": ("t", "order", "epsilon"),
    "kaon": ("t", "order", "epsilon"),
    "contour-check": ("t", "epsilon"),
    "bch": BCH_FIELDS,
}


@dataclass
class RunReport:
    scenario: dict
    header: list
    rows: list
    convergence: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return dumps(
            {
                "scenario": self.scenario,
                "columns": self.header,
                "rows": self.rows,
                "convergence": self.convergence,
                "warnings": self.warnings,
                "details": self.details,
            }
        ) + "\n"

    def to_csv(self) -> str:
        return csv_text(self.header, self.rows)


def header_for(s: Scenario) -> list[str]:
    if s.kind == "propagate":
        n = s.h0.shape[0]
        cols = ["t"]
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                cols += [f"U{i}{j}_re", f"U{i}{j}_im", f"U{i}{j}_abs"]
        return cols + ["oracle_error", "bound"]
    if s.kind == "converge":
        return ["order", "term_norm", "oracle_error", "contour_error"]
    if s.kind == "kaon":
        cols = ["t"]
        for ab in KAON_PAIRS:
            cols += [f"U{ab}_re", f"U{ab}_im", f"exact_{ab}_re", f"exact_{ab}_im"]
        return cols + ["U2_SL_re", "U2_SL_im"]
    if s.kind == "bch":
        cols = ["lambda"]
        for ij in ("11", "12", "21", "22"):
            cols += [f"W{ij}_re", f"W{ij}_im"]
        return cols + ["det_re", "det_im", "y_re", "y_im"]
    return ["t", "nodes", "contour_error"]


def _cplx(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _series_report(s: Scenario, t: float):
    p = PerturbationProblem(s.h0, s.v_scaled, t)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DivergentSeriesWarning)
        rep = propagator_matrix(p, s.order, s.tol_cluster, s.contour)
    notes = [
        {"type": "Divergent", "t": t, "bound": rep.bound, "message": str(w.message)}
        for w in caught
        if issubclass(w.category, DivergentSeriesWarning)
    ]
    return p, rep, notes


def _oracle_contour(h, given: Contour | None) -> Contour:
    if given is not None:
        return given
    return Contour.enclosing(np.linalg.eigvals(h), nodes=256)


def _convergence_table(s: Scenario, p: PerturbationProblem, rep) -> list[dict]:
    h = p.h0 + p.v
    reference = contour_resolvent(h, p.t, _oracle_contour(h, s.contour))
    return [
        {
            "order": n,
            "term_norm": rep.term_norms[n],
            "oracle_error": rep.oracle_error[n],
            "contour_error": float(np.linalg.norm(rep.partial_sums[n] - reference, 2)),
        }
        for n in range(rep.order + 1)
    ]


def _run_propagate(s: Scenario) -> RunReport:
    rows, notes = [], []
    for t in s.times:
        p, rep, w = _series_report(s, float(t))
        notes += w
        u = rep.partial_sums[-1]
        row = [float(t)]
        for z in u.reshape(-1):
            row += [z.real, z.imag, abs(z)]
        rows.append(row + [rep.oracle_error[-1], rep.bound])
    return RunReport(s.echo(), header_for(s), rows, _convergence_table(s, p, rep), notes)


def _run_converge(s: Scenario) -> RunReport:
    p, rep, notes = _series_report(s, float(s.times[0]))
    table = _convergence_table(s, p, rep)
    rows = [[e["order"], e["term_norm"], e["oracle_error"], e["contour_error"]] for e in table]
    return RunReport(s.echo(), header_for(s), rows, table, notes, {"bound": rep.bound})


def _run_kaon(s: Scenario) -> RunReport:
    lam_s, lam_l, kb = kaon_labels(s.h0)
    rows, notes = [], []
    for t in s.times:
        p, rep, w = _series_report(s, float(t))
        notes += w
        system = rep.system
        idx = {"S": int(np.argmin(np.abs(system.eigenvalues - lam_s)))}
        idx["L"] = 1 - idx["S"]
        exact = p.exact()
        kets = {"S": kb.ks, "L": kb.kl}
        bras = {"S": kb.ks_prime, "L": kb.kl_prime}
        row = [float(t)]
        for a, b in KAON_PAIRS:
            row += _cplx(rep.elements[-1][idx[a], idx[b]])
            row += _cplx(np.vdot(bras[a], exact @ kets[b]))
        rows.append(row + _cplx(kaon_second_order(p)))
    details = {
        "lambda_S": lam_s,
        "lambda_L": lam_l,
        "chi": kb.chi,
        "norm_factor": kb.norm_factor,
    }
    return RunReport(s.echo(), header_for(s), rows, _convergence_table(s, p, rep), notes, details)


def _run_bch(s: Scenario) -> RunReport:
    b = s.bch
    params = bchmod.BchParams(b.p, b.r, b.kappa, b.q_shift)
    path = bchmod.integrate_w_truncated(params, b.lambda_max, b.steps)
    has_y = params.kappa != 0
    dets = np.linalg.det(path.w_values)
    rows = []
    for lam, w, det in zip(path.lambdas, path.w_values, dets):
        row = [float(lam)]
        for z in w.reshape(-1):
            row += [z.real, z.imag]
        row += _cplx(det)
        row += _cplx(bchmod.parabolic_coords(params, lam)[1]) if has_y else ["", ""]
        rows.append(row)
    details = {
        "w_final": matrix_literal(path.final),
        "det_defect": bchmod.determinant_defect(path),
        "residual": (
            bchmod.second_order_residual(path, params)
            if len(path.lambdas) >= bchmod.MIN_RESIDUAL_POINTS
            else None
        ),
        "theta": bchmod.parabolic_coords(params, 0.0)[0] if has_y else None,
        "initial_slopes_predicted": list(bchmod.predicted_initial_slopes(params)) if has_y else None,
        "initial_slopes_path": list(bchmod.path_initial_slopes(path, params)) if has_y else None,
        "u_assembled": (
            matrix_literal(
                bchmod.assemble_full_u(params.a_matrix(), path, bchmod.TransformPair.identity(2))
            )
            if abs(b.lambda_max - 1.0) <= 1e-12
            else None
        ),
    }
    return RunReport(s.echo(), header_for(s), rows, [], [], details)


def _run_contour_check(s: Scenario) -> RunReport:
    h = s.h0 + s.v_scaled
    contour = _oracle_contour(h, s.contour)
    rows = []
    for t in s.times:
        err = np.linalg.norm(contour_resolvent(h, float(t), contour) - expm(h, float(t)), 2)
        rows.append([float(t), contour.nodes, float(err)])
    details = {"center": contour.center, "radius": contour.radius}
    return RunReport(s.echo(), header_for(s), rows, [], [], details)


_RUNNERS = {
    "propagate": _run_propagate,
    "converge": _run_converge,
    "kaon": _run_kaon,
    "bch": _run_bch,
    "contour-check": _run_contour_check,
}


def run(s: Scenario) -> RunReport:
    return _RUNNERS[s.kind](s)


def output_paths(prefix: str) -> tuple[str, str]:
    return prefix + ".csv", prefix + ".report.json"


def apply_parameter(s: Scenario, name: str, value: float) -> Scenario:
    """Copy of ``s`` with one scalar field changed."""
    if name not in SWEEPABLE[s.kind]:
        raise UnknownParameter(
            f"{name!r} is not a sweepable parameter of kind {s.kind!r}; "
            f"choose from {', '.join(SWEEPABLE[s.kind])}",
            {"parameter": name},
        )
    if name == "t":
        return dataclasses.replace(s, t_grid=(value, value, 1))
    if name == "order":
        if value != int(value) or value < 0:
            raise ValidationError(f"order must be a non-negative integer, got {value}", {"parameter": name})
        return dataclasses.replace(s, order=int(value))
    if name == "epsilon":
        return dataclasses.replace(s, v_scale=value)
    if name == "steps" and (value != int(value) or value < 16):
        raise ValidationError(f"steps must be an integer >= 16, got {value}", {"parameter": name})
    if name == "lambda_max" and value <= 0:
        raise ValidationError("lambda_max must be positive", {"parameter": name})
    cast = int(value) if name == "steps" else complex(value) if name in ("p", "r", "kappa", "q_shift") else value
    return dataclasses.replace(s, bch=dataclasses.replace(s.bch, **{name: cast}))


def sweep_threads() -> int:
    raw = os.environ.get("SPECTRAL_DECAY_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_sweep(s: Scenario, name: str, values: list[float], threads: int | None = None):
    """Run ``s`` once per value. Returns ``(header, rows)`` ordered like ``values``.

    Compute failures are kept as rows tagged in the ``error`` column.
    """
    if not values:
        raise ValidationError("sweep needs at least one value", {"parameter": name})
    points = [apply_parameter(s, name, v) for v in values]
    header = ["sweep_value"] + header_for(s) + ["error"]
    width = len(header) - 2

    def one(point):
        try:
            return run(point).rows, ""
        except ComputeError as exc:
            return [[""] * width], f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=threads or sweep_threads()) as pool:
        results = list(pool.map(one, points))
    rows = []
    for v, (point_rows, err) in zip(values, results):
        for r in point_rows:
            rows.append([float(v)] + list(r) + [err])
    return header, rows
