"""Scenario files: JSON problem definitions consumed by the CLI."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import SpectralDecayError
from .residues import Contour
from .serialization import (
    LiteralError,
    complex_literal,
    matrix_literal,
    parse_complex,
    parse_matrix,
)

KINDS = ("propagate", "converge", "kaon", "bch", "contour-check")
MATRIX_KINDS = ("propagate", "converge", "kaon", "contour-check")


class ParseError(SpectralDecayError):
    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context or {}


class ValidationError(SpectralDecayError):
    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context or {}


class UnknownParameter(ValidationError):
    pass


@dataclass(frozen=True)
class BchBlock:
    p: complex
    r: complex
    kappa: complex
    q_shift: complex = 0j
    lambda_max: float = 1.0
    steps: int = 4096


@dataclass(frozen=True)
class Scenario:
    kind: str
    output: str
    h0: np.ndarray | None = None
    v: np.ndarray | None = None
    v_scale: float = 1.0
    bch: BchBlock | None = None
    t_grid: tuple = (0.0, 0.0, 1)
    order: int = 0
    contour: Contour | None = None
    tol_cluster: float = 1e-9
    extra: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        start, stop, count = self.t_grid
        return np.linspace(start, stop, count)

    @property
    def v_scaled(self) -> np.ndarray:
        return self.v_scale * self.v

    def echo(self) -> dict:
        out = {"kind": self.kind, "output": self.output}
        if self.h0 is not None:
            out["h0"] = matrix_literal(self.h0)
            out["v"] = matrix_literal(self.v)
            out["v_scale"] = self.v_scale
            out["order"] = self.order
            out["tol_cluster"] = self.tol_cluster
        if self.bch is not None:
            out["bch"] = {
                "p": complex_literal(self.bch.p),
                "r": complex_literal(self.bch.r),
                "kappa": complex_literal(self.bch.kappa),
                "q_shift": complex_literal(self.bch.q_shift),
                "lambda_max": self.bch.lambda_max,
                "steps": self.bch.steps,
            }
        out["t_grid"] = [float(self.t_grid[0]), float(self.t_grid[1]), int(self.t_grid[2])]
        if self.contour is not None:
            out["contour"] = {
                "center": complex_literal(self.contour.center),
                "radius": self.contour.radius,
                "nodes": self.contour.nodes,
            }
        return out


def _real(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"{where}: expected a real number", {"field": where})
    if not np.isfinite(x):
        raise ValidationError(f"{where}: must be finite", {"field": where})
    return float(x)


def _int(x, where):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError(f"{where}: expected an integer", {"field": where})
    return x


def _scalar(x, where):
    try:
        z = parse_complex(x, where)
    except LiteralError as exc:
        raise ParseError(str(exc), {"field": where}) from exc
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise ValidationError(f"{where}: must be finite", {"field": where})
    return z


def _matrix(x, where):
    try:
        m = parse_matrix(x, where)
    except LiteralError as exc:
        raise ParseError(str(exc), {"field": where}) from exc
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{where}: entries must be finite", {"field": where})
    return m


def from_dict(data: dict, default_output: str = "out") -> Scenario:
    """Build and validate a :class:`Scenario` from decoded JSON."""
    if not isinstance(data, dict):
        raise ParseError("scenario must be a JSON object")
    known = {"kind", "h0", "v", "v_scale", "bch", "t_grid", "order", "contour", "output", "tol_cluster", "seed"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ParseError(f"unknown scenario fields: {', '.join(unknown)}", {"field": unknown[0]})
    kind = data.get("kind")
    if kind not in KINDS:
        raise ValidationError(f"kind must be one of {', '.join(KINDS)}, got {kind!r}", {"field": "kind"})
    kw: dict = {"kind": kind}
    output = data.get("output", default_output)
    if not isinstance(output, str) or not output:
        raise ParseError("output: expected a non-empty path prefix", {"field": "output"})
    kw["output"] = output

    if kind in MATRIX_KINDS:
        for name in ("h0", "v"):
            if name not in data:
                raise ValidationError(f"kind {kind!r} requires field {name!r}", {"field": name})
        h0 = _matrix(data["h0"], "h0")
        v = _matrix(data["v"], "v")
        if h0.shape != v.shape:
            raise ValidationError(f"h0 is {h0.shape[0]}x{h0.shape[0]} but v is {v.shape[0]}x{v.shape[0]}", {"field": "v"})
        if kind == "kaon" and h0.shape != (2, 2):
            raise ValidationError("kind 'kaon' needs 2x2 matrices", {"field": "h0"})
        kw["h0"] = h0
        kw["v"] = v
        kw["v_scale"] = _real(data.get("v_scale", 1.0), "v_scale")
    if kind == "bch":
        block = data.get("bch")
        if not isinstance(block, dict):
            raise ValidationError("kind 'bch' requires a 'bch' object", {"field": "bch"})
        extra = sorted(set(block) - {f.name for f in dataclasses.fields(BchBlock)})
        if extra:
            raise ParseError(f"unknown bch fields: {', '.join(extra)}", {"field": f"bch.{extra[0]}"})
        for name in ("p", "r", "kappa"):
            if name not in block:
                raise ValidationError(f"bch block requires {name!r}", {"field": f"bch.{name}"})
        lambda_max = _real(block.get("lambda_max", 1.0), "bch.lambda_max")
        steps = _int(block.get("steps", 4096), "bch.steps")
        if lambda_max <= 0:
            raise ValidationError("bch.lambda_max must be positive", {"field": "bch.lambda_max"})
        if steps < 16:
            raise ValidationError("bch.steps must be at least 16", {"field": "bch.steps"})
        kw["bch"] = BchBlock(
            p=_scalar(block["p"], "bch.p"),
            r=_scalar(block["r"], "bch.r"),
            kappa=_scalar(block["kappa"], "bch.kappa"),
            q_shift=_scalar(block.get("q_shift", 0.0), "bch.q_shift"),
            lambda_max=lambda_max,
            steps=steps,
        )

    grid = data.get("t_grid", [0.0, 0.0, 1])
    if not isinstance(grid, list) or len(grid) != 3:
        raise ParseError("t_grid: expected [start, stop, count]", {"field": "t_grid"})
    count = _int(grid[2], "t_grid[2]")
    if count < 1:
        raise ValidationError("t_grid count must be at least 1", {"field": "t_grid"})
    kw["t_grid"] = (_real(grid[0], "t_grid[0]"), _real(grid[1], "t_grid[1]"), count)
    if kind == "converge" and count != 1:
        raise ValidationError("kind 'converge' evaluates a single time; t_grid count must be 1", {"field": "t_grid"})

    order = _int(data.get("order", 0), "order")
    if order < 0:
        raise ValidationError("order must be non-negative", {"field": "order"})
    kw["order"] = order
    tol = _real(data.get("tol_cluster", 1e-9), "tol_cluster")
    if tol < 0:
        raise ValidationError("tol_cluster must be non-negative", {"field": "tol_cluster"})
    kw["tol_cluster"] = tol

    if "contour" in data:
        c = data["contour"]
        if not isinstance(c, dict) or "radius" not in c:
            raise ParseError("contour: expected {center, radius, nodes}", {"field": "contour"})
        try:
            kw["contour"] = Contour(
                _scalar(c.get("center", 0.0), "contour.center"),
                _real(c["radius"], "contour.radius"),
                _int(c.get("nodes", 128), "contour.nodes"),
            )
        except ValueError as exc:
            raise ValidationError(f"contour: {exc}", {"field": "contour"}) from exc
    if "seed" in data:
        kw["extra"] = {"seed": _int(data["seed"], "seed")}
    return Scenario(**kw)


def load(path: str, output: str | None = None) -> Scenario:
    """Read a scenario file. ``output`` overrides the file's path prefix."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read scenario: {exc}", {"path": path}) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON: {exc.msg}", {"path": path, "line": exc.lineno, "column": exc.colno}
        ) from exc
    default = os.path.splitext(path)[0]
    scenario = from_dict(data, default_output=default)
    if output is not None:
        scenario = dataclasses.replace(scenario, output=output)
    return scenario
