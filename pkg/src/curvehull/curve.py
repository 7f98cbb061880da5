"""Curves with exact derivatives and torsion certification.

A curve is a tuple of coordinate functions on a closed interval. Every
coordinate knows its own derivatives in closed form, so the determinants
built from ``gamma', gamma'', ...`` never go through finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ShapeMismatch

# Endpoint derivatives of non-polynomial coordinates are read this far inside.
ENDPOINT_SHIFT = 1e-9


@dataclass(frozen=True)
class Polynomial:
    """Coordinate ``sum_k coeffs[k] * t**k``."""

    coeffs: tuple[float, ...]

    polynomial = True

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs) or (0.0,)
        object.__setattr__(self, "coeffs", c)

    def __call__(self, t: np.ndarray, order: int = 0) -> np.ndarray:
        c = np.asarray(self.coeffs)
        if order >= len(c):
            return np.zeros_like(np.asarray(t, dtype=float))
        if order:
            c = P.polyder(c, order)
        return P.polyval(np.asarray(t, dtype=float), c)

    def describe(self) -> dict:
        return {"kind": "poly", "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Exponential:
    """Coordinate ``scale * exp(rate * t)``."""

    rate: float = 1.0
    scale: float = 1.0

    polynomial = False

    def __call__(self, t: np.ndarray, order: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.scale * self.rate**order * np.exp(self.rate * t)

    def describe(self) -> dict:
        return {"kind": "exp", "rate": self.rate, "scale": self.scale}


Coordinate = Polynomial | Exponential


@dataclass(frozen=True)
class CurveSpec:
    """An analytic curve ``t -> (c_1(t), ..., c_d(t))`` on ``[a, b]``."""

    interval: tuple[float, float]
    coords: tuple[Coordinate, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
            raise ValueError(f"interval must satisfy a < b, got ({a}, {b})")
        if len(self.coords) < 1:
            raise ValueError("a curve needs at least one coordinate")
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "coords", tuple(self.coords))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def n(self) -> int:
        """Dimension of the projected hull (ambient dimension minus one)."""
        return len(self.coords) - 1

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]

    @property
    def is_polynomial(self) -> bool:
        return all(c.polynomial for c in self.coords)

    def values(self, t, order: int = 0) -> np.ndarray:
        """Vectorized evaluation without domain checks; shape ``t.shape + (dim,)``."""
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (self.dim,))
        for i, c in enumerate(self.coords):
            ti = t
            if order > 0 and not c.polynomial:
                h = ENDPOINT_SHIFT * (self.b - self.a)
                ti = np.clip(t, self.a + h, self.b - h)
            out[..., i] = c(ti, order)
        return out

    def eval(self, t: float, order: int = 0) -> np.ndarray:
        """Return the ``order``-th derivative of the curve at ``t``."""
        if not 0 <= order <= self.dim:
            raise ValueError(f"order must be in 0..{self.dim}, got {order}")
        if not self.a <= t <= self.b:
            raise ValueError(f"t={t} outside [{self.a}, {self.b}]")
        return self.values(t, order)

    def derivative_matrix(self, t) -> np.ndarray:
        """Columns ``gamma'(t), ..., gamma^(d)(t)``; shape ``t.shape + (d, d)``."""
        t = np.asarray(t, dtype=float)
        return np.stack([self.values(t, k) for k in range(1, self.dim + 1)], axis=-1)

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "interval": list(self.interval),
            "coords": [c.describe() for c in self.coords],
        }


def project(curve: CurveSpec) -> CurveSpec:
    """Drop the last coordinate."""
    if curve.dim < 2:
        raise ValueError("cannot project a one-dimensional curve")
    return CurveSpec(curve.interval, curve.coords[:-1], name=curve.name)


def truncate(curve: CurveSpec, dim: int) -> CurveSpec:
    """Keep the first ``dim`` coordinates."""
    return CurveSpec(curve.interval, curve.coords[:dim], name=curve.name)


def torsion_minors(curve: CurveSpec, t: float) -> np.ndarray:
    """Leading principal minors of the derivative matrix at ``t``."""
    m = curve.derivative_matrix(t)
    if not np.all(np.isfinite(m)):
        raise ValueError(f"non-finite derivatives at t={t}")
    return _leading_minors(m)


def _leading_minors(m: np.ndarray) -> np.ndarray:
    d = m.shape[-1]
    return np.stack([np.linalg.det(m[..., :k, :k]) for k in range(1, d + 1)], axis=-1)


@dataclass(frozen=True)
class TorsionReport:
    certified: bool
    grid_size: int
    worst_minor_values: tuple[float, ...]
    failure_points: tuple[tuple[float, int], ...]
    tol: float = 1e-12


def certify_totally_positive(
    curve: CurveSpec, grid_size: int = 256, tol: float = 1e-12, depth: int = 80, max_refine: int = 16
) -> TorsionReport:
    """Check positivity of every leading minor on a grid, refining local dips.

    Each grid-local minimum of each minor is refined by golden-section search
    inside its bracketing cell, so a zero between grid points is still found.
    """
    if grid_size < 16:
        raise ValueError("grid_size must be at least 16")
    a, b = curve.interval
    ts = a + (b - a) * np.arange(1, grid_size + 1) / (grid_size + 1)
    vals = _leading_minors(curve.derivative_matrix(ts))
    d = curve.dim
    worst = vals.min(axis=0).copy()
    failures: list[tuple[float, int]] = []
    for k in range(d):
        f = lambda t, k=k: float(_leading_minors(curve.derivative_matrix(t))[k])
        v = vals[:, k]
        left = np.concatenate([[np.inf], v[:-1]])
        right = np.concatenate([v[1:], [np.inf]])
        dips = np.nonzero((v <= left) & (v <= right) & ((v < left) | (v < right)))[0]
        # refine the deepest dips only; a flat minor has none
        for i in dips[np.argsort(v[dips], kind="stable")][:max_refine]:
            lo = ts[i - 1] if i > 0 else a + 0.5 * (ts[0] - a)
            hi = ts[i + 1] if i + 1 < grid_size else b - 0.5 * (b - ts[-1])
            tmin, vmin = _golden_min(f, lo, hi, depth)
            if vmin < v[i]:
                worst[k] = min(worst[k], vmin)
            else:
                tmin, vmin = ts[i], v[i]
            if vmin <= tol:
                failures.append((float(tmin), k + 1))
    failures.sort()
    certified = bool(np.all(worst > tol)) and not failures
    return TorsionReport(
        certified=certified,
        grid_size=grid_size,
        worst_minor_values=tuple(float(w) for w in worst),
        failure_points=tuple(failures),
        tol=tol,
    )


def _golden_min(f, lo: float, hi: float, iters: int) -> tuple[float, float]:
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = hi - g * (hi - lo), lo + g * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = f(d)
        if hi - lo < 1e-15 * max(1.0, abs(lo)):
            break
    return (c, fc) if fc <= fd else (d, fd)


def ordered_derivative_det(curve: CurveSpec, points: Sequence[float]) -> float:
    """``det(gamma'(x_1), ..., gamma'(x_d))`` for strictly increasing ``x``."""
    x = np.asarray(points, dtype=float)
    if x.shape != (curve.dim,):
        raise ShapeMismatch(f"need {curve.dim} points, got {x.shape}")
    if np.any(np.diff(x) <= 0):
        raise ValueError("points must be strictly increasing")
    if x[0] < curve.a or x[-1] > curve.b:
        raise ValueError("points must lie in the curve interval")
    cols = curve.values(x, 1)  # row i = gamma'(x_i)
    return float(np.linalg.det(cols.T))


def chord_det(curve: CurveSpec, points: Sequence[float]) -> float:
    """``det(gamma(t_2)-gamma(t_1), ..., gamma(t_{d+1})-gamma(t_1))``."""
    t = np.asarray(points, dtype=float)
    if t.shape != (curve.dim + 1,):
        raise ShapeMismatch(f"need {curve.dim + 1} points, got {t.shape}")
    g = curve.values(t)
    return float(np.linalg.det((g[1:] - g[0]).T))


# ---------------------------------------------------------------- builtins


def moment(d: int, a: float = 0.0, b: float = 1.0) -> CurveSpec:
    """``(t, t^2, ..., t^d)``."""
    d = int(d)
    if d < 1:
        raise ValueError("moment curve needs d >= 1")
    coords = tuple(Polynomial((0.0,) * k + (1.0,)) for k in range(1, d + 1))
    return CurveSpec((a, b), coords, name=f"moment:{d}:{_fmt(a)}:{_fmt(b)}")


def sensitive(a: float = -1.0, b: float = 1.0) -> CurveSpec:
    """``(t, t^4, -t^3)``, whose torsion minors vanish at ``t = 0``."""
    coords = (
        Polynomial((0.0, 1.0)),
        Polynomial((0.0, 0.0, 0.0, 0.0, 1.0)),
        Polynomial((0.0, 0.0, 0.0, -1.0)),
    )
    return CurveSpec((a, b), coords, name="sensitive")


def expmoment(d: int, a: float = 0.0, b: float = 1.0) -> CurveSpec:
    """``(t, ..., t^(d-1), e^t)``: a non-polynomial curve with positive torsion."""
    d = int(d)
    if d < 2:
        raise ValueError("expmoment needs d >= 2")
    coords = tuple(Polynomial((0.0,) * k + (1.0,)) for k in range(1, d))
    return CurveSpec((a, b), coords + (Exponential(),), name=f"expmoment:{d}:{_fmt(a)}:{_fmt(b)}")


def poly(rows: Sequence[Sequence[float]], a: float, b: float) -> CurveSpec:
    """Curve whose i-th coordinate has ascending coefficients ``rows[i]``."""
    return CurveSpec((a, b), tuple(Polynomial(tuple(r)) for r in rows), name="poly")


BUILTINS = {"moment": moment, "sensitive": sensitive, "expmoment": expmoment, "poly": poly}


def builtin(name: str, *params) -> CurveSpec:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown builtin curve {name!r}") from None
    return factory(*params)


def parse_curve(text: str) -> CurveSpec:
    """Parse the ``name:arg:arg`` mini-syntax, e.g. ``moment:3:0:1``.

    Polynomial curves use ``poly:<rows>:a:b`` with rows separated by ``;`` and
    coefficients by ``,`` (ascending powers).
    """
    name, *args = text.strip().split(":")
    if name == "poly":
        if len(args) != 3:
            raise ValueError("poly syntax is poly:<c,c;c,c,c>:a:b")
        rows = [[float(v) for v in r.split(",")] for r in args[0].split(";")]
        return poly(rows, float(args[1]), float(args[2]))
    if name in ("moment", "expmoment"):
        if len(args) not in (1, 3):
            raise ValueError(f"{name} syntax is {name}:d[:a:b]")
        return builtin(name, int(args[0]), *(float(v) for v in args[1:]))
    if name == "sensitive":
        return sensitive(*(float(v) for v in args))
    raise ValueError(f"unknown builtin curve {name!r}")


def curve_from_document(doc: dict) -> CurveSpec:
    """Build a curve from a parsed curve-spec document.

    Fields: ``dim``, ``interval`` ``[a, b]`` and either ``builtin`` (with
    optional ``params`` list) or ``coefficients`` (one ascending row per
    coordinate).
    """
    if "interval" not in doc:
        raise ValueError("curve document needs an interval")
    a, b = (float(v) for v in doc["interval"])
    if "builtin" in doc:
        name = doc["builtin"]
        params = list(doc.get("params", []))
        if name in ("moment", "expmoment"):
            curve = builtin(name, int(params[0]) if params else int(doc["dim"]), a, b)
        elif name == "sensitive":
            curve = sensitive(a, b)
        else:
            raise ValueError(f"unknown builtin curve {name!r}")
    elif "coefficients" in doc:
        curve = poly([[float(v) for v in row] for row in doc["coefficients"]], a, b)
    else:
        raise ValueError("curve document needs builtin or coefficients")
    if "dim" in doc and int(doc["dim"]) != curve.dim:
        raise ValueError(f"dim={doc['dim']} does not match {curve.dim} coordinates")
    return curve


def load_curve(path: str | Path) -> CurveSpec:
    """Read a JSON curve-spec file. Numbers are parsed with correct rounding."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return curve_from_document(doc)


def _fmt(v: float) -> str:
    return f"{float(v):g}"
