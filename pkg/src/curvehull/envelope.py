"""Concave and convex envelopes of the last coordinate over the projected hull.

``b_sup(x)`` is the height of the upper hull above ``x`` and ``b_inf(x)`` the
height of the lower hull. At an interior ``x`` the value comes from inverting
the projected hull map with Newton's method. Points on the boundary of the
projected hull are handed to the same computation one dimension down: that
boundary is the graph of the envelopes of the once-more-projected curve, and
the atoms found there already represent ``x``.

Everything here works on batches of points; the scalar functions are thin
wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .curve import CurveSpec, project
from .errors import NoConvergence, NotInterior, OutsideHull
from .hull_param import (
    Layout,
    Side,
    SimplexParam,
    atoms_batch,
    jacobian_batch,
    layout,
    map_batch,
    param_from_atoms,
)

INTERIOR, BOUNDARY, OUTSIDE, FAILED = 0, 1, 2, 3
STATUS_NAMES = {INTERIOR: "interior", BOUNDARY: "boundary", OUTSIDE: "outside", FAILED: "failed"}


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-11
    max_iter: int = 100
    max_halvings: int = 20
    starts: int = 8
    clamp_eps: float = 1e-12
    seed: int = 12345
    boundary_tol: float = 1e-9
    continuation_steps: tuple[int, ...] = (16, 128)
    grid_check: int = 10_000
    grid_slack: float = 1e-9


DEFAULT = SolverConfig()


@lru_cache(maxsize=64)
def hull_scale(curve: CurveSpec) -> float:
    """Diameter of the curve's bounding box, from a dense sample."""
    t = np.linspace(curve.a, curve.b, 2049)
    g = curve.values(t)
    return float(np.linalg.norm(np.ptp(g, axis=0)))


# ------------------------------------------------------------------ Newton


def _knot_weight_slots(lay: Layout) -> list[int]:
    return lay.knot_weight_slots()


def _clamp(lay: Layout, interval, theta: np.ndarray, eps: float) -> np.ndarray:
    """Project iterates back into the domain and keep knots sorted."""
    a, b = interval
    nw = lay.n_weights
    w = np.clip(theta[:, :nw], eps, None)
    s = w.sum(axis=1)
    over = s > 1.0 - eps
    if np.any(over):
        w[over] *= ((1.0 - eps) / s[over])[:, None]
    x = np.clip(theta[:, nw:], a + eps * (b - a), b - eps * (b - a))
    if lay.n_knots > 1:
        order = np.argsort(x, axis=1, kind="stable")
        moved = np.any(order != np.arange(lay.n_knots), axis=1)
        if np.any(moved):
            slots = _knot_weight_slots(lay)
            implicit = 1.0 - w.sum(axis=1)
            kw = np.stack([implicit if s_ < 0 else w[:, s_] for s_ in slots], axis=1)
            kw = np.take_along_axis(kw, order, axis=1)
            x = np.take_along_axis(x, order, axis=1)
            for k, s_ in enumerate(slots):
                if s_ >= 0:
                    w[moved, s_] = kw[moved, k]
    return np.concatenate([w, x], axis=1)


def _solve(jac: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(jac, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        out = np.empty_like(rhs)
        for i in range(len(rhs)):
            out[i] = np.linalg.lstsq(jac[i], rhs[i], rcond=None)[0]
        return out


def _newton(curve, lay, targets, theta, cfg: SolverConfig, tol: float):
    """Damped Newton on ``map(theta)[:n] = targets`` for a batch."""
    n = curve.n
    theta = _clamp(lay, curve.interval, np.array(theta, dtype=float), cfg.clamp_eps)
    r = map_batch(curve, lay, theta, n) - targets
    res = np.abs(r).max(axis=1)
    stalled = np.zeros(len(theta), bool)
    for _ in range(cfg.max_iter):
        idx = np.nonzero((res > tol) & ~stalled)[0]
        if idx.size == 0:
            break
        jac = jacobian_batch(curve, lay, theta[idx], n)
        with np.errstate(all="ignore"):
            delta = _solve(jac, -r[idx])
        bad = ~np.all(np.isfinite(delta), axis=1)
        delta[bad] = 0.0
        step = np.ones(idx.size)
        pending = ~bad
        stalled[idx[bad]] = True
        for _h in range(cfg.max_halvings + 1):
            pi = np.nonzero(pending)[0]
            if pi.size == 0:
                break
            gi = idx[pi]
            trial = _clamp(lay, curve.interval, theta[gi] + step[pi, None] * delta[pi], cfg.clamp_eps)
            tr = map_batch(curve, lay, trial, n) - targets[gi]
            tres = np.abs(tr).max(axis=1)
            ok = tres < res[gi]
            acc = gi[ok]
            theta[acc], r[acc], res[acc] = trial[ok], tr[ok], tres[ok]
            pending[pi[ok]] = False
            step[pi[~ok]] *= 0.5
        stalled[idx[pending]] = True
    return theta, res, res <= tol


def _starting_points(lay: Layout, interval, count: int, seed: int) -> np.ndarray:
    """Chebyshev knots (jittered after the first start) and simplex-uniform weights."""
    a, b = interval
    rng = np.random.default_rng(seed)
    nk, nw = lay.n_knots, lay.n_weights
    k = np.arange(1, nk + 1)
    cheb = np.sort(0.5 * (a + b) + 0.5 * (b - a) * np.cos((2 * k - 1) * np.pi / (2 * nk)))
    spacing = (b - a) / (nk + 1)
    out = np.empty((count, nw + nk))
    for m in range(count):
        if m == 0:
            x, w = cheb, np.full(nw, 1.0 / (nw + 1))
        else:
            x = np.sort(cheb + rng.uniform(-0.25, 0.25, nk) * spacing)
            w = rng.dirichlet(np.ones(nw + 1))[:nw]
        out[m, :nw], out[m, nw:] = w, np.clip(x, a, b)
    return out


def _continuation(curve, lay, X, theta0, cfg: SolverConfig, tol: float):
    """Follow the straight path from the image of ``theta0`` to each target.

    The path stays inside the convex projected hull, so its preimage stays in
    the interior of the parameter domain. Each point advances with its own step
    length: an Euler predictor along ``d theta / ds = J^-1 (x - center)`` and a
    short Newton corrector; failed steps are retried at a quarter length.
    """
    n = curve.n
    B = len(X)
    center = map_batch(curve, lay, theta0[None, :], n)[0]
    direction = X - center
    theta = np.tile(theta0, (B, 1))
    s = np.zeros(B)
    ds = np.full(B, 1.0 / cfg.continuation_steps[0])
    active = np.ones(B, bool)
    corrector = replace(cfg, max_iter=12)
    for _ in range(cfg.continuation_steps[-1] * 8):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        s_new = np.minimum(s[idx] + ds[idx], 1.0)
        jac = jacobian_batch(curve, lay, theta[idx], n)
        with np.errstate(all="ignore"):
            v = _solve(jac, direction[idx])
        v[~np.all(np.isfinite(v), axis=1)] = 0.0
        pred = theta[idx] + (s_new - s[idx])[:, None] * v
        target = center + s_new[:, None] * direction[idx]
        th, _res, conv = _newton(curve, lay, target, pred, corrector, tol)
        acc = idx[conv]
        theta[acc], s[acc] = th[conv], s_new[conv]
        ds[acc] = np.minimum(ds[acc] * 2.0, 0.25)
        ds[idx[~conv]] *= 0.25
        active &= (s < 1.0) & (ds > 1e-15)
    res = np.abs(map_batch(curve, lay, theta, n) - X).max(axis=1)
    return theta, res, (s >= 1.0) & (res <= tol)


def _invert_batch(curve: CurveSpec, side: Side, X: np.ndarray, cfg: SolverConfig):
    """Interior inversion for a batch. Returns ``(theta, residual, converged)``.

    Order of attempts: Newton from the first start, then continuation from that
    start, then Newton from the remaining jittered starts.
    """
    lay = layout(curve.n, side)
    B = len(X)
    tol = cfg.tol * max(1.0, hull_scale(curve))
    starts = _starting_points(lay, curve.interval, max(cfg.starts, 1), cfg.seed)
    theta = np.tile(starts[0], (B, 1))
    best = np.full(B, np.inf)
    done = np.zeros(B, bool)
    if B == 0:
        return theta, best, done

    def attempt(idx, th, res, conv):
        improve = (res < best[idx]) | conv
        theta[idx[improve]] = th[improve]
        best[idx[improve]] = res[improve]
        done[idx[conv]] = True

    idx = np.arange(B)
    attempt(idx, *_newton(curve, lay, X, np.tile(starts[0], (B, 1)), cfg, tol))
    idx = np.nonzero(~done)[0]
    if idx.size:
        attempt(idx, *_continuation(curve, lay, X[idx], starts[0], cfg, tol))
    for m in range(1, len(starts)):
        idx = np.nonzero(~done)[0]
        if idx.size == 0:
            break
        attempt(idx, *_newton(curve, lay, X[idx], np.tile(starts[m], (idx.size, 1)), cfg, tol))
    return theta, best, done | (best <= tol)


# ----------------------------------------------------------- classification


@dataclass
class _Level:
    """Representations of a batch of points at one level of the recursion."""

    status: np.ndarray
    t: dict  # side -> (B, K) atom positions
    p: dict  # side -> (B, K) atom probabilities
    theta: dict  # side -> (B, n) inverting parameter (NaN where not interior)
    residual: dict  # side -> (B,) Newton residual


def _pad(a: np.ndarray, K: int, fill: float) -> np.ndarray:
    if a.shape[1] >= K:
        return a
    return np.concatenate([a, np.full((a.shape[0], K - a.shape[1]), fill)], axis=1)


def _base_level(curve: CurveSpec, X: np.ndarray, tol: float) -> _Level:
    """n = 1: the projected hull is the interval ``[gamma_1(a), gamma_1(b)]``."""
    a, b = curve.interval
    c1 = curve.coords[0]
    ga, gb = float(c1(a)), float(c1(b))
    x = X[:, 0]
    B = len(x)
    K = 2
    status = np.full(B, OUTSIDE)
    at_a = np.abs(x - ga) <= tol
    at_b = ~at_a & (np.abs(x - gb) <= tol)
    inside = ~at_a & ~at_b & (x > ga) & (x < gb)
    status[at_a | at_b] = BOUNDARY
    status[inside] = INTERIOR

    t = {s: np.full((B, K), b) for s in Side}
    p = {s: np.zeros((B, K)) for s in Side}
    theta = {s: np.full((B, 1), np.nan) for s in Side}
    for s in Side:
        t[s][at_a, 0], p[s][at_a, 0] = a, 1.0
        t[s][at_b, 0], p[s][at_b, 0] = b, 1.0

    beta = (x[inside] - ga) / (gb - ga)
    t[Side.UPPER][inside] = np.array([a, b])
    p[Side.UPPER][inside, 0], p[Side.UPPER][inside, 1] = 1.0 - beta, beta
    theta[Side.UPPER][inside, 0] = beta

    root = _invert_monotone(c1, x[inside], a, b)
    t[Side.LOWER][inside, 0], p[Side.LOWER][inside, 0] = root, 1.0
    theta[Side.LOWER][inside, 0] = root
    residual = {
        Side.UPPER: np.zeros(B),
        Side.LOWER: np.where(inside, np.abs(_safe_eval(c1, t[Side.LOWER][:, 0]) - x), 0.0),
    }
    return _Level(status, t, p, theta, residual)


def _safe_eval(c, t):
    return c(np.asarray(t, dtype=float))


def _invert_monotone(c, y: np.ndarray, a: float, b: float) -> np.ndarray:
    """Solve ``c(t) = y`` for increasing ``c`` by bisection plus Newton polish."""
    lo = np.full(y.shape, a)
    hi = np.full(y.shape, b)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = c(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4 * np.spacing(np.maximum(np.abs(lo), np.abs(hi)))):
            break
    t = 0.5 * (lo + hi)
    for _ in range(2):
        d = c(t, 1)
        step = np.where(d > 0, (c(t) - y) / np.where(d > 0, d, 1.0), 0.0)
        cand = np.clip(t - step, lo, hi)
        better = np.abs(c(cand) - y) <= np.abs(c(t) - y)
        t = np.where(better, cand, t)
    return t


def _classify(
    curve: CurveSpec, X: np.ndarray, sides, cfg: SolverConfig, tol: float
) -> _Level:
    """Status and representations of ``X`` (shape ``(B, n)``) in the projected hull."""
    n = curve.n
    if n == 1:
        return _base_level(curve, X, tol)
    B = len(X)
    K = n // 2 + 2
    prev = _classify(project(curve), X[:, :-1], tuple(Side), cfg, tol)
    last = curve.coords[n - 1]
    z = {s: np.einsum("bk,bk->b", prev.p[s], last(prev.t[s])) for s in Side}
    xn = X[:, -1]
    pb = prev.status == BOUNDARY
    pi = prev.status == INTERIOR
    on_up = (pb | pi) & (np.abs(xn - z[Side.UPPER]) <= tol)
    on_lo = pi & ~on_up & (np.abs(xn - z[Side.LOWER]) <= tol)
    inside = pi & ~on_up & ~on_lo & (xn < z[Side.UPPER]) & (xn > z[Side.LOWER])
    status = np.full(B, OUTSIDE)
    status[prev.status == FAILED] = FAILED
    status[on_up | on_lo] = BOUNDARY
    status[inside] = INTERIOR

    t = {s: np.full((B, K), curve.b) for s in Side}
    p = {s: np.zeros((B, K)) for s in Side}
    theta = {s: np.full((B, n), np.nan) for s in Side}
    residual = {s: np.zeros(B) for s in Side}
    for src, mask in ((Side.UPPER, on_up), (Side.LOWER, on_lo)):
        if np.any(mask):
            tp = _pad(prev.t[src][mask], K, curve.b)
            pp = _pad(prev.p[src][mask], K, 0.0)
            for s in Side:
                t[s][mask], p[s][mask] = tp, pp

    idx = np.nonzero(inside)[0]
    for s in sides:
        if idx.size == 0:
            break
        lay = layout(n, s)
        th, res, conv = _invert_batch(curve, s, X[idx], cfg)
        tt, pp = atoms_batch(lay, curve.interval, th)
        t[s][idx] = _pad(tt, K, curve.b)
        p[s][idx] = _pad(pp, K, 0.0)
        theta[s][idx] = th
        residual[s][idx] = res
        status[idx[~conv]] = FAILED
    return _Level(status, t, p, theta, residual)


# ------------------------------------------------------------------ results


class Hyperplane(NamedTuple):
    """Affine functional ``d0 + <d, .>`` touching the envelope at a point."""

    d0: float
    d: tuple[float, ...]
    min_slack: float  # min over the check grid of the signed gap to the curve
    verified: bool


@dataclass(frozen=True)
class EnvelopeResult:
    value: float
    param: SimplexParam | None
    residual: float
    side: Side
    status: str
    atoms: tuple[float, ...]
    probs: tuple[float, ...]
    certificate: Hyperplane | None = None


@dataclass(frozen=True)
class EnvelopeBatch:
    values: np.ndarray
    status: np.ndarray
    residual: np.ndarray
    atoms: np.ndarray
    probs: np.ndarray
    theta: np.ndarray


def _as_points(curve: CurveSpec, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != curve.n:
        raise ValueError(f"points must have {curve.n} coordinates, got {X.shape[1]}")
    return X


def boundary_tolerance(curve: CurveSpec, cfg: SolverConfig = DEFAULT) -> float:
    return cfg.boundary_tol * (1.0 + hull_scale(curve))


def envelope_batch(curve: CurveSpec, X, side, cfg: SolverConfig = DEFAULT) -> EnvelopeBatch:
    """Envelope values for many points; ``status`` flags outside or failed points."""
    side = Side.parse(side)
    X = _as_points(curve, X)
    lvl = _classify(curve, X, (side,), cfg, boundary_tolerance(curve, cfg))
    t, p = lvl.t[side], lvl.p[side]
    g = curve.values(t)
    values = np.einsum("bk,bk->b", p, g[..., -1])
    resid = np.abs(np.einsum("bk,bkd->bd", p, g[..., :-1]) - X).max(axis=1)
    bad = (lvl.status == OUTSIDE) | (lvl.status == FAILED)
    values[bad] = np.nan
    return EnvelopeBatch(values, lvl.status, resid, t, p, lvl.theta[side])


def classify_batch(curve: CurveSpec, X, cfg: SolverConfig = DEFAULT) -> np.ndarray:
    """Status codes of points relative to the projected hull."""
    X = _as_points(curve, X)
    return _classify(curve, X, tuple(Side), cfg, boundary_tolerance(curve, cfg)).status


def envelope(curve: CurveSpec, x, side, certify: bool = True, cfg: SolverConfig = DEFAULT) -> EnvelopeResult:
    side = Side.parse(side)
    batch = envelope_batch(curve, x, side, cfg)
    status = int(batch.status[0])
    if status == OUTSIDE:
        raise OutsideHull(f"x={np.ravel(x).tolist()} is outside the projected hull")
    if status == FAILED:
        raise NoConvergence("Newton inversion failed from every start", float(batch.residual[0]))
    t, p = batch.atoms[0], batch.probs[0]
    keep = p > 0
    if status == INTERIOR:
        param = SimplexParam.from_theta(side, curve.n, batch.theta[0])
    else:
        try:
            param = param_from_atoms(curve, curve.n, side, t[keep], p[keep])
        except ValueError:
            param = None
    cert = None
    if certify and status == INTERIOR:
        cert = _hyperplane(curve, side, batch.theta[0], cfg)
    order = np.argsort(t[keep], kind="stable")
    return EnvelopeResult(
        value=float(batch.values[0]),
        param=param,
        residual=float(batch.residual[0]),
        side=side,
        status=STATUS_NAMES[status],
        atoms=tuple(float(v) for v in t[keep][order]),
        probs=tuple(float(v) for v in p[keep][order]),
        certificate=cert,
    )


def b_sup(curve: CurveSpec, x, certify: bool = True, cfg: SolverConfig = DEFAULT) -> EnvelopeResult:
    """Minimal concave majorant of the last coordinate, evaluated at ``x``."""
    return envelope(curve, x, Side.UPPER, certify, cfg)


def b_inf(curve: CurveSpec, x, certify: bool = True, cfg: SolverConfig = DEFAULT) -> EnvelopeResult:
    """Maximal convex minorant of the last coordinate, evaluated at ``x``."""
    return envelope(curve, x, Side.LOWER, certify, cfg)


def invert_projected(curve: CurveSpec, side, x, cfg: SolverConfig = DEFAULT) -> SimplexParam:
    """Interior parameter whose projected image is ``x``."""
    side = Side.parse(side)
    X = _as_points(curve, x)
    lvl = _classify(curve, X, (side,), cfg, boundary_tolerance(curve, cfg))
    status = int(lvl.status[0])
    if status in (BOUNDARY, OUTSIDE):
        raise NotInterior(f"x={list(X[0])} is {STATUS_NAMES[status]}, not interior")
    if status == FAILED:
        raise NoConvergence("Newton inversion failed from every start", float(lvl.residual[side][0]))
    return SimplexParam.from_theta(side, curve.n, lvl.theta[side][0])


def _hyperplane(curve: CurveSpec, side: Side, theta: np.ndarray, cfg: SolverConfig) -> Hyperplane:
    """Tangent plane of the hull graph through the point with parameter ``theta``.

    The tangent plane is ``det(J, xi - U) = 0`` with ``J`` the full Jacobian; its
    coefficients are the signed maximal minors of ``J``.
    """
    n = curve.n
    lay = layout(n, side)
    th = np.asarray(theta, dtype=float)[None, :]
    jac = jacobian_batch(curve, lay, th, n + 1)[0]
    point = map_batch(curve, lay, th)[0]
    cof = np.array([(-1) ** i * np.linalg.det(np.delete(jac, i, axis=0)) for i in range(n + 1)])
    d = -cof[:n] / cof[n]
    d0 = point[n] - float(d @ point[:n])
    ts = np.linspace(curve.a, curve.b, cfg.grid_check)
    g = curve.values(ts)
    gap = d0 + g[:, :n] @ d - g[:, n]
    if side is Side.LOWER:
        gap = -gap
    slack = float(gap.min())
    return Hyperplane(float(d0), tuple(float(v) for v in d), slack, slack >= -cfg.grid_slack)


def supporting_hyperplane(curve: CurveSpec, x, side, cfg: SolverConfig = DEFAULT) -> Hyperplane:
    """Affine functional tangent to the envelope at an interior ``x``.

    For the upper side ``d0 + <d, gamma_bar(t)> >= gamma_last(t)`` on the
    whole curve; the lower side has the reverse inequality. ``min_slack``
    reports the worst sampled gap (sign-adjusted so that it is ``>= 0``).
    """
    side = Side.parse(side)
    p = invert_projected(curve, side, x, cfg)
    return _hyperplane(curve, side, p.theta, cfg)
