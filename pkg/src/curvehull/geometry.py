"""Hull volume and boundary area as integrals over ordered simplices.

Both quantities come from integrating determinants of the hull map's
Jacobian over the knots after the weights have been integrated out exactly
(a Dirichlet integral). What is left are integrals over
``a <= x_1 <= ... <= x_l <= b``, evaluated with tensor Gauss-Legendre rules
behind a triangular change of variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .curve import CurveSpec
from .errors import IntegrandError

Integrand = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class QuadratureConfig:
    rule_order: int = 16
    subdivisions: int = 4
    target_rel_tol: float = 1e-9
    max_refinements: int = 3
    chunk: int = 200_000

    def __post_init__(self):
        if self.rule_order < 2:
            raise ValueError("rule_order must be at least 2")
        if self.subdivisions < 1:
            raise ValueError("subdivisions must be at least 1")


@dataclass(frozen=True)
class IntegralResult:
    value: float
    est_error: float
    evaluations: int
    variants: tuple[float, ...] = ()


def _composite_rule(order: int, pieces: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[0, 1]`` split into ``pieces`` cells."""
    g, w = np.polynomial.legendre.leggauss(order)
    g, w = 0.5 * (g + 1.0), 0.5 * w
    edges = np.arange(pieces) / pieces
    nodes = (edges[:, None] + g[None, :] / pieces).ravel()
    weights = np.tile(w / pieces, pieces)
    return nodes, weights


def _tensor_sum(f: Integrand, ell: int, a: float, b: float, order: int, pieces: int, chunk: int):
    nodes, weights = _composite_rule(order, pieces)
    m = len(nodes)
    total = m**ell
    parts = []
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        digits = np.stack([(flat // m ** (ell - 1 - i)) % m for i in range(ell)], axis=1)
        u = nodes[digits]
        wt = np.prod(weights[digits], axis=1)
        x = np.empty_like(u)
        jac = np.ones(len(u))
        prev = np.full(len(u), a)
        for i in range(ell):
            span = b - prev
            jac *= span
            prev = prev + span * u[:, i]
            x[:, i] = prev
        vals = np.asarray(f(x), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise IntegrandError("non-finite integrand sample")
        parts.append(np.sum(vals * jac * wt))
    return float(np.sum(parts)), total


def integrate_ordered_simplex(
    f: Integrand, ell: int, interval: tuple[float, float], cfg: QuadratureConfig = QuadratureConfig()
) -> IntegralResult:
    """Integrate ``f`` over ``a <= x_1 <= ... <= x_ell <= b``.

    ``f`` receives an ``(N, ell)`` array and returns ``N`` values. The estimate
    is refined by doubling the subdivisions until two consecutive levels agree
    to ``target_rel_tol``; the error estimate is their difference.
    """
    a, b = (float(v) for v in interval)
    if ell == 0:
        val = float(np.asarray(f(np.zeros((1, 0))), dtype=float).ravel()[0])
        if not math.isfinite(val):
            raise IntegrandError("non-finite integrand sample")
        return IntegralResult(val, 0.0, 1)
    pieces = cfg.subdivisions
    coarse, evals = _tensor_sum(f, ell, a, b, cfg.rule_order, pieces, cfg.chunk)
    err = math.inf
    fine = coarse
    for _ in range(max(cfg.max_refinements, 1)):
        pieces *= 2
        fine, count = _tensor_sum(f, ell, a, b, cfg.rule_order, pieces, cfg.chunk)
        evals += count
        err = abs(fine - coarse)
        if err <= cfg.target_rel_tol * abs(fine):
            break
        coarse = fine
    return IntegralResult(fine, err, evals)


def integrate_corner_simplex(
    f: Integrand, k: int, cfg: QuadratureConfig = QuadratureConfig()
) -> IntegralResult:
    """Integrate over ``{w >= 0, w_1 + ... + w_k <= 1}`` via partial sums."""

    def g(s):
        w = np.diff(np.concatenate([np.zeros((len(s), 1)), s], axis=1), axis=1)
        return f(w)

    return integrate_ordered_simplex(g, k, (0.0, 1.0), cfg)


def dirichlet_integral(exponents) -> float:
    """``int w_1^(p_1-1) ... w_k^(p_k-1) (1 - sum w)^(p_0-1)`` over the corner simplex.

    ``exponents = (p_0, p_1, ..., p_k)``; the value is ``prod Gamma(p_j) / Gamma(sum p_j)``.
    """
    p = [float(v) for v in exponents]
    return math.exp(sum(math.lgamma(v) for v in p) - math.lgamma(sum(p)))


# ------------------------------------------------------------------ integrands


def _vals(curve: CurveSpec, x: np.ndarray, order: int = 0) -> np.ndarray:
    return curve.values(x, order)  # (N, k, d)


def volume_integrands(curve: CurveSpec) -> list[tuple[int, float, Integrand]]:
    """``(ell, prefactor, integrand)`` for both volume formulas of the curve's parity.

    The curve lives in ``R^n`` with ``n = dim``. Columns of each determinant:

    * ``n = 2l``, anchor ``r`` in ``{a, b}``: ``gamma(x_i) - gamma(r)`` then
      ``gamma'(x_i)``, ``i = 1..l``; sign ``(-1)^(l(l-1)/2)``.
    * ``n = 2l - 1``, chord form over ``x_2..x_l``: ``gamma(b) - gamma(a)``,
      ``gamma(x_j) - gamma(a)``, ``gamma'(x_j)``; sign ``(-1)^((l-1)(l-2)/2)``.
    * ``n = 2l - 1``, free form over ``x_1..x_l``: ``gamma(x_j) - gamma(x_1)``
      for ``j >= 2``, then ``gamma'(x_1..x_l)``; sign ``(-1)^(l(l-1)/2)``.
    """
    n = curve.dim
    if n < 2:
        raise ValueError("volume needs a curve in at least two dimensions")
    a, b = curve.interval
    ga, gb = curve.values(a), curve.values(b)
    ell = (n + 1) // 2
    fact = math.factorial(n)
    out = []
    if n % 2 == 0:
        sign = (-1) ** (ell * (ell - 1) // 2)
        for anchor in (ga, gb):

            def f(x, anchor=anchor):
                cols = np.concatenate([_vals(curve, x) - anchor, _vals(curve, x, 1)], axis=1)
                return np.linalg.det(np.swapaxes(cols, 1, 2))

            out.append((ell, sign / fact, f))
        return out

    sign1 = (-1) ** ((ell - 1) * (ell - 2) // 2)

    def chord(x):
        chord_col = np.broadcast_to(gb - ga, (len(x), 1, n))
        cols = np.concatenate([chord_col, _vals(curve, x) - ga, _vals(curve, x, 1)], axis=1)
        return np.linalg.det(np.swapaxes(cols, 1, 2))

    sign2 = (-1) ** (ell * (ell - 1) // 2)

    def free(x):
        g = _vals(curve, x)
        cols = np.concatenate([g[:, 1:] - g[:, :1], _vals(curve, x, 1)], axis=1)
        return np.linalg.det(np.swapaxes(cols, 1, 2))

    return [(ell - 1, sign1 / fact, chord), (ell, sign2 / fact, free)]


def _gram_sqrt(cols: np.ndarray) -> np.ndarray:
    """``sqrt(det(S^T S))`` where the rows of ``cols`` are the columns of ``S``."""
    gram = np.einsum("nid,njd->nij", cols, cols)
    det = np.linalg.det(gram) if gram.shape[1] else np.ones(len(cols))
    if np.any(det < -1e-14):
        raise IntegrandError(f"Gram determinant {det.min():.3e} is negative")
    return np.sqrt(np.clip(det, 0.0, None))


def gram_content(columns) -> float:
    """``sqrt(det(S^T S))`` for a single matrix ``S`` given column-wise."""
    cols = np.asarray(columns, dtype=float)
    return float(_gram_sqrt(cols[None, :, :])[0])


def area_integrands(curve: CurveSpec) -> list[tuple[int, float, Integrand]]:
    """``(ell, prefactor, integrand)`` terms whose sum is the boundary area.

    The curve lives in ``R^(n+1)``. For even ``n`` the two terms are the upper
    and lower hull (anchors ``b`` and ``a``); for odd ``n`` the chord-anchored
    term over ``l - 1`` knots is the upper hull and the free term over ``l``
    knots the lower hull. For ``n = 1`` these are the chord length and the arc
    length.
    """
    n = curve.n
    if n < 1:
        raise ValueError("area needs a curve in at least two dimensions")
    a, b = curve.interval
    ga, gb = curve.values(a), curve.values(b)
    ell = (n + 1) // 2
    fact = math.factorial(n)
    if n % 2 == 0:
        out = []
        for anchor in (gb, ga):

            def f(x, anchor=anchor):
                return _gram_sqrt(np.concatenate([_vals(curve, x) - anchor, _vals(curve, x, 1)], axis=1))

            out.append((ell, 1.0 / fact, f))
        return out

    def chord(x):
        chord_col = np.broadcast_to(gb - ga, (len(x), 1, n + 1))
        return _gram_sqrt(np.concatenate([chord_col, _vals(curve, x) - ga, _vals(curve, x, 1)], axis=1))

    def free(x):
        g = _vals(curve, x)
        return _gram_sqrt(np.concatenate([g[:, 1:] - g[:, :1], _vals(curve, x, 1)], axis=1))

    return [(ell - 1, 1.0 / fact, chord), (ell, 1.0 / fact, free)]


def hull_volume(curve: CurveSpec, cfg: QuadratureConfig = QuadratureConfig()) -> IntegralResult:
    """Volume of the convex hull of a curve in ``R^n`` (``n = dim >= 2``).

    Both formulas for the curve's parity are evaluated. The first is returned,
    with the discrepancy between the two folded into ``est_error``. A
    non-positive result means the sign conventions do not hold for this
    curve and raises instead of being silently flipped.
    """
    results = []
    evals = 0
    errs = []
    for ell, pref, f in volume_integrands(curve):
        r = integrate_ordered_simplex(f, ell, curve.interval, cfg)
        results.append(pref * r.value)
        errs.append(abs(pref) * r.est_error)
        evals += r.evaluations
    for v in results:
        if not v > 0:
            raise IntegrandError(f"volume formula gave non-positive value {v:.6e}")
    err = max(errs) + abs(results[0] - results[1])
    return IntegralResult(results[0], err, evals, tuple(results))


def hull_surface_area(curve: CurveSpec, cfg: QuadratureConfig = QuadratureConfig()) -> IntegralResult:
    """Area of the boundary of the convex hull of a curve in ``R^(n+1)``.

    ``variants`` holds the two pieces (upper hull, lower hull).
    """
    parts, errs, evals = [], [], 0
    for ell, pref, f in area_integrands(curve):
        r = integrate_ordered_simplex(f, ell, curve.interval, cfg)
        parts.append(pref * r.value)
        errs.append(pref * r.est_error)
        evals += r.evaluations
    return IntegralResult(sum(parts), sum(errs), evals, tuple(parts))
