"""Brute-force reference computations.

* ``lp_envelope``: the envelope as a linear program over a discretized curve,
  solved by a dense revised simplex method with Bland's rule.
* ``hull_membership``: recursive test ``b_inf(y_bar) <= y_z <= b_sup(y_bar)``.
* ``mc_volume``: hit-or-miss Monte Carlo in the bounding box.
* ``mesh_area``: total content of a triangulated boundary mesh.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .curve import CurveSpec
from .envelope import (
    BOUNDARY,
    DEFAULT,
    FAILED,
    INTERIOR,
    OUTSIDE,
    SolverConfig,
    _classify,
    hull_scale,
)
from .errors import Infeasible, NoConvergence
from .hull_param import BoundaryMesh, Side, simplex_measures


# ------------------------------------------------------------- LP oracle


@dataclass(frozen=True)
class DiscreteCurve:
    ts: np.ndarray
    points: np.ndarray  # (N, n+1)

    @property
    def n(self) -> int:
        return self.points.shape[1] - 1


def discretize(curve: CurveSpec, N: int) -> DiscreteCurve:
    if N < curve.dim + 1:
        raise ValueError(f"need at least {curve.dim + 1} grid points")
    ts = np.linspace(curve.a, curve.b, N)
    return DiscreteCurve(ts, curve.values(ts))


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class LpSolution:
    value: float
    weights: dict[int, float]  # atom index -> weight
    status: LpStatus
    iterations: int = 0


class _Simplex:
    """Dense revised simplex for ``min c x, A x = b, x >= 0`` with an explicit basis inverse."""

    def __init__(self, A: np.ndarray, b: np.ndarray, tol: float = 1e-10, refactor: int = 50):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.tol = tol
        self.refactor = refactor
        self.iterations = 0

    def _run(self, A, c, basis, binv, allowed):
        """Bland's rule iterations until no reduced cost is negative."""
        m = A.shape[0]
        xb = binv @ self.b
        since = 0
        while True:
            y = c[basis] @ binv
            reduced = c - y @ A
            reduced[basis] = 0.0
            cand = np.nonzero((reduced < -self.tol) & allowed)[0]
            if cand.size == 0:
                return basis, binv, xb
            j = int(cand[0])  # Bland: smallest eligible index enters
            u = binv @ A[:, j]
            pos = u > self.tol
            if not np.any(pos):
                raise RuntimeError("unbounded linear program")
            ratios = np.full(m, np.inf)
            ratios[pos] = xb[pos] / u[pos]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + self.tol * max(1.0, abs(best)))[0]
            r = int(ties[np.argmin(basis[ties])])  # Bland: smallest basic index leaves
            piv = u[r]
            binv[r] /= piv
            for i in range(m):
                if i != r and u[i] != 0.0:
                    binv[i] -= u[i] * binv[r]
            basis[r] = j
            self.iterations += 1
            since += 1
            if since >= self.refactor:
                binv = np.linalg.inv(A[:, basis])
                since = 0
            xb = binv @ self.b
            xb[np.abs(xb) < 1e-15] = 0.0

    def solve(self, c: np.ndarray):
        """Two-phase solve. Returns ``(value, x)`` or raises ``Infeasible``."""
        m, N = self.A.shape
        sign = np.where(self.b < 0, -1.0, 1.0)
        A = self.A * sign[:, None]
        self.b = self.b * sign
        # Phase I: artificial columns N..N+m-1 start as the basis.
        A1 = np.concatenate([A, np.eye(m)], axis=1)
        c1 = np.concatenate([np.zeros(N), np.ones(m)])
        basis = np.arange(N, N + m)
        binv = np.eye(m)
        allowed = np.ones(N + m, bool)
        basis, binv, xb = self._run(A1, c1, basis, binv, allowed)
        infeas = float(c1[basis] @ xb)
        if infeas > 1e-9 * max(1.0, float(np.abs(self.b).max())):
            raise Infeasible(f"phase I residual {infeas:.3e}")
        # Drive remaining zero-level artificials out of the basis.
        for r in range(m):
            if basis[r] >= N:
                row = binv[r] @ A
                row[basis[basis < N]] = 0.0
                js = np.nonzero(np.abs(row) > 1e-9)[0]
                if js.size:
                    j = int(js[0])
                    u = binv @ A1[:, j]
                    binv[r] /= u[r]
                    for i in range(m):
                        if i != r:
                            binv[i] -= u[i] * binv[r]
                    basis[r] = j
        # Phase II on the original columns only.
        c2 = np.concatenate([np.asarray(c, dtype=float), np.zeros(m)])
        allowed = np.concatenate([np.ones(N, bool), np.zeros(m, bool)])
        basis, binv, xb = self._run(A1, c2, basis, binv, allowed)
        # the product-form inverse drifts over many pivots; re-solve the final basis
        B = A1[:, basis]
        xb = np.linalg.solve(B, self.b)
        xb += np.linalg.solve(B, self.b - B @ xb)
        x = np.zeros(N)
        keep = basis < N
        x[basis[keep]] = np.clip(xb[keep], 0.0, None)
        return float(c2[basis] @ xb), x


def lp_envelope(dc: DiscreteCurve, x, side) -> LpSolution:
    """Extremal ``sum c_j gamma_last(t_j)`` subject to ``sum c_j gamma_bar(t_j) = x``, ``c`` in the simplex."""
    side = Side.parse(side)
    x = np.asarray(x, dtype=float).ravel()
    n = dc.n
    if x.size != n:
        raise ValueError(f"x must have {n} coordinates")
    if len(dc.ts) < n + 2:
        raise ValueError("need at least n + 2 atoms")
    A = np.vstack([np.ones(len(dc.ts)), dc.points[:, :n].T])
    b = np.concatenate([[1.0], x])
    obj = dc.points[:, n]
    c = -obj if side is Side.UPPER else obj
    lp = _Simplex(A, b)
    try:
        val, w = lp.solve(c)
    except Infeasible:
        return LpSolution(math.nan, {}, LpStatus.INFEASIBLE, lp.iterations)
    support = {int(i): float(w[i]) for i in np.nonzero(w > 0)[0]}
    value = float(sum(p * obj[i] for i, p in support.items()))
    return LpSolution(value, support, LpStatus.OPTIMAL, lp.iterations)


# ------------------------------------------------------------- membership


class Membership(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


def membership_batch(curve: CurveSpec, Y, tol: float = 1e-9, cfg: SolverConfig = DEFAULT) -> np.ndarray:
    """Status codes (``envelope.INTERIOR`` etc.) of points ``Y`` in ``conv(gamma)``.

    A point is boundary when it is within ``tol * (1 + diameter)`` of the hull
    boundary at some level of the recursion.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[1] != curve.dim:
        raise ValueError(f"points must have {curve.dim} coordinates")
    band = tol * (1.0 + hull_scale(curve))
    cfg = replace(cfg, boundary_tol=tol)
    if curve.dim == 1:
        c1 = curve.coords[0]
        ga, gb = float(c1(curve.a)), float(c1(curve.b))
        y = Y[:, 0]
        status = np.full(len(y), OUTSIDE)
        status[(y > ga + band) & (y < gb - band)] = INTERIOR
        status[(np.abs(y - ga) <= band) | (np.abs(y - gb) <= band)] = BOUNDARY
        return status
    lvl = _classify(curve, Y[:, :-1], tuple(Side), cfg, band)
    last = curve.coords[-1]
    z = {s: np.einsum("bk,bk->b", lvl.p[s], last(lvl.t[s])) for s in Side}
    yz = Y[:, -1]
    inner = (lvl.status == INTERIOR) | (lvl.status == BOUNDARY)
    status = np.full(len(Y), OUTSIDE)
    on = inner & ((np.abs(yz - z[Side.UPPER]) <= band) | (np.abs(yz - z[Side.LOWER]) <= band))
    inside = (lvl.status == INTERIOR) & ~on & (yz < z[Side.UPPER]) & (yz > z[Side.LOWER])
    status[on] = BOUNDARY
    status[inside] = INTERIOR
    status[lvl.status == FAILED] = FAILED
    return status


def hull_membership(curve: CurveSpec, y, tol: float = 1e-9, cfg: SolverConfig = DEFAULT) -> Membership:
    status = int(membership_batch(curve, np.asarray(y, dtype=float)[None, :], tol, cfg)[0])
    if status == FAILED:
        raise NoConvergence("envelope inversion failed during membership test")
    return {INTERIOR: Membership.INTERIOR, BOUNDARY: Membership.BOUNDARY}.get(status, Membership.OUTSIDE)


# ------------------------------------------------------------- Monte Carlo


def _coordinate_extrema(coord, a: float, b: float, samples: int = 4097) -> tuple[float, float]:
    """Min and max of one coordinate: endpoints plus bisected roots of its derivative."""
    ts = np.linspace(a, b, samples)
    d = coord(ts, 1)
    cand = [a, b]
    for i in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)[0]:
        lo, hi = ts[i], ts[i + 1]
        dlo = coord(lo, 1)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            dm = coord(mid, 1)
            if np.sign(dm) == np.sign(dlo):
                lo, dlo = mid, dm
            else:
                hi = mid
        cand.append(0.5 * (lo + hi))
    vals = coord(np.array(cand))
    return float(vals.min()), float(vals.max())


def bounding_box(curve: CurveSpec) -> np.ndarray:
    """Per-coordinate ``[min, max]`` of the curve, shape ``(dim, 2)``."""
    return np.array([_coordinate_extrema(c, curve.a, curve.b) for c in curve.coords])


MC_BLOCK = 1 << 16


def _block_hits(curve, box, seed, block, size, tol, cfg) -> int:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))
    Y = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((size, curve.dim))
    status = membership_batch(curve, Y, tol, cfg)
    if np.any(status == FAILED):
        raise NoConvergence("envelope inversion failed during Monte Carlo membership")
    return int(np.count_nonzero((status == INTERIOR) | (status == BOUNDARY)))


def mc_volume(
    curve: CurveSpec,
    samples: int,
    seed: int = 0,
    threads: int = 1,
    tol: float = 1e-9,
    cfg: SolverConfig = DEFAULT,
) -> tuple[float, float]:
    """Hit-or-miss volume estimate and its binomial standard error.

    Samples are drawn in fixed-size blocks, each from its own counter-based
    stream keyed by ``(seed, block index)``, so the result does not depend on
    ``threads``.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    box = bounding_box(curve)
    vol = float(np.prod(box[:, 1] - box[:, 0]))
    sizes = [min(MC_BLOCK, samples - s) for s in range(0, samples, MC_BLOCK)]
    jobs = [(curve, box, seed, i, size, tol, cfg) for i, size in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = sum(pool.map(lambda j: _block_hits(*j), jobs))
    else:
        hits = sum(_block_hits(*j) for j in jobs)
    frac = hits / samples
    return vol * frac, vol * math.sqrt(frac * (1.0 - frac) / samples)


# ------------------------------------------------------------- mesh area


@dataclass(frozen=True)
class MeshArea:
    area: float
    facets: int
    degenerate: int


def mesh_area(mesh: BoundaryMesh | tuple[np.ndarray, np.ndarray]) -> MeshArea:
    """Sum of facet contents via Gram determinants of edge vectors."""
    if isinstance(mesh, BoundaryMesh):
        verts, facets = mesh.vertices, mesh.facets
    else:
        verts, facets = mesh
    verts = np.asarray(verts, dtype=float)
    facets = np.asarray(facets, dtype=int)
    meas = simplex_measures(verts, facets)
    return MeshArea(float(np.sum(meas)), len(facets), int(np.count_nonzero(meas == 0.0)))
