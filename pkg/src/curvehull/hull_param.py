"""Parametric maps onto the upper and lower hull.

A parameter is a set of convex weights and ordered knots. Each ``(side,
parity of n)`` pair fixes which atoms are anchored at the interval endpoints,
which weight is implicit (``1 - sum``) and how many knots are free:

===========  ===============================  ==============================
n            Upper                            Lower
===========  ===============================  ==============================
2l           x_1..x_l free, b implicit         a implicit, x_1..x_l free
2l - 1       a implicit, x_2..x_l, b (beta_1)  x_1 implicit, x_2..x_l free
===========  ===============================  ==============================

Weights are always stored without the implicit one. For odd ``n`` the free
weights are ``(beta_1, beta_2, ..., beta_l)`` on the upper side (``beta_1``
sits on ``gamma(b)``) and ``(beta_2, ..., beta_l)`` on the lower side.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .curve import CurveSpec
from .errors import ShapeMismatch, SingularJacobian


class Side(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"

    @classmethod
    def parse(cls, value) -> "Side":
        if isinstance(value, Side):
            return value
        v = str(value).lower()
        if v in ("upper", "sup", "max", "u"):
            return cls.UPPER
        if v in ("lower", "inf", "min", "l"):
            return cls.LOWER
        raise ValueError(f"unknown side {value!r}")


FIXED_A, FIXED_B = -1, -2  # knot slots for atoms pinned at the endpoints
IMPLICIT = -1  # weight slot for the implicit 1 - sum weight


@dataclass(frozen=True)
class Layout:
    """Atom structure of one ``(n, side)`` pair.

    ``atoms`` lists ``(knot_slot, weight_slot)`` in increasing position; a knot
    slot is an index into the knots or ``FIXED_A``/``FIXED_B``, a weight slot
    is an index into the free weights or ``IMPLICIT``.
    """

    n: int
    side: Side
    n_weights: int
    n_knots: int
    atoms: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return len(self.atoms)

    def knot_weight_slots(self) -> list[int]:
        """Weight slot attached to each knot, in knot order."""
        out = [0] * self.n_knots
        for k, w in self.atoms:
            if k >= 0:
                out[k] = w
        return out


@lru_cache(maxsize=None)
def layout(n: int, side: Side) -> Layout:
    side = Side.parse(side)
    if n < 1:
        raise ValueError("n must be at least 1")
    ell = (n + 1) // 2
    if n % 2 == 0:
        free = tuple((j, j) for j in range(ell))
        if side is Side.UPPER:
            atoms = free + ((FIXED_B, IMPLICIT),)
        else:
            atoms = ((FIXED_A, IMPLICIT),) + free
        return Layout(n, side, ell, ell, atoms)
    if side is Side.UPPER:
        # knots x_2..x_l are stored at 0..l-2, weights beta_1..beta_l at 0..l-1
        inner = tuple((j, j + 1) for j in range(ell - 1))
        atoms = ((FIXED_A, IMPLICIT),) + inner + ((FIXED_B, 0),)
        return Layout(n, side, ell, ell - 1, atoms)
    atoms = ((0, IMPLICIT),) + tuple((j, j - 1) for j in range(1, ell))
    return Layout(n, side, ell - 1, ell, atoms)


@dataclass(frozen=True)
class SimplexParam:
    side: Side
    n: int
    weights: tuple[float, ...]
    knots: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "side", Side.parse(self.side))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "knots", tuple(float(x) for x in self.knots))
        lay = layout(self.n, self.side)
        if len(self.weights) != lay.n_weights or len(self.knots) != lay.n_knots:
            raise ShapeMismatch(
                f"n={self.n} {self.side.value} needs {lay.n_weights} weights and "
                f"{lay.n_knots} knots, got {len(self.weights)} and {len(self.knots)}"
            )

    @property
    def layout(self) -> Layout:
        return layout(self.n, self.side)

    @property
    def theta(self) -> np.ndarray:
        """Flat parameter vector (weights then knots)."""
        return np.array(self.weights + self.knots)

    @classmethod
    def from_theta(cls, side, n: int, theta: Sequence[float]) -> "SimplexParam":
        lay = layout(n, Side.parse(side))
        theta = list(theta)
        return cls(side, n, theta[: lay.n_weights], theta[lay.n_weights :])

    def atoms(self, curve: CurveSpec) -> tuple[np.ndarray, np.ndarray]:
        t, p = atoms_batch(self.layout, curve.interval, self.theta[None, :])
        return t[0], p[0]


def validate(curve: CurveSpec, p: SimplexParam, tol: float = 1e-12) -> None:
    """Raise if ``p`` does not belong to its domain for this curve."""
    if p.n != curve.n:
        raise ShapeMismatch(f"parameter is for n={p.n}, curve has n={curve.n}")
    w, x = np.array(p.weights), np.array(p.knots)
    if np.any(w < -tol) or w.sum() > 1 + tol:
        raise ValueError("weights must be nonnegative with sum at most 1")
    if np.any(x < curve.a - tol) or np.any(x > curve.b + tol) or np.any(np.diff(x) < -tol):
        raise ValueError("knots must be nondecreasing inside the interval")


# ------------------------------------------------------------ batch kernels


def atoms_batch(lay: Layout, interval, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Atom positions and probabilities, each of shape ``(B, lay.size)``."""
    a, b = interval
    theta = np.asarray(theta, dtype=float)
    w = theta[:, : lay.n_weights]
    x = theta[:, lay.n_weights :]
    B = theta.shape[0]
    t = np.empty((B, lay.size))
    p = np.empty((B, lay.size))
    implicit = 1.0 - w.sum(axis=1)
    for i, (ks, ws) in enumerate(lay.atoms):
        t[:, i] = a if ks == FIXED_A else b if ks == FIXED_B else x[:, ks]
        p[:, i] = implicit if ws == IMPLICIT else w[:, ws]
    return t, p


def map_batch(curve: CurveSpec, lay: Layout, theta: np.ndarray, dims: int | None = None) -> np.ndarray:
    """``sum_j p_j gamma(t_j)`` using the first ``dims`` coordinates."""
    t, p = atoms_batch(lay, curve.interval, theta)
    g = curve.values(t)
    if dims is not None:
        g = g[..., :dims]
    return np.einsum("bk,bkd->bd", p, g)


def jacobian_batch(curve: CurveSpec, lay: Layout, theta: np.ndarray, dims: int) -> np.ndarray:
    """Derivative of the map with respect to (weights, knots); shape ``(B, dims, n)``.

    A free weight column is ``gamma(t_j) - gamma(t_implicit)``; a knot column is
    ``w_j * gamma'(x_j)``, with ``w_j`` possibly the implicit weight.
    """
    t, p = atoms_batch(lay, curve.interval, theta)
    g = curve.values(t)[..., :dims]
    B = theta.shape[0]
    jac = np.empty((B, dims, lay.n_weights + lay.n_knots))
    implicit = [i for i, (_, ws) in enumerate(lay.atoms) if ws == IMPLICIT][0]
    for i, (ks, ws) in enumerate(lay.atoms):
        if ws != IMPLICIT:
            jac[:, :, ws] = g[:, i] - g[:, implicit]
        if ks >= 0:
            dg = curve.values(t[:, i], 1)[..., :dims]
            jac[:, :, lay.n_weights + ks] = p[:, i, None] * dg
    return jac


# ---------------------------------------------------------------- public maps


def _check_side(p: SimplexParam, side: Side):
    if p.side is not side:
        raise ShapeMismatch(f"expected a {side.value} parameter, got {p.side.value}")


def upper_map(curve: CurveSpec, p: SimplexParam) -> np.ndarray:
    """Point of the upper hull in ``R^(n+1)``."""
    _check_side(p, Side.UPPER)
    validate(curve, p)
    return map_batch(curve, p.layout, p.theta[None, :])[0]


def lower_map(curve: CurveSpec, p: SimplexParam) -> np.ndarray:
    """Point of the lower hull in ``R^(n+1)``."""
    _check_side(p, Side.LOWER)
    validate(curve, p)
    return map_batch(curve, p.layout, p.theta[None, :])[0]


def full_map(curve: CurveSpec, p: SimplexParam) -> np.ndarray:
    validate(curve, p)
    return map_batch(curve, p.layout, p.theta[None, :])[0]


def upper_map_projected(curve: CurveSpec, p: SimplexParam) -> np.ndarray:
    return upper_map(curve, p)[:-1]


def lower_map_projected(curve: CurveSpec, p: SimplexParam) -> np.ndarray:
    return lower_map(curve, p)[:-1]


def is_strictly_interior(curve: CurveSpec, p: SimplexParam) -> bool:
    w, x = np.array(p.weights), np.array(p.knots)
    if np.any(w <= 0) or w.sum() >= 1:
        return False
    if x.size and (x[0] <= curve.a or x[-1] >= curve.b or np.any(np.diff(x) <= 0)):
        return False
    return True


def jacobian_projected(curve: CurveSpec, p: SimplexParam) -> tuple[np.ndarray, float]:
    """Jacobian of the projected map and its determinant at an interior ``p``."""
    validate(curve, p)
    if not is_strictly_interior(curve, p):
        raise SingularJacobian("parameter is on the boundary of its domain")
    jac = jacobian_batch(curve, p.layout, p.theta[None, :], curve.n)[0]
    return jac, float(np.linalg.det(jac))


# ------------------------------------------------------------ canonical form


def param_from_atoms(
    curve: CurveSpec, n: int, side, positions, probs, tol: float = 0.0
) -> SimplexParam:
    """Fit an atomic measure into the ``(n, side)`` layout.

    Atoms within ``tol`` of each other are merged, atoms at an endpoint are
    absorbed by a pinned endpoint atom when the layout has one, zero-weight
    free atoms are dropped and unused knot slots are padded with weight 0 at
    ``b``.
    """
    side = Side.parse(side)
    lay = layout(n, side)
    a, b = curve.interval
    order = np.argsort(np.asarray(positions, dtype=float), kind="stable")
    pos = np.asarray(positions, dtype=float)[order]
    pr = np.asarray(probs, dtype=float)[order]
    merged: list[list[float]] = []
    for t, w in zip(pos, pr):
        if merged and abs(t - merged[-1][0]) <= tol:
            merged[-1][1] += w
        else:
            merged.append([float(t), float(w)])
    pinned = {ks: 0.0 for ks, _ in lay.atoms if ks < 0}
    free: list[tuple[float, float]] = []
    for t, w in merged:
        if FIXED_A in pinned and abs(t - a) <= tol:
            pinned[FIXED_A] += w
        elif FIXED_B in pinned and abs(t - b) <= tol:
            pinned[FIXED_B] += w
        elif w > 0:
            free.append((t, w))
    if len(free) > lay.n_knots:
        raise ShapeMismatch(f"{len(free)} free atoms do not fit {lay.n_knots} knot slots")
    free += [(b, 0.0)] * (lay.n_knots - len(free))
    weights = [0.0] * lay.n_weights
    knots = [t for t, _ in free]
    for ks, ws in lay.atoms:
        if ws == IMPLICIT:
            continue
        weights[ws] = pinned[ks] if ks < 0 else free[ks][1]
    return SimplexParam(side, n, weights, knots)


def canonicalize(curve: CurveSpec, p: SimplexParam, tol: float = 0.0) -> SimplexParam:
    """Drop zero-weight atoms, merge coincident knots and re-sort. Idempotent."""
    t, w = p.atoms(curve)
    return param_from_atoms(curve, p.n, p.side, t, w, tol=tol)


# ------------------------------------------------------------ parameter cube


def corner_from_cube(u: np.ndarray) -> np.ndarray:
    """Map ``[0,1]^k`` onto the corner simplex ``{w >= 0, sum w <= 1}``."""
    s = ordered_from_cube(u, 0.0, 1.0)
    return np.diff(np.concatenate([np.zeros(s.shape[:-1] + (1,)), s], axis=-1), axis=-1)


def ordered_from_cube(u: np.ndarray, a: float, b: float) -> np.ndarray:
    """Triangular map ``x_1 = a + (b-a) u_1``, ``x_{i+1} = x_i + (b - x_i) u_{i+1}``."""
    u = np.asarray(u, dtype=float)
    x = np.empty_like(u)
    prev = np.full(u.shape[:-1], a, dtype=float)
    for i in range(u.shape[-1]):
        prev = prev + (b - prev) * u[..., i]
        x[..., i] = prev
    return x


def theta_from_cube(lay: Layout, interval, u: np.ndarray) -> np.ndarray:
    w = corner_from_cube(u[..., : lay.n_weights])
    x = ordered_from_cube(u[..., lay.n_weights :], *interval)
    return np.concatenate([w, x], axis=-1)


# ------------------------------------------------------------ boundary meshes


@dataclass(frozen=True)
class BoundaryMesh:
    vertices: np.ndarray  # (V, n+1)
    facets: np.ndarray  # (F, n+1) vertex indices, each facet an n-simplex
    params: np.ndarray  # (V, n) parameter vector per vertex
    sides: tuple[Side, ...]  # per vertex
    n: int
    dropped_facets: int = 0


def _kuhn_simplices(n: int) -> list[list[tuple[int, ...]]]:
    """Corners of the n! simplices of the Kuhn triangulation of a unit cube."""
    out = []
    for perm in itertools.permutations(range(n)):
        corner = [0] * n
        simplex = [tuple(corner)]
        for axis in perm:
            corner[axis] = 1
            simplex.append(tuple(corner))
        out.append(simplex)
    return out


def sample_boundary(curve: CurveSpec, side, resolution: int) -> BoundaryMesh:
    """Tensor grid over the parameter cube mapped through the hull map.

    Vertices are kept in grid order (last axis fastest). Facets are the Kuhn
    simplices of each grid cell; facets that collapse to zero measure (where
    the map pinches, e.g. at a vanishing weight) are dropped.
    """
    side = Side.parse(side)
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    n = curve.n
    lay = layout(n, side)
    axis = np.linspace(0.0, 1.0, resolution)
    grid = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    theta = theta_from_cube(lay, curve.interval, grid)
    verts = map_batch(curve, lay, theta)

    strides = np.array([resolution ** (n - 1 - i) for i in range(n)])
    cells = np.stack(
        np.meshgrid(*([np.arange(resolution - 1)] * n), indexing="ij"), axis=-1
    ).reshape(-1, n)
    base = cells @ strides
    facets = []
    for simplex in _kuhn_simplices(n):
        offs = [int(np.dot(c, strides)) for c in simplex]
        facets.append(np.stack([base + o for o in offs], axis=1))
    facets = np.concatenate(facets, axis=0) if facets else np.empty((0, n + 1), int)

    measure = simplex_measures(verts, facets)
    scale = max(float(np.ptp(verts, axis=0).max()), 1e-300)
    keep = measure > 1e-12 * scale**n / math.factorial(n) / (resolution - 1) ** n
    facets = facets[keep]
    return BoundaryMesh(
        vertices=verts,
        facets=facets,
        params=theta,
        sides=(side,) * len(verts),
        n=n,
        dropped_facets=int((~keep).sum()),
    )


def simplex_measures(vertices: np.ndarray, facets: np.ndarray) -> np.ndarray:
    """k-dimensional content of each facet via the Gram determinant of its edges."""
    if len(facets) == 0:
        return np.zeros(0)
    v = vertices[facets]
    e = v[:, 1:, :] - v[:, :1, :]
    k = e.shape[1]
    gram = np.einsum("fid,fjd->fij", e, e)
    det = np.clip(np.linalg.det(gram), 0.0, None)
    return np.sqrt(det) / math.factorial(k)


def write_polygon_text(mesh: BoundaryMesh, fh) -> None:
    """Vertex lines ``v x y ...`` followed by 1-based facet lines ``f i j ...``."""
    fh.write(f"# boundary mesh n={mesh.n} vertices={len(mesh.vertices)} facets={len(mesh.facets)}\n")
    for v in mesh.vertices:
        fh.write("v " + " ".join(f"{c:.17g}" for c in v) + "\n")
    for f in mesh.facets:
        fh.write("f " + " ".join(str(int(i) + 1) for i in f) + "\n")


def write_table(mesh: BoundaryMesh, fh, delimiter: str = ",") -> None:
    """One row per vertex: side, parameter vector, point."""
    lay = layout(mesh.n, mesh.sides[0] if mesh.sides else Side.UPPER)
    head = ["side"] + [f"w{i + 1}" for i in range(lay.n_weights)]
    head += [f"x{i + 1}" for i in range(lay.n_knots)]
    head += [f"p{i + 1}" for i in range(mesh.vertices.shape[1])]
    fh.write(delimiter.join(head) + "\n")
    for s, th, v in zip(mesh.sides, mesh.params, mesh.vertices):
        row = [s.value] + [f"{c:.17g}" for c in th] + [f"{c:.17g}" for c in v]
        fh.write(delimiter.join(row) + "\n")
