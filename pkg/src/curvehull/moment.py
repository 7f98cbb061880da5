"""Sharp bounds for ``E gamma_last(Y)`` given ``E gamma_bar(Y) = x``.

For a random variable ``Y`` on ``[a, b]`` the attainable values of
``E gamma_last(Y)`` form the interval ``[b_inf(x), b_sup(x)]``, and both ends
are attained by the atomic distributions that parametrize the lower and
upper hull. On the moment curve ``(t, ..., t^(n+1))`` over ``[0, 1]`` the two
ends are also the roots of Hankel determinant equations, solved here by one
linear elimination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curve import CurveSpec
from .envelope import (
    DEFAULT,
    FAILED,
    OUTSIDE,
    SolverConfig,
    envelope,
    envelope_batch,
)
from .errors import DegeneratePivot, NoConvergence, NotInterior, OutsideHull
from .hull_param import Side


@dataclass(frozen=True)
class PrincipalRepresentation:
    atoms: tuple[float, ...]
    probs: tuple[float, ...]
    side: Side

    def moments(self, curve: CurveSpec) -> np.ndarray:
        """``E gamma(Y)`` for all coordinates, last one included."""
        g = curve.values(np.array(self.atoms))
        return np.asarray(self.probs) @ g

    def objective(self, curve: CurveSpec) -> float:
        return float(self.moments(curve)[-1])


def _points(curve: CurveSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != curve.n:
        raise ValueError(f"need {curve.n} moments, got {x.size}")
    return x


def moment_bounds(curve: CurveSpec, x, cfg: SolverConfig = DEFAULT) -> tuple[float, float]:
    """``(lower, upper)`` range of ``E gamma_last(Y)`` over all ``Y`` with ``E gamma_bar(Y) = x``."""
    x = _points(curve, x)
    lo, hi, status = moment_bounds_batch(curve, x[None, :], cfg)
    if status[0] == OUTSIDE:
        raise OutsideHull(f"no distribution on [{curve.a}, {curve.b}] has moments {x.tolist()}")
    if status[0] == FAILED:
        raise NoConvergence("envelope inversion failed")
    return float(lo[0]), float(hi[0])


def moment_bounds_batch(curve: CurveSpec, X, cfg: SolverConfig = DEFAULT):
    """Vectorized bounds; returns ``(lower, upper, status)`` with NaN where infeasible."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    up = envelope_batch(curve, X, Side.UPPER, cfg)
    lo = envelope_batch(curve, X, Side.LOWER, cfg)
    status = np.maximum(up.status, lo.status)
    return lo.values, up.values, status


def optimizer_distribution(curve: CurveSpec, x, side, cfg: SolverConfig = DEFAULT) -> PrincipalRepresentation:
    """Atomic distribution attaining the lower or upper bound.

    Upper side: for even ``n`` atoms ``x_1..x_l`` and ``b``; for odd ``n`` atoms
    ``a``, ``x_2..x_l`` and ``b``. Lower side: for even ``n`` atoms ``a`` and
    ``y_1..y_l``; for odd ``n`` atoms ``y_1..y_l``. Atoms with zero mass are
    dropped.
    """
    side = Side.parse(side)
    res = envelope(curve, _points(curve, x), side, certify=False, cfg=cfg)
    probs = np.asarray(res.probs)
    probs = probs / probs.sum()
    return PrincipalRepresentation(res.atoms, tuple(float(p) for p in probs), side)


def atom_budget(n: int) -> int:
    """Largest number of atoms a principal representation can use."""
    return (n + 3) // 2


def expected_atom_count(n: int, side) -> int:
    """Atom count of the principal representation at an interior point."""
    side = Side.parse(side)
    ell = (n + 1) // 2
    if n % 2 == 0 or side is Side.UPPER:
        return ell + 1
    return ell


# -------------------------------------------------------------- Hankel forms


def _extended(x, k: int) -> np.ndarray:
    y = np.concatenate([[1.0], np.asarray(x, dtype=float).ravel()])
    if len(y) <= k:
        raise ValueError(f"need at least {k} moments, got {len(y) - 1}")
    return y


def _s_matrix(y: np.ndarray, k: int) -> np.ndarray:
    m = k // 2
    shift = k % 2
    i = np.arange(m + 1)
    return y[i[:, None] + i[None, :] + shift]


def _k_matrix(y: np.ndarray, k: int) -> np.ndarray:
    if k % 2 == 0:
        i = np.arange(k // 2)
        idx = i[:, None] + i[None, :]
        return y[idx + 1] - y[idx + 2]
    i = np.arange(k // 2 + 1)
    idx = i[:, None] + i[None, :]
    return y[idx] - y[idx + 1]


def _det(m: np.ndarray) -> float:
    return float(np.linalg.det(m)) if m.size else 1.0


def hankel_S(x, k: int) -> float:
    """``S_k``: ``det[x_{i+j}]_{0..k/2}`` for even ``k``, ``det[x_{i+j+1}]`` for odd ``k``; ``x_0 = 1``."""
    return _det(_s_matrix(_extended(x, k), k))


def hankel_K(x, k: int) -> float:
    """``K_k``: Hankel determinants of the differences ``x_i - x_{i+1}``; ``x_0 = 1``.

    Even ``k``: ``det[x_{i+j+1} - x_{i+j+2}]_{0..k/2-1}``; odd ``k``:
    ``det[x_{i+j} - x_{i+j+1}]_{0..(k-1)/2}``.
    """
    return _det(_k_matrix(_extended(x, k), k))


def moment_space_interior(x) -> bool:
    """Whether ``x`` is an interior point of the moment space of ``[0, 1]``.

    Uses positivity of all ``S_k`` and ``K_k``, ``k = 1..n``.
    """
    x = np.asarray(x, dtype=float).ravel()
    return all(hankel_S(x, k) > 0 and hankel_K(x, k) > 0 for k in range(1, len(x) + 1))


def moment_curve_envelope(x, side) -> float:
    """Upper or lower envelope for the moment curve on ``[0, 1]`` from ``K_{n+1} = 0`` / ``S_{n+1} = 0``.

    The unknown ``x_{n+1}`` only enters the bottom-right entry of the Hankel
    matrix, so the determinant is affine in it and one cofactor solve gives
    the root. The pivot is the leading minor ``K_{n-1}`` or ``S_{n-1}``.
    """
    side = Side.parse(side)
    x = np.asarray(x, dtype=float).ravel()
    n = len(x)
    if n < 1:
        raise ValueError("need at least one moment")
    k = n + 1
    y = np.concatenate([[1.0], x, [0.0]])
    m = _k_matrix(y, k) if side is Side.UPPER else _s_matrix(y, k)
    pivot = _det(m[:-1, :-1])
    if not pivot > 0:
        raise DegeneratePivot(f"leading minor {pivot:.3e} vanishes; x is on the boundary")
    if not moment_space_interior(x):
        raise NotInterior(f"x={x.tolist()} is not interior to the moment space of [0, 1]")
    m0 = m.copy()
    m0[-1, -1] = 0.0
    e = -_det(m0) / pivot
    # the solved entry is x_n - x_{n+1} in the K form and x_{n+1} in the S form
    return float(x[-1] - e) if side is Side.UPPER else float(e)
