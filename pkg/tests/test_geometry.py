import math

import numpy as np
import pytest

from curvehull import oracle
from curvehull.curve import expmoment, moment, poly
from curvehull.errors import IntegrandError
from curvehull.geometry import (
    QuadratureConfig,
    area_integrands,
    dirichlet_integral,
    hull_surface_area,
    hull_volume,
    integrate_corner_simplex,
    integrate_ordered_simplex,
    volume_integrands,
)
from curvehull.hull_param import Side, sample_boundary


def classical_moment_volume(n: int) -> float:
    """Volume of the hull of ``(t, ..., t^n)`` on ``[0, 1]``: ``prod ((k-1)!)^2 / (2k-1)!``."""
    return math.prod(math.factorial(k - 1) ** 2 / math.factorial(2 * k - 1) for k in range(1, n + 1))


def test_ordered_simplex_examples():
    one = lambda x: np.ones(len(x))
    assert integrate_ordered_simplex(one, 2, (0, 1)).value == pytest.approx(0.5, rel=1e-14)
    assert integrate_ordered_simplex(one, 3, (0, 1)).value == pytest.approx(1 / 6, rel=1e-14)
    diff = lambda x: x[:, 1] - x[:, 0]
    assert integrate_ordered_simplex(diff, 2, (0, 1)).value == pytest.approx(1 / 6, rel=1e-14)
    assert integrate_ordered_simplex(one, 2, (1, 3)).value == pytest.approx(2.0, rel=1e-14)
    assert integrate_ordered_simplex(lambda x: np.full(len(x), 7.0), 0, (0, 1)).value == 7.0


def test_ordered_simplex_rejects_non_finite():
    with pytest.raises(IntegrandError):
        integrate_ordered_simplex(lambda x: np.full(len(x), np.nan), 1, (0, 1))


@pytest.mark.parametrize(
    "exps, rel",
    [((1, 1, 1), 1e-13), ((2, 3, 1), 1e-13), ((3, 2, 2, 2), 1e-13), ((1.5, 2.5, 1), 1e-6)],
)
def test_dirichlet_identity_against_quadrature(exps, rel):
    p0, ps = exps[0], np.array(exps[1:], dtype=float)
    f = lambda w: np.prod(w ** (ps - 1), axis=1) * (1 - w.sum(axis=1)) ** (p0 - 1)
    got = integrate_corner_simplex(f, len(ps)).value
    assert got == pytest.approx(dirichlet_integral(exps), rel=rel)


def test_dirichlet_closed_form():
    assert dirichlet_integral((1, 1, 1)) == pytest.approx(0.5)
    assert dirichlet_integral((2, 2)) == pytest.approx(1 / 6)


def test_classical_volume_reference():
    assert classical_moment_volume(2) == pytest.approx(1 / 6)
    assert classical_moment_volume(3) == pytest.approx(1 / 180)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_moment_curve_volume(n):
    res = hull_volume(moment(n))
    ref = classical_moment_volume(n)
    assert res.value == pytest.approx(ref, rel=1e-9)
    v1, v2 = res.variants
    assert v1 == pytest.approx(v2, rel=1e-9)
    assert res.est_error < 1e-9 * ref


def test_volume_on_shifted_interval_scales():
    # (t, t^2) on [0, 2]: the area between chord and parabola is 4/3
    assert hull_volume(moment(2, 0.0, 2.0)).value == pytest.approx(4 / 3, rel=1e-12)


def test_volume_non_polynomial_against_monte_carlo():
    c = expmoment(3)
    res = hull_volume(c)
    assert res.variants[0] == pytest.approx(res.variants[1], rel=1e-9)
    est, se = oracle.mc_volume(c, 200_000, seed=1)
    assert abs(est - res.value) < 4 * se


def test_negative_orientation_raises():
    # (t, -t^2) turns the other way; the formulas give a negative number
    with pytest.raises(IntegrandError):
        hull_volume(poly([[0, 1], [0, 0, -1]], 0.0, 1.0))


def test_integrand_structure():
    assert [ell for ell, _, _ in volume_integrands(moment(3))] == [1, 2]
    assert [ell for ell, _, _ in volume_integrands(moment(4))] == [2, 2]
    assert [ell for ell, _, _ in area_integrands(moment(2))] == [0, 1]
    with pytest.raises(ValueError):
        volume_integrands(moment(1))
    with pytest.raises(ValueError):
        area_integrands(moment(1))


def test_perimeter_of_parabola_hull():
    res = hull_surface_area(moment(2))
    chord, arc = res.variants
    assert chord == pytest.approx(math.sqrt(2), rel=1e-15)
    assert arc == pytest.approx((2 * math.sqrt(5) + math.asinh(2)) / 4, rel=1e-12)


def test_surface_area_against_mesh():
    c = moment(3)
    quad = hull_surface_area(c)
    mesh = sum(oracle.mesh_area(sample_boundary(c, s, 200)).area for s in Side)
    assert quad.value == pytest.approx(mesh, rel=5e-3)
    # upper and lower pieces separately
    for s, part in zip(Side, quad.variants):
        assert part == pytest.approx(oracle.mesh_area(sample_boundary(c, s, 200)).area, rel=5e-3)


def test_surface_area_odd_n_against_mesh():
    c = moment(4)
    quad = hull_surface_area(c, QuadratureConfig(rule_order=12, subdivisions=2))
    mesh = sum(oracle.mesh_area(sample_boundary(c, s, 40)).area for s in Side)
    assert quad.value == pytest.approx(mesh, rel=1e-2)
