import numpy as np
import pytest

from curvehull.curve import moment
from curvehull.envelope import envelope_batch
from curvehull.errors import Infeasible
from curvehull.hull_param import Side, sample_boundary
from curvehull.oracle import (
    LpStatus,
    Membership,
    _Simplex,
    bounding_box,
    discretize,
    hull_membership,
    lp_envelope,
    mc_volume,
    membership_batch,
    mesh_area,
)

M3 = moment(3)


def test_simplex_small_lp():
    # min -x - y  s.t. x + y + s = 4, x + 3y + u = 6
    A = np.array([[1.0, 1.0, 1.0, 0.0], [1.0, 3.0, 0.0, 1.0]])
    lp = _Simplex(A, np.array([4.0, 6.0]))
    val, x = lp.solve(np.array([-1.0, -2.0, 0.0, 0.0]))
    assert val == pytest.approx(-5.0)
    np.testing.assert_allclose(x[:2], [3.0, 1.0])


def test_simplex_infeasible():
    A = np.array([[1.0, 1.0]])
    with pytest.raises(Infeasible):
        _Simplex(A, np.array([-1.0])).solve(np.array([1.0, 1.0]))


def test_simplex_degenerate_does_not_cycle():
    # a classic degenerate instance; Bland's rule terminates
    A = np.array(
        [
            [0.5, -5.5, -2.5, 9.0, 1.0, 0.0, 0.0],
            [0.5, -1.5, -0.5, 1.0, 0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        ]
    )
    c = np.array([-10.0, 57.0, 9.0, 24.0, 0.0, 0.0, 0.0])
    lp = _Simplex(A, np.array([0.0, 0.0, 1.0]))
    val, x = lp.solve(c)
    assert val == pytest.approx(-1.0)
    assert lp.iterations < 100


@pytest.mark.parametrize("N", [251, 1001, 4001])
def test_lp_envelope_examples(N):
    dc = discretize(M3, N)
    lo = lp_envelope(dc, [0.5, 0.3], Side.LOWER)
    hi = lp_envelope(dc, [0.5, 0.45], Side.UPPER)
    assert lo.status is LpStatus.OPTIMAL and hi.status is LpStatus.OPTIMAL
    assert lo.value == pytest.approx(0.18, abs=2e-4)
    assert hi.value == pytest.approx(0.445, abs=2e-4)
    assert sum(lo.weights.values()) == pytest.approx(1.0)
    assert len(lo.weights) <= 3


def test_lp_envelope_on_curve_and_infeasible():
    dc = discretize(M3, 1001)
    for side in Side:
        assert lp_envelope(dc, [0.5, 0.25], side).value == pytest.approx(0.125, abs=1e-9)
    assert lp_envelope(dc, [2.0, 0.0], Side.UPPER).status is LpStatus.INFEASIBLE
    with pytest.raises(ValueError):
        lp_envelope(dc, [0.5], Side.UPPER)


def test_lp_never_exceeds_exact_upper_envelope():
    rng = np.random.default_rng(4)
    curve = moment(4)
    dc = discretize(curve, 501)
    t = rng.uniform(0, 1, (20, 6))
    p = rng.dirichlet(np.ones(6), 20)
    X = np.einsum("bk,bkd->bd", p, curve.values(t))[:, :3]
    exact = envelope_batch(curve, X, Side.UPPER).values
    for x, v in zip(X, exact):
        assert lp_envelope(dc, x, Side.UPPER).value <= v + 1e-9


def test_membership_examples():
    assert hull_membership(M3, M3.eval(0.3)) is Membership.BOUNDARY
    rng = np.random.default_rng(0)
    y = M3.values(rng.uniform(0, 1, 5)).mean(axis=0)
    assert hull_membership(M3, y) is Membership.INTERIOR
    assert hull_membership(M3, M3.eval(1.0) + np.array([1.0, 0.0, 0.0])) is Membership.OUTSIDE


def test_membership_parabola_exact():
    rng = np.random.default_rng(1)
    Y = rng.uniform(0, 1, (20000, 2))
    status = membership_batch(moment(2), Y)
    truth = (Y[:, 0] ** 2 <= Y[:, 1]) & (Y[:, 1] <= Y[:, 0])
    np.testing.assert_array_equal(status != 2, truth)


def test_bounding_box():
    np.testing.assert_allclose(bounding_box(M3), [[0, 1]] * 3)
    box = bounding_box(moment(3, -1.0, 1.0))
    np.testing.assert_allclose(box, [[-1, 1], [0, 1], [-1, 1]], atol=1e-12)


def test_mc_volume_parabola_and_moment3():
    est, se = mc_volume(moment(2), 1_000_000, seed=0)
    assert abs(est - 1 / 6) < 3 * se
    est, se = mc_volume(M3, 200_000, seed=7)
    assert abs(est - 1 / 180) < 3 * se


def test_mc_volume_reproducible_across_threads():
    a = mc_volume(M3, 150_000, seed=11, threads=1)
    b = mc_volume(M3, 150_000, seed=11, threads=4)
    assert a == b
    assert mc_volume(M3, 150_000, seed=12) != a


def test_mc_volume_rejects_zero_samples():
    with pytest.raises(ValueError):
        mc_volume(M3, 0)


def test_mesh_area_examples():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    assert mesh_area((verts, np.array([[0, 1, 2], [0, 2, 3]]))).area == pytest.approx(1.0)
    chord = sample_boundary(moment(2), Side.UPPER, 2)
    assert mesh_area(chord).area == pytest.approx(np.sqrt(2.0))
    res = mesh_area(sample_boundary(M3, Side.LOWER, 20))
    assert res.facets > 0 and res.degenerate == 0
