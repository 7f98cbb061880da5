import numpy as np
import pytest

from curvehull.curve import moment
from curvehull.errors import DegeneratePivot, NotInterior, OutsideHull
from curvehull.hull_param import Side
from curvehull.moment import (
    PrincipalRepresentation,
    atom_budget,
    expected_atom_count,
    hankel_K,
    hankel_S,
    moment_bounds,
    moment_bounds_batch,
    moment_curve_envelope,
    moment_space_interior,
    optimizer_distribution,
)

M3 = moment(3)


def test_moment_bounds_examples():
    lo, hi = moment_bounds(M3, [0.5, 0.3])
    assert lo == pytest.approx(0.18, abs=1e-12)
    # K_3 = 0 gives x2 - (x1 - x2)^2 / (1 - x1)
    assert hi == pytest.approx(0.3 - 0.2**2 / 0.5, abs=1e-12)
    lo, hi = moment_bounds(M3, [0.5, 0.25])
    assert lo == pytest.approx(0.125) and hi == pytest.approx(0.125)
    with pytest.raises(OutsideHull):
        moment_bounds(M3, [2.0, 0.0])
    with pytest.raises(ValueError):
        moment_bounds(M3, [0.5])


def test_optimizer_distribution_examples():
    rep = optimizer_distribution(M3, [0.5, 0.3], Side.LOWER)
    np.testing.assert_allclose(rep.atoms, [0.0, 0.6], atol=1e-12)
    np.testing.assert_allclose(rep.probs, [1 / 6, 5 / 6], atol=1e-12)
    np.testing.assert_allclose(rep.moments(M3), [0.5, 0.3, 0.18], atol=1e-12)
    rep = optimizer_distribution(M3, [0.5, 0.45], Side.UPPER)
    np.testing.assert_allclose(rep.atoms, [0.1, 1.0], atol=1e-12)
    np.testing.assert_allclose(rep.probs, [5 / 9, 4 / 9], atol=1e-12)
    assert rep.objective(M3) == pytest.approx(0.445, abs=1e-12)


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(2)
    for _ in range(20):
        t = rng.uniform(0, 1, 5)
        p = rng.dirichlet(np.ones(5))
        x = p @ moment(4).values(t)[:, :3]
        for side in Side:
            rep = optimizer_distribution(moment(4), x, side)
            assert sum(rep.probs) == 1.0 or abs(sum(rep.probs) - 1.0) < 1e-15


def test_atom_counts():
    assert [atom_budget(n) for n in (1, 2, 3, 4, 5)] == [2, 2, 3, 3, 4]
    assert expected_atom_count(2, Side.UPPER) == 2
    assert expected_atom_count(3, Side.UPPER) == 3
    assert expected_atom_count(3, Side.LOWER) == 2
    rep = optimizer_distribution(moment(4), [0.5, 0.3, 0.2], Side.LOWER)
    assert len(rep.atoms) == expected_atom_count(3, Side.LOWER)
    rep = optimizer_distribution(moment(4), [0.5, 0.3, 0.2], Side.UPPER)
    assert len(rep.atoms) == expected_atom_count(3, Side.UPPER)


def test_batch_bounds_status():
    lo, hi, status = moment_bounds_batch(M3, [[0.5, 0.3], [2.0, 0.0]])
    assert status[0] == 0 and status[1] == 2
    assert np.isnan(lo[1]) and np.isnan(hi[1])


def test_hankel_examples():
    x = [0.5, 0.3]
    assert hankel_S(x, 1) == pytest.approx(0.5)
    assert hankel_S(x, 2) == pytest.approx(0.3 - 0.25)
    assert hankel_S([0.5, 0.3, 0.18], 3) == pytest.approx(0.0, abs=1e-15)
    assert hankel_K([0.5, 0.45, 0.445], 3) == pytest.approx(0.0, abs=1e-15)
    assert hankel_K([0.5, 0.45, 0.425], 3) == pytest.approx(0.01)
    assert hankel_K([0.5, 0.45], 1) == pytest.approx(0.5)
    assert hankel_K([0.5, 0.45], 2) == pytest.approx(0.05)


def test_hankel_needs_enough_moments():
    with pytest.raises(ValueError):
        hankel_S([0.5], 3)


def test_moment_curve_envelope_examples():
    assert moment_curve_envelope([0.5, 0.3], Side.LOWER) == pytest.approx(0.18, abs=1e-14)
    assert moment_curve_envelope([0.5, 0.45], Side.UPPER) == pytest.approx(0.445, abs=1e-14)
    assert moment_curve_envelope([0.5, 0.3], Side.UPPER) == pytest.approx(0.22, abs=1e-14)


def test_moment_curve_envelope_errors():
    with pytest.raises(DegeneratePivot):
        moment_curve_envelope([0.0, 0.0], Side.LOWER)
    with pytest.raises(NotInterior):
        moment_curve_envelope([0.5, 0.25], Side.LOWER)


def test_moment_space_interior():
    assert moment_space_interior([0.5, 0.3])
    assert not moment_space_interior([0.5, 0.25])
    assert not moment_space_interior([0.5, 0.55])


def test_principal_representation_moments():
    rep = PrincipalRepresentation((0.0, 1.0), (0.5, 0.5), Side.UPPER)
    np.testing.assert_allclose(rep.moments(M3), [0.5, 0.5, 0.5])
