import io

import numpy as np
import pytest

from curvehull.curve import moment, project
from curvehull.envelope import envelope_batch
from curvehull.errors import ShapeMismatch, SingularJacobian
from curvehull.geometry import gram_content
from curvehull.hull_param import (
    Side,
    SimplexParam,
    canonicalize,
    full_map,
    is_strictly_interior,
    jacobian_batch,
    jacobian_projected,
    layout,
    lower_map,
    lower_map_projected,
    param_from_atoms,
    sample_boundary,
    simplex_measures,
    theta_from_cube,
    upper_map,
    upper_map_projected,
    validate,
    write_polygon_text,
    write_table,
)
from sampling import interior_theta

M3, M4, M5 = moment(3), moment(4), moment(5)


def up(n, w, x):
    return SimplexParam(Side.UPPER, n, w, x)


def lo(n, w, x):
    return SimplexParam(Side.LOWER, n, w, x)


@pytest.mark.parametrize(
    "n, side, weights, knots, atoms",
    [
        (1, Side.UPPER, 1, 0, 2),
        (1, Side.LOWER, 0, 1, 1),
        (2, Side.UPPER, 1, 1, 2),
        (2, Side.LOWER, 1, 1, 2),
        (3, Side.UPPER, 2, 1, 3),
        (3, Side.LOWER, 1, 2, 2),
        (4, Side.UPPER, 2, 2, 3),
        (5, Side.LOWER, 2, 3, 3),
    ],
)
def test_layout_sizes(n, side, weights, knots, atoms):
    lay = layout(n, side)
    assert (lay.n_weights, lay.n_knots, lay.size) == (weights, knots, atoms)
    # the parameter count is always n
    assert lay.n_weights + lay.n_knots == n


def test_upper_map_examples():
    np.testing.assert_allclose(upper_map(M3, up(2, [1.0], [0.3])), M3.eval(0.3))
    np.testing.assert_allclose(upper_map(M3, up(2, [0.0], [0.3])), [1.0, 1.0, 1.0])
    expected = 0.5 * M4.eval(1.0) + 0.5 * M4.eval(0.5)
    np.testing.assert_allclose(upper_map(M4, up(3, [0.5, 0.5], [0.5])), expected)


def test_lower_map_examples():
    np.testing.assert_allclose(lower_map(M3, lo(2, [1.0], [0.5])), [0.5, 0.25, 0.125])
    np.testing.assert_allclose(lower_map(M3, lo(2, [0.5], [0.5])), [0.25, 0.125, 0.0625])
    np.testing.assert_allclose(lower_map(moment(2), lo(1, [], [0.3])), [0.3, 0.09])


def test_projected_maps():
    p = lo(2, [1.0], [0.5])
    np.testing.assert_allclose(lower_map_projected(M3, p), [0.5, 0.25])
    q = up(4, [0.3, 0.2], [0.25, 0.75])
    g = project(M5)
    expected = 0.3 * g.eval(0.25) + 0.2 * g.eval(0.75) + 0.5 * g.eval(1.0)
    np.testing.assert_allclose(upper_map_projected(M5, q), expected)
    np.testing.assert_allclose(upper_map_projected(M5, q), upper_map(M5, q)[:-1])
    np.testing.assert_allclose(full_map(M5, q), upper_map(M5, q))


def test_side_and_shape_checks():
    with pytest.raises(ShapeMismatch):
        upper_map(M3, lo(2, [0.5], [0.5]))
    with pytest.raises(ShapeMismatch):
        up(2, [0.5, 0.1], [0.5])
    with pytest.raises(ValueError):
        validate(M3, up(2, [1.5], [0.5]))
    with pytest.raises(ValueError):
        validate(M3, up(2, [0.5], [1.5]))
    with pytest.raises(ValueError):
        validate(M4, up(3, [0.2, 0.2], [1.5]))


def test_theta_roundtrip():
    p = up(4, [0.3, 0.2], [0.25, 0.75])
    assert SimplexParam.from_theta(Side.UPPER, 4, p.theta) == p


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(3)
    for n in (1, 2, 3, 4, 5):
        curve = moment(n + 1)
        for side in Side:
            th = interior_theta(rng, n, side, curve.interval, 1)[0]
            p = SimplexParam.from_theta(side, n, th)
            jac, det = jacobian_projected(curve, p)
            h = 1e-6
            fd = np.empty((n, n))
            for k in range(n):
                e = np.zeros(n)
                e[k] = h
                plus = full_map(curve, SimplexParam.from_theta(side, n, th + e))[:n]
                minus = full_map(curve, SimplexParam.from_theta(side, n, th - e))[:n]
                fd[:, k] = (plus - minus) / (2 * h)
            np.testing.assert_allclose(jac, fd, atol=1e-7)
            assert det == pytest.approx(np.linalg.det(fd), rel=1e-5, abs=1e-12)
            assert det != 0


def test_jacobian_singular_on_boundary():
    with pytest.raises(SingularJacobian):
        jacobian_projected(M3, up(2, [0.0], [0.3]))
    with pytest.raises(SingularJacobian):
        jacobian_projected(M4, lo(3, [0.5], [0.4, 0.4]))


def test_is_strictly_interior():
    assert is_strictly_interior(M3, up(2, [0.5], [0.3]))
    assert not is_strictly_interior(M3, up(2, [1.0], [0.3]))
    assert not is_strictly_interior(M3, up(2, [0.5], [0.0]))


def test_canonicalize_drops_zero_weight():
    q = canonicalize(M5, up(4, [0.3, 0.0], [0.2, 0.5]))
    assert q == up(4, [0.3, 0.0], [0.2, 1.0])
    np.testing.assert_allclose(full_map(M5, q), full_map(M5, up(4, [0.3, 0.0], [0.2, 0.5])))


def test_canonicalize_merges_coincident_knots():
    q = canonicalize(M5, up(4, [0.2, 0.3], [0.4, 0.4]))
    assert q.weights[0] == pytest.approx(0.5)
    assert q.knots[0] == 0.4
    assert q == canonicalize(M5, q)


def test_canonicalize_already_canonical():
    p = lo(3, [0.4], [0.2, 0.7])
    assert canonicalize(M4, p) == p


def test_param_from_atoms_absorbs_endpoint_atoms():
    p = param_from_atoms(M3, 2, Side.UPPER, [1.0, 0.3], [0.4, 0.6])
    assert p == up(2, [0.6], [0.3])
    with pytest.raises(ShapeMismatch):
        param_from_atoms(M3, 2, Side.UPPER, [0.1, 0.3, 0.6], [0.2, 0.3, 0.5])


def test_sample_boundary_chord_and_counts():
    m = sample_boundary(moment(2), Side.UPPER, 2)
    np.testing.assert_allclose(m.vertices, [[0.0, 0.0], [1.0, 1.0]])
    assert m.facets.tolist() == [[0, 1]]
    m = sample_boundary(M3, Side.LOWER, 3)
    assert len(m.vertices) == 9
    # every lower vertex for n = 2 is alpha * gamma(x)
    for th, v in zip(m.params, m.vertices):
        np.testing.assert_allclose(v, th[0] * M3.eval(th[1]), atol=1e-15)


def test_sample_boundary_lies_on_envelope():
    m = sample_boundary(M4, Side.UPPER, 50)
    env = envelope_batch(M4, m.vertices[:, :-1], Side.UPPER)
    assert np.max(np.abs(env.values - m.vertices[:, -1])) < 1e-7


def test_simplex_measures():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    facets = np.array([[0, 1, 2], [0, 2, 3]])
    assert simplex_measures(verts, facets).sum() == pytest.approx(1.0)
    seg = simplex_measures(np.array([[0.0, 0.0], [3.0, 4.0]]), np.array([[0, 1]]))
    assert seg[0] == pytest.approx(5.0)


def test_gram_content_duplicate_columns():
    assert gram_content([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]) == 0.0


def test_writers():
    m = sample_boundary(M3, Side.LOWER, 3)
    buf = io.StringIO()
    write_polygon_text(m, buf)
    lines = buf.getvalue().splitlines()
    assert sum(ln.startswith("v ") for ln in lines) == 9
    faces = [ln for ln in lines if ln.startswith("f ")]
    assert len(faces) == len(m.facets)
    assert min(int(i) for f in faces for i in f.split()[1:]) >= 1
    buf = io.StringIO()
    write_table(m, buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "side,w1,x1,p1,p2,p3"
    assert len(rows) == 10


def test_theta_from_cube_lands_in_domain():
    rng = np.random.default_rng(0)
    for n in (2, 3, 4, 5):
        for side in Side:
            lay = layout(n, side)
            th = theta_from_cube(lay, (0.0, 1.0), rng.random((200, n)))
            w, x = th[:, : lay.n_weights], th[:, lay.n_weights :]
            assert np.all(w >= 0) and np.all(w.sum(axis=1) <= 1 + 1e-15)
            assert np.all(np.diff(x, axis=1) >= 0) and np.all((x >= 0) & (x <= 1))


def test_jacobian_batch_shape():
    lay = layout(3, Side.LOWER)
    th = np.array([[0.4, 0.2, 0.7], [0.5, 0.3, 0.6]])
    assert jacobian_batch(M4, lay, th, 3).shape == (2, 3, 3)
