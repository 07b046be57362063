import numpy as np
import pytest
from conftest import H, fixed_support, local_patch
from sklearn.base import clone

from dispersive_meshless.errors import ShapeMismatch, SingularMomentMatrix
from dispersive_meshless.kernel import KernelParams
from dispersive_meshless.nodes import neighbors, support
from dispersive_meshless.shapes import (
    DivergenceFreeRBFInterpolator,
    ScalarRBFInterpolator,
    assemble_curl_stencils,
    build_scalar_shapes,
    build_stencils,
    build_vector_shapes,
    divergence_rows,
    dump_stencils,
    value_rows,
)

unit = KernelParams(3.0, 1.0)


def test_kronecker_delta_on_cavity(cloud, kernel):
    r = 2.6 * H
    sv = build_vector_shapes(neighbors(cloud, "E", "E", r, images=True), kernel)
    ss = build_scalar_shapes(neighbors(cloud, "H", "H", r, images=True), kernel)
    Vv = value_rows(sv, cloud.n_vector).toarray()
    Vs = value_rows(ss, cloud.n_scalar, vector_data=False).toarray()
    # images of wall nodes fold back with parity, so check real-entry blocks
    for q in range(cloud.n_vector):
        real = (sv.support.positions[q] == cloud.positions_vec[sv.support.indices[q]]).all(axis=1)
        blocks = sv.value[q][real]
        expect = np.where(sv.support.indices[q][real] == q, 1.0, 0.0)[:, None, None] * np.eye(2)
        assert np.abs(blocks - expect).max() <= 1e-10
    assert np.abs(Vs - np.eye(cloud.n_scalar)).max() <= 1e-10
    interior = cloud.boundary_flag == 0
    rows = np.flatnonzero(np.repeat(interior, 2))
    assert np.abs(Vv[rows] - np.eye(2 * cloud.n_vector)[rows]).max() <= 1e-10


def test_scalar_constant_reproduction():
    X = local_patch(2.6)
    at_nodes = build_scalar_shapes(fixed_support(X, X), unit)
    assert max(abs(v.sum() - 1) for v in at_nodes.value) <= 1e-10
    rng = np.random.default_rng(1)
    between = build_scalar_shapes(fixed_support(X, rng.uniform(-0.7, 0.7, (50, 2))), unit)
    # Gaussian interpolation without polynomial terms: constants only to interpolation accuracy
    assert max(abs(v.sum() - 1) for v in between.value) <= 1e-3


def _fd4(build, X, p, d):
    e = np.array([[d, 0.0], [0.0, d]])
    pts = [p + 2 * e[0], p + e[0], p - e[0], p - 2 * e[0], p + 2 * e[1], p + e[1], p - e[1], p - 2 * e[1]]
    v = build(fixed_support(X, pts), unit).value
    fx = (-v[0] + 8 * v[1] - 8 * v[2] + v[3]) / (12 * d)
    fy = (-v[4] + 8 * v[5] - 8 * v[6] + v[7]) / (12 * d)
    return fx, fy


def _rel(a, b):
    return np.abs(a - b).max() / max(np.abs(a).max(), 1e-12)


@pytest.mark.parametrize("radius", [2.1, 2.6])
def test_vector_derivatives_match_fd(radius):
    X = local_patch(radius)
    P = np.random.default_rng(0).uniform(-0.7, 0.7, (25, 2))
    vs = build_vector_shapes(fixed_support(X, P), unit)
    for i, p in enumerate(P):
        fx, fy = _fd4(build_vector_shapes, X, p, 1e-2)
        assert _rel(vs.ddx[i], fx) <= 1e-5
        assert _rel(vs.ddy[i], fy) <= 1e-5
        assert _rel(vs.curl[i], fx[:, 1, :] - fy[:, 0, :]) <= 1e-5
        assert np.abs(fx[:, 0, :] + fy[:, 1, :]).max() <= 1e-5 * np.abs(fx).max()


@pytest.mark.parametrize("radius", [2.1, 2.6])
def test_scalar_derivatives_match_fd(radius):
    X = local_patch(radius)
    P = np.random.default_rng(2).uniform(-0.7, 0.7, (25, 2))
    ss = build_scalar_shapes(fixed_support(X, P), unit)
    for i, p in enumerate(P):
        fx, fy = _fd4(build_scalar_shapes, X, p, 1e-2)
        assert _rel(ss.dx[i], fx) <= 1e-5
        assert _rel(ss.dy[i], fy) <= 1e-5


def test_divergence_rows_vanish(cloud, kernel):
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 5e-3, (1000, 2))
    vs = build_vector_shapes(support(cloud, pts, "vector", 2.6 * H, images=True), kernel)
    worst = max(np.abs(d).max() / np.abs(c).max() for d, c in zip(vs.div, vs.curl))
    assert worst <= 1e-8


def test_w_d_annihilates_constants(stencils):
    W = stencils["vector"].W_D
    out = W @ np.full(W.shape[1], 3.0)
    assert np.abs(out).max() <= 1e-8 * abs(W).max() * 3.0


def test_w_b_on_uniform_field(cloud, kernel):
    # no images: a uniform field does not satisfy the wall parity
    st = build_stencils(cloud, kernel, 2.6 * H, "vector", images=False)
    E = np.tile([0.6, -0.8], cloud.n_vector)
    curl = st.W_B @ E
    scale = abs(st.W_B).sum(axis=1).max()
    p = cloud.positions_sca
    full = np.all((p >= 2.6 * H) & (p <= 5e-3 - 2.6 * H), axis=1)
    assert full.sum() > 0
    assert np.abs(curl[full]).max() <= 1e-5 * scale
    # one-sided supports near the walls carry the interpolation error
    assert np.abs(curl).max() <= 1e-3 * scale


def test_stencil_shapes_and_sparsity(cloud, kernel):
    st = build_stencils(cloud, kernel, 2.6 * H, "vector", images=False)
    assert st.W_B.shape == (cloud.n_scalar, 2 * cloud.n_vector)
    assert st.W_D.shape == (2 * cloud.n_vector, cloud.n_scalar)
    nb = neighbors(cloud, "H", "E", 2.6 * H).counts()
    assert np.array_equal(np.diff(st.W_B.indptr), 2 * nb)
    nd = neighbors(cloud, "E", "H", 2.6 * H).counts()
    assert np.array_equal(np.diff(st.W_D.indptr)[0::2], nd)
    assert np.all(np.isfinite(st.W_B.data)) and np.all(np.isfinite(st.W_D.data))


def test_assemble_rejects_mismatched_sets(cloud, kernel):
    r = 2.6 * H
    b = build_vector_shapes(neighbors(cloud, "H", "E", r, images=True), kernel)
    d = build_scalar_shapes(neighbors(cloud, "E", "H", r, images=True), kernel)
    assemble_curl_stencils(b, d, cloud.n_vector, cloud.n_scalar)
    with pytest.raises(ShapeMismatch):
        assemble_curl_stencils(d, b, cloud.n_vector, cloud.n_scalar)


def test_singular_moment_matrix():
    X = local_patch(2.6)
    with pytest.raises(SingularMomentMatrix):
        build_vector_shapes(fixed_support(X, [(0.1, 0.1)]), KernelParams(40.0, 1.0))


def test_scalar_divergence_of_linear_field(cloud, kernel):
    ss = build_scalar_shapes(support(cloud, cloud.positions_vec, "vector", 2.6 * H), kernel)
    D = cloud.positions_vec.copy()  # D = (x, y), div D = 2
    rho = divergence_rows(ss, cloud.n_vector) @ D.ravel()
    inner = np.all((cloud.positions_vec > 1.5e-3) & (cloud.positions_vec < 3.5e-3), axis=1)
    # no polynomial terms in the basis, so linear fields carry interpolation error
    assert np.allclose(rho[inner], 2.0, rtol=3e-2)


def _solenoidal(p):
    # curl of the stream function sin(x) sin(y)
    x, y = p[:, 0], p[:, 1]
    return np.column_stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])


def test_divergence_free_interpolation_converges():
    rng = np.random.default_rng(4)
    probe = rng.uniform(1.0, 2.0, (200, 2))
    errs = []
    for h in (0.2, 0.1):
        g = np.arange(0, 3 + 1e-9, h)
        X = np.array([(a, b) for a in g for b in g])
        est = DivergenceFreeRBFInterpolator(length_scale=h).fit(X, _solenoidal(X))
        assert np.abs(est.predict(X[:5]) - _solenoidal(X[:5])).max() <= 1e-9
        errs.append(np.abs(est.predict(probe) - _solenoidal(probe)).max())
        assert np.abs(est.predict_divergence(probe)).max() <= 1e-8
    assert errs[1] < errs[0]


def test_estimator_api():
    g = np.arange(0, 1 + 1e-9, 0.1)
    X = np.array([(a, b) for a in g for b in g])
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    est = ScalarRBFInterpolator(shape_parameter=2.0)
    assert est.get_params() == {"shape_parameter": 2.0, "length_scale": None, "support_factor": 2.6}
    fitted = clone(est).fit(X, y)
    assert fitted.length_scale_ == pytest.approx(0.1)
    assert np.allclose(fitted.predict(X), y, atol=1e-10)
    p = np.array([[0.45, 0.55]])
    grad = fitted.predict_gradient(p)[0]
    assert grad == pytest.approx([3 * np.cos(1.35), 1.1], rel=2e-2)
    assert fitted.score(X, y) == pytest.approx(1.0)


def test_dump(tmp_path, stencils):
    dump_stencils(stencils["vector"], tmp_path / "w.csv")
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "operator,row,column,weight"
    assert len(lines) == 1 + stencils["vector"].W_B.nnz + stencils["vector"].W_D.nnz
