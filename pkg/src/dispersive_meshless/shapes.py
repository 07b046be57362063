"""Local RBF shape functions and the curl stencils used by the time march.

Scalar shapes interpolate with the Gaussian ``psi`` itself. Vector shapes
use the matrix-valued kernel ``(grad grad^T - I lap) psi``; in 2D that is
``[[-psi_yy, psi_xy], [psi_xy, -psi_xx]]``, and each of its columns is
divergence free, so every interpolant built from it is too. Both kinds are
solved on the local support of each evaluation point, which gives the
Kronecker delta property at nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import kernel as K
from .errors import ShapeMismatch, SingularMomentMatrix
from .kernel import KernelParams
from .nodes import SupportTable, point_support

COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class ScalarShapeSet:
    """Per evaluation point: neighbour entries and the weights of phi_j, d/dx, d/dy."""

    points: np.ndarray
    support: SupportTable
    value: list
    dx: list
    dy: list
    cond: np.ndarray

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class VectorShapeSet:
    """Per evaluation point: 2x2 value blocks, their x/y derivatives, curl and divergence rows.

    ``value[q][j]`` is the block Phi_j(x_q). ``curl[q][j]`` is the 1x2 row whose
    entries are (curl Phi_j e_x)_z and (curl Phi_j e_y)_z, and ``div[q][j]``
    the matching divergence row.
    """

    points: np.ndarray
    support: SupportTable
    value: list
    ddx: list
    ddy: list
    curl: list
    div: list
    cond: np.ndarray

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class CurlStencils:
    """Sparse curl operators in the flattened (node, component) layout.

    ``W_B`` maps nodal E (2 * n_vector) to (curl E)_z at scalar nodes;
    ``W_D`` maps nodal Hz to curl(Hz z) at vector nodes.
    """

    W_B: sp.csr_matrix
    W_D: sp.csr_matrix
    basis_mode: str
    kernel: KernelParams | None = None
    radius: float | None = None

    @property
    def n_vector(self) -> int:
        return self.W_D.shape[0] // 2

    @property
    def n_scalar(self) -> int:
        return self.W_B.shape[0]

    def row_counts(self):
        return np.diff(self.W_B.indptr), np.diff(self.W_D.indptr)


def _check_cond(G, q):
    c = np.linalg.cond(G)
    if not np.isfinite(c) or c > COND_LIMIT:
        raise SingularMomentMatrix(
            f"moment matrix at evaluation point {q} has condition {c:.3e} (limit {COND_LIMIT:.0e}); "
            "reduce the shape parameter or spread the nodes"
        )
    return c


def _coincident(e, params):
    """Entries whose offset from the evaluation point is zero to round-off."""
    return np.flatnonzero(np.all(np.abs(e) <= 1e-12 * params.width, axis=1))


def _vector_block(params, dx, dy):
    pxx = K.partial(params, dx, dy, 2, 0)
    pyy = K.partial(params, dx, dy, 0, 2)
    pxy = K.partial(params, dx, dy, 1, 1)
    out = np.empty(np.shape(dx) + (2, 2))
    out[..., 0, 0] = -pyy
    out[..., 0, 1] = pxy
    out[..., 1, 0] = pxy
    out[..., 1, 1] = -pxx
    return out


def _vector_block_derivs(params, dx, dy):
    p30 = K.partial(params, dx, dy, 3, 0)
    p21 = K.partial(params, dx, dy, 2, 1)
    p12 = K.partial(params, dx, dy, 1, 2)
    p03 = K.partial(params, dx, dy, 0, 3)
    bx = np.empty(np.shape(dx) + (2, 2))
    by = np.empty_like(bx)
    bx[..., 0, 0], bx[..., 0, 1], bx[..., 1, 0], bx[..., 1, 1] = -p12, p21, p21, -p30
    by[..., 0, 0], by[..., 0, 1], by[..., 1, 0], by[..., 1, 1] = -p03, p12, p12, -p21
    return bx, by


def _stack_blocks(blocks):
    # (k, k, 2, 2) -> (2k, 2k) with node-major, component-minor ordering
    k = blocks.shape[0]
    return blocks.transpose(0, 2, 1, 3).reshape(2 * k, 2 * k)


def build_scalar_shapes(support: SupportTable, params: KernelParams) -> ScalarShapeSet:
    """Scalar RBF shape functions at ``support.query_points``."""
    value, ddx, ddy, conds = [], [], [], []
    for q, (p, X) in enumerate(zip(support.query_points, support.positions)):
        d = X[:, None, :] - X[None, :, :]
        G = K.evaluate(params, d[..., 0], d[..., 1])
        conds.append(_check_cond(G, q))
        e = p - X
        rhs = np.stack(
            [
                K.evaluate(params, e[:, 0], e[:, 1]),
                K.partial(params, e[:, 0], e[:, 1], 1, 0),
                K.partial(params, e[:, 0], e[:, 1], 0, 1),
            ],
            axis=1,
        )
        # G is symmetric, so the shape rows are G^{-1} applied to the kernel rows
        w = np.linalg.solve(G, rhs)
        hit = _coincident(e, params)
        if len(hit):
            # at a node the value row is exactly a unit row; skip the round-off
            w[:, 0] = 0.0
            w[hit, 0] = 1.0
        value.append(w[:, 0])
        ddx.append(w[:, 1])
        ddy.append(w[:, 2])
    return ScalarShapeSet(support.query_points, support, value, ddx, ddy, np.array(conds))


def build_vector_shapes(support: SupportTable, params: KernelParams) -> VectorShapeSet:
    """Divergence-free matrix-valued shape functions at ``support.query_points``."""
    value, ddx, ddy, curl, div, conds = [], [], [], [], [], []
    for q, (p, X) in enumerate(zip(support.query_points, support.positions)):
        k = len(X)
        d = X[:, None, :] - X[None, :, :]
        G = _stack_blocks(_vector_block(params, d[..., 0], d[..., 1]))
        conds.append(_check_cond(G, q))
        e = p - X
        R = _vector_block(params, e[:, 0], e[:, 1])  # (k, 2, 2)
        Rx, Ry = _vector_block_derivs(params, e[:, 0], e[:, 1])
        # evaluation rows over the 2k coefficients; shapes = rows @ G^{-1}
        curl_r = Rx[:, 1, :] - Ry[:, 0, :]
        div_r = Rx[:, 0, :] + Ry[:, 1, :]  # cancels term by term, so exactly zero
        rows = np.concatenate([R, Rx, Ry, curl_r[:, None, :], div_r[:, None, :]], axis=1)  # (k, 8, 2)
        rows = rows.transpose(1, 0, 2).reshape(8, 2 * k)
        w = np.linalg.solve(G, rows.T).T.reshape(8, k, 2).transpose(1, 0, 2)
        hit = _coincident(e, params)
        if len(hit):
            w[:, 0:2, :] = 0.0
            w[hit, 0:2, :] = np.eye(2)
        value.append(w[:, 0:2, :])
        ddx.append(w[:, 2:4, :])
        ddy.append(w[:, 4:6, :])
        curl.append(w[:, 6, :])
        div.append(w[:, 7, :])
    return VectorShapeSet(support.query_points, support, value, ddx, ddy, curl, div, np.array(conds))


def _rows_to_csr(row_entries, n_rows, n_cols):
    rows, cols, vals = [], [], []
    for r, (c, v) in enumerate(row_entries):
        rows.append(np.full(len(c), r))
        cols.append(c)
        vals.append(v)
    if rows:
        rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    m = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def _vector_data_rows(shapes, weights_xy):
    """Fold per-entry (k, 2) weights on vector data into columns 2*node + comp."""
    out = []
    for idx, par, w in zip(shapes.support.indices, shapes.support.parity, weights_xy):
        cols = np.column_stack([2 * idx, 2 * idx + 1]).ravel()
        out.append((cols, (w * par).ravel()))
    return out


def curl_rows(shapes, n_vector: int) -> sp.csr_matrix:
    """(curl E)_z at the evaluation points as a sparse (P, 2 n_vector) matrix."""
    if isinstance(shapes, VectorShapeSet):
        w = shapes.curl
    else:
        w = [np.column_stack([-dy, dx]) for dx, dy in zip(shapes.dx, shapes.dy)]
    return _rows_to_csr(_vector_data_rows(shapes, w), len(shapes), 2 * n_vector)


def divergence_rows(shapes, n_vector: int) -> sp.csr_matrix:
    """div of nodal vector data at the evaluation points, (P, 2 n_vector)."""
    if isinstance(shapes, VectorShapeSet):
        w = shapes.div
    else:
        w = [np.column_stack([dx, dy]) for dx, dy in zip(shapes.dx, shapes.dy)]
    return _rows_to_csr(_vector_data_rows(shapes, w), len(shapes), 2 * n_vector)


def value_rows(shapes, n_nodes: int, vector_data: bool = True) -> sp.csr_matrix:
    """Point-evaluation operator.

    For vector data the result is (2P, 2 n_nodes) in the interleaved layout;
    for scalar data and scalar shapes it is (P, n_nodes).
    """
    if not vector_data:
        if isinstance(shapes, VectorShapeSet):
            raise ShapeMismatch("vector shapes cannot evaluate scalar data")
        entries = [(idx, v) for idx, v in zip(shapes.support.indices, shapes.value)]
        return _rows_to_csr(entries, len(shapes), n_nodes)
    entries = []
    for q in range(len(shapes)):
        idx = shapes.support.indices[q]
        par = shapes.support.parity[q]
        cols = np.column_stack([2 * idx, 2 * idx + 1]).ravel()
        if isinstance(shapes, VectorShapeSet):
            blk = shapes.value[q]  # (k, 2 out, 2 in)
            for comp in range(2):
                entries.append((cols, (blk[:, comp, :] * par).ravel()))
        else:
            v = shapes.value[q]
            for comp in range(2):
                w = np.zeros((len(idx), 2))
                w[:, comp] = v * par[:, comp]
                entries.append((cols, w.ravel()))
    return _rows_to_csr(entries, 2 * len(shapes), 2 * n_nodes)


def assemble_curl_stencils(b_shapes, d_shapes: ScalarShapeSet, n_vector: int, n_scalar: int) -> CurlStencils:
    """Repackage shape sets into the two sparse curl operators.

    ``b_shapes`` are evaluated at the scalar (B) nodes over the vector set;
    a VectorShapeSet selects the vector basis, a ScalarShapeSet the scalar one.
    ``d_shapes`` are scalar shapes evaluated at the vector (D) nodes over the
    scalar set.
    """
    if len(b_shapes) != n_scalar or b_shapes.support.target_set != "vector":
        raise ShapeMismatch("b_shapes must be evaluated at every scalar node over the vector set")
    if len(d_shapes) != n_vector or d_shapes.support.target_set != "scalar":
        raise ShapeMismatch("d_shapes must be evaluated at every vector node over the scalar set")
    if isinstance(d_shapes, VectorShapeSet):
        raise ShapeMismatch("d_shapes must be scalar shapes")
    W_B = curl_rows(b_shapes, n_vector)
    entries = []
    for q in range(n_vector):
        idx = d_shapes.support.indices[q]
        # curl(Hz z) = (dHz/dy, -dHz/dx); Hz is even across PEC walls
        entries.append((idx, d_shapes.dy[q]))
        entries.append((idx, -d_shapes.dx[q]))
    W_D = _rows_to_csr(entries, 2 * n_vector, n_scalar)
    mode = "vector" if isinstance(b_shapes, VectorShapeSet) else "scalar"
    return CurlStencils(W_B, W_D, mode)


def build_stencils(cloud, params: KernelParams, radius: float, basis_mode: str = "vector", images: bool = True):
    """Support search, shape construction and stencil assembly in one call."""
    from .nodes import neighbors

    sup_b = neighbors(cloud, "scalar", "vector", radius, images=images)
    sup_d = neighbors(cloud, "vector", "scalar", radius, images=images)
    if basis_mode == "vector":
        b_shapes = build_vector_shapes(sup_b, params)
    elif basis_mode == "scalar":
        b_shapes = build_scalar_shapes(sup_b, params)
    else:
        raise ValueError(f"unknown basis_mode {basis_mode!r}")
    d_shapes = build_scalar_shapes(sup_d, params)
    st = assemble_curl_stencils(b_shapes, d_shapes, cloud.n_vector, cloud.n_scalar)
    return replace(st, kernel=params, radius=float(radius))


def dump_stencils(stencils: CurlStencils, path) -> None:
    """Plain-text dump: one line per nonzero (operator, row, column, weight)."""
    with open(path, "w") as fh:
        fh.write("operator,row,column,weight\n")
        for name, m in (("W_B", stencils.W_B), ("W_D", stencils.W_D)):
            coo = m.tocoo()
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{name},{r},{c},{v!r}\n")


def _median_spacing(X):
    from scipy.spatial import cKDTree

    d, _ = cKDTree(X).query(X, k=2)
    return float(np.median(d[:, 1]))


class ScalarRBFInterpolator(RegressorMixin, BaseEstimator):
    """Local Gaussian RBF interpolation of scattered scalar samples.

    Parameters
    ----------
    shape_parameter : float, default=3.0
        Kernel width in units of ``length_scale``.
    length_scale : float or None, default=None
        Reference spacing; the median nearest-neighbour distance of the
        training nodes when None.
    support_factor : float, default=2.6
        Support radius in units of ``length_scale``.
    """

    def __init__(self, shape_parameter=3.0, length_scale=None, support_factor=2.6):
        self.shape_parameter = shape_parameter
        self.length_scale = length_scale
        self.support_factor = support_factor

    def fit(self, X, y):
        X = check_array(X, ensure_min_samples=3)
        if X.shape[1] != 2:
            raise ValueError("expected 2D node coordinates")
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != len(X):
            raise ValueError("X and y have inconsistent lengths")
        self.nodes_ = X
        self.values_ = y
        self.length_scale_ = self.length_scale or _median_spacing(X)
        self.kernel_ = KernelParams(self.shape_parameter, self.length_scale_)
        self.radius_ = self.support_factor * self.length_scale_
        return self

    def _shapes(self, X):
        check_is_fitted(self)
        X = check_array(X)
        return build_scalar_shapes(point_support(self.nodes_, X, self.radius_), self.kernel_)

    def predict(self, X):
        s = self._shapes(X)
        return np.array([w @ self.values_[i] for w, i in zip(s.value, s.support.indices)])

    def predict_gradient(self, X):
        s = self._shapes(X)
        return np.array(
            [
                (dx @ self.values_[i], dy @ self.values_[i])
                for dx, dy, i in zip(s.dx, s.dy, s.support.indices)
            ]
        )


class DivergenceFreeRBFInterpolator(RegressorMixin, BaseEstimator):
    """Local divergence-free interpolation of 2D vector samples.

    Same parameters as :class:`ScalarRBFInterpolator`. ``y`` has shape
    ``(n_samples, 2)``; predictions are divergence free everywhere.
    """

    def __init__(self, shape_parameter=3.0, length_scale=None, support_factor=2.6):
        self.shape_parameter = shape_parameter
        self.length_scale = length_scale
        self.support_factor = support_factor

    def fit(self, X, y):
        X = check_array(X, ensure_min_samples=3)
        y = check_array(y)
        if X.shape[1] != 2 or y.shape != X.shape:
            raise ValueError("expected (n, 2) coordinates and (n, 2) vector samples")
        self.nodes_ = X
        self.values_ = y
        self.length_scale_ = self.length_scale or _median_spacing(X)
        self.kernel_ = KernelParams(self.shape_parameter, self.length_scale_)
        self.radius_ = self.support_factor * self.length_scale_
        return self

    def _shapes(self, X):
        check_is_fitted(self)
        X = check_array(X)
        return build_vector_shapes(point_support(self.nodes_, X, self.radius_), self.kernel_)

    def predict(self, X):
        s = self._shapes(X)
        return np.array([np.einsum("kab,kb->a", v, self.values_[i]) for v, i in zip(s.value, s.support.indices)])

    def predict_curl(self, X):
        s = self._shapes(X)
        return np.array([np.sum(c * self.values_[i]) for c, i in zip(s.curl, s.support.indices)])

    def predict_divergence(self, X):
        s = self._shapes(X)
        return np.array([np.sum(d * self.values_[i]) for d, i in zip(s.div, s.support.indices)])

    def score(self, X, y, sample_weight=None):
        from sklearn.metrics import r2_score

        return r2_score(np.asarray(y), self.predict(X), sample_weight=sample_weight)
