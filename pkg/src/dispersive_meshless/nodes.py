"""Node clouds for the rectangular cavity and fixed-radius support search.

Two logical node sets are kept. Vector nodes carry the in-plane E and D
values and sit on the uniform grid, walls included. Scalar nodes carry Hz
and Bz and sit at the cell centres of that grid.

PEC walls can be represented by mirror images of the nodes. Across a wall,
Hz is even, the tangential E component is odd and the normal component is
even, so an image neighbour contributes with a per-component parity sign.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyRegion, IsolatedNode, NonConformingSpacing

VECTOR = "vector"
SCALAR = "scalar"
_SET_ALIASES = {"E": VECTOR, "D": VECTOR, "H": SCALAR, "B": SCALAR, VECTOR: VECTOR, SCALAR: SCALAR}

# boundary_flag values for vector nodes
INTERIOR, X_WALL, Y_WALL, CORNER = 0, 1, 2, 3
FLAG_NAMES = {INTERIOR: "none", X_WALL: "x-wall", Y_WALL: "y-wall", CORNER: "corner"}

MIN_NEIGHBORS = 3


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle ``[x_min, x_max] x [y_min, y_max]`` in metres."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def is_degenerate(self) -> bool:
        return not (self.x_max > self.x_min and self.y_max > self.y_min)

    def contains(self, points, tol=1e-12):
        p = np.atleast_2d(points)
        return (
            (p[:, 0] >= self.x_min - tol)
            & (p[:, 0] <= self.x_max + tol)
            & (p[:, 1] >= self.y_min - tol)
            & (p[:, 1] <= self.y_max + tol)
        )


@dataclass(frozen=True, eq=False)
class NodeCloud:
    positions_vec: np.ndarray
    positions_sca: np.ndarray
    material_vec: np.ndarray
    material_sca: np.ndarray
    boundary_flag: np.ndarray
    spacing: float
    width: float
    height: float

    @property
    def n_vector(self) -> int:
        return len(self.positions_vec)

    @property
    def n_scalar(self) -> int:
        return len(self.positions_sca)

    def positions(self, which: str) -> np.ndarray:
        return self.positions_vec if _SET_ALIASES[which] == VECTOR else self.positions_sca

    def nearest_vector_node(self, point) -> int:
        d = np.hypot(*(self.positions_vec - np.asarray(point, float)).T)
        return int(np.argmin(d))

    def tangential_mask(self) -> np.ndarray:
        """(n_vector, 2) array with 0 where a PEC wall pins the E component."""
        mask = np.ones((self.n_vector, 2))
        on_x = np.isin(self.boundary_flag, (X_WALL, CORNER))
        on_y = np.isin(self.boundary_flag, (Y_WALL, CORNER))
        mask[on_x, 1] = 0.0
        mask[on_y, 0] = 0.0
        return mask

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "set", "material", "boundary_flag"])
            for (x, y), m, f in zip(self.positions_vec, self.material_vec, self.boundary_flag):
                w.writerow([repr(float(x)), repr(float(y)), "E/D", int(m), FLAG_NAMES[int(f)]])
            for (x, y), m in zip(self.positions_sca, self.material_sca):
                w.writerow([repr(float(x)), repr(float(y)), "H/B", int(m), "none"])


def _tiles(length, spacing):
    n = length / spacing
    k = int(round(n))
    if k < 1 or abs(n - k) > 1e-9 * max(n, 1.0):
        raise NonConformingSpacing(f"spacing {spacing!r} does not tile length {length!r}")
    return k


def build_cavity_cloud(width, height, spacing, plasma_region: Region | None = None) -> NodeCloud:
    """Uniform staggered cloud for a ``width`` x ``height`` PEC cavity.

    Vector nodes lie on the grid including the walls; scalar nodes lie at
    cell centres. Nodes inside ``plasma_region`` get material index 1.
    """
    nx = _tiles(width, spacing)
    ny = _tiles(height, spacing)
    if plasma_region is not None:
        if plasma_region.is_degenerate:
            raise EmptyRegion("plasma region has zero area")
        outside = (
            plasma_region.x_min < -1e-12
            or plasma_region.y_min < -1e-12
            or plasma_region.x_max > width * (1 + 1e-12)
            or plasma_region.y_max > height * (1 + 1e-12)
        )
        if outside:
            raise ValueError("plasma region must lie inside the cavity")

    xs = np.arange(nx + 1) * spacing
    ys = np.arange(ny + 1) * spacing
    gx, gy = np.meshgrid(xs, ys)
    vec = np.column_stack([gx.ravel(), gy.ravel()])
    cx, cy = np.meshgrid((np.arange(nx) + 0.5) * spacing, (np.arange(ny) + 0.5) * spacing)
    sca = np.column_stack([cx.ravel(), cy.ravel()])

    tol = 1e-9 * spacing
    on_x = (np.abs(vec[:, 0]) < tol) | (np.abs(vec[:, 0] - width) < tol)
    on_y = (np.abs(vec[:, 1]) < tol) | (np.abs(vec[:, 1] - height) < tol)
    flag = np.full(len(vec), INTERIOR)
    flag[on_x] = X_WALL
    flag[on_y] = Y_WALL
    flag[on_x & on_y] = CORNER

    if plasma_region is None:
        mat_v = np.zeros(len(vec), dtype=int)
        mat_s = np.zeros(len(sca), dtype=int)
    else:
        mat_v = plasma_region.contains(vec, tol).astype(int)
        mat_s = plasma_region.contains(sca, tol).astype(int)

    return NodeCloud(vec, sca, mat_v, mat_s, flag, float(spacing), float(width), float(height))


@dataclass(frozen=True, eq=False)
class SupportTable:
    """Neighbour lists of a set of query points over one node set.

    ``indices[q]`` are real node indices (an index repeats when mirror
    images of that node are also in range); ``positions[q]`` holds the
    neighbour coordinates, image coordinates for mirrored entries; and
    ``parity[q]`` holds the (k, 2) sign applied to vector components of
    that entry. Entries are ordered by (index, image code).
    """

    radius: float
    target_set: str
    query_points: np.ndarray
    indices: list = field(repr=False)
    positions: list = field(repr=False)
    parity: list = field(repr=False)

    def __len__(self):
        return len(self.indices)

    def counts(self) -> np.ndarray:
        return np.array([len(i) for i in self.indices])


def _image_copies(points, width, height, margin, tol):
    """Real points plus mirror images within ``margin`` of each wall.

    Returns positions, source index, x-reflection flag, y-reflection flag
    and an image code (0 for the real node) used for ordering.
    """
    pos, idx, fx, fy, code = [], [], [], [], []
    for i, (x, y) in enumerate(points):
        xs = [(x, 0)]
        ys = [(y, 0)]
        if margin > 0:
            if tol < x < margin:
                xs.append((-x, 1))
            if tol < width - x < margin:
                xs.append((2 * width - x, 2))
            if tol < y < margin:
                ys.append((-y, 1))
            if tol < height - y < margin:
                ys.append((2 * height - y, 2))
        for xx, a in xs:
            for yy, b in ys:
                pos.append((xx, yy))
                idx.append(i)
                fx.append(a > 0)
                fy.append(b > 0)
                code.append(3 * a + b)
    return (
        np.array(pos, dtype=float).reshape(-1, 2),
        np.array(idx, dtype=int),
        np.array(fx, dtype=bool),
        np.array(fy, dtype=bool),
        np.array(code, dtype=int),
    )


def support(
    cloud: NodeCloud,
    points,
    target_set: str,
    radius: float,
    images: bool = False,
    min_neighbors: int = MIN_NEIGHBORS,
    brute_force: bool = False,
) -> SupportTable:
    """Neighbours of arbitrary ``points`` among one node set of ``cloud``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    target = _SET_ALIASES[target_set]
    nodes = cloud.positions(target)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tol = 1e-9 * cloud.spacing
    margin = radius * (1 + 1e-12) if images else 0.0
    ext, src, fx, fy, code = _image_copies(nodes, cloud.width, cloud.height, margin, tol)
    # images of vector data: x-mirror flips Ey, y-mirror flips Ex
    par = np.ones((len(ext), 2))
    if target == VECTOR:
        par[fy, 0] = -1.0
        par[fx, 1] = -1.0

    r_eff = radius * (1 + 1e-12)
    if brute_force:
        hits = []
        for p in pts:
            d = np.sqrt(((ext - p) ** 2).sum(axis=1))
            hits.append(np.flatnonzero(d <= r_eff).tolist())
    else:
        hits = cKDTree(ext).query_ball_point(pts, r_eff)

    indices, positions, parity = [], [], []
    for q, h in enumerate(hits):
        h = np.asarray(h, dtype=int)
        order = np.lexsort((code[h], src[h])) if len(h) else h
        h = h[order]
        if len(h) < min_neighbors:
            raise IsolatedNode(
                f"query point {q} at {tuple(pts[q])} has {len(h)} neighbours within {radius!r}"
            )
        indices.append(src[h])
        positions.append(ext[h])
        parity.append(par[h])
    return SupportTable(float(radius), target, pts, indices, positions, parity)


def point_support(nodes, points, radius: float, min_neighbors: int = MIN_NEIGHBORS) -> SupportTable:
    """Support table over a bare point list (no walls, no images)."""
    nodes = np.asarray(nodes, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hits = cKDTree(nodes).query_ball_point(pts, radius * (1 + 1e-12))
    indices, positions, parity = [], [], []
    for q, h in enumerate(hits):
        h = np.array(sorted(h), dtype=int)
        if len(h) < min_neighbors:
            raise IsolatedNode(f"query point {q} has {len(h)} neighbours within {radius!r}")
        indices.append(h)
        positions.append(nodes[h])
        parity.append(np.ones((len(h), 2)))
    return SupportTable(float(radius), "points", pts, indices, positions, parity)


def neighbors(
    cloud: NodeCloud,
    query_set: str,
    target_set: str,
    radius: float,
    images: bool = False,
    brute_force: bool = False,
) -> SupportTable:
    """Neighbours of every node of ``query_set`` among ``target_set``."""
    return support(
        cloud, cloud.positions(query_set), target_set, radius, images=images, brute_force=brute_force
    )


def spacing_ok(points: Iterable, tol: float = 1e-12) -> bool:
    """True when no two points of a single set coincide within ``tol``."""
    p = np.asarray(list(points), dtype=float)
    if len(p) < 2:
        return True
    d, _ = cKDTree(p).query(p, k=2)
    return bool(np.all(d[:, 1] > tol))


def dual_distances(cloud: NodeCloud) -> np.ndarray:
    """Distances from each scalar node to its four nearest vector nodes."""
    d, _ = cKDTree(cloud.positions_vec).query(cloud.positions_sca, k=4)
    return d


def default_support_radius(spacing: float, factor: float = 2.6) -> float:
    return factor * spacing


__all__ = [
    "NodeCloud",
    "Region",
    "SupportTable",
    "build_cavity_cloud",
    "neighbors",
    "support",
    "point_support",
    "dual_distances",
    "spacing_ok",
    "default_support_radius",
]
