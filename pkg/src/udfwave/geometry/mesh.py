"""Triangle meshes, normalization and area-uniform surface sampling."""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateGeometry, InvalidParameter

DEGENERATE_AREA = 1e-12


class TriangleMesh:
    """Indexed triangle surface.

    vertices: (n, 3) float64, triangles: (m, 3) int64 indices into vertices.
    Instances are treated as immutable; all operations return new meshes.
    """

    __slots__ = ("vertices", "triangles")

    def __init__(self, vertices, triangles, *, drop_degenerate=False):
        v = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(triangles, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvalidParameter(f"vertices must be (n, 3), got {v.shape}")
        if t.size == 0:
            t = t.reshape(0, 3)
        if t.ndim != 2 or t.shape[1] != 3:
            raise InvalidParameter(f"triangles must be (m, 3), got {t.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidParameter("vertices contain non-finite coordinates")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise InvalidParameter("triangle index out of range")
        if drop_degenerate and t.size:
            t = t[triangle_areas(v, t) > DEGENERATE_AREA]
        self.vertices = v
        self.triangles = t

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def triangle_corners(self):
        """(m, 3, 3) array of triangle corner positions."""
        return self.vertices[self.triangles]

    def __repr__(self):
        return f"TriangleMesh({self.num_vertices} vertices, {self.num_triangles} triangles)"


class PointCloud:
    """A bag of 3-D points."""

    __slots__ = ("points",)

    def __init__(self, points):
        p = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
        if p.ndim != 2 or p.shape[1] != 3:
            raise InvalidParameter(f"points must be (n, 3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidParameter("points contain non-finite coordinates")
        self.points = p

    @property
    def count(self):
        return len(self.points)

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"PointCloud({self.count} points)"


def triangle_areas(vertices, triangles):
    corners = vertices[triangles]
    cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    return 0.5 * np.linalg.norm(cross, axis=1)


def normalize_to_unit_cube(mesh: TriangleMesh, margin: float = 0.05) -> TriangleMesh:
    """Center the bounding box at the origin and scale the longest edge to 1 - 2*margin.

    Aspect ratio is preserved, so flat (open) geometry keeps zero thickness.
    """
    margin = float(margin)
    if not 0.0 <= margin <= 0.4:
        raise InvalidParameter(f"margin must lie in [0, 0.4], got {margin}")
    if mesh.num_vertices == 0:
        raise DegenerateGeometry("cannot normalize an empty mesh")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise DegenerateGeometry("bounding box has zero extent")
    center = 0.5 * (lo + hi)
    scale = (1.0 - 2.0 * margin) / extent
    return TriangleMesh((mesh.vertices - center) * scale, mesh.triangles)


def sample_surface(mesh: TriangleMesh, n: int, seed: int = 0) -> PointCloud:
    """Draw n points area-uniformly on the surface; reproducible given seed."""
    if int(n) < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    areas = triangle_areas(mesh.vertices, mesh.triangles)
    total = areas.sum()
    if mesh.num_triangles == 0 or total <= 0.0:
        raise DegenerateGeometry("mesh has zero total area")
    rng = np.random.default_rng(seed)
    tri_idx = rng.choice(mesh.num_triangles, size=int(n), p=areas / total)
    corners = mesh.vertices[mesh.triangles[tri_idx]]
    # uniform barycentric via the square-root trick
    r1 = np.sqrt(rng.random(int(n)))
    r2 = rng.random(int(n))
    a = 1.0 - r1
    b = r1 * (1.0 - r2)
    c = r1 * r2
    pts = (
        corners[:, 0] * a[:, None]
        + corners[:, 1] * b[:, None]
        + corners[:, 2] * c[:, None]
    )
    return PointCloud(pts)
