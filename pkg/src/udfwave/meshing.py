"""Surface extraction from UDF volumes.

The tau-offset level set of a UDF is a closed orientable surface (a double
cover of the underlying sheet, which may be open), so plain marching cubes
applies. Vertices are then walked down the distance field along its gradient
onto the zero-level set, and the two coincident covers are merged by welding.
Open sheets survive as meshes with boundary edges; closed shapes weld into
watertight surfaces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage import measure

from .errors import EmptyLevelSet, InvalidParameter
from .geometry import TriangleMesh
from .geometry.mesh import DEGENERATE_AREA, triangle_areas
from .volume import UdfVolume


@dataclass(frozen=True)
class ExtractionConfig:
    """Extraction parameters; tau defaults to 1.5 voxel spacings."""

    tau: float | None = None
    projection_steps: int = 10
    step_damping: float = 0.8
    weld_tolerance: float | None = None

    def resolved(self, udf: UdfVolume) -> "ExtractionConfig":
        tau = 1.5 * udf.spacing if self.tau is None else float(self.tau)
        weld = 0.25 * udf.spacing if self.weld_tolerance is None else float(self.weld_tolerance)
        if not 0.0 < tau < udf.truncation:
            raise InvalidParameter(
                f"tau must lie in (0, truncation={udf.truncation}), got {tau}"
            )
        if not 0 < self.step_damping <= 1.0:
            raise InvalidParameter(f"step damping must lie in (0, 1], got {self.step_damping}")
        if int(self.projection_steps) < 1:
            raise InvalidParameter("projection steps must be >= 1")
        if weld < 0.0:
            raise InvalidParameter("weld tolerance must be >= 0")
        return ExtractionConfig(tau, int(self.projection_steps),
                                float(self.step_damping), weld)


def extract_offset_surface(udf: UdfVolume, tau: float | None = None) -> TriangleMesh:
    """Marching-cubes mesh of the level set {U = tau} (linear edge interpolation)."""
    tau = 1.5 * udf.spacing if tau is None else float(tau)
    if not 0.0 < tau < udf.truncation:
        raise InvalidParameter(
            f"tau must lie in (0, truncation={udf.truncation}), got {tau}"
        )
    arr = udf.as_array()
    if arr.min() >= tau:
        raise EmptyLevelSet(
            f"volume minimum {arr.min():.6g} is not below tau={tau:.6g}"
        )
    verts, faces, _, _ = measure.marching_cubes(
        arr, level=tau, spacing=(udf.spacing,) * 3, allow_degenerate=False
    )
    verts = verts + np.asarray(udf.origin)
    return TriangleMesh(verts, faces, drop_degenerate=True)


def _trilinear(arr, spacing, origin, pts):
    """Trilinear interpolation at world-space points (clamped to the grid)."""
    nx, ny, nz = arr.shape
    g = (pts - origin) / spacing
    g[:, 0] = np.clip(g[:, 0], 0.0, nx - 1.0)
    g[:, 1] = np.clip(g[:, 1], 0.0, ny - 1.0)
    g[:, 2] = np.clip(g[:, 2], 0.0, nz - 1.0)
    i0 = np.minimum(g.astype(np.int64), [nx - 2, ny - 2, nz - 2])
    i0 = np.maximum(i0, 0)
    f = g - i0
    x0, y0, z0 = i0[:, 0], i0[:, 1], i0[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    c00 = arr[x0, y0, z0] * (1 - fx) + arr[x0 + 1, y0, z0] * fx
    c10 = arr[x0, y0 + 1, z0] * (1 - fx) + arr[x0 + 1, y0 + 1, z0] * fx
    c01 = arr[x0, y0, z0 + 1] * (1 - fx) + arr[x0 + 1, y0, z0 + 1] * fx
    c11 = arr[x0, y0 + 1, z0 + 1] * (1 - fx) + arr[x0 + 1, y0 + 1, z0 + 1] * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    return c0 * (1 - fz) + c1 * fz


def _field_gradient(arr, spacing, origin, pts, lo, hi):
    """Central differences of the trilinear field, one-sided at the bounds."""
    grad = np.empty_like(pts)
    h = spacing
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        plus = np.minimum(pts + step, hi)
        minus = np.maximum(pts - step, lo)
        span = plus[:, axis] - minus[:, axis]
        span = np.where(span <= 0.0, 1.0, span)
        grad[:, axis] = (
            _trilinear(arr, spacing, origin, plus)
            - _trilinear(arr, spacing, origin, minus)
        ) / span
    return grad


def project_to_zero_set(mesh: TriangleMesh, udf: UdfVolume,
                        config: ExtractionConfig | None = None) -> TriangleMesh:
    """Move vertices against the field gradient by their distance value.

    Each step: p <- p - damping * U(p) * grad(p)/|grad(p)|, with vertices
    clamped to the volume bounds and left in place where the gradient
    degenerates (|grad| < 1e-8).
    """
    config = (config or ExtractionConfig()).resolved(udf)
    arr = udf.as_array()
    origin = np.asarray(udf.origin)
    lo = origin
    hi = origin + udf.spacing * (np.asarray(arr.shape) - 1)
    pts = mesh.vertices.copy()
    for _ in range(config.projection_steps):
        u = _trilinear(arr, udf.spacing, origin, pts)
        g = _field_gradient(arr, udf.spacing, origin, pts, lo, hi)
        norm = np.linalg.norm(g, axis=1)
        ok = norm > 1e-8
        direction = np.zeros_like(g)
        direction[ok] = g[ok] / norm[ok, None]
        pts = pts - config.step_damping * (u * ok)[:, None] * direction
        np.clip(pts, lo, hi, out=pts)
    return TriangleMesh(pts, mesh.triangles)


def weld_and_clean(mesh: TriangleMesh, tolerance: float = 0.0) -> TriangleMesh:
    """Merge vertices within tolerance, drop zero-area and duplicate triangles."""
    tolerance = float(tolerance)
    if tolerance < 0.0:
        raise InvalidParameter("tolerance must be >= 0")
    verts = mesh.vertices
    tris = mesh.triangles
    if tolerance > 0.0 and len(verts):
        keys = np.round(verts / tolerance).astype(np.int64)
        _, first, inverse = np.unique(keys, axis=0, return_index=True,
                                      return_inverse=True)
        verts = verts[first]
        tris = inverse[tris]
    if len(tris):
        # drop collapsed triangles
        ok = (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) \
            & (tris[:, 0] != tris[:, 2])
        tris = tris[ok]
    if len(tris):
        tris = tris[triangle_areas(verts, tris) > DEGENERATE_AREA]
    if len(tris):
        # drop duplicates regardless of winding
        key = np.sort(tris, axis=1)
        _, first = np.unique(key, axis=0, return_index=True)
        tris = tris[np.sort(first)]
    # drop unreferenced vertices
    if len(tris):
        used, inverse = np.unique(tris, return_inverse=True)
        verts = verts[used]
        tris = inverse.reshape(-1, 3)
    else:
        verts = verts[:0]
        tris = tris[:0]
    return TriangleMesh(verts, tris)


def extract_surface(udf: UdfVolume,
                    config: ExtractionConfig | None = None) -> TriangleMesh:
    """Offset extraction, zero-set projection and welding in one call."""
    config = (config or ExtractionConfig()).resolved(udf)
    mesh = extract_offset_surface(udf, config.tau)
    mesh = project_to_zero_set(mesh, udf, config)
    return weld_and_clean(mesh, config.weld_tolerance)


def boundary_edge_count(mesh: TriangleMesh) -> int:
    """Edges used by exactly one triangle (0 for watertight surfaces)."""
    if mesh.num_triangles == 0:
        return 0
    t = mesh.triangles
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return int((counts == 1).sum())
