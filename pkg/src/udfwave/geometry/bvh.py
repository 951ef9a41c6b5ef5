"""Exact point-to-mesh unsigned distance via an AABB tree.

Best-first traversal with pruning by the current best distance; queries are
exact (equal to the brute-force minimum over all triangles).
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

from ..errors import DegenerateGeometry
from .mesh import TriangleMesh

DEFAULT_LEAF_SIZE = 8


@njit(cache=True, inline="always")
def _point_triangle_dist_sq(ax, ay, az, bx, by, bz, cx, cy, cz, px, py, pz):
    # Closest point on a triangle (Ericson, Real-Time Collision Detection).
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az

    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz

    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        qx, qy, qz = apx - t * abx, apy - t * aby, apz - t * abz
        return qx * qx + qy * qy + qz * qz

    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        qx, qy, qz = apx - t * acx, apy - t * acy, apz - t * acz
        return qx * qx + qy * qy + qz * qz

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = px - (bx + t * (cx - bx))
        qy = py - (by + t * (cy - by))
        qz = pz - (bz + t * (cz - bz))
        return qx * qx + qy * qy + qz * qz

    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    qx = px - (ax + abx * v + acx * w)
    qy = py - (ay + aby * v + acy * w)
    qz = pz - (az + abz * v + acz * w)
    return qx * qx + qy * qy + qz * qz


@njit(cache=True, inline="always")
def _box_dist_sq(bmin, bmax, node, px, py, pz):
    dx = max(bmin[node, 0] - px, 0.0, px - bmax[node, 0])
    dy = max(bmin[node, 1] - py, 0.0, py - bmax[node, 1])
    dz = max(bmin[node, 2] - pz, 0.0, pz - bmax[node, 2])
    return dx * dx + dy * dy + dz * dz


@njit(cache=True)
def _query_one(bmin, bmax, left, right, start, count, order, tris, px, py, pz,
               heap_d, heap_n):
    best = np.inf
    # binary min-heap of (box distance, node)
    size = 1
    heap_d[0] = _box_dist_sq(bmin, bmax, 0, px, py, pz)
    heap_n[0] = 0
    while size > 0:
        d = heap_d[0]
        node = heap_n[0]
        size -= 1
        heap_d[0] = heap_d[size]
        heap_n[0] = heap_n[size]
        i = 0
        while True:  # sift down
            c = 2 * i + 1
            if c >= size:
                break
            if c + 1 < size and heap_d[c + 1] < heap_d[c]:
                c += 1
            if heap_d[c] < heap_d[i]:
                heap_d[i], heap_d[c] = heap_d[c], heap_d[i]
                heap_n[i], heap_n[c] = heap_n[c], heap_n[i]
                i = c
            else:
                break
        if d >= best:
            break
        if left[node] < 0:  # leaf
            for k in range(start[node], start[node] + count[node]):
                t = order[k]
                dd = _point_triangle_dist_sq(
                    tris[t, 0], tris[t, 1], tris[t, 2],
                    tris[t, 3], tris[t, 4], tris[t, 5],
                    tris[t, 6], tris[t, 7], tris[t, 8],
                    px, py, pz)
                if dd < best:
                    best = dd
        else:
            for child in (left[node], right[node]):
                cd = _box_dist_sq(bmin, bmax, child, px, py, pz)
                if cd < best:
                    j = size
                    heap_d[j] = cd
                    heap_n[j] = child
                    size += 1
                    while j > 0:  # sift up
                        p = (j - 1) // 2
                        if heap_d[j] < heap_d[p]:
                            heap_d[j], heap_d[p] = heap_d[p], heap_d[j]
                            heap_n[j], heap_n[p] = heap_n[p], heap_n[j]
                            j = p
                        else:
                            break
    return best


@njit(cache=True, parallel=True)
def _query_batch(bmin, bmax, left, right, start, count, order, tris, queries, out):
    cap = bmin.shape[0] + 2
    for q in prange(queries.shape[0]):
        heap_d = np.empty(cap, dtype=np.float64)
        heap_n = np.empty(cap, dtype=np.int64)
        out[q] = np.sqrt(
            _query_one(bmin, bmax, left, right, start, count, order, tris,
                       queries[q, 0], queries[q, 1], queries[q, 2],
                       heap_d, heap_n)
        )


class DistanceAccelerator:
    """AABB tree over a mesh's triangles for exact unsigned distance queries.

    Immutable after construction; concurrent read-only queries are safe.
    """

    def __init__(self, mesh: TriangleMesh, leaf_size: int = DEFAULT_LEAF_SIZE):
        if mesh.num_triangles == 0:
            raise DegenerateGeometry("cannot build an accelerator over zero triangles")
        self.leaf_size = int(leaf_size)
        if self.leaf_size < 1:
            self.leaf_size = 1
        corners = mesh.triangle_corners()
        self._tris = np.ascontiguousarray(corners.reshape(-1, 9))
        tmin = corners.min(axis=1)
        tmax = corners.max(axis=1)
        centroid = corners.mean(axis=1)
        self._build(tmin, tmax, centroid)

    def _build(self, tmin, tmax, centroid):
        m = len(tmin)
        order = np.arange(m, dtype=np.int64)
        cap = max(2 * m, 1)
        bmin = np.empty((cap, 3))
        bmax = np.empty((cap, 3))
        left = np.full(cap, -1, dtype=np.int64)
        right = np.full(cap, -1, dtype=np.int64)
        start = np.zeros(cap, dtype=np.int64)
        count = np.zeros(cap, dtype=np.int64)
        n_nodes = 1
        # iterative median split on the longest centroid axis
        stack = [(0, 0, m)]
        while stack:
            node, lo, hi = stack.pop()
            idx = order[lo:hi]
            bmin[node] = tmin[idx].min(axis=0)
            bmax[node] = tmax[idx].max(axis=0)
            if hi - lo <= self.leaf_size:
                start[node] = lo
                count[node] = hi - lo
                continue
            c = centroid[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            key = np.argsort(c[:, axis], kind="stable")
            order[lo:hi] = idx[key]
            mid = lo + (hi - lo) // 2
            lnode, rnode = n_nodes, n_nodes + 1
            n_nodes += 2
            left[node], right[node] = lnode, rnode
            stack.append((lnode, lo, mid))
            stack.append((rnode, mid, hi))
        self._bmin = np.ascontiguousarray(bmin[:n_nodes])
        self._bmax = np.ascontiguousarray(bmax[:n_nodes])
        self._left = left[:n_nodes]
        self._right = right[:n_nodes]
        self._start = start[:n_nodes]
        self._count = count[:n_nodes]
        self._order = order

    def distances(self, queries) -> np.ndarray:
        """Exact unsigned distances for an (n, 3) array of query points."""
        q = np.ascontiguousarray(np.asarray(queries, dtype=np.float64))
        if q.ndim == 1:
            q = q.reshape(1, 3)
        out = np.empty(len(q))
        _query_batch(self._bmin, self._bmax, self._left, self._right,
                     self._start, self._count, self._order, self._tris, q, out)
        return out

    def distance(self, point) -> float:
        return float(self.distances(np.asarray(point, dtype=np.float64).reshape(1, 3))[0])


def unsigned_distance(accel: DistanceAccelerator, query) -> float:
    """Exact distance from a point to the accelerated mesh surface."""
    return accel.distance(query)


def brute_force_distances(mesh: TriangleMesh, queries) -> np.ndarray:
    """Reference oracle: min over all triangles, vectorized over queries."""
    q = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    corners = mesh.triangle_corners()
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    out = np.empty(len(q))
    for i, p in enumerate(q):
        out[i] = np.sqrt(_pt_tri_batch_min(a, b, c, p))
    return out


def _seg_dist_sq(a, b, p):
    ab = b - a
    denom = (ab * ab).sum(1)
    denom = np.where(denom == 0.0, 1.0, denom)
    t = np.clip(((p - a) * ab).sum(1) / denom, 0.0, 1.0)
    d = a + ab * t[:, None] - p
    return (d * d).sum(1)


def _pt_tri_batch_min(a, b, c, p):
    # min over: in-face orthogonal projection (when valid) and the three edges;
    # unconditionally covers every closest-point region
    ab = b - a
    ac = c - a
    n = np.cross(ab, ac)
    nn = (n * n).sum(1)
    nn_safe = np.where(nn == 0.0, 1.0, nn)
    ap = p - a
    dist_plane = (ap * n).sum(1) / np.sqrt(nn_safe)
    proj = p - dist_plane[:, None] * n / np.sqrt(nn_safe)[:, None]
    # barycentric validity of the projection
    d00 = (ab * ab).sum(1)
    d01 = (ab * ac).sum(1)
    d11 = (ac * ac).sum(1)
    d20 = ((proj - a) * ab).sum(1)
    d21 = ((proj - a) * ac).sum(1)
    den = d00 * d11 - d01 * d01
    den_safe = np.where(den == 0.0, 1.0, den)
    v = (d11 * d20 - d01 * d21) / den_safe
    w = (d00 * d21 - d01 * d20) / den_safe
    inside = (v >= 0.0) & (w >= 0.0) & (v + w <= 1.0) & (den != 0.0) & (nn != 0.0)
    face = np.where(inside, dist_plane * dist_plane, np.inf)
    best = np.minimum(face, _seg_dist_sq(a, b, p))
    best = np.minimum(best, _seg_dist_sq(b, c, p))
    best = np.minimum(best, _seg_dist_sq(a, c, p))
    return best.min()
