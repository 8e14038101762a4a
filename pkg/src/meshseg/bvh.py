"""BVH-accelerated ray casting over triangle soups.

The BVH is built once per mesh (median split on the longest centroid axis)
and traversed inside numba kernels. A brute-force all-triangle caster with
the same per-triangle arithmetic is kept alongside as the correctness oracle
for the traversal: both must produce bit-identical hit buffers.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

BACKGROUND = -1

_LEAF_SIZE = 4


class BVH:
    """Flat-array bounding volume hierarchy over a mesh's triangles."""

    def __init__(self, vertices: np.ndarray, faces: np.ndarray):
        tri = np.ascontiguousarray(vertices[faces], dtype=np.float64)  # (F,3,3)
        self.tri = tri
        centroids = tri.mean(axis=1)
        n = len(tri)
        order = np.arange(n, dtype=np.int64)

        nodes_min, nodes_max = [], []
        left, right = [], []
        leaf_start, leaf_count = [], []

        def add_node():
            nodes_min.append(np.zeros(3))
            nodes_max.append(np.zeros(3))
            left.append(-1)
            right.append(-1)
            leaf_start.append(-1)
            leaf_count.append(0)
            return len(left) - 1

        # Iterative build; stack entries are (node_index, start, end).
        root = add_node()
        stack = [(root, 0, n)]
        while stack:
            node, lo, hi = stack.pop()
            idx = order[lo:hi]
            lo_bound = tri[idx].reshape(-1, 3).min(axis=0)
            hi_bound = tri[idx].reshape(-1, 3).max(axis=0)
            nodes_min[node], nodes_max[node] = lo_bound, hi_bound
            if hi - lo <= _LEAF_SIZE:
                leaf_start[node], leaf_count[node] = lo, hi - lo
                continue
            cent = centroids[idx]
            axis = int(np.argmax(cent.max(axis=0) - cent.min(axis=0)))
            mid = (hi - lo) // 2
            # argsort (not argpartition) keeps the build order deterministic.
            local = np.argsort(cent[:, axis], kind="stable")
            order[lo:hi] = idx[local]
            l_node, r_node = add_node(), add_node()
            left[node], right[node] = l_node, r_node
            stack.append((l_node, lo, lo + mid))
            stack.append((r_node, lo + mid, hi))

        self.nodes_min = np.ascontiguousarray(nodes_min, dtype=np.float64)
        self.nodes_max = np.ascontiguousarray(nodes_max, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.leaf_start = np.asarray(leaf_start, dtype=np.int64)
        self.leaf_count = np.asarray(leaf_count, dtype=np.int64)
        self.prim_order = order

    def kernel_args(self):
        return (self.tri, self.nodes_min, self.nodes_max, self.left, self.right,
                self.leaf_start, self.leaf_count, self.prim_order)


@njit(cache=True, inline="always")
def _ray_triangle(ox, oy, oz, dx, dy, dz, tri, f):
    """Moller-Trumbore without culling; returns hit distance or inf."""
    ax, ay, az = tri[f, 0, 0], tri[f, 0, 1], tri[f, 0, 2]
    e1x, e1y, e1z = tri[f, 1, 0] - ax, tri[f, 1, 1] - ay, tri[f, 1, 2] - az
    e2x, e2y, e2z = tri[f, 2, 0] - ax, tri[f, 2, 1] - ay, tri[f, 2, 2] - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -1e-12 < det < 1e-12:
        return np.inf
    inv = 1.0 / det
    tx, ty, tz = ox - ax, oy - ay, oz - az
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return np.inf
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return np.inf
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t <= 0.0:
        return np.inf
    return t


@njit(cache=True, inline="always")
def _slab_hit(ox, oy, oz, idx, idy, idz, bmin, bmax, node, best_t):
    t0 = (bmin[node, 0] - ox) * idx
    t1 = (bmax[node, 0] - ox) * idx
    tmin = min(t0, t1)
    tmax = max(t0, t1)
    t0 = (bmin[node, 1] - oy) * idy
    t1 = (bmax[node, 1] - oy) * idy
    tmin = max(tmin, min(t0, t1))
    tmax = min(tmax, max(t0, t1))
    t0 = (bmin[node, 2] - oz) * idz
    t1 = (bmax[node, 2] - oz) * idz
    tmin = max(tmin, min(t0, t1))
    tmax = min(tmax, max(t0, t1))
    return tmax >= max(tmin, 0.0) and tmin <= best_t


@njit(cache=True)
def _cast_bvh(tri, bmin, bmax, left, right, lstart, lcount, order,
              ox, oy, oz, dx, dy, dz, t_min, skip_face):
    """Nearest hit (t, face) along a ray; ties broken toward low face index."""
    idx = 1.0 / dx if dx != 0.0 else np.inf
    idy = 1.0 / dy if dy != 0.0 else np.inf
    idz = 1.0 / dz if dz != 0.0 else np.inf
    best_t = np.inf
    best_f = -1
    stack = np.empty(128, dtype=np.int64)
    top = 0
    stack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _slab_hit(ox, oy, oz, idx, idy, idz, bmin, bmax, node, best_t):
            continue
        if lstart[node] >= 0:
            for k in range(lstart[node], lstart[node] + lcount[node]):
                f = order[k]
                if f == skip_face:
                    continue
                t = _ray_triangle(ox, oy, oz, dx, dy, dz, tri, f)
                if t > t_min and (t < best_t or (t == best_t and f < best_f)):
                    best_t = t
                    best_f = f
        else:
            stack[top] = left[node]
            top += 1
            stack[top] = right[node]
            top += 1
    return best_t, best_f


@njit(cache=True)
def _cast_brute(tri, ox, oy, oz, dx, dy, dz, t_min, skip_face):
    """Oracle: test every triangle in index order, no acceleration."""
    best_t = np.inf
    best_f = -1
    for f in range(tri.shape[0]):
        if f == skip_face:
            continue
        t = _ray_triangle(ox, oy, oz, dx, dy, dz, tri, f)
        if t > t_min and t < best_t:
            best_t = t
            best_f = f
    return best_t, best_f


@njit(cache=True, parallel=True)
def _render_rays(tri, bmin, bmax, left, right, lstart, lcount, order,
                 origin, fwd, cam_right, cam_up, tan_half, aspect,
                 width, height, face_ids, hit_ts):
    for py in prange(height):
        ty = (1.0 - 2.0 * (py + 0.5) / height) * tan_half
        for px in range(width):
            tx = (2.0 * (px + 0.5) / width - 1.0) * tan_half * aspect
            dx = fwd[0] + tx * cam_right[0] + ty * cam_up[0]
            dy = fwd[1] + tx * cam_right[1] + ty * cam_up[1]
            dz = fwd[2] + tx * cam_right[2] + ty * cam_up[2]
            norm = (dx * dx + dy * dy + dz * dz) ** 0.5
            dx /= norm
            dy /= norm
            dz /= norm
            t, f = _cast_bvh(tri, bmin, bmax, left, right, lstart, lcount, order,
                             origin[0], origin[1], origin[2], dx, dy, dz, 0.0, -1)
            face_ids[py, px] = f
            hit_ts[py, px] = t


@njit(cache=True)
def _render_rays_brute(tri, origin, fwd, cam_right, cam_up, tan_half, aspect,
                       width, height, face_ids):
    for py in range(height):
        ty = (1.0 - 2.0 * (py + 0.5) / height) * tan_half
        for px in range(width):
            tx = (2.0 * (px + 0.5) / width - 1.0) * tan_half * aspect
            dx = fwd[0] + tx * cam_right[0] + ty * cam_up[0]
            dy = fwd[1] + tx * cam_right[1] + ty * cam_up[1]
            dz = fwd[2] + tx * cam_right[2] + ty * cam_up[2]
            norm = (dx * dx + dy * dy + dz * dz) ** 0.5
            dx /= norm
            dy /= norm
            dz /= norm
            t, f = _cast_brute(tri, origin[0], origin[1], origin[2], dx, dy, dz, 0.0, -1)
            face_ids[py, px] = f


@njit(cache=True, parallel=True)
def _sdf_rays(tri, bmin, bmax, left, right, lstart, lcount, order,
              origins, axes, normals, half_angle, n_rays, t_min, grazing_eps,
              distances, angles):
    n_faces = origins.shape[0]
    for f in prange(n_faces):
        ax, ay, az = axes[f, 0], axes[f, 1], axes[f, 2]
        # Deterministic per-face tangent frame.
        if abs(ax) < 0.9:
            t1x, t1y, t1z = 0.0, az, -ay
        else:
            t1x, t1y, t1z = -az, 0.0, ax
        norm = (t1x * t1x + t1y * t1y + t1z * t1z) ** 0.5
        t1x /= norm
        t1y /= norm
        t1z /= norm
        t2x = ay * t1z - az * t1y
        t2y = az * t1x - ax * t1z
        t2z = ax * t1y - ay * t1x
        # Golden-ratio azimuth sequence with a per-face offset (Knuth hash).
        offset = ((f * np.uint64(2654435761)) % np.uint64(4294967296)) / 4294967296.0
        for k in range(n_rays):
            psi = half_angle * (k + 0.5) / n_rays
            phi = 2.0 * np.pi * ((k * 0.6180339887498949 + offset) % 1.0)
            sp = np.sin(psi)
            dx = np.cos(psi) * ax + sp * (np.cos(phi) * t1x + np.sin(phi) * t2x)
            dy = np.cos(psi) * ay + sp * (np.cos(phi) * t1y + np.sin(phi) * t2y)
            dz = np.cos(psi) * az + sp * (np.cos(phi) * t1z + np.sin(phi) * t2z)
            best_t = np.inf
            ox, oy, oz = origins[f, 0], origins[f, 1], origins[f, 2]
            # Walk forward past grazing hits: nearest valid intersection.
            start = t_min
            for _ in range(8):
                t, hit = _cast_bvh(tri, bmin, bmax, left, right, lstart, lcount,
                                   order, ox, oy, oz, dx, dy, dz, start, f)
                if hit < 0:
                    break
                d = (dx * normals[hit, 0] + dy * normals[hit, 1]
                     + dz * normals[hit, 2])
                if d > grazing_eps:
                    best_t = t
                    break
                start = t
            distances[f, k] = best_t
            angles[f, k] = psi


def warmup():
    """Compile the kernels on a one-triangle scene (first call is slow)."""
    tri = np.array([[[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]])
    bvh = BVH(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]), np.array([[0, 1, 2]]))
    _cast_bvh(*bvh.kernel_args(), 0.2, 0.2, 1.0, 0.0, 0.0, -1.0, 0.0, -1)
    _cast_brute(tri, 0.2, 0.2, 1.0, 0.0, 0.0, -1.0, 0.0, -1)
