"""Procedural test meshes: boxes, spheres, cylinders, and lathed shapes.

The multi-part generators also return a ground-truth part labeling, which is
what the oracle mask provider and the end-to-end checks run against.
"""
from __future__ import annotations

import numpy as np

from .mesh import FaceLabeling, TriMesh

GOLDEN = (1 + 5 ** 0.5) / 2


def box(center=(0, 0, 0), size=(1, 1, 1)) -> TriMesh:
    """Axis-aligned box, 12 triangles, outward-oriented."""
    cx, cy, cz = center
    hx, hy, hz = np.asarray(size, dtype=float) / 2
    corners = np.array([(x, y, z) for x in (-hx, hx) for y in (-hy, hy) for z in (-hz, hz)])
    corners += (cx, cy, cz)
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # -x, +x
        (0, 4, 5, 1), (2, 3, 7, 6),  # -y, +y
        (0, 2, 6, 4), (1, 5, 7, 3),  # -z, +z
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    return TriMesh(corners, faces)


def icosahedron_vertices() -> np.ndarray:
    """The 12 unit icosahedron vertex directions (golden-ratio coordinates)."""
    pts = []
    for s1 in (-1, 1):
        for s2 in (-1, 1):
            pts.append((0, s1, s2 * GOLDEN))
            pts.append((s1, s2 * GOLDEN, 0))
            pts.append((s1 * GOLDEN, 0, s2))
    pts = np.array(pts, dtype=np.float64)
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def _icosahedron_faces(vertices):
    # Faces = triangles of nearest neighbours; edge length of the unit
    # icosahedron is 2/sqrt(phi^2+1).
    edge = 2 / np.sqrt(GOLDEN ** 2 + 1)
    n = len(vertices)
    faces = []
    for i in range(n):
        for j in range(i + 1, n):
            if abs(np.linalg.norm(vertices[i] - vertices[j]) - edge) > 1e-9:
                continue
            for k in range(j + 1, n):
                if (abs(np.linalg.norm(vertices[i] - vertices[k]) - edge) < 1e-9
                        and abs(np.linalg.norm(vertices[j] - vertices[k]) - edge) < 1e-9):
                    a, b, c = vertices[i], vertices[j], vertices[k]
                    if np.dot(np.cross(b - a, c - a), a + b + c) > 0:
                        faces.append((i, j, k))
                    else:
                        faces.append((i, k, j))
    return np.array(faces, dtype=np.int64)


def _subdivided_icosahedron(subdivisions: int):
    verts = [tuple(v) for v in icosahedron_vertices()]
    faces = _icosahedron_faces(np.array(verts))
    index = {np.round(v, 12).tobytes(): i for i, v in enumerate(np.asarray(verts))}

    def midpoint(i, j):
        m = np.asarray(verts[i]) + np.asarray(verts[j])
        m /= np.linalg.norm(m)
        key = np.round(m, 12).tobytes()
        if key not in index:
            index[key] = len(verts)
            verts.append(tuple(m))
        return index[key]

    for _ in range(subdivisions):
        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = np.array(new_faces, dtype=np.int64)
    return np.array(verts, dtype=np.float64), faces


def icosphere_directions(subdivisions: int) -> np.ndarray:
    """Unit directions of the icosahedron subdivided 0, 1, or 2 times."""
    return _subdivided_icosahedron(subdivisions)[0]


def icosphere(subdivisions: int = 2, radius: float = 1.0, center=(0, 0, 0)) -> TriMesh:
    verts, faces = _subdivided_icosahedron(subdivisions)
    return TriMesh(verts * radius + np.asarray(center, dtype=float), faces)


def cylinder(radius: float = 1.0, length: float = 10.0, n_seg: int = 48, n_rings: int = 24) -> TriMesh:
    """Closed cylinder along +Z, centered at the origin."""
    angles = np.linspace(0, 2 * np.pi, n_seg, endpoint=False)
    zs = np.linspace(-length / 2, length / 2, n_rings + 1)
    verts = [(radius * np.cos(a), radius * np.sin(a), z) for z in zs for a in angles]
    faces = []
    for r in range(n_rings):
        base, nxt = r * n_seg, (r + 1) * n_seg
        for s in range(n_seg):
            s2 = (s + 1) % n_seg
            faces.append((base + s, base + s2, nxt + s))
            faces.append((base + s2, nxt + s2, nxt + s))
    bottom = len(verts)
    verts.append((0, 0, -length / 2))
    top = len(verts)
    verts.append((0, 0, length / 2))
    for s in range(n_seg):
        s2 = (s + 1) % n_seg
        faces.append((bottom, s2, s))
        faces.append((top, n_rings * n_seg + s, n_rings * n_seg + s2))
    return TriMesh(np.array(verts), faces)


def revolve(profile, part_of_row, n_seg: int = 32):
    """Lathe a (z, r) profile around +Z into a watertight mesh.

    ``profile`` rows run pole to pole: first and last rows must have r = 0.
    ``part_of_row`` assigns a part id per profile row; a band of faces between
    rows i and i+1 takes ``part_of_row[i + 1]``, so part boundaries sit exactly
    on the shared ring. Returns (TriMesh, FaceLabeling).
    """
    profile = np.asarray(profile, dtype=np.float64).copy()
    profile[np.abs(profile[:, 1]) < 1e-12, 1] = 0.0
    assert profile[0, 1] == 0 and profile[-1, 1] == 0, "profile must start/end on the axis"
    angles = np.linspace(0, 2 * np.pi, n_seg, endpoint=False)
    cos, sin = np.cos(angles), np.sin(angles)

    verts = [(0.0, 0.0, profile[0, 0])]
    ring_start = {}
    for i in range(1, len(profile) - 1):
        z, r = profile[i]
        ring_start[i] = len(verts)
        verts.extend((r * c, r * s, z) for c, s in zip(cos, sin))
    south_pole, north_pole = 0, len(verts)
    verts.append((0.0, 0.0, profile[-1, 0]))

    faces, parts = [], []
    first_ring = ring_start[1]
    for s in range(n_seg):
        s2 = (s + 1) % n_seg
        faces.append((south_pole, first_ring + s2, first_ring + s))
        parts.append(part_of_row[1])
    for i in range(1, len(profile) - 2):
        a, b = ring_start[i], ring_start[i + 1]
        for s in range(n_seg):
            s2 = (s + 1) % n_seg
            faces.append((a + s, a + s2, b + s))
            parts.append(part_of_row[i + 1])
            faces.append((a + s2, b + s2, b + s))
            parts.append(part_of_row[i + 1])
    last_ring = ring_start[len(profile) - 2]
    for s in range(n_seg):
        s2 = (s + 1) % n_seg
        faces.append((north_pole, last_ring + s, last_ring + s2))
        parts.append(part_of_row[len(profile) - 1])
    mesh = TriMesh(np.array(verts), faces)
    return mesh, FaceLabeling(np.array(parts, dtype=np.int64))


def _circle_arc(z_center, radius, t0, t1, n, include_end=True):
    """Rows of (z, r) along the arc z = z_c - R cos t, r = R sin t."""
    ts = np.linspace(t0, t1, n, endpoint=include_end)
    return np.stack([z_center - radius * np.cos(ts), radius * np.sin(ts)], axis=1)


def dumbbell(n_seg: int = 32, n_arc: int = 14, n_neck: int = 7):
    """Two fat bulbs joined by a thin neck; parts = bulb / neck / bulb."""
    bulb_r, neck_r, bulb_c = 0.7, 0.22, 1.0
    t_meet = np.pi - np.arcsin(neck_r / bulb_r)
    z_meet = -bulb_c - bulb_r * np.cos(t_meet)

    lower = _circle_arc(-bulb_c, bulb_r, 0.0, t_meet, n_arc)
    neck_z = np.linspace(z_meet, -z_meet, n_neck)[1:-1]
    neck = np.stack([neck_z, np.full(len(neck_z), neck_r)], axis=1)
    upper = _circle_arc(bulb_c, bulb_r, np.pi - t_meet, np.pi, n_arc)

    profile = np.concatenate([lower, neck, upper])
    # Bands adopt part_of_row[upper row], so neck bands start right at the crease.
    part_of_row = [0] * len(lower) + [1] * (len(neck) + 1) + [2] * (len(upper) - 1)
    return revolve(profile, part_of_row, n_seg=n_seg)


def snowman(n_seg: int = 32, n_arc: int = 14):
    """Three stacked, interpenetrating bulbs lathed into one surface."""
    bulbs = [(0.0, 0.9), (1.15, 0.65), (2.0, 0.45)]

    def cross_z(c0, r0, c1, r1):
        return (r0 ** 2 - r1 ** 2 + c1 ** 2 - c0 ** 2) / (2 * (c1 - c0))

    z01 = cross_z(*bulbs[0], *bulbs[1])
    z12 = cross_z(*bulbs[1], *bulbs[2])

    def arc_between(c, r, z_lo, z_hi, n, include_end):
        t_lo = np.arccos(np.clip((c - z_lo) / r, -1, 1))
        t_hi = np.arccos(np.clip((c - z_hi) / r, -1, 1))
        return _circle_arc(c, r, t_lo, t_hi, n, include_end)

    a0 = arc_between(*bulbs[0], bulbs[0][0] - bulbs[0][1], z01, n_arc, True)
    a1 = arc_between(*bulbs[1], z01, z12, n_arc, True)[1:]
    a2 = arc_between(*bulbs[2], z12, bulbs[2][0] + bulbs[2][1], n_arc, True)[1:]
    profile = np.concatenate([a0, a1, a2])
    part_of_row = [0] * len(a0) + [1] * len(a1) + [2] * len(a2)
    return revolve(profile, part_of_row, n_seg=n_seg)


def two_boxes(gap: float = 0.6):
    """Two disjoint unit boxes side by side; parts = one per box."""
    a = box(center=(-(0.5 + gap / 2), 0, 0))
    b = box(center=(+(0.5 + gap / 2), 0, 0))
    verts = np.concatenate([a.vertices, b.vertices])
    faces = np.concatenate([a.faces, b.faces + a.n_vertices])
    mesh = TriMesh(verts, faces)
    labels = np.concatenate([np.zeros(a.n_faces, dtype=np.int64),
                             np.ones(b.n_faces, dtype=np.int64)])
    return mesh, FaceLabeling(labels)


def strip(n_faces: int = 20, width: float = 1.0) -> TriMesh:
    """Flat triangle strip in the XY plane; face i adjoins i-1 and i+1 only."""
    verts = []
    for i in range(n_faces + 2):
        verts.append((i / 2 * width, (i % 2) * width, 0.0))
    faces = []
    for i in range(n_faces):
        if i % 2 == 0:
            faces.append((i, i + 1, i + 2))
        else:
            faces.append((i + 1, i, i + 2))
    return TriMesh(np.array(verts), faces)
