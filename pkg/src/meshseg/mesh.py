"""Triangle mesh representation with the topology queries the pipeline needs.

A :class:`TriMesh` is immutable after construction: every derived quantity
(normals, areas, adjacency, centroid) is computed once in ``__init__`` and
the arrays are marked read-only, so meshes can be shared freely across
threads and processes.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMesh, LengthMismatch, NotAdjacent

logger = logging.getLogger(__name__)

UNLABELED = -1

WELD_TOLERANCE = 1e-9
DEGENERATE_AREA = 1e-14


class TriMesh:
    """Indexed triangle mesh with precomputed geometry and edge-adjacency.

    Parameters
    ----------
    vertices : (V, 3) float array
    faces : (F, 3) int array
        Vertex index triples. Vertices are welded (tolerance ``1e-9``) and
        degenerate faces are dropped before anything else is derived.
    weld : bool
        Disable to keep vertices exactly as given (used by unwelded exports).
    """

    def __init__(self, vertices, faces, weld: bool = True):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.ascontiguousarray(faces, dtype=np.int64).reshape(-1, 3)
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise EmptyMesh("face indices reference missing vertices")
        if weld:
            vertices, faces = _weld_vertices(vertices, faces)
        vertices, faces = _drop_degenerate(vertices, faces)
        if len(faces) == 0:
            raise EmptyMesh("mesh has no non-degenerate faces")

        self.vertices = vertices
        self.faces = faces

        tri = vertices[faces]  # (F, 3, 3)
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        double_area = np.linalg.norm(cross, axis=1)
        self.face_areas = 0.5 * double_area
        self.face_normals = cross / double_area[:, None]
        self.face_centroids = tri.mean(axis=1)

        total = self.face_areas.sum()
        self.centroid = (self.face_centroids * self.face_areas[:, None]).sum(axis=0) / total
        self.bounding_radius = float(np.linalg.norm(vertices - self.centroid, axis=1).max())

        self.adjacency_pairs = _adjacency_pairs(faces)
        self.face_adjacency = _adjacency_lists(len(faces), self.adjacency_pairs)

        for arr in (self.vertices, self.faces, self.face_areas, self.face_normals,
                    self.face_centroids, self.adjacency_pairs):
            arr.setflags(write=False)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def scaled(self, s: float) -> "TriMesh":
        """Similarity-scaled copy about the origin."""
        return TriMesh(self.vertices * s, self.faces, weld=False)

    def __repr__(self):
        return f"TriMesh({self.n_vertices} vertices, {self.n_faces} faces)"


def _weld_vertices(vertices, faces):
    if len(vertices) == 0:
        return vertices, faces
    # Quantize to the weld grid; first occurrence keeps its exact coordinates.
    keys = np.round(vertices / WELD_TOLERANCE).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    if len(first) == len(vertices):
        return vertices, faces
    remap = inverse.reshape(-1)
    return vertices[first], remap[faces] if faces.size else faces


def _drop_degenerate(vertices, faces):
    if len(faces) == 0:
        return vertices, faces
    repeated = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    tri = vertices[faces]
    double_area = np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    bad = repeated | (double_area < DEGENERATE_AREA)
    n_bad = int(bad.sum())
    if n_bad:
        logger.warning("dropping %d degenerate face(s)", n_bad)
        faces = faces[~bad]
    return vertices, faces


def _adjacency_pairs(faces):
    """Unique unordered pairs of faces sharing an edge, shape (E, 2), f < g."""
    n = len(faces)
    halfedges = np.stack([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=1).reshape(-1, 2)
    owners = np.repeat(np.arange(n), 3)
    keys = np.sort(halfedges, axis=1)
    order = np.lexsort((keys[:, 1], keys[:, 0]))
    keys, owners = keys[order], owners[order]
    pairs = []
    i = 0
    m = len(keys)
    while i < m:
        j = i + 1
        while j < m and keys[j, 0] == keys[i, 0] and keys[j, 1] == keys[i, 1]:
            j += 1
        if j - i > 1:
            group = owners[i:j]
            for a in range(len(group)):
                for b in range(a + 1, len(group)):
                    f, g = group[a], group[b]
                    if f != g:
                        pairs.append((min(f, g), max(f, g)))
        i = j
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(np.array(pairs, dtype=np.int64), axis=0)


def _adjacency_lists(n_faces, pairs):
    lists = [[] for _ in range(n_faces)]
    for f, g in pairs:
        lists[f].append(int(g))
        lists[g].append(int(f))
    return [np.array(sorted(adj), dtype=np.int64) for adj in lists]


@dataclass
class FaceLabeling:
    """Per-face part labels; ``UNLABELED`` marks faces no part claimed."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)

    @property
    def num_labels(self) -> int:
        present = self.labels[self.labels != UNLABELED]
        return int(len(np.unique(present)))

    @property
    def is_full(self) -> bool:
        return bool(np.all(self.labels != UNLABELED))

    def copy(self) -> "FaceLabeling":
        return FaceLabeling(self.labels.copy())


def check_labeling(mesh: TriMesh, labeling: FaceLabeling):
    if len(labeling.labels) != mesh.n_faces:
        raise LengthMismatch(
            f"labeling has {len(labeling.labels)} entries for {mesh.n_faces} faces")


def connected_components(mesh: TriMesh, labeling: FaceLabeling) -> FaceLabeling:
    """Split every label into its edge-connected face components.

    Output labels are densely renumbered in order of each component's first
    face index; UNLABELED faces pass through unchanged.
    """
    check_labeling(mesh, labeling)
    labels = labeling.labels
    out = np.full(mesh.n_faces, UNLABELED, dtype=np.int64)
    next_label = 0
    for seed in range(mesh.n_faces):
        if labels[seed] == UNLABELED or out[seed] != UNLABELED:
            continue
        lab = labels[seed]
        queue = deque([seed])
        out[seed] = next_label
        while queue:
            f = queue.popleft()
            for g in mesh.face_adjacency[f]:
                if out[g] == UNLABELED and labels[g] == lab:
                    out[g] = next_label
                    queue.append(g)
        next_label += 1
    return FaceLabeling(out)


def relabel_dense(labeling: FaceLabeling) -> FaceLabeling:
    """Renumber labels to 0..K-1 in order of first appearance."""
    labels = labeling.labels
    out = np.full_like(labels, UNLABELED)
    mapping = {}
    for i, lab in enumerate(labels):
        if lab == UNLABELED:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return FaceLabeling(out)


def dihedral_angle(mesh: TriMesh, f: int, g: int) -> float:
    """Angle between the normals of two edge-adjacent faces, in [0, pi]."""
    if g not in mesh.face_adjacency[f]:
        raise NotAdjacent(f"faces {f} and {g} share no edge")
    d = float(np.dot(mesh.face_normals[f], mesh.face_normals[g]))
    return float(np.arccos(np.clip(d, -1.0, 1.0)))


def edge_is_convex(mesh: TriMesh, f: int, g: int) -> bool:
    """True when the shared edge bends outward (or is flat).

    Decided by whether each face's centroid sits behind the other face's
    plane; the symmetric sum keeps the answer independent of argument order.
    """
    if g not in mesh.face_adjacency[f]:
        raise NotAdjacent(f"faces {f} and {g} share no edge")
    return bool(_convexity_scores(mesh, np.array([[f, g]]))[0])


def dihedral_angles(mesh: TriMesh, pairs: np.ndarray):
    """Vectorized dihedral angle + convexity for an (E, 2) face-pair array."""
    n_f = mesh.face_normals[pairs[:, 0]]
    n_g = mesh.face_normals[pairs[:, 1]]
    cos = np.clip((n_f * n_g).sum(axis=1), -1.0, 1.0)
    return np.arccos(cos), _convexity_scores(mesh, pairs)


def _convexity_scores(mesh: TriMesh, pairs):
    c_f = mesh.face_centroids[pairs[:, 0]]
    c_g = mesh.face_centroids[pairs[:, 1]]
    n_f = mesh.face_normals[pairs[:, 0]]
    n_g = mesh.face_normals[pairs[:, 1]]
    s = (n_f * (c_g - c_f)).sum(axis=1) + (n_g * (c_f - c_g)).sum(axis=1)
    return s <= 1e-12
