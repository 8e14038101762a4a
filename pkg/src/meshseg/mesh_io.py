"""Mesh file I/O (OFF, OBJ, PLY ascii/binary, GLB) and labeling export.

Loaders fan-triangulate polygons and hand the raw arrays to
:class:`~meshseg.mesh.TriMesh`, which welds duplicates and drops slivers.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError
from .mesh import UNLABELED, FaceLabeling, TriMesh

# Visually distinct palette (tab20-style), assigned largest-area region first.
PALETTE = np.array([
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
    (188, 189, 34), (23, 190, 207), (174, 199, 232), (255, 187, 120),
    (152, 223, 138), (255, 152, 150), (197, 176, 213), (196, 156, 148),
    (247, 182, 210), (199, 199, 199), (219, 219, 141), (158, 218, 229),
], dtype=np.uint8)

UNLABELED_COLOR = np.array((40, 40, 40), dtype=np.uint8)


def load_mesh(path, format: str | None = None) -> TriMesh:
    """Load a mesh file, inferring the format from the extension by default."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "off":
        vertices, faces = _load_off(path)
    elif fmt == "obj":
        vertices, faces = _load_obj(path)
    elif fmt == "ply":
        vertices, faces = _load_ply(path)
    elif fmt in ("glb", "gltf"):
        vertices, faces = _load_glb(path)
    else:
        raise ParseError(f"unsupported mesh format {fmt!r}")
    return TriMesh(vertices, faces)


def save_mesh(mesh: TriMesh, path, format: str | None = None):
    """Save as OFF, OBJ, or ascii PLY (the lossless round-trip formats)."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "off":
        _save_off(mesh, path)
    elif fmt == "obj":
        _save_obj(mesh, path)
    elif fmt == "ply":
        _save_ply(mesh, path)
    elif fmt == "glb":
        _save_glb(path, mesh.vertices, mesh.faces, colors=None)
    else:
        raise ParseError(f"unsupported save format {fmt!r}")


def _fan_triangulate(polygons):
    tris = []
    for poly in polygons:
        for k in range(1, len(poly) - 1):
            tris.append((poly[0], poly[k], poly[k + 1]))
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


# ---------------------------------------------------------------- OFF


def _load_off(path):
    with open(path, "r", errors="replace") as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or not tokens[0].upper().endswith("OFF"):
        raise ParseError(f"{path}: missing OFF header")
    tokens = tokens[1:]
    try:
        nv, nf = int(tokens[0]), int(tokens[1])
        pos = 3  # skip edge count
        vertices = np.array(tokens[pos:pos + 3 * nv], dtype=np.float64).reshape(nv, 3)
        pos += 3 * nv
        polygons = []
        for _ in range(nf):
            k = int(tokens[pos])
            polygons.append([int(t) for t in tokens[pos + 1:pos + 1 + k]])
            pos += 1 + k
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed OFF ({exc})") from exc
    return vertices, _fan_triangulate(polygons)


def _save_off(mesh, path):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} 0\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


# ---------------------------------------------------------------- OBJ


def _load_obj(path):
    vertices, polygons = [], []
    try:
        with open(path, "r", errors="replace") as fh:
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                if parts[0] == "v":
                    vertices.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    idx = []
                    for token in parts[1:]:
                        i = int(token.split("/")[0])
                        idx.append(i - 1 if i > 0 else len(vertices) + i)
                    polygons.append(idx)
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed OBJ ({exc})") from exc
    if not vertices:
        raise ParseError(f"{path}: no vertices")
    return np.array(vertices, dtype=np.float64), _fan_triangulate(polygons)


def _save_obj(mesh, path):
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


# ---------------------------------------------------------------- PLY

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _load_ply(path):
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        header_end = data.index(b"end_header\n") + len(b"end_header\n")
    except ValueError:
        raise ParseError(f"{path}: no end_header") from None
    header = data[:header_end].decode("ascii", errors="replace").splitlines()
    body = data[header_end:]

    fmt = None
    elements = []  # (name, count, [(kind, spec...)])
    for line in header:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property" and elements:
            if parts[1] == "list":
                elements[-1][2].append(("list", _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]], parts[4]))
            else:
                elements[-1][2].append(("scalar", _PLY_TYPES[parts[1]], parts[2]))
    if fmt is None:
        raise ParseError(f"{path}: missing format line")

    if fmt == "ascii":
        return _parse_ply_ascii(body, elements, path)
    if fmt in ("binary_little_endian", "binary_big_endian"):
        endian = "<" if fmt == "binary_little_endian" else ">"
        return _parse_ply_binary(body, elements, endian, path)
    raise ParseError(f"{path}: unknown PLY format {fmt!r}")


def _parse_ply_ascii(body, elements, path):
    tokens = body.decode("ascii", errors="replace").split()
    pos = 0
    vertices, polygons = None, []
    try:
        for name, count, props in elements:
            rows = []
            for _ in range(count):
                row = {}
                for prop in props:
                    if prop[0] == "list":
                        k = int(tokens[pos]); pos += 1
                        row[prop[3]] = [float(tokens[pos + i]) for i in range(k)]
                        pos += k
                    else:
                        row[prop[2]] = float(tokens[pos]); pos += 1
                rows.append(row)
            vertices, polygons = _ply_collect(name, rows, vertices, polygons)
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed ascii PLY ({exc})") from exc
    if vertices is None:
        raise ParseError(f"{path}: no vertex element")
    return vertices, _fan_triangulate(polygons)


def _parse_ply_binary(body, elements, endian, path):
    pos = 0
    vertices, polygons = None, []
    try:
        for name, count, props in elements:
            rows = []
            fixed = all(p[0] == "scalar" for p in props)
            if fixed:
                dtype = np.dtype([(p[2], endian + p[1]) for p in props])
                arr = np.frombuffer(body, dtype=dtype, count=count, offset=pos)
                pos += dtype.itemsize * count
                rows = arr
            else:
                for _ in range(count):
                    row = {}
                    for prop in props:
                        if prop[0] == "list":
                            cnt_dt = np.dtype(endian + prop[1])
                            k = int(np.frombuffer(body, cnt_dt, 1, pos)[0])
                            pos += cnt_dt.itemsize
                            val_dt = np.dtype(endian + prop[2])
                            row[prop[3]] = np.frombuffer(body, val_dt, k, pos).tolist()
                            pos += val_dt.itemsize * k
                        else:
                            dt = np.dtype(endian + prop[1])
                            row[prop[2]] = float(np.frombuffer(body, dt, 1, pos)[0])
                            pos += dt.itemsize
                    rows.append(row)
            vertices, polygons = _ply_collect(name, rows, vertices, polygons)
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed binary PLY ({exc})") from exc
    if vertices is None:
        raise ParseError(f"{path}: no vertex element")
    return vertices, _fan_triangulate(polygons)


def _ply_collect(name, rows, vertices, polygons):
    if name == "vertex" and len(rows):
        if isinstance(rows, np.ndarray):
            vertices = np.stack([rows["x"], rows["y"], rows["z"]], axis=1).astype(np.float64)
        else:
            vertices = np.array([[r["x"], r["y"], r["z"]] for r in rows], dtype=np.float64)
    elif name == "face":
        for r in rows:
            key = "vertex_indices" if "vertex_indices" in r else "vertex_index"
            polygons.append([int(i) for i in r[key]])
    return vertices, polygons


def _save_ply(mesh, path, colors=None, binary=False):
    vertices, faces = mesh.vertices, mesh.faces
    if binary:
        _save_ply_binary(path, vertices, faces, colors)
        return
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(vertices)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        if colors is not None:
            fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write(f"element face {len(faces)}\n")
        fh.write("property list uchar int vertex_indices\nend_header\n")
        for i, v in enumerate(vertices):
            line = f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g}"
            if colors is not None:
                c = colors[i]
                line += f" {c[0]} {c[1]} {c[2]}"
            fh.write(line + "\n")
        for f in faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def _save_ply_binary(path, vertices, faces, colors=None):
    with open(path, "wb") as fh:
        header = ["ply", "format binary_little_endian 1.0",
                  f"element vertex {len(vertices)}",
                  "property float x", "property float y", "property float z"]
        if colors is not None:
            header += ["property uchar red", "property uchar green", "property uchar blue"]
        header += [f"element face {len(faces)}",
                   "property list uchar int vertex_indices", "end_header", ""]
        fh.write("\n".join(header).encode("ascii"))
        for i, v in enumerate(vertices):
            fh.write(struct.pack("<3f", *v))
            if colors is not None:
                fh.write(struct.pack("<3B", *colors[i]))
        for f in faces:
            fh.write(struct.pack("<B3i", 3, *f))


# ---------------------------------------------------------------- GLB

_GLB_MAGIC = 0x46546C67
_COMPONENT_DTYPES = {5120: "i1", 5121: "u1", 5122: "i2", 5123: "u2", 5125: "u4", 5126: "f4"}
_TYPE_WIDTH = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4, "MAT4": 16}


def _load_glb(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or struct.unpack_from("<I", data, 0)[0] != _GLB_MAGIC:
        raise ParseError(f"{path}: not a GLB container")
    pos, gltf, blob = 12, None, b""
    while pos + 8 <= len(data):
        length, kind = struct.unpack_from("<II", data, pos)
        chunk = data[pos + 8:pos + 8 + length]
        if kind == 0x4E4F534A:  # JSON
            gltf = json.loads(chunk.decode("utf-8"))
        elif kind == 0x004E4942:  # BIN
            blob = chunk
        pos += 8 + length + (-length % 4)
    if gltf is None:
        raise ParseError(f"{path}: GLB without JSON chunk")

    def read_accessor(idx):
        acc = gltf["accessors"][idx]
        view = gltf["bufferViews"][acc["bufferView"]]
        dtype = np.dtype("<" + _COMPONENT_DTYPES[acc["componentType"]])
        width = _TYPE_WIDTH[acc["type"]]
        offset = view.get("byteOffset", 0) + acc.get("byteOffset", 0)
        stride = view.get("byteStride")
        if stride and stride != dtype.itemsize * width:
            raw = np.frombuffer(blob, np.uint8, acc["count"] * stride, offset)
            raw = raw.reshape(acc["count"], stride)[:, :dtype.itemsize * width]
            arr = raw.reshape(-1).view(dtype)
        else:
            arr = np.frombuffer(blob, dtype, acc["count"] * width, offset)
        return arr.reshape(acc["count"], width) if width > 1 else arr

    verts_all, faces_all, offset = [], [], 0
    for node_index, transform in _walk_gltf_nodes(gltf):
        node = gltf["nodes"][node_index]
        if "mesh" not in node:
            continue
        for prim in gltf["meshes"][node["mesh"]]["primitives"]:
            if prim.get("mode", 4) != 4 or "POSITION" not in prim["attributes"]:
                continue
            pos3 = read_accessor(prim["attributes"]["POSITION"]).astype(np.float64)
            ones = np.concatenate([pos3, np.ones((len(pos3), 1))], axis=1)
            pos3 = (ones @ transform.T)[:, :3]
            if "indices" in prim:
                idx = read_accessor(prim["indices"]).astype(np.int64).reshape(-1, 3)
            else:
                idx = np.arange(len(pos3), dtype=np.int64).reshape(-1, 3)
            verts_all.append(pos3)
            faces_all.append(idx + offset)
            offset += len(pos3)
    if not verts_all:
        raise ParseError(f"{path}: no triangle primitives")
    return np.concatenate(verts_all), np.concatenate(faces_all)


def _walk_gltf_nodes(gltf):
    scene = gltf.get("scene", 0)
    roots = gltf.get("scenes", [{"nodes": list(range(len(gltf.get("nodes", []))))}])[scene].get("nodes", [])
    stack = [(r, np.eye(4)) for r in roots]
    while stack:
        idx, parent = stack.pop()
        node = gltf["nodes"][idx]
        local = _node_matrix(node)
        world = parent @ local
        yield idx, world
        for child in node.get("children", []):
            stack.append((child, world))


def _node_matrix(node):
    if "matrix" in node:
        return np.array(node["matrix"], dtype=np.float64).reshape(4, 4).T
    m = np.eye(4)
    if "scale" in node:
        m = m @ np.diag(list(node["scale"]) + [1.0])
    if "rotation" in node:
        x, y, z, w = node["rotation"]
        r = np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w), 0],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w), 0],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y), 0],
            [0, 0, 0, 1]])
        m = r @ m
    if "translation" in node:
        t = np.eye(4)
        t[:3, 3] = node["translation"]
        m = t @ m
    return m


def _save_glb(path, vertices, faces, colors=None):
    vertices = np.ascontiguousarray(vertices, dtype=np.float32)
    indices = np.ascontiguousarray(faces, dtype=np.uint32).reshape(-1)

    buffers = [vertices.tobytes(), indices.tobytes()]
    views = [
        {"buffer": 0, "byteOffset": 0, "byteLength": len(buffers[0]), "target": 34962},
        {"buffer": 0, "byteOffset": len(buffers[0]), "byteLength": len(buffers[1]), "target": 34963},
    ]
    accessors = [
        {"bufferView": 0, "componentType": 5126, "count": len(vertices), "type": "VEC3",
         "min": vertices.min(axis=0).tolist(), "max": vertices.max(axis=0).tolist()},
        {"bufferView": 1, "componentType": 5125, "count": len(indices), "type": "SCALAR"},
    ]
    attributes = {"POSITION": 0}
    if colors is not None:
        col = np.ascontiguousarray(np.asarray(colors, dtype=np.float32) / 255.0)
        offset = sum(len(b) for b in buffers)
        buffers.append(col.tobytes())
        views.append({"buffer": 0, "byteOffset": offset, "byteLength": len(buffers[-1]), "target": 34962})
        accessors.append({"bufferView": 2, "componentType": 5126, "count": len(col), "type": "VEC3"})
        attributes["COLOR_0"] = 2

    blob = b"".join(buffers)
    blob += b"\x00" * (-len(blob) % 4)
    gltf = {
        "asset": {"version": "2.0", "generator": "meshseg"},
        "scene": 0,
        "scenes": [{"nodes": [0]}],
        "nodes": [{"mesh": 0}],
        "meshes": [{"primitives": [{"attributes": attributes, "indices": 1, "mode": 4}]}],
        "buffers": [{"byteLength": len(blob)}],
        "bufferViews": views,
        "accessors": accessors,
    }
    payload = json.dumps(gltf, separators=(",", ":")).encode("utf-8")
    payload += b" " * (-len(payload) % 4)
    total = 12 + 8 + len(payload) + 8 + len(blob)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<III", _GLB_MAGIC, 2, total))
        fh.write(struct.pack("<II", len(payload), 0x4E4F534A))
        fh.write(payload)
        fh.write(struct.pack("<II", len(blob), 0x004E4942))
        fh.write(blob)


# ------------------------------------------------------- labeling export


def label_colors(mesh: TriMesh, labeling: FaceLabeling) -> np.ndarray:
    """Per-face RGB colors, palette assigned largest-area label first."""
    labels = labeling.labels
    present = np.unique(labels[labels != UNLABELED])
    areas = {lab: mesh.face_areas[labels == lab].sum() for lab in present}
    ranked = sorted(present, key=lambda lab: (-areas[lab], lab))
    lookup = {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(ranked)}
    colors = np.tile(UNLABELED_COLOR, (mesh.n_faces, 1))
    for lab, color in lookup.items():
        colors[labels == lab] = color
    return colors


def save_labels_json(labeling: FaceLabeling, path):
    doc = {"num_faces": int(len(labeling.labels)), "labels": labeling.labels.tolist()}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_labels_json(path) -> FaceLabeling:
    with open(path) as fh:
        doc = json.load(fh)
    labels = np.asarray(doc["labels"], dtype=np.int64)
    if len(labels) != doc.get("num_faces", len(labels)):
        raise ParseError(f"{path}: num_faces does not match labels length")
    return FaceLabeling(labels)


def save_colored_mesh(mesh: TriMesh, labeling: FaceLabeling, path, format: str | None = None):
    """Write an unwelded, vertex-colored PLY or GLB for visual inspection."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    face_colors = label_colors(mesh, labeling)
    # Unweld so label boundaries stay crisp: 3 fresh vertices per face.
    vertices = mesh.vertices[mesh.faces].reshape(-1, 3)
    faces = np.arange(len(vertices), dtype=np.int64).reshape(-1, 3)
    colors = np.repeat(face_colors, 3, axis=0)
    if fmt == "ply":
        shell = TriMesh.__new__(TriMesh)
        shell.vertices, shell.faces = vertices, faces
        _save_ply(shell, path, colors=colors)
    elif fmt == "glb":
        _save_glb(path, vertices, faces, colors=colors)
    else:
        raise ParseError(f"unsupported colored export format {fmt!r}")
