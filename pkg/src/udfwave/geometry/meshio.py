"""OBJ and PLY readers, OBJ writer.

OBJ: v/f records, 1-based (or negative relative) indices, n-gons fan split.
PLY: ascii and binary_little_endian, vertex x/y/z plus a face index list.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import DegenerateGeometry, IoError, ParseError
from .mesh import TriangleMesh

_PLY_SCALARS = {
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
}


def load_mesh(path, format: str | None = None) -> TriangleMesh:
    """Read a triangle mesh; quads and larger faces are fan-triangulated.

    Degenerate (near zero area) triangles are dropped; an input that leaves
    zero triangles raises DegenerateGeometry.
    """
    path = Path(path)
    if format is None:
        format = path.suffix.lstrip(".").lower()
    if format not in ("obj", "ply"):
        raise ParseError(f"unsupported mesh format {format!r} (expected obj or ply)")
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if format == "obj":
        vertices, faces = _parse_obj(data, path)
    else:
        vertices, faces = _parse_ply(data, path)
    triangles = _fan_triangulate(faces, len(vertices), path)
    mesh = TriangleMesh(vertices, triangles, drop_degenerate=True)
    if mesh.num_triangles == 0:
        raise DegenerateGeometry(f"{path}: no non-degenerate triangles")
    return mesh


def save_obj(mesh: TriangleMesh, path) -> None:
    path = Path(path)
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}")
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _parse_obj(data: bytes, path):
    try:
        text = data.decode("utf-8", errors="replace")
    except Exception as exc:  # pragma: no cover - decode with replace cannot fail
        raise ParseError(f"{path}: not a text file") from exc
    vertices = []
    faces = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ParseError(f"{path}:{lineno}: vertex needs 3 coordinates")
            try:
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad vertex coordinate") from exc
        elif tag == "f":
            if len(parts) < 4:
                raise ParseError(f"{path}:{lineno}: face needs >= 3 indices")
            idx = []
            for token in parts[1:]:
                head = token.split("/")[0]
                try:
                    i = int(head)
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: bad face index {token!r}") from exc
                if i == 0:
                    raise ParseError(f"{path}:{lineno}: OBJ indices are 1-based, got 0")
                idx.append(i - 1 if i > 0 else len(vertices) + i)
            faces.append((idx, lineno))
        # vn/vt/usemtl/... are ignored
    return np.asarray(vertices, dtype=np.float64).reshape(-1, 3), faces


def _parse_ply(data: bytes, path):
    if not data.startswith(b"ply"):
        raise ParseError(f"{path}: missing 'ply' magic")
    try:
        header_end = data.index(b"end_header")
    except ValueError:
        raise ParseError(f"{path}: missing end_header")
    # body starts after the end_header line's newline
    nl = data.index(b"\n", header_end)
    header = data[:nl].decode("ascii", errors="replace")
    body = data[nl + 1:]

    fmt = None
    elements = []  # (name, count, [(prop_kind, ...), ...])
    for lineno, raw in enumerate(header.splitlines()[1:], start=2):
        parts = raw.strip().split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if len(parts) < 2 or parts[1] not in ("ascii", "binary_little_endian"):
                raise ParseError(f"{path}:{lineno}: unsupported PLY format")
            fmt = parts[1]
        elif parts[0] == "element":
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: bad element line")
            try:
                elements.append([parts[1], int(parts[2]), []])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad element count") from exc
        elif parts[0] == "property":
            if not elements:
                raise ParseError(f"{path}:{lineno}: property before any element")
            if parts[1] == "list":
                if len(parts) != 5:
                    raise ParseError(f"{path}:{lineno}: bad list property")
                if parts[2] not in _PLY_SCALARS or parts[3] not in _PLY_SCALARS:
                    raise ParseError(f"{path}:{lineno}: unsupported list types")
                elements[-1][2].append(("list", parts[2], parts[3], parts[4]))
            else:
                if len(parts) != 3 or parts[1] not in _PLY_SCALARS:
                    raise ParseError(f"{path}:{lineno}: unsupported property type")
                elements[-1][2].append(("scalar", parts[1], parts[2]))
        elif parts[0] == "end_header":
            break
    if fmt is None:
        raise ParseError(f"{path}: PLY header has no format line")

    vertices = np.zeros((0, 3))
    faces: list = []
    if fmt == "ascii":
        tokens = body.decode("ascii", errors="replace").split()
        pos = 0
        for name, count, props in elements:
            rows = []
            for _ in range(count):
                row = []
                for p in props:
                    if p[0] == "scalar":
                        row.append(_ply_token(tokens, pos, path))
                        pos += 1
                    else:
                        n = int(_ply_token(tokens, pos, path))
                        pos += 1
                        row.append([_ply_token(tokens, pos + i, path) for i in range(n)])
                        pos += n
                rows.append(row)
            vertices, faces = _ply_collect(name, props, rows, vertices, faces, path)
    else:
        offset = 0
        for name, count, props in elements:
            rows = []
            for _ in range(count):
                row = []
                for p in props:
                    if p[0] == "scalar":
                        code, size = _PLY_SCALARS[p[1]]
                        row.append(struct.unpack_from("<" + code, body, offset)[0])
                        offset += size
                    else:
                        ccode, csize = _PLY_SCALARS[p[1]]
                        icode, isize = _PLY_SCALARS[p[2]]
                        n = struct.unpack_from("<" + ccode, body, offset)[0]
                        offset += csize
                        vals = struct.unpack_from(f"<{n}{icode}", body, offset)
                        offset += isize * n
                        row.append(list(vals))
                rows.append(row)
            vertices, faces = _ply_collect(name, props, rows, vertices, faces, path)
    return vertices, faces


def _ply_token(tokens, pos, path):
    try:
        return float(tokens[pos])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"{path}: truncated or malformed PLY body") from exc


def _ply_collect(name, props, rows, vertices, faces, path):
    if name == "vertex":
        names = [p[2] if p[0] == "scalar" else p[3] for p in props]
        try:
            ix, iy, iz = names.index("x"), names.index("y"), names.index("z")
        except ValueError as exc:
            raise ParseError(f"{path}: vertex element lacks x/y/z") from exc
        vertices = np.asarray(
            [[r[ix], r[iy], r[iz]] for r in rows], dtype=np.float64
        ).reshape(-1, 3)
    elif name == "face":
        list_col = next((i for i, p in enumerate(props)
                         if p[0] == "list" and p[3] in ("vertex_indices", "vertex_index")), None)
        if list_col is None:
            raise ParseError(f"{path}: face element lacks a vertex index list")
        for r in rows:
            faces.append(([int(v) for v in r[list_col]], None))
    return vertices, faces


def _fan_triangulate(faces, n_vertices, path):
    triangles = []
    for idx, lineno in faces:
        where = f"{path}:{lineno}" if lineno else str(path)
        if len(idx) < 3:
            raise ParseError(f"{where}: face with fewer than 3 vertices")
        for i in idx:
            if i < 0 or i >= n_vertices:
                raise ParseError(f"{where}: face index {i + 1} out of range")
        for k in range(1, len(idx) - 1):
            triangles.append((idx[0], idx[k], idx[k + 1]))
    return np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
