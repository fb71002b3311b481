"""Strict readers and writers for OFF and OBJ triangle meshes.

Only vertex positions and triangular faces are accepted.  Anything else
(polygons, normals, texture coordinates, groups, malformed numbers) raises
:class:`MeshParseError` with the offending line number.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import DomainMesh

__all__ = ["MeshParseError", "read_off", "read_obj", "read_mesh", "write_off", "write_obj"]


class MeshParseError(ValueError):
    """Malformed mesh file; ``line`` is the 1-based line number (0 for whole-file errors)."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


def _content_lines(text):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def _floats(path, no, tokens, count):
    if len(tokens) != count:
        raise MeshParseError(path, no, f"expected {count} coordinates, found {len(tokens)}")
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise MeshParseError(path, no, f"invalid number in {' '.join(tokens)!r}") from None
    if not np.all(np.isfinite(vals)):
        raise MeshParseError(path, no, "non-finite coordinate")
    return vals


def _build(path, verts, faces, face_lines, name):
    if not verts:
        raise MeshParseError(path, 0, "no vertices")
    if not faces:
        raise MeshParseError(path, 0, "no faces")
    nv = len(verts)
    for (a, b, c), no in zip(faces, face_lines):
        for k in (a, b, c):
            if k < 0 or k >= nv:
                raise MeshParseError(path, no, f"vertex index {k} out of range (0..{nv - 1})")
        if len({a, b, c}) < 3:
            raise MeshParseError(path, no, "face repeats a vertex")
    try:
        return DomainMesh(np.array(verts), np.array(faces, dtype=np.int64), name=name)
    except ValueError as exc:
        raise MeshParseError(path, 0, str(exc)) from None


def read_off(path) -> DomainMesh:
    path = Path(path)
    lines = list(_content_lines(path.read_text()))
    if not lines:
        raise MeshParseError(path, 0, "empty file")
    no, header = lines[0]
    rest = lines[1:]
    tokens = header.split()
    if tokens[0] != "OFF":
        raise MeshParseError(path, no, "missing OFF header")
    if len(tokens) > 1:
        counts = tokens[1:]
    else:
        if not rest:
            raise MeshParseError(path, no, "missing element counts")
        no, line = rest[0]
        rest = rest[1:]
        counts = line.split()
    if len(counts) != 3:
        raise MeshParseError(path, no, "counts line must be 'V F E'")
    try:
        nv, nf, _ = (int(c) for c in counts)
    except ValueError:
        raise MeshParseError(path, no, "counts must be integers") from None
    if nv <= 0 or nf <= 0:
        raise MeshParseError(path, no, "vertex and face counts must be positive")
    if len(rest) < nv + nf:
        last = rest[-1][0] if rest else no
        raise MeshParseError(path, last, f"expected {nv} vertices and {nf} faces, file ends early")
    verts = [_floats(path, n, line.split(), 3) for n, line in rest[:nv]]
    faces, face_lines = [], []
    for n, line in rest[nv : nv + nf]:
        toks = line.split()
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise MeshParseError(path, n, f"invalid face record {line!r}") from None
        if vals[0] != 3:
            raise MeshParseError(path, n, f"only triangular faces are supported (found {vals[0]}-gon)")
        if len(vals) != 4:
            raise MeshParseError(path, n, "face record must list exactly three vertex indices")
        faces.append(vals[1:])
        face_lines.append(n)
    if len(rest) > nv + nf:
        raise MeshParseError(path, rest[nv + nf][0], "unexpected trailing data")
    return _build(path, verts, faces, face_lines, path.stem)


def read_obj(path) -> DomainMesh:
    path = Path(path)
    verts, faces, face_lines = [], [], []
    for no, line in _content_lines(path.read_text()):
        toks = line.split()
        tag, args = toks[0], toks[1:]
        if tag == "v":
            verts.append(_floats(path, no, args, 3))
        elif tag == "f":
            if len(args) != 3:
                raise MeshParseError(path, no, f"only triangular faces are supported (found {len(args)} vertices)")
            idx = []
            for a in args:
                head = a.split("/", 1)[0]
                try:
                    k = int(head)
                except ValueError:
                    raise MeshParseError(path, no, f"invalid face index {a!r}") from None
                if k == 0:
                    raise MeshParseError(path, no, "OBJ indices are 1-based; found 0")
                idx.append(k - 1 if k > 0 else len(verts) + k)
            faces.append(idx)
            face_lines.append(no)
        else:
            raise MeshParseError(path, no, f"unsupported record {tag!r}")
    return _build(path, verts, faces, face_lines, path.stem)


def read_mesh(path) -> DomainMesh:
    """Dispatch on the file extension (``.off`` or ``.obj``)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".off":
        return read_off(path)
    if suffix == ".obj":
        return read_obj(path)
    raise MeshParseError(path, 0, f"unsupported mesh format {suffix!r}")


def write_off(mesh: DomainMesh, path) -> None:
    verts = mesh.vertices
    if verts.shape[1] != 3:
        raise ValueError("OFF output needs 3D vertex positions")
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"]
    lines += [" ".join(format(x, ".17g") for x in v) for v in verts]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def write_obj(mesh: DomainMesh, path) -> None:
    verts = mesh.vertices
    if verts.shape[1] != 3:
        raise ValueError("OBJ output needs 3D vertex positions")
    lines = ["v " + " ".join(format(x, ".17g") for x in v) for v in verts]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")
