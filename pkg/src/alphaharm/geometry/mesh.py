"""Triangle meshes used as discrete domain manifolds.

A :class:`DomainMesh` stores vertex positions in some embedding space and
triangular faces.  Periodic domains (flat tori) are represented by vertices in
a fundamental domain together with per-face corner offsets that unwrap each
triangle into a genuine Euclidean triangle.

Each face carries the induced metric ``G_f = E_f^T E_f`` where the columns of
``E_f`` are the two edge vectors leaving corner 0.  The face is parametrised by
``x = x_0 + s (x_1 - x_0) + t (x_2 - x_0)`` so that a piecewise linear field
``u`` has parameter derivative ``[u_1 - u_0, u_2 - u_0]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = ["DomainMesh", "icosphere", "torus_grid", "square_grid", "CORNER_DIFF"]

#: maps corner values (3,) to parameter derivatives (2,): D = U @ CORNER_DIFF
CORNER_DIFF = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class DomainMesh:
    """Triangle mesh of a closed (or bounded) surface.

    Parameters
    ----------
    vertices : ndarray, shape (V, D)
        Vertex positions.
    faces : ndarray, shape (F, 3)
        Vertex indices of each triangle, consistently oriented.
    corner_offsets : ndarray, shape (F, 3, D), optional
        Translation added to each corner position before building the face
        geometry.  Used for periodic domains.
    name : str
        Label used in reports.
    """

    vertices: np.ndarray
    faces: np.ndarray
    corner_offsets: np.ndarray | None = None
    name: str = "mesh"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        f = np.ascontiguousarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[0] == 0:
            raise ValueError("vertices must be a non-empty (V, D) array")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError("faces must be an (F, 3) array of triangles")
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            raise ValueError("face index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.corner_offsets is not None:
            off = np.asarray(self.corner_offsets, dtype=float)
            if off.shape != (f.shape[0], 3, v.shape[1]):
                raise ValueError("corner_offsets must have shape (F, 3, D)")
            object.__setattr__(self, "corner_offsets", off)
        if np.any(self.face_areas <= 0):
            bad = int(np.argmin(self.face_areas))
            raise ValueError(f"degenerate triangle at face {bad}")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def dim(self) -> int:
        """Intrinsic dimension of the domain (always 2 for triangle meshes)."""
        return 2

    @cached_property
    def corner_positions(self) -> np.ndarray:
        """Unwrapped corner coordinates, shape (F, 3, D)."""
        pos = self.vertices[self.faces]
        if self.corner_offsets is not None:
            pos = pos + self.corner_offsets
        return pos

    @cached_property
    def edge_frames(self) -> np.ndarray:
        """Edge matrices ``E_f`` with columns ``x_1 - x_0`` and ``x_2 - x_0``, shape (F, D, 2)."""
        pos = self.corner_positions
        return np.stack([pos[:, 1] - pos[:, 0], pos[:, 2] - pos[:, 0]], axis=-1)

    @cached_property
    def face_metrics(self) -> np.ndarray:
        """Induced metric ``G_f = E_f^T E_f`` in parameter coordinates, shape (F, 2, 2)."""
        E = self.edge_frames
        return np.einsum("fai,faj->fij", E, E)

    @cached_property
    def face_metric_inverses(self) -> np.ndarray:
        return np.linalg.inv(self.face_metrics)

    @cached_property
    def face_areas(self) -> np.ndarray:
        G = self.face_metrics
        det = G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]
        return 0.5 * np.sqrt(np.maximum(det, 0.0))

    @cached_property
    def vertex_areas(self) -> np.ndarray:
        """Lumped (barycentric) vertex areas: a third of each incident face."""
        return np.bincount(
            self.faces.ravel(), weights=np.repeat(self.face_areas / 3.0, 3), minlength=self.n_vertices
        )

    @cached_property
    def stiffness_blocks(self) -> np.ndarray:
        """Per-face ``A_f C G_f^{-1} C^T`` (the P1 cotangent stiffness), shape (F, 3, 3)."""
        K = np.einsum("ia,fab,jb->fij", CORNER_DIFF, self.face_metric_inverses, CORNER_DIFF)
        return self.face_areas[:, None, None] * K

    @property
    def total_area(self) -> float:
        return float(np.sum(self.face_areas))

    def face_values(self, values: np.ndarray) -> np.ndarray:
        """Gather per-vertex values onto face corners, shape (F, 3, ...)."""
        return np.asarray(values)[self.faces]

    def refine(self) -> "DomainMesh":
        """One step of 1-to-4 midpoint subdivision (not for periodic meshes)."""
        if self.corner_offsets is not None:
            raise ValueError("refine() does not support periodic meshes; regenerate instead")
        verts, faces = _subdivide(self.vertices, self.faces)
        return DomainMesh(verts, faces, name=self.name, meta=dict(self.meta))

    def describe(self) -> dict:
        return {"name": self.name, "vertices": self.n_vertices, "faces": self.n_faces}


def _subdivide(vertices, faces):
    verts = [v for v in vertices]
    cache: dict[tuple[int, int], int] = {}

    def midpoint(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in cache:
            cache[key] = len(verts)
            verts.append(0.5 * (vertices[i] + vertices[j]))
        return cache[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return np.array(verts), np.array(out, dtype=np.int64)


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> DomainMesh:
    """Geodesic sphere obtained by subdividing an icosahedron.

    Level ``k`` has ``20 * 4**k`` faces; all vertices lie on the sphere of the
    given radius.
    """
    if subdivisions < 0:
        raise ValueError("subdivisions must be non-negative")
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    for _ in range(subdivisions):
        verts, faces = _subdivide(verts, faces)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return DomainMesh(radius * verts, faces, name=f"icosphere{subdivisions}",
                      meta={"kind": "icosphere", "subdivisions": subdivisions, "radius": radius})


def torus_grid(n: int, m: int | None = None, lengths=(2 * np.pi, 2 * np.pi)) -> DomainMesh:
    """Flat torus ``[0, L1) x [0, L2)`` triangulated by a regular grid.

    Each grid cell is split along its diagonal.  Faces that cross the periodic
    seam carry corner offsets so that every triangle is unwrapped.
    """
    m = n if m is None else m
    if n < 3 or m < 3:
        raise ValueError("torus grid needs at least 3 cells per direction")
    L1, L2 = float(lengths[0]), float(lengths[1])
    h1, h2 = L1 / n, L2 / m
    i, j = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    verts = np.stack([i.ravel() * h1, j.ravel() * h2], axis=1)

    def idx(a, b):
        return (a % n) * m + (b % m)

    faces, offsets = [], []
    for a in range(n):
        for b in range(m):
            corners = [(a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)]
            for tri in ((0, 1, 2), (0, 2, 3)):
                cs = [corners[k] for k in tri]
                faces.append([idx(*c) for c in cs])
                offsets.append([[L1 * (c[0] // n), L2 * (c[1] // m)] for c in cs])
    return DomainMesh(verts, np.array(faces), np.array(offsets, dtype=float),
                      name=f"torus{n}x{m}", meta={"kind": "torus", "n": n, "m": m, "lengths": [L1, L2]})


def square_grid(n: int, lengths=(1.0, 1.0)) -> DomainMesh:
    """Non-periodic grid on the rectangle ``[0, L1] x [0, L2]``."""
    if n < 1:
        raise ValueError("square grid needs at least one cell")
    L1, L2 = float(lengths[0]), float(lengths[1])
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    verts = np.stack([i.ravel() * L1 / n, j.ravel() * L2 / n], axis=1)
    faces = []
    for a in range(n):
        for b in range(n):
            v00, v10 = a * (n + 1) + b, (a + 1) * (n + 1) + b
            v11, v01 = v10 + 1, v00 + 1
            faces += [[v00, v10, v11], [v00, v11, v01]]
    return DomainMesh(verts, np.array(faces), name=f"square{n}", meta={"kind": "square", "n": n})
