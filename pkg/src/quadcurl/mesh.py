"""Structured tetrahedral meshes of the unit cube and the L-shaped domain.

Each grid cube is split into six tetrahedra sharing the main diagonal
(Kuhn pattern), which tiles conformingly on a structured grid.  The
finished :class:`Mesh` is immutable in practice and safe to read from
many threads; construction itself is single-threaded.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

# local face i of a tet is opposite vertex i
TET_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])
FACE_EDGES = np.array([[0, 1], [0, 2], [1, 2]])


@dataclass
class Mesh:
    """Tetrahedral mesh with the face/edge data HDG assembly needs.

    Orientation conventions:
      * tets are positively oriented;
      * interior face normals point from the lower-indexed owner tet to
        the higher-indexed one, boundary normals point outward;
      * the tangent ``t1`` of a face runs from its lowest-global-index
        vertex towards the second lowest, and ``t2 = n x t1``.
    """

    domain: str
    vertices: np.ndarray      # (V, 3)
    tets: np.ndarray          # (T, 4) vertex ids
    faces: np.ndarray         # (F, 3) sorted vertex ids
    edges: np.ndarray         # (E, 2) sorted vertex ids
    tet_faces: np.ndarray     # (T, 4) face id opposite each vertex
    face_tets: np.ndarray     # (F, 2) owner tets, -1 in slot 1 on boundary
    face_edges: np.ndarray    # (F, 3) edge ids
    tet_edges: np.ndarray     # (T, 6)
    face_normal: np.ndarray   # (F, 3) unit, oriented per convention
    face_area: np.ndarray     # (F,)
    face_h: np.ndarray        # (F,) smallest enclosing circle diameter
    face_t1: np.ndarray       # (F, 3)
    face_t2: np.ndarray       # (F, 3)
    tet_h: np.ndarray         # (T,) smallest enclosing sphere diameter
    tet_volume: np.ndarray    # (T,)
    boundary_face: np.ndarray = field(repr=False)  # (F,) bool
    boundary_edge: np.ndarray = field(repr=False)  # (E,) bool

    @property
    def nvertices(self):
        return len(self.vertices)

    @property
    def ntets(self):
        return len(self.tets)

    @property
    def nfaces(self):
        return len(self.faces)

    @property
    def nedges(self):
        return len(self.edges)

    @property
    def h(self):
        return float(self.tet_h.max())

    def tet_face_sign(self, t, lf):
        """+1 if the global face normal is outward for tet ``t``."""
        return 1.0 if self.face_tets[self.tet_faces[t, lf], 0] == t else -1.0

    def face_verts(self, f):
        return self.vertices[self.faces[f]]

    def tet_verts(self, t):
        return self.vertices[self.tets[t]]

    def edge_verts(self, e):
        return self.vertices[self.edges[e]]


# the six Kuhn tets of a unit cube: vertex-offset paths from (0,0,0) to
# (1,1,1), one per axis permutation, pre-swapped to positive orientation
def _kuhn_patterns():
    pats = []
    for perm in itertools.permutations(range(3)):
        o = np.zeros((4, 3), dtype=np.int64)
        for step, axis in enumerate(perm):
            o[step + 1] = o[step]
            o[step + 1, axis] += 1
        det = np.linalg.det((o[1:] - o[0]).astype(float))
        if det < 0:
            o[[2, 3]] = o[[3, 2]]
        pats.append(o)
    return np.array(pats)  # (6, 4, 3)


_KUHN = _kuhn_patterns()


def generate_box_mesh(n: int, bounds=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))) -> Mesh:
    """Uniform Kuhn mesh of an axis-aligned box with ``n`` cells per side."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParameterError(f"cells per side must be a positive integer, got {n}")
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    if np.any(hi - lo <= 0):
        raise InvalidParameterError(f"box extents must be positive, got {hi - lo}")

    idx = np.arange(n + 1)
    coords = lo[None, :] + (idx[:, None] * (hi - lo)[None, :]) / n
    X, Y, Z = np.meshgrid(coords[:, 0], coords[:, 1], coords[:, 2], indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    cube_idx = np.stack(np.meshgrid(np.arange(n), np.arange(n), np.arange(n),
                                    indexing="ij"), axis=-1).reshape(-1, 3)
    tets = _cubes_to_tets(cube_idx, n)
    volume = float(np.prod(hi - lo))
    return _build_mesh("cube", vertices, tets, volume)


def generate_lshape_mesh(n: int) -> Mesh:
    """Kuhn mesh of (-1,1)^3 minus the column (-1,0)x(-1,0)x(-1,1).

    ``n`` counts cells across the full width 2, so the cell size is 2/n;
    it must be even so the unit-sized notch is tiled exactly.
    """
    if not isinstance(n, (int, np.integer)) or n < 2 or n % 2 != 0:
        raise InvalidParameterError(
            f"L-shape resolution must be an even integer >= 2, got {n}")

    idx = np.arange(n + 1)
    coords = (2.0 * idx - n) / n  # exact 0.0 at the reentrant planes
    X, Y, Z = np.meshgrid(coords, coords, coords, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    cube_idx = np.stack(np.meshgrid(np.arange(n), np.arange(n), np.arange(n),
                                    indexing="ij"), axis=-1).reshape(-1, 3)
    keep = ~((cube_idx[:, 0] < n // 2) & (cube_idx[:, 1] < n // 2))
    tets = _cubes_to_tets(cube_idx[keep], n)

    # drop orphan vertices inside the notch, preserving lexicographic order
    used = np.unique(tets)
    remap = np.full(len(vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return _build_mesh("lshape", vertices[used], remap[tets], 6.0)


def _cubes_to_tets(cube_idx, n):
    def vid(g):
        return (g[..., 0] * (n + 1) + g[..., 1]) * (n + 1) + g[..., 2]

    corners = cube_idx[:, None, None, :] + _KUHN[None, :, :, :]  # (C, 6, 4, 3)
    return vid(corners).reshape(-1, 4)


def _build_mesh(domain, vertices, tets, expected_volume):
    v = vertices[tets]
    e = v[:, 1:] - v[:, :1]
    vol = np.linalg.det(e) / 6.0
    if np.any(vol <= 0):
        raise InvalidParameterError("mesh contains non-positively-oriented tets")

    all_faces = np.sort(tets[:, TET_FACES], axis=-1).reshape(-1, 3)
    faces, inv = np.unique(all_faces, axis=0, return_inverse=True)
    tet_faces = inv.reshape(-1, 4)

    nfaces = len(faces)
    face_tets = np.full((nfaces, 2), -1, dtype=np.int64)
    # first writer in tet order lands in slot 0, so slot 0 is the lower owner
    order = np.argsort(inv, kind="stable")
    owner = order // 4
    first = np.ones(nfaces, dtype=bool)
    for fid, t in zip(inv[order], owner):
        if first[fid]:
            face_tets[fid, 0] = t
            first[fid] = False
        else:
            face_tets[fid, 1] = t
    boundary_face = face_tets[:, 1] < 0

    fa, fb, fc = (vertices[faces[:, i]] for i in range(3))
    raw = np.cross(fb - fa, fc - fa)
    area = 0.5 * np.linalg.norm(raw, axis=1)
    normal = raw / (2.0 * area)[:, None]
    tet_centroid = vertices[tets].mean(axis=1)
    face_centroid = (fa + fb + fc) / 3.0
    ref = np.where(boundary_face[:, None],
                   face_centroid - tet_centroid[face_tets[:, 0]],
                   tet_centroid[np.where(boundary_face, 0, face_tets[:, 1])]
                   - tet_centroid[face_tets[:, 0]])
    flip = np.einsum("fd,fd->f", normal, ref) < 0
    normal[flip] *= -1.0

    # FaceFrame: faces store sorted vertex ids, so column 0 -> column 1 is
    # lowest -> second lowest
    t1 = fb - fa
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(normal, t1)

    face_h = _enclosing_circle_diameter(fa, fb, fc)
    tet_h = _enclosing_sphere_diameter(vertices[tets])

    edges_of_faces = np.sort(faces[:, FACE_EDGES], axis=-1).reshape(-1, 2)
    edges, einv = np.unique(edges_of_faces, axis=0, return_inverse=True)
    face_edges = einv.reshape(-1, 3)
    ekey = edges[:, 0] * len(vertices) + edges[:, 1]
    tpairs = np.sort(tets[:, TET_EDGES], axis=-1)
    tkey = tpairs[..., 0] * len(vertices) + tpairs[..., 1]
    tet_edges = np.searchsorted(ekey, tkey)

    boundary_edge = np.zeros(len(edges), dtype=bool)
    boundary_edge[face_edges[boundary_face].ravel()] = True

    total = float(vol.sum())
    if abs(total - expected_volume) > 1e-12 * expected_volume:
        raise InvalidParameterError(
            f"mesh volume {total} does not match domain volume {expected_volume}")

    return Mesh(domain=domain, vertices=vertices, tets=tets, faces=faces,
                edges=edges, tet_faces=tet_faces, face_tets=face_tets,
                face_edges=face_edges, tet_edges=tet_edges,
                face_normal=normal, face_area=area, face_h=face_h,
                face_t1=t1, face_t2=t2, tet_h=tet_h, tet_volume=vol,
                boundary_face=boundary_face, boundary_edge=boundary_edge)


def _enclosing_circle_diameter(a, b, c):
    # smallest circle containing a triangle: the longest-edge circle if it
    # holds the opposite vertex (right/obtuse), else the circumcircle
    sides = np.stack([np.linalg.norm(c - b, axis=1),
                      np.linalg.norm(a - c, axis=1),
                      np.linalg.norm(b - a, axis=1)], axis=1)
    longest = np.argmax(sides, axis=1)
    pts = np.stack([a, b, c], axis=1)
    n = len(a)
    rows = np.arange(n)
    p = pts[rows, (longest + 1) % 3]
    q = pts[rows, (longest + 2) % 3]
    opp = pts[rows, longest]
    mid = 0.5 * (p + q)
    le = sides[rows, longest]
    inside = np.linalg.norm(opp - mid, axis=1) <= 0.5 * le * (1 + 1e-12)
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    circum = sides.prod(axis=1) / (2.0 * area)
    return np.where(inside, le, circum)


def _enclosing_sphere_diameter(pts):
    """Smallest enclosing sphere diameter per tet, ``pts`` (T, 4, 3)."""
    T = len(pts)
    best = np.full(T, np.inf)

    def consider(center, r2, valid):
        d2 = ((pts - center[:, None, :]) ** 2).sum(axis=2).max(axis=1)
        ok = valid & (d2 <= r2 * (1 + 1e-12) + 1e-30) & (r2 < best)
        best[ok] = r2[ok]

    for i, j in TET_EDGES:
        center = 0.5 * (pts[:, i] + pts[:, j])
        r2 = 0.25 * ((pts[:, i] - pts[:, j]) ** 2).sum(axis=1)
        consider(center, r2, np.ones(T, dtype=bool))

    for tri in TET_FACES:
        a, b, c = pts[:, tri[0]], pts[:, tri[1]], pts[:, tri[2]]
        u, v = b - a, c - a
        w = np.cross(u, v)
        den = 2.0 * (w ** 2).sum(axis=1)
        good = den > 1e-300
        num = np.cross((u * u).sum(axis=1)[:, None] * v
                       - (v * v).sum(axis=1)[:, None] * u, w)
        center = a + num / np.where(good, den, 1.0)[:, None]
        r2 = ((center - a) ** 2).sum(axis=1)
        consider(center, r2, good)

    # circumsphere always contains all four points
    p0 = pts[:, 0]
    M = 2.0 * (pts[:, 1:] - p0[:, None, :])
    rhs = (pts[:, 1:] ** 2).sum(axis=2) - (p0 ** 2).sum(axis=1)[:, None]
    center = np.linalg.solve(M, rhs[:, :, None])[:, :, 0]
    r2 = ((center - p0) ** 2).sum(axis=1)
    consider(center, r2, np.ones(T, dtype=bool))

    return 2.0 * np.sqrt(best)


@dataclass(frozen=True)
class MeshReport:
    domain: str
    nvertices: int
    ntets: int
    nfaces: int
    nedges: int
    nboundary_faces: int
    h: float
    volume: float
    min_quality: float
    max_quality: float

    def __str__(self):
        return "\n".join(f"{k}: {v}" for k, v in self.__dict__.items())


def mesh_report(mesh: Mesh) -> MeshReport:
    """Deterministic mesh summary; quality is inradius/circumradius."""
    areas = np.zeros(mesh.ntets)
    for lf in range(4):
        areas += mesh.face_area[mesh.tet_faces[:, lf]]
    inradius = 3.0 * mesh.tet_volume / areas
    v = mesh.vertices[mesh.tets]
    M = 2.0 * (v[:, 1:] - v[:, :1])
    rhs = (v[:, 1:] ** 2).sum(axis=2) - (v[:, 0] ** 2).sum(axis=1)[:, None]
    center = np.linalg.solve(M, rhs[:, :, None])[:, :, 0]
    circumradius = np.linalg.norm(center - v[:, 0], axis=1)
    quality = inradius / circumradius
    return MeshReport(domain=mesh.domain, nvertices=mesh.nvertices,
                      ntets=mesh.ntets, nfaces=mesh.nfaces, nedges=mesh.nedges,
                      nboundary_faces=int(mesh.boundary_face.sum()),
                      h=mesh.h, volume=float(mesh.tet_volume.sum()),
                      min_quality=float(quality.min()),
                      max_quality=float(quality.max()))


def write_vtk(path, mesh: Mesh, point_data=None, title="quadcurl mesh"):
    """Legacy-ASCII VTK export (unstructured grid, cell type 10).

    ``point_data`` maps names to per-vertex arrays of shape (V,) for
    scalars or (V, 3) for vectors.
    """
    lines = ["# vtk DataFile Version 3.0", title, "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.nvertices} double"]
    lines += [" ".join(f"{x:.17g}" for x in p) for p in mesh.vertices]
    lines.append(f"CELLS {mesh.ntets} {5 * mesh.ntets}")
    lines += ["4 " + " ".join(str(i) for i in t) for t in mesh.tets]
    lines.append(f"CELL_TYPES {mesh.ntets}")
    lines += ["10"] * mesh.ntets
    if point_data:
        lines.append(f"POINT_DATA {mesh.nvertices}")
        for name, arr in point_data.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines += [f"{x:.17g}" for x in arr]
            else:
                lines.append(f"VECTORS {name} double")
                lines += [" ".join(f"{x:.17g}" for x in p) for p in arr]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
