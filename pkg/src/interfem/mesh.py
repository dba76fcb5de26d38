"""Triangulations of the square domain and degree-k Lagrange DOF maps.

The structured mesh bisects each cell of a uniform grid on [-1, 1]^2 along
its northeast diagonal.  Unstructured meshes enter through the ASCII format
described in `read_mesh`.  Degree-k nodes are generated once per vertex,
edge and element interior, so nodes shared between neighbors coincide
exactly (no tolerance-based deduplication).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshFormatError


@dataclass
class Mesh:
    vertices: np.ndarray        # (NV, 2)
    triangles: np.ndarray       # (NT, 3) vertex indices, CCW
    boundary_edges: set = field(default_factory=set)   # sorted vertex pairs
    h: float = 0.0
    h_elem: np.ndarray = None   # (NT,) element diameters
    edge_tris: dict = field(default_factory=dict)      # sorted pair -> [tris]

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)


def signed_areas(vertices, triangles):
    v = vertices[triangles]
    return 0.5 * ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
                  - (v[:, 1, 1] - v[:, 0, 1]) * (v[:, 2, 0] - v[:, 0, 0]))


def _finalize(vertices, triangles):
    """Compute diameters, edge incidence and boundary edges; validate."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    areas = signed_areas(vertices, triangles)
    if np.any(areas <= 0.0):
        bad = int(np.argmin(areas))
        raise MeshFormatError(f"triangle {bad} has non-positive area {areas[bad]:g}")

    v = vertices[triangles]
    sides = np.stack([
        np.linalg.norm(v[:, 1] - v[:, 0], axis=1),
        np.linalg.norm(v[:, 2] - v[:, 1], axis=1),
        np.linalg.norm(v[:, 0] - v[:, 2], axis=1),
    ])
    h_elem = sides.max(axis=0)

    edge_tris = {}
    for t, tri in enumerate(triangles):
        for e in range(3):
            key = tuple(sorted((int(tri[e]), int(tri[(e + 1) % 3]))))
            edge_tris.setdefault(key, []).append(t)
    boundary = set()
    for key, owners in edge_tris.items():
        if len(owners) == 1:
            boundary.add(key)
        elif len(owners) != 2:
            raise MeshFormatError(f"edge {key} is shared by {len(owners)} triangles")
    return Mesh(vertices, triangles, boundary, float(h_elem.max()), h_elem, edge_tris)


def build_structured(n):
    """Structured mesh of [-1, 1]^2: n x n cells, each split along its
    northeast diagonal, giving 2 n^2 triangles with h = 2 sqrt(2) / n."""
    if n < 1:
        raise ValueError("build_structured: n must be >= 1")
    coords = -1.0 + 2.0 * np.arange(n + 1) / n
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            sw, se = vid(i, j), vid(i + 1, j)
            nw, ne = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append([sw, se, ne])
            tris.append([sw, ne, nw])
    return _finalize(vertices, np.array(tris))


def read_mesh(text):
    """Parse the ASCII mesh format.

    Line 1 holds `NV NT`; then NV lines `x y`; then NT lines `i j k` with
    0-based vertex indices.  `#` starts a comment.  Clockwise triangles are
    reoriented; structural problems raise MeshFormatError with the offending
    line number.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append((lineno, body.split()))

    if not rows:
        raise MeshFormatError("empty mesh file")
    lineno, head = rows[0]
    if len(head) != 2:
        raise MeshFormatError("expected header 'NV NT'", line=lineno)
    try:
        nv, nt = int(head[0]), int(head[1])
    except ValueError:
        raise MeshFormatError("header fields must be integers", line=lineno) from None
    if len(rows) - 1 < nv:
        raise MeshFormatError(
            f"vertex count mismatch: {nv} declared, {len(rows) - 1} available")

    vertices = np.empty((nv, 2))
    for r, (lineno, fields) in enumerate(rows[1:1 + nv]):
        if len(fields) != 2:
            raise MeshFormatError("expected 'x y'", line=lineno)
        try:
            vertices[r] = [float(fields[0]), float(fields[1])]
        except ValueError:
            raise MeshFormatError("bad vertex coordinate", line=lineno) from None

    tri_rows = rows[1 + nv:]
    if len(tri_rows) != nt:
        raise MeshFormatError(
            f"triangle count mismatch: {nt} declared, {len(tri_rows)} listed")
    triangles = np.empty((nt, 3), dtype=np.int64)
    for r, (lineno, fields) in enumerate(tri_rows):
        if len(fields) != 3:
            raise MeshFormatError("expected 'i j k'", line=lineno)
        try:
            tri = [int(v) for v in fields]
        except ValueError:
            raise MeshFormatError("bad vertex index", line=lineno) from None
        if min(tri) < 0 or max(tri) >= nv:
            raise MeshFormatError(f"vertex index out of range in {tri}", line=lineno)
        if len(set(tri)) != 3:
            raise MeshFormatError(f"repeated vertex in triangle {tri}", line=lineno)
        triangles[r] = tri

    areas = signed_areas(vertices, triangles)
    flip = areas < 0.0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return _finalize(vertices, triangles)


def write_mesh(mesh):
    """Serialize to the ASCII format; round-trips at 17 significant digits."""
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    for i, j, k in mesh.triangles:
        lines.append(f"{i} {j} {k}")
    return "\n".join(lines) + "\n"


@dataclass
class DofMap:
    """Degree-k Lagrange nodes and element connectivity."""

    degree: int
    nodes: np.ndarray          # (NN, 2)
    elem_nodes: np.ndarray     # (NT, (k+1)(k+2)/2)
    boundary: np.ndarray       # (NN,) bool

    @property
    def n_nodes(self):
        return len(self.nodes)


def reference_nodes(k):
    """Local Lagrange nodes on the reference triangle, ordered as
    vertices, then edge interiors (edge 0, 1, 2), then element interior."""
    pts = [(0, 0), (k, 0), (0, k)]
    for m in range(1, k):
        pts.append((m, 0))                # edge 0: (0,0) -> (k,0)
    for m in range(1, k):
        pts.append((k - m, m))            # edge 1: (k,0) -> (0,k)
    for m in range(1, k):
        pts.append((0, k - m))            # edge 2: (0,k) -> (0,0)
    for i in range(1, k):
        for j in range(1, k - i):
            pts.append((i, j))
    return np.array(pts, dtype=float) / k


def build_dof_map(mesh, k):
    """Global degree-k Lagrange numbering: vertices keep their mesh ids,
    then k-1 nodes per edge (ordered from the lower to the higher vertex
    id), then interior nodes per element."""
    if k < 1:
        raise ValueError("build_dof_map: k must be >= 1")
    nv = mesh.n_vertices
    nt = mesh.n_triangles
    n_per_edge = k - 1
    n_interior = (k - 1) * (k - 2) // 2
    edges = sorted(mesh.edge_tris.keys())
    edge_index = {e: i for i, e in enumerate(edges)}
    n_edge_nodes = n_per_edge * len(edges)
    n_nodes = nv + n_edge_nodes + n_interior * nt

    nodes = np.empty((n_nodes, 2))
    nodes[:nv] = mesh.vertices
    t_params = np.arange(1, k) / k
    for (a, b), idx in edge_index.items():
        base = nv + idx * n_per_edge
        nodes[base:base + n_per_edge] = (
            np.outer(1.0 - t_params, mesh.vertices[a])
            + np.outer(t_params, mesh.vertices[b]))

    ref = reference_nodes(k)
    n_local = len(ref)
    elem_nodes = np.empty((nt, n_local), dtype=np.int64)
    elem_nodes[:, 0:3] = mesh.triangles
    for t, tri in enumerate(mesh.triangles):
        pos = 3
        for e in range(3):
            va, vb = int(tri[e]), int(tri[(e + 1) % 3])
            key = (min(va, vb), max(va, vb))
            base = nv + edge_index[key] * n_per_edge
            ids = np.arange(base, base + n_per_edge)
            if va > vb:
                ids = ids[::-1]
            elem_nodes[t, pos:pos + n_per_edge] = ids
            pos += n_per_edge
        if n_interior:
            base = nv + n_edge_nodes + t * n_interior
            elem_nodes[t, pos:] = np.arange(base, base + n_interior)
            lam = ref[pos:]
            v = mesh.vertices[tri]
            nodes[base:base + n_interior] = (
                np.outer(1.0 - lam[:, 0] - lam[:, 1], v[0])
                + np.outer(lam[:, 0], v[1]) + np.outer(lam[:, 1], v[2]))

    boundary = np.zeros(n_nodes, dtype=bool)
    for (a, b) in mesh.boundary_edges:
        boundary[a] = boundary[b] = True
        base = nv + edge_index[(a, b)] * n_per_edge
        boundary[base:base + n_per_edge] = True
    return DofMap(k, nodes, elem_nodes, boundary)
