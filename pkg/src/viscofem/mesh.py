"""Conforming triangulations of polygonal 2D domains.

Provides the uniform Friedrichs-Keller grid on the unit square, a structured
generator for the 4:1 planar contraction geometry, and local refinement by
longest-edge bisection with conformity closure.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshGenerationFailure

WALL = "wall"
INLET = "inlet"
OUTLET = "outlet"
GENERIC = "generic"


@dataclass(frozen=True)
class GeometrySpec:
    """Domain description: the unit square or the 4:1 contraction.

    The contraction consists of an upstream channel (-20L, 0) x (-4L, 4L)
    and a downstream channel (0, 40L) x (-L, L), contracting at x1 = 0.
    """

    kind: str = "unit_square"
    L: float = 0.5

    def __post_init__(self):
        if self.kind not in ("unit_square", "contraction"):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        if self.L <= 0:
            raise ValueError("half-width L must be positive")


@dataclass
class Mesh:
    """Triangulation with boundary tags and cached per-cell affine maps.

    The affine map of cell K is x = p0_K + A_K @ xhat with reference
    vertices (0,0), (1,0), (0,1); columns of A_K are p1-p0 and p2-p0.
    """

    vertices: np.ndarray                 # (V, 2)
    cells: np.ndarray                    # (C, 3) counterclockwise
    boundary_edges: np.ndarray           # (B, 2) vertex pairs
    boundary_tags: list                  # (B,) tag strings
    A: np.ndarray = field(init=False)        # (C, 2, 2)
    p0: np.ndarray = field(init=False)       # (C, 2)
    detA: np.ndarray = field(init=False)     # (C,)
    AinvT: np.ndarray = field(init=False)    # (C, 2, 2)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.cells = np.asarray(self.cells, dtype=np.int64)
        self.boundary_edges = np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        p = self.vertices[self.cells]                 # (C, 3, 2)
        self.p0 = p[:, 0, :]
        self.A = np.stack([p[:, 1, :] - p[:, 0, :], p[:, 2, :] - p[:, 0, :]], axis=-1)
        self.detA = self.A[:, 0, 0] * self.A[:, 1, 1] - self.A[:, 0, 1] * self.A[:, 1, 0]
        if np.any(self.detA <= 0):
            bad = int(np.argmin(self.detA))
            raise MeshGenerationFailure(
                f"cell {bad} is degenerate or clockwise (det A_K = {self.detA[bad]:g})"
            )
        inv = np.empty_like(self.A)
        inv[:, 0, 0] = self.A[:, 1, 1]
        inv[:, 0, 1] = -self.A[:, 1, 0]
        inv[:, 1, 0] = -self.A[:, 0, 1]
        inv[:, 1, 1] = self.A[:, 0, 0]
        self.AinvT = inv / self.detA[:, None, None]

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    def cell_diameters(self):
        p = self.vertices[self.cells]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return np.linalg.norm(e, axis=2).max(axis=1)

    def cell_areas(self):
        return 0.5 * self.detA

    def edges(self):
        """Unique edges as sorted vertex pairs, shape (E, 2)."""
        c = self.cells
        raw = np.concatenate([c[:, [0, 1]], c[:, [1, 2]], c[:, [2, 0]]])
        raw.sort(axis=1)
        return np.unique(raw, axis=0)


def affine_map(mesh: Mesh, cell: int):
    """Return (A_K, p0) of the affine map for one cell."""
    return mesh.A[cell], mesh.p0[cell]


def shape_regularity(mesh: Mesh) -> float:
    """Max over cells of diameter / inradius."""
    p = mesh.vertices[mesh.cells]
    l01 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    l12 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
    l20 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    perim = l01 + l12 + l20
    area = mesh.cell_areas()
    inradius = 2.0 * area / perim
    h = np.maximum(np.maximum(l01, l12), l20)
    return float(np.max(h / inradius))


def euler_characteristic(mesh: Mesh) -> int:
    """V - E + C; equals 1 for simply connected meshes with boundary."""
    return mesh.num_vertices - len(mesh.edges()) + mesh.num_cells


def _boundary_from_cells(cells):
    """Edges belonging to exactly one cell, as sorted pairs."""
    raw = np.concatenate([cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 0]]])
    raw.sort(axis=1)
    uniq, counts = np.unique(raw, axis=0, return_counts=True)
    return uniq[counts == 1]


def _fk_block(xs, ys, index_of):
    """Friedrichs-Keller split of a structured grid, diagonal lower-left
    to upper-right. `index_of[i, j]` maps grid position to global vertex."""
    nx, ny = len(xs) - 1, len(ys) - 1
    cells = []
    for j in range(ny):
        for i in range(nx):
            v00 = index_of[i, j]
            v10 = index_of[i + 1, j]
            v01 = index_of[i, j + 1]
            v11 = index_of[i + 1, j + 1]
            cells.append((v00, v10, v11))
            cells.append((v00, v11, v01))
    return cells


def generate_friedrichs_keller(n: int) -> Mesh:
    """Uniform Friedrichs-Keller triangulation of [0,1]^2 with n x n squares."""
    if n < 1:
        raise ValueError("n must be >= 1")
    coords = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    index_of = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    cells = np.array(_fk_block(coords, coords, index_of), dtype=np.int64)
    bedges = _boundary_from_cells(cells)
    return Mesh(vertices, cells, bedges, [WALL] * len(bedges))


def generate_contraction(spec: GeometrySpec, h_target: float) -> Mesh:
    """Structured conforming mesh of the 4:1 contraction.

    Two Friedrichs-Keller blocks (upstream and downstream channel) share the
    vertical line x1 = 0 on a common y-grid, so the union is conforming and
    the re-entrant corners (0, +-L) are mesh vertices.
    """
    if spec.kind != "contraction":
        raise MeshGenerationFailure("spec.kind must be 'contraction'")
    if h_target <= 0:
        raise MeshGenerationFailure("h_target must be positive")
    L = spec.L
    ny = max(1, int(np.ceil(L / h_target)))       # intervals per half-width L
    ys = -4 * L + (L / ny) * np.arange(8 * ny + 1)
    ys_down = ys[3 * ny: 5 * ny + 1]              # same floats, slice [-L, L]

    nx_up = max(1, int(np.ceil(20 * L / h_target)))
    nx_dn = max(1, int(np.ceil(40 * L / h_target)))
    xs_up = np.linspace(-20 * L, 0.0, nx_up + 1)
    xs_dn = np.linspace(0.0, 40 * L, nx_dn + 1)

    # Upstream block vertices.
    Xu, Yu = np.meshgrid(xs_up, ys, indexing="ij")
    verts_up = np.column_stack([Xu.ravel(), Yu.ravel()])
    idx_up = np.arange(len(verts_up)).reshape(len(xs_up), len(ys))

    # Downstream block: the column at x = 0 reuses the upstream vertices.
    Xd, Yd = np.meshgrid(xs_dn[1:], ys_down, indexing="ij")
    verts_dn = np.column_stack([Xd.ravel(), Yd.ravel()])
    off = len(verts_up)
    idx_dn = np.empty((len(xs_dn), len(ys_down)), dtype=np.int64)
    idx_dn[0, :] = idx_up[-1, 3 * ny: 5 * ny + 1]
    idx_dn[1:, :] = off + np.arange(len(verts_dn)).reshape(len(xs_dn) - 1, len(ys_down))

    vertices = np.vstack([verts_up, verts_dn])
    cells = np.array(
        _fk_block(xs_up, ys, idx_up) + _fk_block(xs_dn, ys_down, idx_dn),
        dtype=np.int64,
    )
    bedges = _boundary_from_cells(cells)
    mids = 0.5 * (vertices[bedges[:, 0]] + vertices[bedges[:, 1]])
    tol = 1e-12 * max(1.0, 40 * L)
    tags = []
    for (mx, my) in mids:
        if abs(mx - (-20 * L)) < tol:
            tags.append(INLET)
        elif abs(mx - 40 * L) < tol:
            tags.append(OUTLET)
        else:
            tags.append(WALL)
    return Mesh(vertices, cells, bedges, tags)


def _dist_point_triangle(c, tri):
    """Euclidean distance from point c to a filled triangle."""
    a, b, d = tri
    # Inside test via signs of edge cross products (CCW triangle).
    def cross(o, p, q):
        return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])

    if cross(a, b, c) >= 0 and cross(b, d, c) >= 0 and cross(d, a, c) >= 0:
        return 0.0

    def seg_dist(p, q):
        pq = q - p
        t = np.dot(c - p, pq) / np.dot(pq, pq)
        t = min(1.0, max(0.0, t))
        return np.linalg.norm(c - (p + t * pq))

    return min(seg_dist(a, b), seg_dist(b, d), seg_dist(d, a))


def _longest_edge(verts, tri):
    """Local index of the longest edge; edges are (0,1), (1,2), (2,0).

    Ties break on the sorted global vertex pair for determinism.
    """
    pairs = [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
    best = None
    for loc, (i, j) in enumerate(pairs):
        length = np.linalg.norm(verts[i] - verts[j])
        key = (-length, min(i, j), max(i, j))
        if best is None or key < best[0]:
            best = (key, loc)
    return best[1]


def _bisect_once(vertices, cells, tag_map, marked_cells):
    """One sweep of longest-edge bisection of `marked_cells` with recursive
    conformity closure. Returns (vertices, cells, tag_map)."""
    verts = [tuple(v) for v in vertices]
    cell_list = [tuple(c) for c in cells]

    # Cells adjacent to each edge.
    edge_cells = {}
    for ci, tri in enumerate(cell_list):
        for i, j in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            edge_cells.setdefault((min(i, j), max(i, j)), []).append(ci)

    varr = vertices
    longest = {ci: _longest_edge(varr, cell_list[ci]) for ci in range(len(cell_list))}

    def longest_pair(ci):
        tri = cell_list[ci]
        loc = longest[ci]
        i, j = ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0]))[loc]
        return (min(i, j), max(i, j))

    # Closure: marking an edge forces every adjacent cell to mark its
    # longest edge as well, recursively.
    marked_edges = set()
    stack = [longest_pair(ci) for ci in marked_cells]
    while stack:
        e = stack.pop()
        if e in marked_edges:
            continue
        marked_edges.add(e)
        for ci in edge_cells[e]:
            le = longest_pair(ci)
            if le not in marked_edges:
                stack.append(le)

    # Midpoints of marked edges; boundary tags propagate to halves.
    midpoint = {}
    for (i, j) in sorted(marked_edges):
        midpoint[(i, j)] = len(verts)
        verts.append(tuple(0.5 * (vertices[i] + vertices[j])))
    for (i, j), m in midpoint.items():
        if (i, j) in tag_map:
            tag = tag_map.pop((i, j))
            tag_map[(min(i, m), max(i, m))] = tag
            tag_map[(min(j, m), max(j, m))] = tag

    def split(tri, loc, m):
        a, b, c = tri
        if loc == 0:
            return (a, m, c), (m, b, c)
        if loc == 1:
            return (a, b, m), (a, m, c)
        return (a, b, m), (m, b, c)

    def edge_key(tri, loc):
        i, j = ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0]))[loc]
        return (min(i, j), max(i, j))

    varr_new = np.array(verts)

    def refine_children(tri, out):
        # After the first split, at most one original (possibly marked)
        # edge remains per child; cut it off directly.
        marked = [loc for loc in range(3) if edge_key(tri, loc) in midpoint]
        if not marked:
            out.append(tri)
            return
        loc = marked[0]
        c1, c2 = split(tri, loc, midpoint[edge_key(tri, loc)])
        refine_children(c1, out)
        refine_children(c2, out)

    new_cells = []
    for ci, tri in enumerate(cell_list):
        if not any(edge_key(tri, loc) in midpoint for loc in range(3)):
            new_cells.append(tri)
            continue
        # Closure guarantees the longest edge of any touched cell is marked.
        loc = longest[ci]
        c1, c2 = split(tri, loc, midpoint[edge_key(tri, loc)])
        refine_children(c1, new_cells)
        refine_children(c2, new_cells)
    return varr_new, np.array(new_cells, dtype=np.int64), tag_map


def refine_ball(mesh: Mesh, center, radius: float, levels: int) -> Mesh:
    """Refine all cells within shrinking balls around `center`.

    For i = 0..levels-1, cells intersecting the ball of radius radius*2^-i
    are bisected twice (halving the local mesh size per level), with
    conformity closure at every sweep.
    """
    if levels == 0:
        return mesh
    center = np.asarray(center, dtype=float)
    vertices = mesh.vertices
    cells = mesh.cells
    tag_map = {
        (min(i, j), max(i, j)): t
        for (i, j), t in zip(mesh.boundary_edges, mesh.boundary_tags)
    }
    for i in range(levels):
        r = radius * 2.0 ** (-i)
        for _sweep in range(2):
            tri_pts = vertices[cells]
            marked = [
                ci for ci in range(len(cells))
                if _dist_point_triangle(center, tri_pts[ci]) <= r
            ]
            vertices, cells, tag_map = _bisect_once(vertices, cells, tag_map, marked)
    bedges = _boundary_from_cells(cells)
    tags = []
    for (i, j) in bedges:
        tags.append(tag_map[(min(i, j), max(i, j))])
    return Mesh(vertices, cells, bedges, tags)


def validate(mesh: Mesh):
    """Check conformity and boundary-tag invariants; raises on violation."""
    raw = np.concatenate(
        [mesh.cells[:, [0, 1]], mesh.cells[:, [1, 2]], mesh.cells[:, [2, 0]]]
    )
    raw.sort(axis=1)
    uniq, counts = np.unique(raw, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshGenerationFailure("non-conforming mesh: edge shared by > 2 cells")
    boundary = {tuple(e) for e in uniq[counts == 1]}
    tagged = [tuple(sorted(e)) for e in mesh.boundary_edges]
    if len(set(tagged)) != len(tagged):
        raise MeshGenerationFailure("boundary edge tagged more than once")
    if set(tagged) != boundary:
        raise MeshGenerationFailure("boundary_facets do not match mesh boundary")


def mesh_to_text(mesh: Mesh) -> str:
    """Serialize to the plain-text mesh format (`mesh2d v1`)."""
    lines = ["mesh2d v1", f"vertices {mesh.num_vertices}"]
    for x, y in mesh.vertices:
        lines.append(f"{float(x)!r} {float(y)!r}")
    lines.append(f"cells {mesh.num_cells}")
    for i, j, k in mesh.cells:
        lines.append(f"{i} {j} {k}")
    lines.append(f"boundary {len(mesh.boundary_edges)}")
    for (i, j), t in zip(mesh.boundary_edges, mesh.boundary_tags):
        lines.append(f"{i} {j} {t}")
    return "\n".join(lines) + "\n"


def save_text(mesh: Mesh, path):
    """Write the plain-text mesh format (`mesh2d v1`)."""
    with open(path, "w") as f:
        f.write(mesh_to_text(mesh))


def mesh_from_lines(it) -> Mesh:
    """Parse the mesh format from an iterator of non-blank lines."""
    header = next(it)
    if header.strip() != "mesh2d v1":
        raise MeshGenerationFailure(f"bad mesh header: {header!r}")
    kw, nv = next(it).split()
    assert kw == "vertices"
    vertices = np.array([[float(w) for w in next(it).split()] for _ in range(int(nv))])
    kw, nc = next(it).split()
    assert kw == "cells"
    cells = np.array(
        [[int(w) for w in next(it).split()] for _ in range(int(nc))], dtype=np.int64
    )
    kw, nb = next(it).split()
    assert kw == "boundary"
    bedges, tags = [], []
    for _ in range(int(nb)):
        i, j, t = next(it).split()
        bedges.append((int(i), int(j)))
        tags.append(t)
    return Mesh(vertices, cells, np.array(bedges, dtype=np.int64).reshape(-1, 2), tags)


def load_text(path) -> Mesh:
    """Read the plain-text mesh format; exact round-trip of save_text."""
    with open(path) as f:
        tokens = f.read().split("\n")
    return mesh_from_lines(iter(t for t in tokens if t.strip()))
