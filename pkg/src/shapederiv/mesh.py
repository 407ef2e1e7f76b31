"""Triangulated 2-d domains with tagged Dirichlet/Neumann boundaries.

Meshes are immutable values: generators build them, ``transport_mesh``
maps the vertices through a velocity flow and returns a new mesh with the
same connectivity and tags.  The text format (``tri-mesh v1``) stores
coordinates with 17 significant digits so write/read round-trips are
bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvertedElement
from .flow import VelocityField, integrate_flow

__all__ = [
    "DIRICHLET",
    "NEUMANN",
    "TriMesh",
    "unit_square_mesh",
    "disk_mesh",
    "transport_mesh",
    "write_mesh",
    "read_mesh",
]

DIRICHLET = "D"
NEUMANN = "N"

_SIDES = ("left", "right", "bottom", "top")


def _signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _boundary_edges(triangles: np.ndarray) -> list[tuple[int, int]]:
    """Directed edges that appear in exactly one triangle, in CCW order."""
    directed = set()
    for i, j, k in triangles:
        directed.update([(int(i), int(j)), (int(j), int(k)), (int(k), int(i))])
    return sorted(e for e in directed if (e[1], e[0]) not in directed)


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation with CCW triangles and tagged boundary edges.

    ``boundary_edges[k]`` is a directed vertex pair tracing the boundary
    counterclockwise (domain on the left), and ``boundary_tags[k]`` is
    ``"D"`` or ``"N"``.  The outward normal of an edge is the unit tangent
    rotated clockwise by 90 degrees.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=int))
        object.__setattr__(self, "boundary_edges", np.asarray(self.boundary_edges, dtype=int))
        object.__setattr__(self, "boundary_tags", tuple(self.boundary_tags))

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    def edges_with_tag(self, tag: str) -> np.ndarray:
        mask = np.array([t == tag for t in self.boundary_tags])
        return self.boundary_edges[mask]

    def outward_normals(self) -> np.ndarray:
        """Unit outward normal per boundary edge."""
        p = self.vertices[self.boundary_edges[:, 0]]
        q = self.vertices[self.boundary_edges[:, 1]]
        t = q - p
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def validate(self) -> None:
        """Check orientation, conformity and the boundary tagging."""
        areas = self.triangle_areas()
        if np.any(areas <= 0.0):
            raise InvertedElement("mesh contains a non-positively oriented triangle")
        expected = _boundary_edges(self.triangles)
        got = sorted((int(i), int(j)) for i, j in self.boundary_edges)
        if expected != got:
            raise ValueError("boundary edges do not cover the topological boundary")
        if len(self.boundary_tags) != len(self.boundary_edges):
            raise ValueError("each boundary edge needs exactly one tag")
        bad = set(self.boundary_tags) - {DIRICHLET, NEUMANN}
        if bad:
            raise ValueError(f"unknown boundary tags {bad!r}")
        # Conformity: interior undirected edges appear in exactly two triangles.
        counts: dict[tuple[int, int], int] = {}
        for i, j, k in self.triangles:
            for a, b in ((i, j), (j, k), (k, i)):
                key = (int(min(a, b)), int(max(a, b)))
                counts[key] = counts.get(key, 0) + 1
        if any(c > 2 for c in counts.values()):
            raise ValueError("mesh is not edge-to-edge conforming")


def unit_square_mesh(n: int, neumann_sides: set[str] | frozenset[str] = frozenset()) -> TriMesh:
    """Structured mesh of (0,1)^2 with n x n cells, each split into two triangles.

    ``neumann_sides`` is a subset of {left, right, bottom, top}; edges on
    the listed sides are tagged Neumann, all others Dirichlet.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    bad = set(neumann_sides) - set(_SIDES)
    if bad:
        raise ValueError(f"unknown sides {sorted(bad)!r}")
    xs = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i: int, j: int) -> int:
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    triangles = np.array(tris, dtype=int)

    edges = _boundary_edges(triangles)
    tags = []
    for i, j in edges:
        mx, my = 0.5 * (vertices[i] + vertices[j])
        if my == 0.0:
            side = "bottom"
        elif my == 1.0:
            side = "top"
        elif mx == 0.0:
            side = "left"
        else:
            side = "right"
        tags.append(NEUMANN if side in neumann_sides else DIRICHLET)
    mesh = TriMesh(vertices, triangles, np.array(edges, dtype=int), tuple(tags))
    mesh.validate()
    return mesh


def disk_mesh(rings: int) -> TriMesh:
    """Polygonal unit disk: a center fan plus concentric rings, all Dirichlet.

    Ring k of ``rings`` carries 6k equally spaced vertices at radius
    k/rings, so the hull is a regular 6*rings-gon inscribed in the unit
    circle.
    """
    if rings < 1:
        raise ValueError("rings must be >= 1")
    verts = [(0.0, 0.0)]
    ring_start = [0]
    for k in range(1, rings + 1):
        ring_start.append(len(verts))
        r = k / rings
        mk = 6 * k
        for a in range(mk):
            theta = 2.0 * np.pi * a / mk
            verts.append((r * np.cos(theta), r * np.sin(theta)))
    vertices = np.array(verts)

    tris: list[tuple[int, int, int]] = []
    # Center fan to ring 1.
    base1 = ring_start[1]
    for a in range(6):
        tris.append((0, base1 + a, base1 + (a + 1) % 6))
    # Bands between consecutive rings, triangulated by merging the two
    # angle-sorted vertex circles.
    for k in range(2, rings + 1):
        mi, mo = 6 * (k - 1), 6 * k
        bi, bo = ring_start[k - 1], ring_start[k]
        ai = ao = 0
        while ai < mi or ao < mo:
            angle_i = 2.0 * np.pi * (ai + 1) / mi
            angle_o = 2.0 * np.pi * (ao + 1) / mo
            if ao < mo and (ai == mi or angle_o <= angle_i + 1e-12):
                tris.append((bo + ao % mo, bo + (ao + 1) % mo, bi + ai % mi))
                ao += 1
            else:
                tris.append((bo + ao % mo, bi + (ai + 1) % mi, bi + ai % mi))
                ai += 1
    triangles = np.array(tris, dtype=int)
    # Normalize orientation.
    areas = _signed_areas(vertices, triangles)
    flip = areas < 0.0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    edges = _boundary_edges(triangles)
    mesh = TriMesh(vertices, triangles, np.array(edges, dtype=int), tuple(DIRICHLET for _ in edges))
    mesh.validate()
    return mesh


def transport_mesh(mesh: TriMesh, field: VelocityField, s: float, steps: int = 64) -> TriMesh:
    """Move every vertex along the flow of ``field`` for parameter s.

    Connectivity and boundary tags are preserved.  Raises InvertedElement
    when a transported triangle flips, i.e. s is too large for this mesh.
    """
    sample = integrate_flow(field, mesh.vertices, s, steps=steps)
    moved = TriMesh(sample.point, mesh.triangles, mesh.boundary_edges, mesh.boundary_tags)
    if np.any(moved.triangle_areas() <= 0.0):
        raise InvertedElement(f"transport by s={s} flipped a triangle")
    return moved


_HEADER = "tri-mesh v1"


def write_mesh(path, mesh: TriMesh) -> None:
    """Write the text format: header, vertex, triangle and edge sections."""
    lines = [_HEADER, f"V {mesh.num_vertices}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append(f"T {mesh.num_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines.append(f"E {len(mesh.boundary_edges)}")
    lines += [
        f"{i} {j} {tag}"
        for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags)
    ]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> TriMesh:
    with open(path, encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _HEADER:
        raise ValueError(f"{path}: expected header '{_HEADER}'")
    pos = 1

    def section(letter: str) -> int:
        nonlocal pos
        head = lines[pos].split()
        if len(head) != 2 or head[0] != letter:
            raise ValueError(f"{path}: expected section '{letter} <count>'")
        pos += 1
        return int(head[1])

    nv = section("V")
    vertices = np.array([[float(t) for t in lines[pos + r].split()] for r in range(nv)])
    pos += nv
    nt = section("T")
    triangles = np.array([[int(t) for t in lines[pos + r].split()] for r in range(nt)], dtype=int)
    pos += nt
    ne = section("E")
    edges, tags = [], []
    for r in range(ne):
        i, j, tag = lines[pos + r].split()
        edges.append((int(i), int(j)))
        tags.append(tag)
    mesh = TriMesh(vertices, triangles, np.array(edges, dtype=int), tuple(tags))
    mesh.validate()
    return mesh
