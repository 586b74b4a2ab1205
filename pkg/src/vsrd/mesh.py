"""Triangulations of the unit disk with a marked active boundary arc.

The disk boundary is approximated by an inscribed polygon whose vertices lie
exactly on the unit circle.  The active arc (third quadrant by default) is
marked segment-wise, its two corner points are pinned to mesh vertices, and
boundary edges near those corners are geometrically graded to a fraction of
the global mesh size.

Construction is deterministic: identical inputs yield bit-identical meshes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import BoundaryMarkingError, MeshConstructionError, MeshParameterError

# Angular sectors of the ring construction.  Eight sectors make the ring
# spacing and the rim spacing nearly equal (arc per sector = 2*pi/8 ~ 0.785),
# so triangle quality is uniform across rings.
_SECTORS = 8

# Corner-grading is enforced on edges whose midpoint lies within this radius
# of a corner of the active arc; the guaranteed zone is radius 0.1, the extra
# margin covers edges that straddle the 0.1 circle.
_GRADE_RADIUS = 0.12

DEFAULT_ARC = (np.pi, 1.5 * np.pi)
_ENDPOINT_TOL = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of the unit disk.

    vertices : (n_v, 2) float array, read-only
    triangles : (n_t, 3) int array, counter-clockwise, read-only
    boundary_segments : (n_b, 2) int array forming one closed cycle in
        counter-clockwise order, starting at the vertex (1, 0)
    gamma2_flags : (n_b,) bool array, True for segments of the active arc
    gamma2_endpoint_vertices : vertex indices of the two arc corners
    h_max : longest edge of the triangulation
    refine_level : refinement level the mesh was built at
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_segments: np.ndarray
    gamma2_flags: np.ndarray
    gamma2_endpoint_vertices: tuple[int, int]
    h_max: float
    refine_level: int

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_boundary_segments(self) -> int:
        return self.boundary_segments.shape[0]

    def corner_points(self) -> tuple[Point2, Point2]:
        a, b = self.gamma2_endpoint_vertices
        return Point2(*self.vertices[a]), Point2(*self.vertices[b])


@dataclass(frozen=True)
class QualityReport:
    min_angle: float  # degrees
    h_max: float
    h_min: float
    n_triangles: int
    n_boundary_segments: int
    disk_area_defect: float  # pi minus inscribed polygon area


def build_disk_mesh(n_base: int, refine_levels: int,
                    corner_grading: float = 0.25) -> Mesh:
    """Build a graded triangulation of the unit disk.

    Parameters
    ----------
    n_base : number of boundary segments of the level-0 mesh; must be a
        multiple of 8 and at least 8 so that the arc corners (-1,0) and
        (0,-1) land on vertices.
    refine_levels : each level increases the ring count by sqrt(2), roughly
        doubling the triangle count and shrinking h_max by ~1/sqrt(2).
    corner_grading : ratio of the target edge length near the arc corners to
        the global h_max; 1 disables grading.

    The returned mesh carries the default active arc [pi, 3*pi/2] already
    marked.
    """
    if not isinstance(n_base, (int, np.integer)) or n_base < 8:
        raise MeshParameterError(f"n_base must be an integer >= 8, got {n_base!r}")
    if n_base % _SECTORS != 0:
        raise MeshParameterError(
            f"n_base must be a multiple of {_SECTORS} so the active-arc corners "
            f"fall on vertices, got {n_base}")
    if not isinstance(refine_levels, (int, np.integer)) or refine_levels < 0:
        raise MeshParameterError(
            f"refine_levels must be a non-negative integer, got {refine_levels!r}")
    if not (0.0 < corner_grading <= 1.0):
        raise MeshParameterError(
            f"corner_grading must lie in (0, 1], got {corner_grading!r}")

    m0 = n_base // _SECTORS
    m = m0
    for level in range(1, refine_levels + 1):
        # sqrt(2) ring growth doubles the element count per level; force
        # strict growth so coarse meshes still refine at every level
        m = max(m + 1, int(m0 * 2.0 ** (level / 2.0) + 0.5))

    verts, tris = _polar_mesh(m)
    verts, tris = _grade_corners(verts, tris, corner_grading)
    mesh = _finalize(verts, tris, refine_levels)
    _validate(mesh)
    return mesh


def mark_active_boundary(mesh: Mesh, theta_start: float, theta_end: float) -> Mesh:
    """Return a copy of the mesh with the active arc [theta_start, theta_end] marked.

    Segments are flagged by the polar angle of their chord midpoint; both arc
    endpoints must coincide with boundary vertices (angle match within 1e-12).
    """
    if not (0.0 <= theta_start < theta_end <= 2.0 * np.pi):
        raise BoundaryMarkingError(
            f"need 0 <= theta_start < theta_end <= 2*pi, got [{theta_start}, {theta_end}]")
    flags, endpoints = _compute_flags(mesh.vertices, mesh.boundary_segments,
                                      theta_start, theta_end)
    flags.setflags(write=False)
    return replace(mesh, gamma2_flags=flags, gamma2_endpoint_vertices=endpoints)


def mesh_quality(mesh: Mesh) -> QualityReport:
    """Exact counts and geometric measures of the triangulation."""
    p = mesh.vertices[mesh.triangles]
    e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
    lengths = np.linalg.norm(e, axis=2)  # (3, n_t)
    areas = _signed_areas(mesh.vertices, mesh.triangles)
    # interior angle at each vertex from the two incident edge vectors
    angles = np.empty((3, mesh.n_triangles))
    for k in range(3):
        u = -e[(k + 2) % 3]
        v = e[k]
        cosang = np.sum(u * v, axis=1) / (lengths[(k + 2) % 3] * lengths[k])
        angles[k] = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return QualityReport(
        min_angle=float(angles.min()),
        h_max=float(lengths.max()),
        h_min=float(lengths.min()),
        n_triangles=mesh.n_triangles,
        n_boundary_segments=mesh.n_boundary_segments,
        disk_area_defect=float(np.pi - areas.sum()),
    )


def boundary_lengths(mesh: Mesh) -> np.ndarray:
    """Chord length of every boundary segment, in cycle order."""
    a = mesh.vertices[mesh.boundary_segments[:, 0]]
    b = mesh.vertices[mesh.boundary_segments[:, 1]]
    return np.linalg.norm(b - a, axis=1)


def vertex_angles(points: np.ndarray) -> np.ndarray:
    """Polar angles in [0, 2*pi) of a point array."""
    a = np.arctan2(points[:, 1], points[:, 0])
    a = np.where(a < 0.0, a + 2.0 * np.pi, a)
    return a


def write_mesh_text(mesh: Mesh, path) -> None:
    """Plain-text dump: vertices ("x y"), triangles ("i j k"), boundary ("i j flag")."""
    with open(path, "w") as fh:
        fh.write(f"# vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"# triangles {mesh.n_triangles}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        fh.write(f"# boundary {mesh.n_boundary_segments}\n")
        for (i, j), f in zip(mesh.boundary_segments, mesh.gamma2_flags):
            fh.write(f"{i} {j} {int(f)}\n")


# ---------------------------------------------------------------------------
# construction internals


def _ring_points(k: int, m: int) -> np.ndarray:
    """Vertices of ring k (radius k/m) with 8k equi-angular points.

    Cardinal points (angle 0, pi/2, pi, 3*pi/2) are snapped to exact
    coordinates so the arc corners are exactly (-1, 0) and (0, -1).
    """
    n = _SECTORS * k
    j = np.arange(n)
    theta = 2.0 * np.pi * j / n
    r = k / m
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    for frac, (cx, cy) in ((0, (r, 0.0)), (1, (0.0, r)), (2, (-r, 0.0)), (3, (0.0, -r))):
        if (n * frac) % 4 == 0:
            idx = (n * frac) // 4
            if idx < n:
                pts[idx] = (cx, cy)
    return pts


def _zip_rings(inner_idx, inner_ang, outer_idx, outer_ang, tris) -> None:
    """Triangulate the annulus strip between two concentric vertex rings.

    Both rings are given in ascending angular order starting at angle 0.  A
    merge sweep over the two angle lists emits counter-clockwise triangles;
    angle ties advance the outer ring first.
    """
    ni, no = len(inner_idx), len(outer_idx)
    two_pi = 2.0 * np.pi
    ci = cj = 0
    while ci < ni or cj < no:
        a_next = inner_ang[ci + 1] if ci + 1 < ni else two_pi
        b_next = outer_ang[cj + 1] if cj + 1 < no else two_pi
        if cj < no and (ci == ni or b_next <= a_next):
            tris.append((inner_idx[ci % ni], outer_idx[cj], outer_idx[(cj + 1) % no]))
            cj += 1
        else:
            tris.append((inner_idx[ci], outer_idx[cj % no], inner_idx[(ci + 1) % ni]))
            ci += 1


def _polar_mesh(m: int) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Concentric-ring triangulation with m rings and 8k vertices on ring k."""
    verts = [np.zeros((1, 2))]
    ring_start = [None, 1]
    for k in range(1, m + 1):
        pts = _ring_points(k, m)
        verts.append(pts)
        ring_start.append(ring_start[-1] + len(pts))
    vertices = np.vstack(verts)

    tris: list[tuple[int, int, int]] = []
    first = ring_start[1]
    n1 = _SECTORS
    for j in range(n1):  # fan around the center
        tris.append((0, first + j, first + (j + 1) % n1))
    for k in range(1, m):
        i0, o0 = ring_start[k], ring_start[k + 1]
        ni, no = _SECTORS * k, _SECTORS * (k + 1)
        inner_idx = list(range(i0, i0 + ni))
        outer_idx = list(range(o0, o0 + no))
        inner_ang = 2.0 * np.pi * np.arange(ni) / ni
        outer_ang = 2.0 * np.pi * np.arange(no) / no
        _zip_rings(inner_idx, inner_ang, outer_idx, outer_ang, tris)
    return vertices, tris


class _EditableMesh:
    """Mutable triangle soup used during local bisection refinement."""

    def __init__(self, vertices: np.ndarray, tris: list[tuple[int, int, int]]):
        self.verts: list[tuple[float, float]] = [tuple(v) for v in vertices]
        self.tris: list[tuple[int, int, int]] = list(tris)
        self.alive: list[bool] = [True] * len(tris)
        self.edge_map: dict[tuple[int, int], list[int]] = {}
        for t, tri in enumerate(self.tris):
            for e in _tri_edges(tri):
                self.edge_map.setdefault(e, []).append(t)

    def edge_length(self, e: tuple[int, int]) -> float:
        (x0, y0), (x1, y1) = self.verts[e[0]], self.verts[e[1]]
        return float(np.hypot(x1 - x0, y1 - y0))

    def longest_edge(self, t: int) -> tuple[int, int]:
        edges = _tri_edges(self.tris[t])
        # total order (length, lexicographic) keeps symmetric ties deterministic
        return max(edges, key=lambda e: (self.edge_length(e), e))

    def adjacent(self, e: tuple[int, int]) -> list[int]:
        return [t for t in self.edge_map.get(e, ()) if self.alive[t]]

    def is_boundary_edge(self, e: tuple[int, int]) -> bool:
        return len(self.adjacent(e)) == 1

    def split_edge(self, e: tuple[int, int]) -> None:
        """Split edge e conformally, bisecting neighbours first when e is not
        their longest edge (longest-edge propagation)."""
        stack = [e]
        while stack:
            top = stack[-1]
            adj = self.adjacent(top)
            if not adj:
                stack.pop()
                continue
            pending = [t for t in adj if self.longest_edge(t) != top]
            if pending:
                stack.append(self.longest_edge(pending[0]))
                continue
            stack.pop()
            self._do_split(top)

    def _do_split(self, e: tuple[int, int]) -> None:
        adj = self.adjacent(e)
        if not adj:
            return
        p, q = e
        (x0, y0), (x1, y1) = self.verts[p], self.verts[q]
        mx, my = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        if self.is_boundary_edge(e):
            norm = np.hypot(mx, my)
            mx, my = mx / norm, my / norm
        v = len(self.verts)
        self.verts.append((mx, my))
        for t in adj:
            a, b, c = self.tris[t]
            # rotate so the split edge is (a, b) in parent orientation
            for _ in range(3):
                if {a, b} == {p, q}:
                    break
                a, b, c = b, c, a
            self._remove(t)
            self._add((a, v, c))
            self._add((v, b, c))

    def _remove(self, t: int) -> None:
        self.alive[t] = False
        for e in _tri_edges(self.tris[t]):
            self.edge_map[e].remove(t)

    def _add(self, tri: tuple[int, int, int]) -> None:
        t = len(self.tris)
        self.tris.append(tri)
        self.alive.append(True)
        for e in _tri_edges(tri):
            self.edge_map.setdefault(e, []).append(t)

    def live_edges(self) -> list[tuple[int, int]]:
        return [e for e, ts in self.edge_map.items()
                if any(self.alive[t] for t in ts)]

    def export(self) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
        tris = [tri for t, tri in enumerate(self.tris) if self.alive[t]]
        return np.asarray(self.verts, dtype=float), tris


def _tri_edges(tri: tuple[int, int, int]) -> tuple[tuple[int, int], ...]:
    a, b, c = tri
    return (tuple(sorted((a, b))), tuple(sorted((b, c))), tuple(sorted((c, a))))


def _grade_corners(vertices: np.ndarray, tris: list[tuple[int, int, int]],
                   corner_grading: float) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Bisect edges near the active-arc corners until their length is at most
    corner_grading * h_max.  Conformity is kept by longest-edge propagation,
    which also carries the grading one layer into the volume."""
    if corner_grading >= 1.0:
        return vertices, tris
    em = _EditableMesh(vertices, tris)
    corners = np.array([[-1.0, 0.0], [0.0, -1.0]])
    for _ in range(8):  # h_max can only shrink; re-check until stable
        h_max = max(em.edge_length(e) for e in em.live_edges())
        target = corner_grading * h_max
        changed = False
        for _round in range(64):
            offending = []
            for e in em.live_edges():
                if em.edge_length(e) <= target:
                    continue
                (x0, y0), (x1, y1) = em.verts[e[0]], em.verts[e[1]]
                mid = np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])
                if np.min(np.linalg.norm(corners - mid, axis=1)) <= _GRADE_RADIUS:
                    offending.append(e)
            if not offending:
                break
            for e in sorted(offending):
                if em.edge_length(e) > target and em.adjacent(e):
                    em.split_edge(e)
            changed = True
        else:
            raise MeshConstructionError("corner grading did not converge")
        new_h_max = max(em.edge_length(e) for e in em.live_edges())
        if not changed or new_h_max >= h_max * (1.0 - 1e-12):
            break
    return em.export()


def _signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def _boundary_cycle(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Ordered closed boundary cycle, counter-clockwise, starting at (1, 0)."""
    count: dict[tuple[int, int], int] = {}
    directed: dict[tuple[int, int], tuple[int, int]] = {}
    for a, b, c in triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            count[key] = count.get(key, 0) + 1
            directed[key] = (int(u), int(v))
    succ: dict[int, int] = {}
    n_bnd = 0
    for key, cnt in count.items():
        if cnt == 1:
            u, v = directed[key]
            if u in succ:
                raise MeshConstructionError("boundary is not a single cycle")
            succ[u] = v
            n_bnd += 1
        elif cnt > 2:
            raise MeshConstructionError(f"edge {key} shared by {cnt} triangles")
    start_candidates = np.nonzero(
        (vertices[:, 0] == 1.0) & (vertices[:, 1] == 0.0))[0]
    if len(start_candidates) != 1:
        raise MeshConstructionError("boundary start vertex (1, 0) not found")
    start = int(start_candidates[0])
    cycle = [start]
    v = succ.get(start)
    while v is not None and v != start:
        cycle.append(v)
        v = succ.get(v)
    if v != start or len(cycle) != n_bnd:
        raise MeshConstructionError("boundary edges do not close into one cycle")
    segs = np.column_stack([cycle, np.roll(cycle, -1)]).astype(np.int64)
    return segs


def _compute_flags(vertices: np.ndarray, segments: np.ndarray,
                   theta_start: float, theta_end: float):
    mids = 0.5 * (vertices[segments[:, 0]] + vertices[segments[:, 1]])
    mid_ang = vertex_angles(mids)
    flags = (mid_ang >= theta_start) & (mid_ang <= theta_end)

    bverts = segments[:, 0]
    ang = vertex_angles(vertices[bverts])
    ends = []
    for theta in (theta_start, theta_end):
        hit = np.nonzero(np.abs(ang - theta) <= _ENDPOINT_TOL)[0]
        if len(hit) != 1:
            raise BoundaryMarkingError(
                f"no unique boundary vertex at angle {theta!r} (tolerance {_ENDPOINT_TOL})")
        ends.append(int(bverts[hit[0]]))

    idx = np.nonzero(flags)[0]
    if len(idx) == 0:
        raise BoundaryMarkingError("active arc contains no boundary segment")
    runs = np.nonzero(np.diff(idx) != 1)[0]
    # contiguity up to cyclic wrap-around
    if len(runs) > 1 or (len(runs) == 1 and not (idx[0] == 0 and idx[-1] == len(flags) - 1)):
        raise BoundaryMarkingError("active-arc segments are not contiguous")
    return flags, (ends[0], ends[1])


def _finalize(vertices: np.ndarray, tris: list[tuple[int, int, int]],
              refine_level: int) -> Mesh:
    triangles = np.asarray(tris, dtype=np.int64)
    areas = _signed_areas(vertices, triangles)
    if np.any(areas <= 0.0):
        bad = int(np.argmin(areas))
        raise MeshConstructionError(
            f"triangle {bad} has non-positive area {areas[bad]:.3e}")
    segments = _boundary_cycle(vertices, triangles)
    flags, endpoints = _compute_flags(vertices, segments, *DEFAULT_ARC)

    p = vertices[triangles]
    edge_len = np.stack([
        np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
        np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
    ])
    for arr in (vertices, triangles, segments, flags):
        arr.setflags(write=False)
    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_segments=segments,
        gamma2_flags=flags,
        gamma2_endpoint_vertices=endpoints,
        h_max=float(edge_len.max()),
        refine_level=refine_level,
    )


def _validate(mesh: Mesh) -> None:
    bidx = mesh.boundary_segments[:, 0]
    radii = np.linalg.norm(mesh.vertices[bidx], axis=1)
    if np.max(np.abs(radii - 1.0)) > 1e-12:
        raise MeshConstructionError("boundary vertex off the unit circle")
    for target in ((-1.0, 0.0), (0.0, -1.0)):
        if not np.any((mesh.vertices[:, 0] == target[0])
                      & (mesh.vertices[:, 1] == target[1])):
            raise MeshConstructionError(f"corner vertex {target} missing")
