import hashlib

import numpy as np
import pytest

from vsrd.errors import BoundaryMarkingError, MeshParameterError
from vsrd.mesh import (boundary_lengths, build_disk_mesh, mark_active_boundary,
                       mesh_quality, vertex_angles, write_mesh_text,
                       _signed_areas)


def mesh_digest(mesh):
    h = hashlib.sha256()
    for arr in (mesh.vertices, mesh.triangles, mesh.boundary_segments,
                mesh.gamma2_flags):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def all_edges(mesh):
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def test_invalid_parameters():
    with pytest.raises(MeshParameterError):
        build_disk_mesh(7, 0)
    with pytest.raises(MeshParameterError):
        build_disk_mesh(12, 0)  # not a multiple of 8
    with pytest.raises(MeshParameterError):
        build_disk_mesh(16, -1)
    with pytest.raises(MeshParameterError):
        build_disk_mesh(16, 0, corner_grading=0.0)
    with pytest.raises(MeshParameterError):
        build_disk_mesh(16, 0, corner_grading=1.5)


def test_minimal_mesh_invariants():
    mesh = build_disk_mesh(8, 0, corner_grading=1.0)
    assert np.all(_signed_areas(mesh.vertices, mesh.triangles) > 0.0)
    segs = mesh.boundary_segments
    assert np.array_equal(segs[:, 1], np.roll(segs[:, 0], -1))  # closed cycle
    coords = {tuple(v) for v in np.round(mesh.vertices, 15)}
    assert (-1.0, 0.0) in coords and (0.0, -1.0) in coords


@pytest.mark.parametrize("n_base,levels", [(8, 0), (16, 1), (48, 0), (48, 2)])
def test_structural_invariants(n_base, levels):
    mesh = build_disk_mesh(n_base, levels)
    assert np.all(_signed_areas(mesh.vertices, mesh.triangles) > 0.0)
    bidx = mesh.boundary_segments[:, 0]
    assert np.max(np.abs(np.linalg.norm(mesh.vertices[bidx], axis=1) - 1.0)) <= 1e-12
    # flags follow the midpoint-angle rule on the default arc
    mids = 0.5 * (mesh.vertices[mesh.boundary_segments[:, 0]]
                  + mesh.vertices[mesh.boundary_segments[:, 1]])
    ang = vertex_angles(mids)
    expect = (ang >= np.pi) & (ang <= 1.5 * np.pi)
    assert np.array_equal(mesh.gamma2_flags, expect)
    # flagged run contiguous, endpoints at the corner vertices
    a, b = mesh.corner_points()
    assert (a.x, a.y) == (-1.0, 0.0)
    assert (b.x, b.y) == (0.0, -1.0)


def test_refinement_monotonics():
    meshes = [build_disk_mesh(48, k) for k in range(4)]
    areas = [np.sum(_signed_areas(m.vertices, m.triangles)) for m in meshes]
    perims = [boundary_lengths(m).sum() for m in meshes]
    arcs = [boundary_lengths(m)[m.gamma2_flags].sum() for m in meshes]
    for k in range(3):
        assert areas[k] < areas[k + 1] < np.pi
        assert perims[k] < perims[k + 1] < 2.0 * np.pi
        assert arcs[k] < arcs[k + 1] < 0.5 * np.pi
        # regression bound measured on the builder: ratio ~0.70 per level
        assert meshes[k + 1].h_max <= 0.75 * meshes[k].h_max
    # inscribed-polygon arc length converges at second order in h
    errs = np.array([0.5 * np.pi - a for a in arcs])
    hs = np.array([m.h_max for m in meshes])
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 1.7 <= order <= 2.3


def test_reference_element_counts():
    # reference counts: ~4000 after one refinement, ~65000 after five,
    # matched within +/-25% at the tuned base resolution
    lvl1 = build_disk_mesh(112, 1)
    lvl5 = build_disk_mesh(112, 5)
    assert 3000 <= lvl1.n_triangles <= 5000
    assert 48750 <= lvl5.n_triangles <= 81250


def test_corner_grading_contract():
    mesh = build_disk_mesh(112, 1, corner_grading=0.25)
    edges = all_edges(mesh)
    v = mesh.vertices
    target = 0.25 * mesh.h_max
    for corner in ((-1.0, 0.0), (0.0, -1.0)):
        d0 = np.linalg.norm(v[edges[:, 0]] - corner, axis=1)
        d1 = np.linalg.norm(v[edges[:, 1]] - corner, axis=1)
        near = (d0 <= 0.1) & (d1 <= 0.1)
        assert np.any(near)
        lengths = np.linalg.norm(v[edges[near, 0]] - v[edges[near, 1]], axis=1)
        assert lengths.max() <= target + 1e-12


def test_grading_disabled():
    graded = build_disk_mesh(48, 0, corner_grading=0.25)
    plain = build_disk_mesh(48, 0, corner_grading=1.0)
    assert graded.n_triangles > plain.n_triangles


def test_determinism_bit_identical():
    a = build_disk_mesh(48, 1)
    b = build_disk_mesh(48, 1)
    assert mesh_digest(a) == mesh_digest(b)


def test_quality_report(mesh_small):
    q = mesh_quality(mesh_small)
    assert q.n_triangles == mesh_small.n_triangles
    assert q.n_boundary_segments == mesh_small.n_boundary_segments
    assert q.h_min <= q.h_max
    assert q.disk_area_defect > 0.0
    # frozen regression: ring construction keeps angles near 28.7 degrees
    assert q.min_angle > 25.0
    finer = mesh_quality(build_disk_mesh(48, 2))
    assert finer.disk_area_defect < q.disk_area_defect


def test_mark_active_boundary(mesh_small):
    # midpoint-angle rule at specific segments
    marked = mark_active_boundary(mesh_small, np.pi, 1.5 * np.pi)
    mids = 0.5 * (mesh_small.vertices[mesh_small.boundary_segments[:, 0]]
                  + mesh_small.vertices[mesh_small.boundary_segments[:, 1]])
    ang = vertex_angles(mids)
    in_arc = np.argmin(np.abs(ang - 1.25 * np.pi))
    out_arc = np.argmin(np.abs(ang - 0.1))
    assert marked.gamma2_flags[in_arc]
    assert not marked.gamma2_flags[out_arc]
    # endpoints must be vertices
    with pytest.raises(BoundaryMarkingError):
        mark_active_boundary(mesh_small, 1.0, 2.0)
    with pytest.raises(BoundaryMarkingError):
        mark_active_boundary(mesh_small, 1.5 * np.pi, np.pi)
    # a different vertex-aligned arc works
    alt = mark_active_boundary(mesh_small, 0.5 * np.pi, np.pi)
    a, b = alt.corner_points()
    assert (a.x, a.y) == (0.0, 1.0)
    assert (b.x, b.y) == (-1.0, 0.0)


def test_mesh_immutable(mesh_small):
    with pytest.raises(ValueError):
        mesh_small.vertices[0, 0] = 2.0


def test_mesh_text_dump(tmp_path, mesh_small):
    path = tmp_path / "mesh.txt"
    write_mesh_text(mesh_small, path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"# vertices {mesh_small.n_vertices}"
    n_v = mesh_small.n_vertices
    assert lines[1 + n_v] == f"# triangles {mesh_small.n_triangles}"
    tri_line = lines[2 + n_v].split()
    assert len(tri_line) == 3 and all(s.isdigit() for s in tri_line)
    bnd_header = 2 + n_v + mesh_small.n_triangles
    assert lines[bnd_header] == f"# boundary {mesh_small.n_boundary_segments}"
    first_seg = lines[bnd_header + 1].split()
    assert len(first_seg) == 3 and first_seg[2] in ("0", "1")
