import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerdecomp.mesh import (
    MeshError,
    SurfaceMesh,
    bundled_mesh_path,
    from_spec,
    load_mesh,
    make_icosphere,
    make_torus,
    save_mesh,
    topology,
    validate,
)


def _directed_edges(mesh):
    t = mesh.triangles
    return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])


def test_bundled_icosahedron_counts():
    mesh = load_mesh(bundled_mesh_path("icosahedron.off"))
    assert (len(mesh.vertices), mesh.n_panels) == (12, 20)


def test_bundled_torus_counts():
    mesh = load_mesh(bundled_mesh_path("torus_16x16.obj"))
    assert (len(mesh.vertices), mesh.n_panels) == (256, 512)


def test_flipped_triangle_names_edge():
    mesh = make_icosphere(1)
    tris = mesh.triangles.copy()
    tris[5] = tris[5][::-1]
    with pytest.raises(MeshError, match=r"edge \(\d+, \d+\)"):
        validate(SurfaceMesh(mesh.vertices, tris))


def test_inward_normals_rejected():
    mesh = make_icosphere(1)
    with pytest.raises(MeshError, match="inward"):
        validate(SurfaceMesh(mesh.vertices, mesh.triangles[:, ::-1]))


def test_open_mesh_rejected():
    mesh = make_icosphere(1)
    with pytest.raises(MeshError, match="not shared by two triangles"):
        validate(SurfaceMesh(mesh.vertices, mesh.triangles[1:]))


def test_degenerate_panel_rejected():
    verts = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 0, 1.0]])
    tris = np.array([[0, 1, 2], [0, 2, 3], [2, 1, 3], [1, 0, 3]])
    with pytest.raises(MeshError):
        validate(SurfaceMesh(verts, tris))


def test_quads_rejected(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(MeshError, match="only triangles"):
        load_mesh(path)


def test_unparseable_file(tmp_path):
    path = tmp_path / "bad.off"
    path.write_text("OFF\n3 1 0\n0 0\n")
    with pytest.raises(MeshError):
        load_mesh(path)


def test_icosahedron_from_generator():
    mesh = make_icosphere(0, 1.0)
    topo = topology(mesh)
    assert mesh.n_panels == 20
    assert topo.euler_characteristic == 2


def test_icosphere3_on_sphere():
    mesh = make_icosphere(3, 1.0)
    assert mesh.n_panels == 1280
    assert np.max(np.abs(np.linalg.norm(mesh.vertices, axis=1) - 1.0)) < 1e-14


def test_icosphere_area_oracle():
    # analytic sphere area 4 pi r^2 at r = 2
    mesh = make_icosphere(2, 2.0)
    assert abs(mesh.total_area - 16.0 * np.pi) / (16.0 * np.pi) < 0.02


def test_torus_area_oracle():
    # analytic torus area 4 pi^2 R r
    mesh = make_torus(32, 16, 2.0, 0.5)
    exact = 4.0 * np.pi ** 2 * 2.0 * 0.5
    assert abs(mesh.total_area - exact) / exact < 0.01


def test_torus_topology():
    topo = topology(make_torus(16, 16, 2.0, 0.5))
    assert (topo.euler_characteristic, topo.genus) == (0, 1)
    assert (topo.b1_boundary, topo.b1_interior, topo.b1_exterior) == (2, 1, 1)


def test_sphere_topology():
    assert topology(make_icosphere(2)).b1_boundary == 0


def test_betti_override():
    mesh = make_torus(8, 6)
    topo = topology(mesh, 2, 0)
    assert (topo.b1_interior, topo.b1_exterior) == (2, 0)
    with pytest.raises(ValueError):
        topology(mesh, 1, 0)
    with pytest.raises(ValueError):
        topology(mesh, 1, None)


def test_two_components_counted_and_rejected_downstream():
    from layerdecomp.operators import BoundaryOperators

    a = make_icosphere(0)
    verts = np.vstack([a.vertices, a.vertices + [5.0, 0, 0]])
    tris = np.vstack([a.triangles, a.triangles + len(a.vertices)])
    mesh = validate(SurfaceMesh(verts, tris))
    assert topology(mesh).component_count == 2
    with pytest.raises(MeshError, match="connected components"):
        BoundaryOperators(mesh)


def test_size_guards():
    with pytest.raises(MeshError):
        make_icosphere(8)
    with pytest.raises(MeshError):
        make_torus(2, 8)
    with pytest.raises(MeshError):
        make_torus(8, 8, 1.0, 1.5)


def test_generator_specs():
    assert from_spec("icosphere:1:2").n_panels == 80
    assert from_spec("torus:6:4:3:1").n_panels == 48
    with pytest.raises(MeshError):
        from_spec("cube:2")
    with pytest.raises(MeshError):
        from_spec("torus:a")


def test_summary_keys():
    summary = make_torus(8, 6).summary()
    for key in ("V", "E", "F", "chi", "genus", "b1_boundary", "b1_interior", "b1_exterior", "area", "volume"):
        assert key in summary


@pytest.mark.parametrize("suffix", ["off", "obj"])
def test_save_load_roundtrip(tmp_path, suffix):
    mesh = make_torus(6, 5, 2.0, 0.7)
    path = tmp_path / f"m.{suffix}"
    save_mesh(mesh, path)
    again = load_mesh(path)
    assert again.fingerprint == mesh.fingerprint


def test_panel_data_frozen():
    mesh = make_icosphere(1)
    with pytest.raises(ValueError):
        mesh.areas[0] = 1.0


@given(k=st.integers(0, 3), radius=st.floats(0.1, 10.0))
def test_icosphere_invariants(k, radius):
    mesh = make_icosphere(k, radius)
    edges = _directed_edges(mesh)
    # each directed edge once and its reverse once: closed, oriented, manifold
    as_set = {tuple(e) for e in edges.tolist()}
    assert len(as_set) == len(edges)
    assert all((b, a) in as_set for a, b in as_set)
    assert mesh.volume > 0
    topo = topology(mesh)
    assert topo.euler_characteristic == 2 == 2 - 2 * topo.genus
    assert mesh.n_panels == 20 * 4 ** k


@given(nu=st.integers(3, 20), nv=st.integers(3, 12), R=st.floats(1.0, 5.0), ratio=st.floats(0.05, 0.9))
def test_torus_invariants(nu, nv, R, ratio):
    mesh = make_torus(nu, nv, R, ratio * R)
    edges = _directed_edges(mesh)
    as_set = {tuple(e) for e in edges.tolist()}
    assert len(as_set) == len(edges)
    assert all((b, a) in as_set for a, b in as_set)
    assert mesh.volume > 0
    topo = topology(mesh)
    assert topo.euler_characteristic == 0
    assert topo.b1_interior + topo.b1_exterior == topo.b1_boundary == 2


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.floats(0.5, 3.0))
def test_rigid_motion_preserves_geometry(shift, scale):
    mesh = make_icosphere(1)
    moved = validate(SurfaceMesh(scale * mesh.vertices + np.array(shift), mesh.triangles))
    assert np.allclose(moved.areas, scale ** 2 * mesh.areas)
    assert np.allclose(moved.normals, mesh.normals)
    assert topology(moved) == topology(mesh)
