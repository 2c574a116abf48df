import numpy as np
import pytest

from rkstab.mesh import (
    DegenerateElementError,
    MeshFormatError,
    MeshSpec,
    MeshStructureError,
    SimplicialMesh,
    build_affine_maps,
    build_patches,
    generate_mesh,
    number_dofs,
    random_perturbed,
    read_mesh,
    stretched,
    structured_triangular,
    uniform_interval,
    validate_mesh,
    write_mesh,
)
from rkstab.reference import build_reference_element


def physical_node_positions(mesh, elem, maps):
    """Physical coordinates of every (element, local node) pair."""
    out = np.empty((mesh.n_elements, elem.node_count, mesh.dimension))
    for e, amap in enumerate(maps):
        out[e] = elem.nodes @ amap.jacobian.T + amap.offset
    return out


def test_uniform_interval_basic():
    mesh = uniform_interval(4)
    assert mesh.n_elements == 4
    assert mesh.n_vertices == 5
    maps = build_affine_maps(mesh)
    assert all(abs(m.volume - 0.25) < 1e-15 for m in maps)
    assert all(abs(m.jacobian[0, 0] - 0.25) < 1e-15 for m in maps)


def test_two_element_interval_maps():
    mesh = uniform_interval(2)
    maps = build_affine_maps(mesh)
    for m in maps:
        assert abs(m.jacobian[0, 0] - 0.5) < 1e-15
        assert abs(m.volume - 0.5) < 1e-15


def test_reference_triangle_identity_map():
    mesh = SimplicialMesh(
        2,
        np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        np.array([[0, 1, 2]]),
        np.array([[0, 1], [1, 2], [0, 2]]),
        ("D", "D", "D"),
    )
    (amap,) = build_affine_maps(mesh)
    np.testing.assert_allclose(amap.jacobian, np.eye(2), atol=1e-15)
    assert abs(amap.volume - 0.5) < 1e-15


def test_affine_map_reproduces_vertices():
    mesh = random_perturbed(4, 3, 0.05, seed=7)
    maps = build_affine_maps(mesh)
    ref_vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for e, amap in enumerate(maps):
        mapped = ref_vertices @ amap.jacobian.T + amap.offset
        np.testing.assert_allclose(mapped, mesh.vertices[mesh.elements[e]], atol=1e-13)
        np.testing.assert_allclose(
            amap.inv_jacobian @ amap.jacobian, np.eye(2), atol=1e-13
        )


def test_degenerate_element_rejected():
    mesh = SimplicialMesh(
        2,
        np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]),
        np.array([[0, 1, 2]]),
        np.array([[0, 1]]),
        ("D",),
    )
    with pytest.raises(DegenerateElementError, match="element 0"):
        build_affine_maps(mesh)


def test_total_volume_matches_domain():
    cases = [
        (uniform_interval(7), 1.0),
        (structured_triangular(3, 5), 1.0),
        (stretched(4, 4, 10.0), 0.1),
        (random_perturbed(5, 5, 0.04, seed=3), 1.0),
    ]
    for mesh, measure in cases:
        total = sum(m.volume for m in build_affine_maps(mesh))
        assert abs(total - measure) < 1e-12 * measure


def test_structured_counts_and_areas():
    mesh = structured_triangular(2, 2)
    assert mesh.n_elements == 8
    maps = build_affine_maps(mesh)
    for m in maps:
        assert abs(m.volume - 1 / 8) < 1e-15


def test_stretched_aspect_ratio():
    mesh = stretched(4, 4, 100.0)
    for element in mesh.elements:
        coords = mesh.vertices[element]
        width = coords[:, 0].max() - coords[:, 0].min()
        height = coords[:, 1].max() - coords[:, 1].min()
        assert abs(width / height - 100.0) < 1e-9 * 100


def test_generator_validation_errors():
    with pytest.raises(ValueError):
        uniform_interval(0)
    with pytest.raises(ValueError):
        structured_triangular(0, 3)
    with pytest.raises(ValueError):
        random_perturbed(4, 4, 0.125, seed=0)  # amplitude = h/2 exactly
    with pytest.raises(ValueError):
        generate_mesh(MeshSpec(kind="hexes"))


def test_random_perturbed_deterministic():
    a = random_perturbed(6, 6, 0.05, seed=11)
    b = random_perturbed(6, 6, 0.05, seed=11)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    c = random_perturbed(6, 6, 0.05, seed=12)
    assert not np.array_equal(a.vertices, c.vertices)


def test_random_perturbed_keeps_boundary():
    mesh = random_perturbed(5, 5, 0.05, seed=2)
    on_boundary = (
        np.isclose(mesh.vertices[:, 0], 0)
        | np.isclose(mesh.vertices[:, 0], 1)
        | np.isclose(mesh.vertices[:, 1], 0)
        | np.isclose(mesh.vertices[:, 1], 1)
    )
    base = structured_triangular(5, 5)
    np.testing.assert_array_equal(mesh.vertices[on_boundary], base.vertices[on_boundary])


@pytest.mark.parametrize("m,expected", [(1, 9), (2, 25), (3, 49)])
def test_dof_counts_structured(m, expected):
    mesh = structured_triangular(2, 2)
    elem = build_reference_element(2, m)
    numbering = number_dofs(mesh, elem)
    assert numbering.n_dofs == expected


@pytest.mark.parametrize("d,m,gen", [
    (1, 2, lambda: uniform_interval(5)),
    (1, 3, lambda: uniform_interval(4)),
    (2, 2, lambda: structured_triangular(3, 2)),
    (2, 3, lambda: random_perturbed(3, 3, 0.05, seed=5)),
])
def test_dof_numbering_geometrically_consistent(d, m, gen):
    """Every global DOF must correspond to exactly one physical node."""
    mesh = gen()
    elem = build_reference_element(d, m)
    numbering = number_dofs(mesh, elem)
    maps = build_affine_maps(mesh)
    positions = physical_node_positions(mesh, elem, maps)
    seen = {}
    for e in range(mesh.n_elements):
        for loc in range(elem.node_count):
            dof = numbering.element_dofs[e, loc]
            pt = positions[e, loc]
            if dof in seen:
                np.testing.assert_allclose(seen[dof], pt, atol=1e-12)
            else:
                seen[dof] = pt
    assert len(seen) == numbering.n_dofs


def test_dirichlet_dofs_1d():
    mesh = uniform_interval(4)
    elem = build_reference_element(1, 1)
    numbering = number_dofs(mesh, elem)
    assert numbering.dirichlet_dofs.tolist() == [0, 4]


def test_dirichlet_dofs_include_boundary_edge_nodes():
    mesh = structured_triangular(2, 2)
    elem = build_reference_element(2, 2)
    numbering = number_dofs(mesh, elem)
    # 8 boundary vertices + 8 boundary mid-edge nodes
    assert numbering.dirichlet_dofs.size == 16
    maps = build_affine_maps(mesh)
    positions = physical_node_positions(mesh, elem, maps)
    dof_position = {}
    for e in range(mesh.n_elements):
        for loc in range(elem.node_count):
            dof_position[numbering.element_dofs[e, loc]] = positions[e, loc]
    for dof in numbering.dirichlet_dofs:
        x, y = dof_position[dof]
        assert min(x, y, 1 - x, 1 - y) < 1e-12


def test_patches_1d_interior_vertex():
    mesh = uniform_interval(4)
    elem = build_reference_element(1, 1)
    patches = build_patches(mesh, elem)
    for vertex in (1, 2, 3):
        assert len(patches.elements[vertex]) == 2
        assert abs(patches.volumes[vertex] - 0.5) < 1e-15
    assert len(patches.elements[0]) == 1


def test_patches_2d_interior_vertex_has_six_triangles():
    mesh = structured_triangular(4, 4)
    elem = build_reference_element(2, 1)
    patches = build_patches(mesh, elem)
    maps = build_affine_maps(mesh)
    interior = [
        i
        for i, v in enumerate(mesh.vertices)
        if min(v[0], v[1], 1 - v[0], 1 - v[1]) > 1e-12
    ]
    for i in interior:
        assert len(patches.elements[i]) == 6
        expected = sum(maps[e].volume for e in patches.elements[i])
        assert patches.volumes[i] == expected


def test_patches_p2_edge_dofs():
    mesh = structured_triangular(2, 2)
    elem = build_reference_element(2, 2)
    numbering = number_dofs(mesh, elem)
    patches = build_patches(mesh, elem, numbering)
    edge_dofs = range(mesh.n_vertices, mesh.n_vertices + numbering.n_edge_dofs)
    sizes = {len(patches.elements[dof]) for dof in edge_dofs}
    assert sizes == {1, 2}  # boundary edges vs interior edges


def test_patch_volume_identity_p1():
    """Vertex patch volumes sum to (d+1) times the mesh volume for P1."""
    mesh = structured_triangular(3, 3)
    elem = build_reference_element(2, 1)
    patches = build_patches(mesh, elem)
    total = sum(m.volume for m in build_affine_maps(mesh))
    assert abs(patches.volumes.sum() - 3 * total) < 1e-12


def test_orphan_dof_detected():
    mesh = SimplicialMesh(
        1,
        np.array([[0.0], [0.5], [1.0], [2.0]]),  # vertex 3 unused
        np.array([[0, 1], [1, 2]]),
        np.array([[0], [2]]),
        ("D", "D"),
    )
    elem = build_reference_element(1, 1)
    with pytest.raises(MeshStructureError, match="orphan"):
        build_patches(mesh, elem)


@pytest.mark.parametrize("make", [
    lambda: uniform_interval(4),
    lambda: structured_triangular(3, 2),
    lambda: random_perturbed(4, 4, 0.06, seed=9),
])
def test_mesh_file_round_trip(tmp_path, make):
    mesh = make()
    path = tmp_path / "mesh.txt"
    write_mesh(mesh, path)
    again = read_mesh(path)
    assert again.dimension == mesh.dimension
    np.testing.assert_array_equal(again.vertices, mesh.vertices)
    np.testing.assert_array_equal(again.elements, mesh.elements)
    np.testing.assert_array_equal(again.boundary_facets, mesh.boundary_facets)
    assert again.boundary_markers == mesh.boundary_markers


def test_read_mesh_reports_line_numbers(tmp_path):
    path = tmp_path / "broken.txt"
    path.write_text("DIMENSION 1\nVERTICES 2\n0\nnot-a-number\nELEMENTS 1\n0 1\nBOUNDARY 1\n0 D\n")
    with pytest.raises(MeshFormatError, match="line 4"):
        read_mesh(path)


def test_read_mesh_bad_vertex_index(tmp_path):
    path = tmp_path / "broken.txt"
    path.write_text("DIMENSION 1\nVERTICES 2\n0\n1\nELEMENTS 1\n0 5\nBOUNDARY 1\n0 D\n")
    with pytest.raises(MeshStructureError, match="element 0"):
        read_mesh(path)


def test_read_mesh_repairs_orientation(tmp_path):
    path = tmp_path / "flipped.txt"
    path.write_text(
        "DIMENSION 2\nVERTICES 3\n0 0\n1 0\n0 1\n"
        "ELEMENTS 1\n0 2 1\n"  # clockwise
        "BOUNDARY 3\n0 1 D\n1 2 D\n0 2 D\n"
    )
    with pytest.warns(UserWarning, match="orient"):
        mesh = read_mesh(path)
    maps = build_affine_maps(mesh)
    assert maps[0].volume > 0


def test_read_mesh_comments_and_missing_marker(tmp_path):
    path = tmp_path / "commented.txt"
    path.write_text(
        "# a comment\nDIMENSION 1\n# another\nVERTICES 2\n0\n1\n"
        "ELEMENTS 1\n0 1\nBOUNDARY 1\n0 X\n"
    )
    with pytest.raises(MeshFormatError, match="D|N"):
        read_mesh(path)


def test_validate_clean_meshes():
    assert validate_mesh(uniform_interval(5)) == []
    assert validate_mesh(structured_triangular(3, 3)) == []
    assert validate_mesh(stretched(2, 2, 10)) == []


def test_validate_flags_missing_dirichlet():
    base = uniform_interval(3)
    mesh = SimplicialMesh(
        1, base.vertices, base.elements, base.boundary_facets, ("N", "N")
    )
    problems = validate_mesh(mesh)
    assert any("Dirichlet" in p for p in problems)


def test_validate_flags_unmarked_boundary():
    base = structured_triangular(2, 2)
    mesh = SimplicialMesh(
        2,
        base.vertices,
        base.elements,
        base.boundary_facets[:-1],
        base.boundary_markers[:-1],
    )
    problems = validate_mesh(mesh)
    assert any("no marker" in p for p in problems)


def test_validate_flags_interior_facet_marked():
    base = structured_triangular(2, 2)
    # the diagonal of the first cell is interior
    facets = np.vstack([base.boundary_facets, [[0, 4]]])
    markers = base.boundary_markers + ("N",)
    mesh = SimplicialMesh(2, base.vertices, base.elements, facets, markers)
    problems = validate_mesh(mesh)
    assert any("interior" in p for p in problems)


def test_generate_mesh_dispatch():
    spec = MeshSpec(kind="structured_triangular", nx=3, ny=2)
    mesh = generate_mesh(spec)
    assert mesh.n_elements == 12
    spec1d = MeshSpec(kind="uniform_interval", n=6)
    assert generate_mesh(spec1d).n_elements == 6
