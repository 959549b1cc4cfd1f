import numpy as np
import pytest

from cmctorus.exceptions import DomainError
from cmctorus.matching import area_volume
from cmctorus.mesh_utils import build_mesh, export_mesh, read_obj, read_ply
from tests.conftest import straight, torus


def test_closed_torus_topology():
    grid, jet = torus(0.2, 8, 64, 16)
    mesh = build_mesh(grid, jet.X)
    assert len(mesh.vertices) == 8 * 64 * 16
    assert len(mesh.faces) == 8 * 64 * 16
    assert mesh.euler_characteristic() == 0
    assert mesh.is_closed()


def test_outward_orientation_and_volume():
    grid, jet = torus(0.2, 8, 64, 16)
    mesh = build_mesh(grid, jet.X)
    volume = mesh.signed_volume()
    assert volume > 0
    assert volume == pytest.approx(-area_volume(grid, jet).volume, rel=0.05)


def test_cells_join_without_gaps():
    grid, jet = torus(0.3, 8, 64, 16)
    mesh = build_mesh(grid, jet.X)
    vertices = mesh.vertices.reshape(8, 64, 16, 3)
    # the point after the last row of a cell is the first row of the next cell
    step = np.linalg.norm(vertices[1, 0] - vertices[0, -1], axis=-1)
    inside = np.linalg.norm(vertices[0, 1] - vertices[0, 0], axis=-1)
    assert np.max(step) <= 2 * np.max(inside)


def test_cylinder_torus_is_round():
    grid, jet = torus(0.5, 8, 64, 16)
    mesh = build_mesh(grid, jet.X)
    v = mesh.vertices
    rho = np.hypot(v[:, 1], v[:, 2])
    tube = np.hypot(rho - 1.0 / grid.eps, v[:, 0])
    np.testing.assert_allclose(tube, 0.5, atol=1e-12)


def test_strides():
    grid, jet = torus(0.2, 8, 64, 16)
    mesh = build_mesh(grid, jet.X, stride_t=4, stride_theta=2)
    assert len(mesh.vertices) == 8 * 16 * 8
    assert mesh.euler_characteristic() == 0
    with pytest.raises(DomainError):
        build_mesh(grid, jet.X, stride_t=3)


def test_open_grid_has_no_mesh():
    grid, jet = straight(0.2, 64, 16)
    with pytest.raises(DomainError):
        build_mesh(grid, jet.X)


def test_obj_and_ply_files(tmp_path):
    grid, jet = torus(0.2, 8, 64, 16)
    mesh = build_mesh(grid, jet.X, stride_t=2)
    obj = export_mesh(mesh, str(tmp_path / "surface.obj"))
    ply = export_mesh(mesh, str(tmp_path / "surface.ply"))
    for back in (read_obj(obj), read_ply(ply)):
        np.testing.assert_array_equal(back.vertices, mesh.vertices)
        np.testing.assert_array_equal(back.faces, mesh.faces)
    with open(obj) as file:
        lines = file.read().splitlines()
    faces = [line for line in lines if line.startswith("f ")]
    assert len(faces) == len(mesh.faces)
    assert min(int(i) for line in faces for i in line.split()[1:]) == 1
    with open(ply) as file:
        header = file.read().split("end_header")[0]
    assert "format ascii 1.0" in header
    assert f"element face {len(mesh.faces)}" in header
    with pytest.raises(DomainError):
        export_mesh(mesh, str(tmp_path / "surface.stl"))
