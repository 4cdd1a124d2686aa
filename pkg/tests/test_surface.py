import numpy as np
import pytest

SPHERE_R2 = 0.9


def _sphere_value(p):
    return np.einsum("ni,ni->n", p, p) - SPHERE_R2


def _sphere_gradient(p):
    return 2.0 * p


def _two_spheres():
    a = np.array([1.0, 0.0, 0.0])

    def value(p):
        return (np.sum((p - a) ** 2, axis=1) - 0.3) * (np.sum((p + a) ** 2, axis=1) - 0.3)

    def gradient(p):
        v1 = np.sum((p - a) ** 2, axis=1) - 0.3
        v2 = np.sum((p + a) ** 2, axis=1) - 0.3
        return 2.0 * (p - a) * v2[:, None] + 2.0 * (p + a) * v1[:, None]

    return value, gradient


def test_sphere_mesh():
    from lib.surface.mesh import MeshJob, extract_implicit, flag_singularities

    job = MeshJob("phi", [[-2, 2], [-2, 2], [-2, 2]], resolution=64)
    mesh = flag_singularities(extract_implicit(_sphere_value, _sphere_gradient, job))
    print(mesh.summary()["vertices"], mesh.summary()["triangles"])
    assert not mesh.empty
    radius = np.linalg.norm(mesh.vertices, axis=1)
    assert np.max(np.abs(radius - np.sqrt(SPHERE_R2))) < 2e-3
    assert mesh.residual.max() < 1e-9
    assert not mesh.flags.any()
    # the equator band is a fold of z = Psi(x, y) but too thin to make the sphere suspect
    assert 0 < mesh.fold.sum() < 0.2 * len(mesh.vertices)
    assert len(mesh.components) == 1
    assert not mesh.spurious_components
    assert np.all(mesh.edge_use_counts() <= 2)


def test_plane_vertices_are_polished_onto_the_surface():
    from lib.surface.mesh import MeshJob, extract_implicit

    job = MeshJob("phi_c", [[-1, 1], [-1, 1], [-0.95, 1.05]], resolution=16)
    mesh = extract_implicit(lambda p: p[:, 2], lambda p: np.tile([0.0, 0.0, 1.0], (len(p), 1)), job)
    assert len(mesh.triangles) > 0
    assert np.all(np.abs(mesh.vertices[:, 2]) < 1e-9)
    np.testing.assert_allclose(mesh.grad_norm, 1.0)


def test_level_set_outside_the_box_gives_empty_mesh():
    from lib.surface.mesh import MeshJob, extract_implicit, flag_singularities

    job = MeshJob("phi_t", [[-1, 1], [-1, 1], [-1, 1]], resolution=8)
    mesh = extract_implicit(lambda p: _sphere_value(p) + 1.0 + SPHERE_R2, _sphere_gradient, job)
    assert mesh.empty
    assert flag_singularities(mesh).summary() == {"vertices": 0, "triangles": 0, "flagged_vertices": 0,
                                                   "fold_vertices": 0, "factor_sheet_vertices": 0,
                                                   "components": [], "spurious_candidates": 0}


def test_low_gradient_component_is_a_spurious_candidate():
    from lib.surface.mesh import Mesh, flag_singularities

    vertices = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5], [6, 5, 5], [5, 6, 5]]
    mesh = Mesh(vertices, [[0, 1, 2], [3, 4, 5]])
    mesh.grad_norm = np.array([1.0, 1.2, 0.9, 0.0, 1e-12, 0.0])
    flag_singularities(mesh)
    assert mesh.flags.tolist() == [False, False, False, True, True, True]
    assert [c["vertices"] for c in mesh.components] == [3, 3]
    spurious = mesh.spurious_components
    assert len(spurious) == 1
    assert spurious[0]["flagged_fraction"] == 1.0
    assert mesh.labels[3] == spurious[0]["label"]


def test_obj_and_flag_export(tmp_path):
    from lib.interface.io import read_csv
    from lib.surface.mesh import MeshJob, extract_implicit, flag_singularities

    job = MeshJob("phi", [[-2, 2], [-2, 2], [-2, 2]], resolution=16)
    mesh = flag_singularities(extract_implicit(_sphere_value, _sphere_gradient, job))
    obj_path = str(tmp_path / "out" / "sphere.obj")
    mesh.export_obj(obj_path)
    with open(obj_path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    assert sum(1 for line in lines if line.startswith("v ")) == len(mesh.vertices)
    faces = [line.split()[1:] for line in lines if line.startswith("f ")]
    assert len(faces) == len(mesh.triangles)
    assert min(int(i.split("/")[0]) for face in faces for i in face) == 1

    flags_path = str(tmp_path / "sphere_flags.csv")
    mesh.export_flags(flags_path)
    data = read_csv(flags_path, ["vertex", "x", "y", "z", "grad_norm", "flagged", "component", "fold",
                                  "factor_sheet"])
    assert data.shape == (len(mesh.vertices), 9)
    np.testing.assert_array_equal(data[:, 0], np.arange(len(mesh.vertices)))
    np.testing.assert_allclose(data[:, 1:4], mesh.vertices, rtol=1e-15)
    assert not data[:, 5].any()
    np.testing.assert_array_equal(data[:, 7], mesh.fold.astype(int))
    assert not data[:, 8].any()


def test_component_count_is_stable_under_refinement():
    from lib.surface.mesh import MeshJob, extract_implicit, flag_singularities

    value, gradient = _two_spheres()
    counts = []
    for res in (32, 64):
        job = MeshJob("phi", [[-2, 2], [-1.5, 1.5], [-1.5, 1.5]], resolution=res)
        counts.append(len(flag_singularities(extract_implicit(value, gradient, job)).components))
    assert counts == [2, 2]


def test_mesh_job_validation():
    from lib.surface.mesh import MeshJob

    box = [[-1, 1], [-1, 1], [-1, 1]]
    with pytest.raises(ValueError):
        MeshJob("psi", box)
    with pytest.raises(ValueError):
        MeshJob("phi", [[-1, 1], [1, 1], [-1, 1]])
    with pytest.raises(ValueError):
        MeshJob("phi", [[-1, 1], [-1, np.inf], [-1, 1]])
    with pytest.raises(ValueError):
        MeshJob("phi", box, resolution=4)
    job = MeshJob("phi_t", box, resolution=8, iso=0.5)
    np.testing.assert_allclose(job.cell, 0.25)
    assert job.to_dict()["iso"] == 0.5


def test_catalog_phi_mesh_lies_on_the_manifold():
    from lib.catalog import build
    from lib.surface.mesh import MeshJob, extract, flag_singularities

    f, params = build("sprott_f")
    job = MeshJob("phi", [[-3, 3], [-3, 3], [-3, 3]], resolution=16)
    mesh = flag_singularities(extract(f, params, job), f, params)
    assert not mesh.empty
    tolerance = 1e-6 * np.median(mesh.grad_norm) * np.linalg.norm(job.cell)
    assert np.median(mesh.residual) <= tolerance
    assert mesh.summary()["vertices"] == len(mesh.vertices)


@pytest.mark.slow
def test_centered_rossler_meshes():
    from lib.catalog import build
    from lib.surface.mesh import MeshJob, extract, flag_singularities

    f, params = build("rossler_centered")
    for field in ("phi", "phi_c", "phi_t"):
        job = MeshJob(field, [[-12, 12], [-12, 12], [-2, 20]], resolution=64)
        mesh = flag_singularities(extract(f, params, job), f, params)
        print(field, mesh.summary()["vertices"], mesh.summary()["spurious_candidates"])
        assert not mesh.empty
        assert np.all(mesh.edge_use_counts() <= 2)


def test_factor_sheet_vertices_lie_on_the_divisor_plane():
    from lib.catalog import build
    from lib.surface.mesh import factor_sheet_vertices

    # sprott F: phi_t carries the square of F_x = z - y
    f, params = build("sprott_f")
    vertices = np.array([[0.3, 1.0, 1.0], [0.5, -2.0, -2.0], [0.3, 1.0, 2.0], [-1.0, 0.0, 0.5]])
    on_sheet = factor_sheet_vertices(f, params, "phi_t", vertices, cell=1.0)
    assert on_sheet.tolist() == [True, True, False, False]
    assert not factor_sheet_vertices(f, params, "phi_t_core", vertices, cell=1.0).any()


@pytest.mark.slow
@pytest.mark.parametrize("name", ["sprott_k", "sprott_r", "malasoma_a"])
def test_phi_t_mesh_has_spurious_candidates(name):
    from lib.catalog import get_system
    from lib.dynamics.integrate import integrate
    from lib.surface.mesh import MeshJob, extract, flag_singularities

    system = get_system(name)
    params = system.bind(system.verdict_params)
    traj = integrate(system.field, params, system.initial_condition(params), t_end=1000.0, transient=100.0)
    job = MeshJob("phi_t", traj.bounds(margin=0.2), resolution=48)
    mesh = flag_singularities(extract(system.field, params, job), system.field, params)
    print(name, mesh.summary()["factor_sheet_vertices"], mesh.summary()["spurious_candidates"])
    assert mesh.factor_sheet.any()
    assert len(mesh.spurious_components) >= 1
    assert any(c["factor_sheet"] for c in mesh.spurious_components)


@pytest.mark.slow
def test_rossler_core_mesh_passes_through_both_fixed_points():
    from lib.catalog import build
    from lib.dynamics.fixed_points import find_fixed_points
    from lib.surface.mesh import MeshJob, extract, flag_singularities

    f, params = build("rossler", preset="crossing")
    job = MeshJob("phi_t_core", [[-12, 12], [-12, 12], [-2, 20]], resolution=48)
    mesh = flag_singularities(extract(f, params, job), f, params)
    assert not mesh.empty
    fps = find_fixed_points(f, params)
    assert len(fps) == 2
    for fp in fps:
        nearest = np.linalg.norm(mesh.vertices - fp.location, axis=1).min()
        assert nearest < 2.0 * np.linalg.norm(job.cell), fp
    # the core carries no velocity factor, so no component is cut out along a sheet
    assert not mesh.factor_sheet.any()
