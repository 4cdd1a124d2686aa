import numpy as np
import pytest


def _logistic_orbit(r, n, x0=0.3):
    orbit = np.empty(n)
    x = x0
    for k in range(n):
        orbit[k] = x
        x = r * x * (1.0 - x)
    return orbit


def _circle():
    from lib.dynamics.integrate import integrate
    from lib.field.parser import field_from_components

    f = field_from_components(["y", "-x", "-z"])
    return f, integrate(f, {}, [1.0, 0.0, 0.0], t_end=63.0, dt_output=0.01)


def test_circle_section_downward():
    from lib.section.poincare import SectionSpec, section_crossings

    f, traj = _circle()
    spec = SectionSpec([0, 0, 0], [0, 1, 0], "-", axis=[1, 0, 0])
    points = section_crossings(traj, spec, f, {})
    print(points)
    assert len(points) == 11
    np.testing.assert_allclose(points.rho, 1.0, atol=1e-6)
    np.testing.assert_allclose(points.times, 2 * np.pi * np.arange(11), atol=1e-6)
    assert points.tangential == 0


def test_circle_section_wrong_half_plane():
    from lib.section.poincare import SectionSpec, section_crossings

    f, traj = _circle()
    points = section_crossings(traj, SectionSpec([0, 0, 0], [0, 1, 0], "+", axis=[1, 0, 0]), f, {})
    assert len(points) == 0
    assert points.off_half_plane == 10


def test_section_without_field_uses_spline():
    from lib.section.poincare import SectionSpec, section_crossings

    _, traj = _circle()
    points = section_crossings(traj, SectionSpec([0, 0, 0], [0, 1, 0], "both"))
    assert len(points) == 21
    np.testing.assert_allclose(points.rho, 1.0, atol=1e-5)


def test_section_spec_parse():
    from lib.section.poincare import SectionSpec

    spec = SectionSpec.parse("p=0,0,0;n=0,2,0;dir=-;u=1,0,0")
    np.testing.assert_allclose(spec.normal, [0, 1, 0])
    np.testing.assert_allclose(spec.axis, [1, 0, 0])
    assert spec.sign == -1
    assert SectionSpec.parse(str(spec)).direction == "-"
    assert SectionSpec.parse("p=1,2,3;n=0,0,1").direction == "both"

    for text in ("p=0,0,0", "p=0,0;n=0,0,1", "p=0,0,0;n=0,0,0", "p=0,0,0;n=0,0,1;dir=up",
                 "p=0,0,0;n=0,0,1;u=0,0,1", "p=0,0,0;n=0,0,1;q=1", "p=a,b,c;n=0,0,1", "nonsense"):
        with pytest.raises(ValueError):
            SectionSpec.parse(text)


def test_logistic_map_has_two_branches():
    from lib.section.return_map import build_return_map, transition_matrix

    rmap = build_return_map(_logistic_orbit(3.9, 2000))
    print(rmap.to_dict())
    assert rmap.partitioned
    assert rmap.branch_count == 2
    assert rmap.critical_points[0] == pytest.approx(0.5, abs=0.02)
    assert rmap.to_dict()["branch_slopes"] == ["increasing", "decreasing"]
    assert rmap.merged_branch_count == 2
    assert rmap.monotone
    gamma = transition_matrix(rmap)
    assert gamma.matrix.tolist() == [[1, 1], [1, 1]]


def test_second_iterate_has_four_branches():
    from lib.section.return_map import build_return_map, transition_matrix

    rho = _logistic_orbit(4.0, 6000, x0=0.2)[::2]
    rmap = build_return_map(rho)
    print(rmap)
    assert rmap.branch_count == 4
    assert rmap.merged_branch_count == 4
    assert rmap.monotone
    np.testing.assert_allclose(rmap.critical_points, [(1 - 2 ** -0.5) / 2, 0.5, (1 + 2 ** -0.5) / 2], atol=0.02)
    gamma = transition_matrix(rmap)
    assert gamma.m == 4
    assert np.all(gamma.matrix == 1)


def test_rotation_is_one_branch_with_raw_runs():
    from lib.section.return_map import build_return_map

    golden = (np.sqrt(5.0) - 1.0) / 2.0
    rho = np.mod(0.1 + golden * np.arange(1000), 1.0)
    rmap = build_return_map(rho)
    assert rmap.branch_count == 1
    assert rmap.raw_branch_count == 3
    assert rmap.critical_points == []


def test_short_sequence_is_unpartitioned():
    from lib.section.return_map import build_return_map, transition_matrix

    rmap = build_return_map(_logistic_orbit(3.9, 150))
    assert not rmap.partitioned
    assert rmap.branch_count is None
    assert "150" in rmap.warning
    assert rmap.pairs.shape == (149, 2)
    with pytest.raises(ValueError):
        transition_matrix(rmap)


def test_segment_ignores_short_reversals():
    from lib.section.return_map import segment_monotone_runs

    xs = np.arange(40, dtype=float)
    ys = xs.copy()
    ys[20] = ys[19] - 0.5
    boundaries, signs = segment_monotone_runs(xs, ys, r_min=8, window=1)
    assert boundaries == []
    assert signs == [1]


def test_default_section_uses_hint_at_inner_point():
    from lib.catalog import get_system
    from lib.dynamics.fixed_points import find_fixed_points
    from lib.dynamics.integrate import integrate
    from lib.section.poincare import default_section

    system = get_system("rossler")
    params = system.bind()
    traj = integrate(system.field, params, system.initial_condition(params), t_end=50.0, dt_output=0.01)
    fps = find_fixed_points(system.field, params)
    spec = default_section(traj, fps, system.section_hint)
    inner = next(p for p in fps if p.role == "inner")
    np.testing.assert_allclose(spec.point, inner.location)
    assert spec.direction == "-"


@pytest.mark.slow
@pytest.mark.parametrize("preset,branches", [("two_branch", 2), ("four_branch", 4)])
def test_rossler_return_map_branches(preset, branches):
    from lib.catalog import get_system
    from lib.dynamics.fixed_points import find_fixed_points
    from lib.dynamics.integrate import integrate
    from lib.section.poincare import default_section, section_crossings
    from lib.section.return_map import build_return_map, transition_matrix

    system = get_system("rossler")
    params = system.bind(preset=preset)
    traj = integrate(system.field, params, system.initial_condition(params), t_end=20000.0,
                     dt_output=0.01, transient=500.0)
    spec = default_section(traj, find_fixed_points(system.field, params), system.section_hint)
    rmap = build_return_map(section_crossings(traj, spec, system.field, params))
    print(preset, rmap.to_dict())
    assert rmap.branch_count == branches
    assert rmap.monotone, rmap.violations
    if branches == 4:
        assert np.all(transition_matrix(rmap).matrix == 1)


@pytest.mark.slow
def test_thomas_transition_pattern():
    from lib.catalog import get_system
    from lib.dynamics.fixed_points import find_fixed_points
    from lib.dynamics.integrate import integrate
    from lib.section.poincare import default_section, section_crossings
    from lib.section.return_map import build_return_map, transition_matrix

    system = get_system("thomas")
    params = system.bind()
    traj = integrate(system.field, params, system.initial_condition(params), t_end=20000.0,
                     dt_output=0.01, transient=500.0)
    spec = default_section(traj, find_fixed_points(system.field, params), system.section_hint)
    rmap = build_return_map(section_crossings(traj, spec, system.field, params))
    print(rmap.to_dict())
    assert spec.direction == "-"
    assert rmap.branch_count == 5
    assert max(rmap.violations) < 0.02
    gamma = transition_matrix(rmap).matrix
    print(gamma)
    # rows 2-4 feed only branches 0 and 1; with rho read the other way the pattern is mirrored
    assert not gamma[2:, 2:].any() or not gamma[:3, :3].any()


def test_split_branch_is_merged_into_its_neighbour():
    from lib.section.return_map import merged_branch_count, segment_monotone_runs

    xs = np.linspace(0.0, 1.0, 400)
    ys = np.where(xs <= 0.45, 1.0 - 2.0 * xs,
                  np.where(xs <= 0.5, 0.1 + 16.0 * (xs - 0.45), 0.9 - 1.8 * (xs - 0.5)))
    boundaries, signs = segment_monotone_runs(xs, ys)
    assert signs == [-1, 1, -1]
    assert merged_branch_count(xs, ys, boundaries) == 2
    # comparable widths never merge, however much the images overlap
    assert merged_branch_count(xs, ys, boundaries, width=0.05) == 3


def test_merged_count_is_reported():
    from lib.section.return_map import build_return_map

    rmap = build_return_map(_logistic_orbit(3.9, 2000))
    assert rmap.to_dict()["merged_branch_count"] == rmap.merged_branch_count == 2
    unpartitioned = build_return_map(_logistic_orbit(3.9, 150))
    assert unpartitioned.merged_branch_count is None
