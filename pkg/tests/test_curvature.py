import numpy as np
import pytest


def _random_linear_field(rng):
    from lib.field.parser import field_from_components

    a = rng.normal(size=(3, 3))
    components = [" + ".join(f"({a[i, j]!r})*{v}" for j, v in enumerate("xyz")) for i in range(3)]
    return field_from_components(components), a


def test_decomposition_identity_for_catalog():
    from lib.catalog import list_systems
    from lib.curvature.phi import phi_batch

    rng = np.random.default_rng(0)
    for system in list_systems():
        params = system.bind(system.verdict_params)
        points = rng.uniform(-5, 5, size=(1000, 3))
        values = phi_batch(system.field, params, points)
        phi, phi_c, phi_t = values["phi"], values["phi_c"], values["phi_t"]
        largest = np.maximum.reduce([np.abs(phi), np.abs(phi_c), np.abs(phi_t), np.full(phi.shape, 1e-300)])
        defect = np.abs(phi - (phi_c + phi_t))
        assert np.all(defect <= 1e-10 * largest + 1e-14 * values["scale"]), system.name


def test_triple_product_matches_determinant():
    from lib.catalog import build
    from lib.curvature.phi import phi_batch

    f, params = build("sprott_k")
    values = phi_batch(f, params, np.random.default_rng(1).uniform(-3, 3, size=(200, 3)))
    np.testing.assert_allclose(values["phi"], values["phi_det"], rtol=0, atol=1e-12 * values["scale"].max())


def test_affine_field_has_no_time_dependent_component():
    from lib.curvature.phi import phi_batch
    from lib.field.parser import field_from_components

    f = field_from_components(["y + 1", "-x - 0.2*y", "x - z"])
    values = phi_batch(f, {}, np.random.default_rng(2).uniform(-2, 2, size=(100, 3)))
    assert np.all(values["phi_t"] == 0.0)
    np.testing.assert_allclose(values["phi"], values["phi_c"], rtol=1e-12, atol=1e-12)


def test_symbolic_and_numeric_components_agree():
    from lib.catalog import build
    from lib.curvature.phi import PhiSymbolic, bind_phi, phi_batch

    f, params = build("rossler_centered")
    points = np.random.default_rng(3).uniform(-4, 4, size=(50, 3))
    numeric = phi_batch(f, params, points)
    symbolic = PhiSymbolic(f)
    expanded = bind_phi(f, params)
    for which in ("phi", "phi_c", "phi_t"):
        scale = numeric["scale"]
        tree = symbolic.component(which).evaluate_many(points, params)
        np.testing.assert_allclose(tree, numeric[which], rtol=0, atol=1e-9 * scale.max())
        np.testing.assert_allclose(expanded.value(which, points), numeric[which], rtol=0,
                                   atol=1e-9 * scale.max())


def test_phi_eval_sample():
    from lib.catalog import build
    from lib.curvature.phi import phi_eval

    f, params = build("thomas")
    sample = phi_eval(f, params, [0.5, -0.3, 1.2])
    assert sample.decomposition_error() < 1e-10
    assert sample.phi == pytest.approx(sample.phi_det, rel=1e-9, abs=1e-9)
    assert sample.grad_phi.shape == (3,)


def test_unknown_component_is_rejected():
    from lib.catalog import build
    from lib.curvature.crossings import crossings
    from lib.curvature.phi import PhiSymbolic
    from lib.dynamics.integrate import Trajectory

    f, params = build("sprott_f")
    with pytest.raises(ValueError):
        PhiSymbolic(f).component("psi")
    traj = Trajectory([0.0, 1.0], [[0, 0, 0], [1, 1, 1]], 1.0)
    with pytest.raises(ValueError):
        crossings(f, params, traj, "psi")


def test_linear_darboux_identity():
    from lib.curvature.darboux import linear_darboux_defect
    from lib.curvature.phi import bind_phi

    rng = np.random.default_rng(4)
    for _ in range(5):
        f, a = _random_linear_field(rng)
        points = rng.uniform(-2, 2, size=(100, 3))
        defect = linear_darboux_defect(f, {}, points)
        bound = bind_phi(f, {})
        grad = bound.gradient("phi", points)
        field = f.evaluate_many(points, {})
        scale = np.linalg.norm(grad, axis=1) * np.linalg.norm(field, axis=1) + \
            abs(np.trace(a)) * np.abs(bound.value("phi", points))
        assert np.all(defect <= 1e-8 * scale + 1e-300)


def test_darboux_residual_vanishes_on_linear_manifold():
    from lib.curvature.darboux import darboux_residual, sample_manifold_points

    rng = np.random.default_rng(5)
    f, _ = _random_linear_field(rng)
    bounds = np.array([[-1.0, 1.0]] * 3)
    points = sample_manifold_points(f, {}, bounds, n_points=40, seed=1)
    assert points.shape == (40, 3)
    stats = darboux_residual(f, {}, points)
    summary = stats.summary()
    print(summary)
    assert summary["points"] + summary["excluded_degenerate"] == 40
    assert summary["median"] < 1e-8
    assert summary["unit"] == "dimensionless"


def test_affine_trajectory_has_no_phi_t_crossings():
    from lib.curvature.crossings import crossings
    from lib.dynamics.integrate import integrate
    from lib.field.parser import field_from_components

    f = field_from_components(["y", "-x - 0.1*y", "-z"])
    traj = integrate(f, {}, [1.0, 0.0, 1.0], t_end=20.0, dt_output=0.01)
    assert crossings(f, {}, traj, "phi_t") == []


def test_tangency_and_fixed_point_flags():
    from lib.curvature.crossings import CrossingEvent, _flag_tangencies, counted

    a = CrossingEvent(1.000, [0, 0, 0], "phi_t", 1, 0.0)
    b = CrossingEvent(1.004, [0, 0, 0], "phi_t", -1, 0.0)
    c = CrossingEvent(5.0, [1, 1, 1], "phi_t", 1, 0.0)
    d = CrossingEvent(7.0, [1, 1, 1], "phi_t", -1, 0.0)
    d.near_fixed_point = True
    events = [a, b, c, d]
    _flag_tangencies(events, 0.01)
    assert a.tangency and b.tangency
    assert not c.tangency and not d.tangency
    assert counted(events) == [c]
    assert c.direction_label == "-+"
    assert d.to_dict()["direction"] == "+-"


def test_phi_c_crossings_are_refined_on_the_interpolant():
    from lib.curvature.crossings import crossings, field_scale
    from lib.curvature.phi import phi_batch
    from lib.dynamics.integrate import integrate
    from lib.field.parser import field_from_components

    # on the limit cycle (cos t, sin t, -0.2 cos 2t + 0.1 sin 2t) phi_c = -(0.6 cos 2t + 0.2 sin 2t)
    f = field_from_components(["-y", "x", "x*y - z"])
    traj = integrate(f, {}, [1.0, 0.0, -0.2], t_end=20.0, dt_output=0.01)
    events = crossings(f, {}, traj, "phi_c")
    expected = (np.pi - np.arctan(3.0)) / 2 + np.pi / 2 * np.arange(14)
    expected = expected[expected < traj.t[-1]]
    assert len(events) == len(expected) == 13
    np.testing.assert_allclose([e.t for e in events], expected, atol=1e-6)
    assert [e.direction for e in events] == [(-1) ** k for k in range(13)]
    scale = field_scale(phi_batch(f, {}, traj.states)["phi_c"])
    for event in events:
        assert abs(event.value) <= 1e-8 * scale
        assert event.counts


def test_phi_t_core_divides_out_the_velocity_factors():
    from lib.catalog import build
    from lib.curvature.phi import CORE, bind_phi, field_values, phi_batch
    from lib.field.derivatives import time_derivatives_batch

    f, params = build("sprott_f")
    bound = bind_phi(f, params)
    assert bound.velocity_factors["phi_t"] == (0,)
    assert bound.velocity_factors[CORE] == ()
    points = np.random.default_rng(6).uniform(-3, 3, size=(200, 3))
    stack = time_derivatives_batch(f, params, points)
    v = stack.velocity
    # z' = ... + x^2, so phi_t = 2 F_x^2 (F ^ F')_z
    rotation = v[:, 0] * stack.acceleration[:, 1] - v[:, 1] * stack.acceleration[:, 0]
    core = field_values(f, params, CORE, points)
    np.testing.assert_allclose(core, 2.0 * rotation, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(core * v[:, 0] ** 2, phi_batch(f, params, points)["phi_t"], rtol=1e-8, atol=1e-9)

    f, params = build("rossler")
    assert bind_phi(f, params).velocity_factors["phi_t"] == (0, 2)


def test_phi_t_unit_is_bounded():
    from lib.catalog import build
    from lib.curvature.phi import phi_batch

    f, params = build("sprott_k")
    values = phi_batch(f, params, np.random.default_rng(7).uniform(-3, 3, size=(500, 3)))
    assert np.all(np.abs(values["phi_t_unit"]) <= 1.0 + 1e-12)
    assert np.all(np.sign(values["phi_t_unit"]) == np.sign(values["phi_t"]))


def test_excursion_depths():
    from lib.curvature.crossings import excursion_depths

    values = np.array([1.0, 2.0, -1.0, -3.0, 1.0, 0.0, -2.0, 4.0])
    depth = np.array([0.5, 0.5, 0.05, -0.08, 0.5, 0.5, 0.3, 0.5])
    np.testing.assert_allclose(excursion_depths(values, depth), [0, 0, 0.08, 0.08, 0, 0, 0.3, 0])
    # a tie goes to the positive side
    np.testing.assert_allclose(excursion_depths(-values[:4], depth[:4]), [0.5, 0.5, 0, 0])


def test_shallow_excursions_are_flagged_not_counted():
    from lib.curvature.crossings import crossings, counted
    from lib.dynamics.integrate import integrate
    from lib.field.parser import field_from_components

    f = field_from_components(["-y", "x", "x*y - z"])
    traj = integrate(f, {}, [1.0, 0.0, -0.2], t_end=20.0, dt_output=0.01)
    events = crossings(f, {}, traj, "phi_c", min_depth=2.0)
    assert events
    assert all(e.shallow for e in events)
    assert counted(events) == []


@pytest.mark.slow
def test_rossler_crossing_dichotomy():
    from lib.catalog import get_system
    from lib.curvature.crossings import MIN_DEPTH, counted, crossings
    from lib.dynamics.fixed_points import find_fixed_points
    from lib.dynamics.integrate import integrate

    system = get_system("rossler")
    counts = {}
    for preset in ("no_crossing", "crossing"):
        params = system.bind(preset=preset)
        traj = integrate(system.field, params, system.initial_condition(params), t_end=5000.0,
                         dt_output=0.01, transient=500.0)
        events = crossings(system.field, params, traj, "phi_t_core", find_fixed_points(system.field, params),
                           min_depth=MIN_DEPTH)
        counts[preset] = len(counted(events))
    print(counts)
    assert counts["no_crossing"] == 0
    assert counts["crossing"] >= 1


EXPECTED_VERDICTS = {
    "sprott_f": "wrapping", "sprott_h": "wrapping", "sprott_q": "wrapping", "sprott_i": "wrapping",
    "sprott_l": "wrapping", "sprott_n": "wrapping", "sprott_r": "wrapping",
    "rossler": "crossing", "sprott_k": "crossing", "sprott_s": "crossing", "sprott_g": "crossing",
    "sprott_m": "crossing", "sprott_o": "crossing", "sprott_p": "crossing", "sprott_j": "crossing",
    "thomas": "crossing", "malasoma_a": "crossing",
}


def test_expected_verdicts_follow_the_catalog():
    from lib.catalog import get_system

    for name, verdict in EXPECTED_VERDICTS.items():
        assert get_system(name).expected_verdict == verdict, name
    assert get_system("sprott_d").expected_verdict == "wrapping"


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(EXPECTED_VERDICTS))
def test_catalog_verdicts(name):
    from lib.catalog import get_system
    from lib.catalog.systems import DEFAULT_T_END, DEFAULT_TRANSIENT
    from lib.curvature.classify import classify_attractor
    from lib.dynamics.integrate import integrate

    system = get_system(name)
    params = system.bind(system.verdict_params)
    traj = integrate(system.field, params, system.initial_condition(params), t_end=DEFAULT_T_END,
                     transient=DEFAULT_TRANSIENT)
    assert not traj.diverged
    result = classify_attractor(system.field, params, traj, section_hint=system.section_hint,
                                darboux_points=0, name=name)
    print(name, result, result.shallow_count)
    assert result.verdict == EXPECTED_VERDICTS[name]


@pytest.mark.slow
def test_sprott_d_diverges_from_its_reference_state():
    from lib.catalog import get_system
    from lib.catalog.systems import DEFAULT_T_END, DEFAULT_TRANSIENT
    from lib.dynamics.integrate import integrate

    system = get_system("sprott_d")
    params = system.bind(system.verdict_params)
    traj = integrate(system.field, params, system.initial_condition(params), t_end=DEFAULT_T_END,
                     transient=DEFAULT_TRANSIENT)
    assert traj.diverged
    assert len(traj) == 0
