"""Occupancy bounds, stall times, Taylor regime, and convergence sweeps."""

import math

import numpy as np
import pytest

from saddlelab import (
    NGD,
    AssumptionViolation,
    BoundViolation,
    IntegratorConfig,
    InvalidCError,
    NeverEntered,
    TerminationKind,
    classify_critical_point,
    compare_orbits,
    convergence_radius,
    dissipation_trace,
    escape_sweep,
    escape_time_bound,
    gd_stall_time,
    global_convergence_experiment,
    integrate,
    max_permissible_radius,
    parse_function_spec,
    saddle_frame_ic,
    sample_on_sphere,
    stable_manifold_detail,
    stable_manifold_sample,
    taylor_estimate_check,
    trig_lattice_critical_points,
)


@pytest.fixture(scope="module")
def saddle_info(f_saddle):
    return classify_critical_point(f_saddle, np.zeros(2))


@pytest.fixture(scope="module")
def sweep64(f_saddle, saddle_info):
    return escape_sweep(f_saddle, saddle_info, r=0.5, n_ic=64, seed=7)


@pytest.fixture(scope="module")
def trig_global_report(f_trig2):
    cps = trig_lattice_critical_points(2, 4.0 + 2.0 * np.pi)
    return global_convergence_experiment(
        f_trig2, R=4.0, nu=None, r=0.3, C=5.0, n_ic=40, seed=11,
        critical_points=cps)


# ---------------------------------------------------------------------------
# Closed-form quantities


def test_escape_time_bound_values():
    assert escape_time_bound(1.0, 0.5, 5.0) == 2.5
    assert escape_time_bound(4.0, 1.0, 4.5) == 9.0
    with pytest.raises(InvalidCError):
        escape_time_bound(1.0, 0.5, 4.0)
    with pytest.raises(ValueError):
        escape_time_bound(0.5, 0.5, 5.0)
    with pytest.raises(ValueError):
        escape_time_bound(1.0, 0.0, 5.0)


def test_max_permissible_radius_values():
    assert max_permissible_radius(5.0, 1.0, 1.0, 1.0).r_bar == pytest.approx(
        6.0 / 23.0, abs=1e-15)
    assert max_permissible_radius(4.001, 1.0, 1.0, 1.0).r_bar == pytest.approx(
        0.00029995500674950826, rel=1e-12)
    assert max_permissible_radius(5.0, 1.0, 2.0, 4.0).r_bar == pytest.approx(
        0.088235294117646745, rel=1e-12)


def test_max_permissible_radius_shrinks_with_conditioning():
    radii = [max_permissible_radius(5.0, 1.0, 1.0, k).r_bar
             for k in (1.0, 2.0, 4.0, 16.0, 256.0)]
    assert all(a > b > 0.0 for a, b in zip(radii, radii[1:]))


def test_max_permissible_radius_validation():
    with pytest.raises(InvalidCError):
        max_permissible_radius(4.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        max_permissible_radius(5.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        max_permissible_radius(5.0, 1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        max_permissible_radius(5.0, 1.0, 1.0, 0.9)


def test_convergence_radius_formula():
    assert convergence_radius(1e-10, 1.0) == pytest.approx(1e-4, rel=1e-12)
    assert convergence_radius(4e-10, 1.0) == pytest.approx(2e-4, rel=1e-12)
    assert convergence_radius(1e-10, 4.0) == pytest.approx(5e-5, rel=1e-12)


def test_saddle_frame_ic_diag_saddle(saddle_info):
    ic = saddle_frame_ic(saddle_info, 1.0, 0.3)
    np.testing.assert_allclose(ic, [math.cos(0.3), math.sin(0.3)], atol=1e-12)
    ic = saddle_frame_ic(saddle_info, 0.5, -0.1)
    np.testing.assert_allclose(
        ic, [0.5 * math.cos(0.1), -0.5 * math.sin(0.1)], atol=1e-12)


# ---------------------------------------------------------------------------
# Escape-time sweep


def test_escape_sweep_stays_under_bound(sweep64):
    assert sweep64.bound == 2.5
    assert sweep64.n_ic == 64
    assert len(sweep64.per_ic) == 64
    assert sweep64.passed
    assert sweep64.max_occupancy == pytest.approx(0.78662500611880948, rel=1e-9)
    assert sweep64.slack == pytest.approx(
        sweep64.bound - sweep64.max_occupancy, abs=1e-15)
    assert all(0.0 <= o.occupancy <= sweep64.max_occupancy
               for o in sweep64.per_ic)
    assert all(o.termination is TerminationKind.REGION_EXITED
               for o in sweep64.per_ic)
    assert not any(o.converged_to_saddle for o in sweep64.per_ic)


def test_escape_sweep_seeded_prefix(f_saddle, saddle_info, sweep64):
    rep16 = escape_sweep(f_saddle, saddle_info, r=0.5, n_ic=16, seed=7)
    assert rep16.max_occupancy == pytest.approx(0.68900916294669923, rel=1e-9)
    for a, b in zip(rep16.per_ic, sweep64.per_ic[:16]):
        np.testing.assert_array_equal(a.ic, b.ic)
        assert a.occupancy == b.occupancy


def test_escape_sweep_enforces_guaranteed_radius(f_cubic):
    sad = classify_critical_point(f_cubic, np.zeros(2))
    with pytest.raises(ValueError, match="guaranteed radius"):
        escape_sweep(f_cubic, sad, r=5.0, n_ic=4, seed=1)
    rep = escape_sweep(f_cubic, sad, r=0.13, n_ic=8, seed=1)
    assert rep.passed


def test_escape_sweep_requires_a_saddle(f_bowl):
    info = classify_critical_point(f_bowl, np.zeros(2))
    with pytest.raises(ValueError):
        escape_sweep(f_bowl, info, r=0.5, n_ic=4, seed=1)


def test_escape_sweep_thread_pool_is_deterministic(
        f_saddle, saddle_info, sweep64, monkeypatch):
    monkeypatch.setenv("SADDLELAB_THREADS", "4")
    rep = escape_sweep(f_saddle, saddle_info, r=0.5, n_ic=64, seed=7)
    assert rep.max_occupancy == sweep64.max_occupancy
    for a, b in zip(rep.per_ic, sweep64.per_ic):
        assert a.occupancy == b.occupancy


# ---------------------------------------------------------------------------
# Gradient-descent stall times


def test_gd_stall_log_ladder(f_saddle, saddle_info):
    ic = saddle_frame_ic(saddle_info, 1.0, 1e-6)
    stalls = []
    for eps in (1e-2, 1e-3, 1e-4, 1e-5):
        st = gd_stall_time(f_saddle, np.zeros(2), 1.0, eps, ic)
        assert abs(st - math.log(1.0 / eps)) <= 1e-6
        stalls.append(st)
    steps = np.diff(stalls)
    np.testing.assert_allclose(steps, math.log(10.0), atol=1e-6)


def test_gd_stall_never_entered_off_manifold(f_saddle):
    with pytest.raises(NeverEntered):
        gd_stall_time(f_saddle, np.zeros(2), 1.0, 1e-3,
                      np.array([0.0, 1.0]))


# ---------------------------------------------------------------------------
# Dissipation identity


def test_dissipation_identity_on_fine_grid(f_saddle):
    traj = integrate(f_saddle, NGD, [1.0, 0.3],
                     IntegratorConfig(t_max=3.0, max_step=0.004))
    rep = dissipation_trace(traj, f_saddle)
    assert rep.max_discrepancy <= 1e-5
    assert len(rep.rows) > 500
    # the identity says the slope equals minus the gradient norm
    assert np.all(rep.rows[:, 1] < 0.0)
    assert np.all(rep.rows[:, 2] < 0.0)


# ---------------------------------------------------------------------------
# Taylor-regime estimates


def test_taylor_exact_for_quadratics(f_saddle):
    rep = taylor_estimate_check(f_saddle, np.zeros(2), 0.51, 0.99,
                                r_hat=3.0, n_samples=2000, seed=5)
    assert rep.passed
    assert len(rep.violations) == 0
    assert rep.derived_C == pytest.approx(8.0 * 0.51 / 0.99, rel=1e-15)


def test_taylor_cubic_small_radius_clean(f_cubic):
    rep = taylor_estimate_check(f_cubic, np.zeros(2), 0.6, 0.9,
                                r_hat=0.1, n_samples=2000, seed=5)
    assert rep.passed
    assert rep.derived_C == pytest.approx(8.0 * 0.6 / 0.9, rel=1e-15)


def test_taylor_cubic_large_radius_violates(f_cubic):
    rep = taylor_estimate_check(f_cubic, np.zeros(2), 0.6, 0.9,
                                r_hat=10.0, n_samples=500, seed=5)
    assert not rep.passed
    assert len(rep.violations) == 311
    for v in rep.violations:
        assert v.which in ("value", "gradient")
        if v.which == "value":
            assert v.lhs > v.rhs
        else:
            assert v.lhs < v.rhs


def test_taylor_parameter_validation(f_saddle):
    with pytest.raises(ValueError):
        taylor_estimate_check(f_saddle, np.zeros(2), 0.5, 0.9, 1.0, 10, 0)
    with pytest.raises(ValueError):
        taylor_estimate_check(f_saddle, np.zeros(2), 0.6, 1.0, 1.0, 10, 0)
    with pytest.raises(ValueError):
        taylor_estimate_check(f_saddle, np.zeros(2), 0.6, 0.0, 1.0, 10, 0)


def test_taylor_trace_follows_trajectory(f_cubic):
    traj = integrate(f_cubic, NGD, [0.2, -0.15], IntegratorConfig(t_max=1.0))
    rep = taylor_estimate_check(f_cubic, np.zeros(2), 0.6, 0.9,
                                r_hat=0.1, n_samples=100, seed=5, traj=traj)
    assert len(rep.tilde_trace) == len(traj.times)
    assert all(s >= 0.0 for _, s in rep.tilde_trace)
    assert rep.tilde_trace[0][0] == traj.t0


# ---------------------------------------------------------------------------
# Orbit comparison


def test_compare_orbits_cubic(f_cubic):
    rep = compare_orbits(f_cubic, [0.2, -0.15])
    assert rep.sup_error <= 1e-5
    assert rep.unit_speed_deviation <= 1e-8
    assert rep.s_max == pytest.approx(8.0, abs=1e-9)
    assert rep.gd_points.shape == rep.ngd_points.shape == (600, 2)


def test_compare_orbits_seeded_quadratic():
    f = parse_function_spec("quadratic:diag:2,-0.5")
    rng = np.random.default_rng(21)
    for ic in sample_on_sphere(rng, np.zeros(2), 1.0, 5):
        rep = compare_orbits(f, ic)
        assert rep.sup_error <= 1e-5


# ---------------------------------------------------------------------------
# Stable-manifold sampling


def test_stable_manifold_measure_zero(f_saddle):
    rep = stable_manifold_detail(f_saddle, np.zeros(2), 0.5, 60, seed=3)
    assert rep.n_converged == 0
    assert rep.fraction == 0.0
    assert len(rep.terminations) == 60
    assert all(t is TerminationKind.REGION_EXITED for t in rep.terminations)
    assert stable_manifold_sample(f_saddle, np.zeros(2), 0.5, 10, seed=3) == 0.0


# ---------------------------------------------------------------------------
# Global convergence bound


def test_global_bound_trig_report(trig_global_report):
    g = trig_global_report
    assert g.passed
    assert g.d == 2
    assert g.kappa == 1.0
    assert g.M == pytest.approx(2.02, rel=1e-12)
    assert g.nu == pytest.approx(0.29623842117359211, rel=1e-9)
    assert g.bound == pytest.approx(321.80433049161866, rel=1e-9)
    assert len(g.measured) == 40
    assert g.n_left_ball == 11
    assert all(m.converged_to_minimum for m in g.measured)
    assert all(m.nearest_class == "minimum" for m in g.measured)
    assert max(m.time for m in g.measured) == pytest.approx(
        4.394325000464641, rel=1e-9)
    assert max(m.time for m in g.measured) <= g.bound


def test_global_bound_strict_invariance(f_trig2):
    cps = trig_lattice_critical_points(2, 4.0 + 2.0 * np.pi)
    with pytest.raises(AssumptionViolation, match="remain in B_R"):
        global_convergence_experiment(
            f_trig2, R=4.0, nu=None, r=0.3, C=5.0, n_ic=12, seed=11,
            critical_points=cps, strict_invariance=True)


def test_global_bound_missing_minima_flagged(f_trig2):
    near = trig_lattice_critical_points(2, 1.0)
    assert len(near) == 1  # only the origin
    with pytest.raises(BoundViolation) as exc_info:
        global_convergence_experiment(
            f_trig2, R=4.0, nu=None, r=0.3, C=5.0, n_ic=6, seed=11,
            critical_points=near)
    assert exc_info.value.report is not None
    assert len(exc_info.value.report.measured) == 6


def test_global_bound_validation(f_trig2):
    cps = trig_lattice_critical_points(2, 4.0 + 2.0 * np.pi)
    with pytest.raises(ValueError):
        global_convergence_experiment(f_trig2, R=0.2, nu=None, r=0.3, C=5.0,
                                      n_ic=4, seed=1, critical_points=cps)
    with pytest.raises(InvalidCError):
        global_convergence_experiment(f_trig2, R=4.0, nu=None, r=0.3, C=4.0,
                                      n_ic=4, seed=1, critical_points=cps)
    with pytest.raises(ValueError):
        global_convergence_experiment(f_trig2, R=4.0, nu=None, r=0.3, C=5.0,
                                      n_ic=4, seed=1, critical_points=[])
    bad = [(np.zeros(2), "minimum"), (np.array([0.1, 0.0]), "saddle")]
    with pytest.raises(AssumptionViolation, match="separated"):
        global_convergence_experiment(f_trig2, R=4.0, nu=None, r=0.3, C=5.0,
                                      n_ic=4, seed=1, critical_points=bad)


def test_global_bound_rejects_unattainable_nu(f_trig2):
    cps = trig_lattice_critical_points(2, 4.0 + 2.0 * np.pi)
    with pytest.raises(AssumptionViolation, match="nu"):
        global_convergence_experiment(f_trig2, R=4.0, nu=10.0, r=0.3, C=5.0,
                                      n_ic=4, seed=1, critical_points=cps)
