"""Continuous flows, Euler schemes, arc length, and ball occupancy."""

import numpy as np
import pytest

from saddlelab import (
    DISCRETE_GD,
    DISCRETE_NGD,
    GD,
    NGD,
    CriticalPointReached,
    FlowKind,
    FlowVariant,
    IntegratorConfig,
    OutOfRangeError,
    TangencyWarning,
    TerminationKind,
    arc_length_at,
    ball_occupancy,
    gd_field,
    integrate,
    iterate_discrete,
    ngd_field,
    parse_function_spec,
    reparametrize_by_arc_length,
    step_discrete,
    trajectory_csv_header,
    write_trajectory_csv,
)

import oracles


# ---------------------------------------------------------------------------
# FlowKind / IntegratorConfig validation


def test_flow_kind_step_sizes_exactly_for_discrete():
    with pytest.raises(ValueError):
        FlowKind(FlowVariant.GD, (0.1,))
    with pytest.raises(ValueError):
        FlowKind(FlowVariant.DISCRETE_GD)
    kind = FlowKind(FlowVariant.DISCRETE_NGD, [0.1, 0.2])
    assert kind.step_sizes == (0.1, 0.2)


def test_flow_kind_rejects_nonpositive_steps():
    with pytest.raises(ValueError):
        FlowKind(FlowVariant.DISCRETE_GD, (0.1, 0.0))
    with pytest.raises(ValueError):
        FlowKind(FlowVariant.DISCRETE_NGD, (-1e-3,))


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(max_step=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(t_max=-1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(event_time_tol=0.1, max_step=0.01)
    cfg = IntegratorConfig()
    assert cfg.event_time_tol <= cfg.max_step


# ---------------------------------------------------------------------------
# Vector fields


def test_gd_field_examples(f_saddle, f_trig2):
    np.testing.assert_allclose(
        gd_field(f_saddle, [1.0, 1.0]), [-1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(
        gd_field(f_trig2, [np.pi / 2, 0.0]), [-1.0, 0.0], atol=1e-14)


def test_ngd_field_examples(f_saddle, f_bowl):
    np.testing.assert_allclose(
        ngd_field(f_saddle, [2.0, 0.0]), [-1.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(
        ngd_field(f_bowl, [3.0, 4.0]), [-0.6, -0.8], atol=1e-14)


def test_ngd_field_is_unit_length(f_cubic):
    rng = np.random.default_rng(3)
    for _ in range(25):
        x = rng.uniform(-2.0, 2.0, size=2)
        v = ngd_field(f_cubic, x)
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-14


def test_ngd_field_raises_at_critical_point(f_saddle):
    with pytest.raises(CriticalPointReached):
        ngd_field(f_saddle, [0.0, 0.0])


# ---------------------------------------------------------------------------
# integrate: closed-form and event checks


def test_gd_quadratic_matches_matrix_exponential(f_saddle):
    x0 = np.array([1.0, 0.001])
    traj = integrate(f_saddle, GD, x0, IntegratorConfig(t_max=3.0))
    assert traj.termination.kind is TerminationKind.HORIZON_REACHED
    A = np.diag([1.0, -1.0])
    for t in np.linspace(0.0, 3.0, 121):
        np.testing.assert_allclose(
            traj.at(t), oracles.quadratic_gd_state(A, x0, t), atol=1e-6)


def test_ngd_bowl_straight_line_to_center(f_bowl):
    traj = integrate(f_bowl, NGD, [3.0, 4.0])
    assert traj.termination.kind is TerminationKind.CRITICAL_POINT_REACHED
    assert abs(traj.t_end - 5.0) <= 1e-4
    # radial descent: every node is a multiple of the start direction
    cross = traj.states[:, 0] * 4.0 - traj.states[:, 1] * 3.0
    assert np.max(np.abs(cross)) <= 1e-9
    assert np.linalg.norm(traj.states[-1]) <= 1e-3


def test_ngd_stable_axis_reaches_saddle(f_saddle):
    traj = integrate(f_saddle, NGD, [1.0, 0.0])
    assert traj.termination.kind is TerminationKind.CRITICAL_POINT_REACHED
    assert abs(traj.t_end - 1.0) <= 1e-4
    assert np.linalg.norm(traj.states[-1]) <= 1e-3
    # x(t) = (1 - t, 0) up to the stopping band
    mid = traj.times[traj.times <= 0.9]
    np.testing.assert_allclose(
        traj.at_many(mid)[:, 0], 1.0 - mid, atol=1e-7)


def test_ngd_near_axis_passes_the_saddle_and_leaves(f_saddle):
    # an initial condition off the stable axis by 1e-9 must not be mistaken
    # for an arrival at the critical point
    traj = integrate(
        f_saddle, NGD, [0.5, 1e-9], IntegratorConfig(t_max=12.0),
        stop_region=(np.zeros(2), 3.0))
    assert traj.termination.kind is TerminationKind.REGION_EXITED
    assert traj.t_end > 1.0
    assert abs(np.linalg.norm(traj.states[-1]) - 3.0) <= 1e-6


def test_gd_divergence_detected():
    f = parse_function_spec("quadratic:diag:-1,-1")
    traj = integrate(f, GD, [1.0, 0.0],
                     IntegratorConfig(escape_radius=1e3, t_max=20.0))
    assert traj.termination.kind is TerminationKind.DIVERGED
    assert np.linalg.norm(traj.states[-1]) >= 1e3 * (1.0 - 1e-9)


def test_stop_region_exit_refined(f_saddle):
    traj = integrate(f_saddle, GD, [0.1, 0.2],
                     stop_region=(np.zeros(2), 1.0))
    assert traj.termination.kind is TerminationKind.REGION_EXITED
    assert abs(np.linalg.norm(traj.states[-1]) - 1.0) <= 1e-6


def test_horizon_time_is_exact(f_bowl):
    traj = integrate(f_bowl, NGD, [10.0, 0.0], IntegratorConfig(t_max=1.0))
    assert traj.termination.kind is TerminationKind.HORIZON_REACHED
    assert traj.times[-1] == 1.0
    np.testing.assert_allclose(traj.states[-1], [9.0, 0.0], atol=1e-6)


def test_ngd_from_critical_point_raises(f_saddle):
    with pytest.raises(CriticalPointReached):
        integrate(f_saddle, NGD, [0.0, 0.0])


def test_integrate_rejects_discrete_kinds_and_bad_x0(f_bowl):
    with pytest.raises(ValueError):
        integrate(f_bowl, FlowKind(FlowVariant.DISCRETE_GD, (0.1,)), [1.0, 0.0])
    with pytest.raises(ValueError):
        integrate(f_bowl, GD, [1.0, 0.0, 0.0])


# ---------------------------------------------------------------------------
# Trajectory invariants


def test_trajectory_invariants_ngd(f_trig2):
    traj = integrate(f_trig2, NGD, [2.0, 1.1], IntegratorConfig(t_max=8.0))
    assert traj.termination.kind is TerminationKind.CRITICAL_POINT_REACHED
    assert np.all(np.diff(traj.times) > 0)
    assert np.all(np.diff(traj.f_values) <= 1e-9)
    assert np.all(np.diff(traj.arc_lengths) >= 0)
    # unit-speed law at the saved nodes, via the field itself
    speeds = [np.linalg.norm(ngd_field(f_trig2, x)) for x in traj.states[:-1]]
    assert max(abs(s - 1.0) for s in speeds) <= 1e-8
    # arc length of a unit-speed path is elapsed time
    assert abs(traj.total_arc_length - (traj.t_end - traj.t0)) <= 1e-6


def test_dense_output_interpolates_nodes(f_cubic):
    traj = integrate(f_cubic, GD, [0.8, 1.9], IntegratorConfig(t_max=4.0))
    for i in range(0, len(traj.times), 7):
        np.testing.assert_allclose(
            traj.at(traj.times[i]), traj.states[i], atol=1e-12)
    mids = 0.5 * (traj.times[:-1] + traj.times[1:])
    np.testing.assert_allclose(
        traj.at_many(mids), np.array([traj.at(t) for t in mids]), atol=0)


def test_speed_at_matches_gradient_norm(f_saddle):
    traj = integrate(f_saddle, GD, [1.0, 0.001], IntegratorConfig(t_max=2.0))
    for t in (0.0, 0.7, 1.9):
        expect = np.linalg.norm(f_saddle.gradient(traj.at(t)))
        assert abs(traj.speed_at(t) - expect) <= 1e-12


def test_descent_law_gd(f_trig2):
    traj = integrate(f_trig2, GD, [2.5, -1.2], IntegratorConfig(t_max=10.0))
    assert np.all(np.diff(traj.f_values) <= 1e-9)


# ---------------------------------------------------------------------------
# Discrete schemes


def test_step_discrete_examples(f_bowl):
    np.testing.assert_allclose(
        step_discrete(f_bowl, DISCRETE_GD, [1.0, 0.0], 0.5),
        [0.5, 0.0], atol=1e-15)
    np.testing.assert_allclose(
        step_discrete(f_bowl, DISCRETE_NGD, [3.0, 4.0], 1.0),
        [2.4, 3.2], atol=1e-14)


def test_step_discrete_ngd_at_zero_gradient_raises(f_bowl):
    with pytest.raises(CriticalPointReached):
        step_discrete(f_bowl, DISCRETE_NGD, [0.0, 0.0], 0.1)


def test_small_step_euler_tracks_continuous_ngd(f_saddle):
    x0 = np.array([1.0, 0.5])
    hist = iterate_discrete(
        f_saddle, FlowKind(FlowVariant.DISCRETE_NGD, (0.001,) * 2000), x0)
    assert hist.shape == (2001, 2)
    traj = integrate(f_saddle, NGD, x0, IntegratorConfig(t_max=2.0))
    assert traj.times[-1] == 2.0
    assert np.linalg.norm(hist[-1] - traj.states[-1]) <= 5e-3


def test_iterate_discrete_gd_matches_repeated_steps(f_cubic):
    alphas = (0.2, 0.1, 0.05)
    hist = iterate_discrete(f_cubic, DISCRETE_GD, [0.5, 0.5], alphas=alphas)
    x = np.array([0.5, 0.5])
    for i, a in enumerate(alphas):
        x = step_discrete(f_cubic, DISCRETE_GD, x, a)
        np.testing.assert_array_equal(hist[i + 1], x)


# ---------------------------------------------------------------------------
# Arc length


def test_arc_length_ngd_equals_time(f_bowl):
    traj = integrate(f_bowl, NGD, [3.0, 4.0])
    for t in (0.5, 2.0, 4.9):
        assert abs(arc_length_at(traj, t) - t) <= 1e-6


def test_arc_length_gd_bowl_closed_form(f_bowl):
    traj = integrate(f_bowl, GD, [1.0, 0.0], IntegratorConfig(t_max=3.0))
    for t in (0.3, 1.0, 2.5):
        assert abs(arc_length_at(traj, t) - (1.0 - np.exp(-t))) <= 1e-6


def test_arc_length_gd_saddle_vs_chord_oracle(f_saddle):
    traj = integrate(f_saddle, GD, [1.0, 0.001], IntegratorConfig(t_max=6.5))
    got = arc_length_at(traj, 6.0)
    ref = oracles.arc_length_chords(traj, 6.0, n=600_000)
    assert abs(got - ref) <= 1e-5


def test_arc_length_out_of_range(f_bowl):
    traj = integrate(f_bowl, GD, [1.0, 0.0], IntegratorConfig(t_max=1.0))
    with pytest.raises(OutOfRangeError):
        arc_length_at(traj, 1.5)
    with pytest.raises(OutOfRangeError):
        arc_length_at(traj, -0.1)


# ---------------------------------------------------------------------------
# Arc-length reparametrization


def test_reparametrize_ngd_is_identity(f_bowl):
    traj = integrate(f_bowl, NGD, [3.0, 4.0])
    s_grid = np.linspace(0.0, 0.999 * traj.total_arc_length, 40)
    pts = reparametrize_by_arc_length(traj, s_grid)
    np.testing.assert_allclose(pts, traj.at_many(s_grid), atol=1e-8)


def test_reparametrize_gd_bowl_closed_form(f_bowl):
    traj = integrate(f_bowl, GD, [1.0, 0.0], IntegratorConfig(t_max=5.0))
    s_grid = np.linspace(0.0, 0.9, 19)
    pts = reparametrize_by_arc_length(traj, s_grid)
    expect = np.column_stack([1.0 - s_grid, np.zeros_like(s_grid)])
    np.testing.assert_allclose(pts, expect, atol=1e-6)


def test_gd_and_ngd_share_the_orbit(f_saddle):
    x0 = [1.0, 0.3]
    ngd = integrate(f_saddle, NGD, x0, IntegratorConfig(t_max=3.0))
    gd = integrate(f_saddle, GD, x0, IntegratorConfig(t_max=4.0))
    assert gd.total_arc_length >= 3.0
    s_grid = np.linspace(0.0, 3.0, 61)
    gd_pts = reparametrize_by_arc_length(gd, s_grid)
    ngd_pts = ngd.at_many(s_grid)  # unit speed, so L(t) = t
    assert np.max(np.linalg.norm(gd_pts - ngd_pts, axis=1)) <= 1e-5


def test_reparametrize_rejects_overlong_s(f_bowl):
    traj = integrate(f_bowl, GD, [1.0, 0.0], IntegratorConfig(t_max=1.0))
    with pytest.raises(OutOfRangeError):
        reparametrize_by_arc_length(traj, [traj.total_arc_length + 0.1])


# ---------------------------------------------------------------------------
# Ball occupancy


def test_occupancy_bowl_radial(f_bowl):
    traj = integrate(f_bowl, NGD, [2.0, 0.0])
    occ = ball_occupancy(traj, np.zeros(2), 1.0)
    assert abs(occ.total_time - 1.0) <= 1e-6
    assert len(occ.intervals) == 1
    a, b = occ.intervals[0]
    assert abs(a - 1.0) <= 1e-6
    assert b == traj.t_end  # still inside the ball at termination


@pytest.fixture(scope="module")
def saddle_pass_traj():
    f = parse_function_spec("quadratic:diag:1,-1")
    theta = 0.05
    x0 = np.array([np.cos(theta), np.sin(theta)])
    return f, integrate(f, NGD, x0, IntegratorConfig(t_max=6.0))


def test_occupancy_saddle_pass_bounded(saddle_pass_traj):
    _, traj = saddle_pass_traj
    occ = ball_occupancy(traj, np.zeros(2), 1.0)
    assert occ.total_time <= 2.0


def test_occupancy_matches_riemann_oracle(saddle_pass_traj):
    _, traj = saddle_pass_traj
    occ = ball_occupancy(traj, np.zeros(2), 1.0)
    ref = oracles.occupancy_riemann(traj, np.zeros(2), 1.0, dt=1e-6)
    assert abs(occ.total_time - ref) <= 1e-4


def test_occupancy_crossings_sit_on_the_boundary(saddle_pass_traj):
    _, traj = saddle_pass_traj
    occ = ball_occupancy(traj, np.zeros(2), 1.0)
    for a, b in occ.intervals:
        for c in (a, b):
            if c in (traj.t0, traj.t_end):
                continue
            assert abs(np.linalg.norm(traj.at(c)) - 1.0) <= 1e-8


def test_occupancy_additive_under_splitting(saddle_pass_traj):
    _, traj = saddle_pass_traj
    total = ball_occupancy(traj, np.zeros(2), 1.0).total_time
    left = ball_occupancy(traj, np.zeros(2), 1.0, t_window=(traj.t0, 1.1))
    right = ball_occupancy(traj, np.zeros(2), 1.0, t_window=(1.1, traj.t_end))
    assert abs(left.total_time + right.total_time - total) <= 1e-9


def test_occupancy_grazing_contact_warns(f_bowl):
    traj = integrate(f_bowl, NGD, [2.0, 0.0])
    with pytest.warns(TangencyWarning):
        occ = ball_occupancy(traj, np.array([1.0, 1.0]), 1.0)
    assert occ.total_time <= 1e-6


# ---------------------------------------------------------------------------
# CSV export


def test_csv_header_and_roundtrip(tmp_path, f_saddle):
    assert trajectory_csv_header(2) == "t,x_0,x_1,f,arclen"
    assert trajectory_csv_header(4) == "t,x_0,x_1,x_2,x_3,f,arclen"
    traj = integrate(f_saddle, GD, [1.0, 0.001], IntegratorConfig(t_max=1.0))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x_0,x_1,f,arclen"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (len(traj.times), 5)
    np.testing.assert_array_equal(data[:, 0], traj.times)
    np.testing.assert_array_equal(data[:, 1:3], traj.states)
    np.testing.assert_array_equal(data[:, 3], traj.f_values)
    np.testing.assert_array_equal(data[:, 4], traj.arc_lengths)
