import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointfoot.config import resolve
from pointfoot.errors import ConfigError, ModelError, SimulationDivergedError
from pointfoot.model import GeneralizedState, Kinematics
from pointfoot.sim import (
    IDEAL,
    SEA_LAG,
    PhaseTimes,
    PiecewiseCubic,
    Push,
    SeaBank,
    SeaJoint,
    SimWorld,
    SwingTrajectory,
    Terrain,
    TorsoSensing,
    WalkingStateMachine,
    run_scenario,
    sea_joint_torque,
    settling_time,
    stance_state,
    stance_velocity,
    step,
    swing_trajectory,
    write_outputs,
)
from pointfoot.sim import statemachine as sm
from pointfoot.sim.scenarios import ellipse_reference


def planar_stance(model, com=(0.0, 0.95), feet_x=(0.1, -0.1)):
    feet = {"r_foot": [feet_x[0], 0.0, 0.0], "l_foot": [feet_x[1], 0.0, 0.0]}
    return stance_state(model, feet, com), feet


def spatial_stance(model, com=(0.0, 0.0, 0.95)):
    feet = {"r_foot": [0.0, -0.15, 0.0], "l_foot": [0.0, 0.15, 0.0]}
    return stance_state(model, feet, com), feet


def energy(model, state):
    kin = Kinematics(model, state)
    v = state.qdot
    return 0.5 * float(v @ kin.mass_matrix(include_rotor_inertia=True) @ v) + kin.potential_energy()


def holding_torque(world):
    """Minimum-norm actuated torque with zero acceleration at rest: U^T tau - J^T lam = g."""
    model = world.model
    kin = Kinematics(model, world.state)
    J = world.constraint_jacobian(kin)
    _, g = kin.bias_forces()
    sol = np.linalg.lstsq(np.hstack([model.U.T, -J.T]), g, rcond=None)[0]
    return sol[:model.n_actuated]


# --- initial conditions ------------------------------------------------------------------------

def test_stance_solver(planar, spatial):
    s, feet = planar_stance(planar)
    kin = Kinematics(planar, s)
    for name, p in feet.items():
        np.testing.assert_allclose(kin.named_point(name, (0, 2))[0], np.array(p)[[0, 2]], atol=1e-12)
    np.testing.assert_allclose(kin.com((0, 2))[0], [0.0, 0.95], atol=1e-12)
    s, feet = spatial_stance(spatial)
    kin = Kinematics(spatial, s)
    np.testing.assert_allclose(kin.com()[0], [0.0, 0.0, 0.95], atol=1e-12)
    assert s.q[spatial.coordinate("base_pitch")] == 0.0


def test_stance_solver_unreachable(planar):
    with pytest.raises(ModelError):
        planar_stance(planar, com=(0.0, 3.0))


def test_stance_velocity(spatial):
    s, feet = spatial_stance(spatial)
    s = stance_velocity(spatial, s, feet, [0.3, -0.2])
    kin = Kinematics(spatial, s)
    for name in feet:
        np.testing.assert_allclose(kin.named_point(name)[1] @ s.qdot, 0.0, atol=1e-12)
    np.testing.assert_allclose((kin.com()[1] @ s.qdot)[:2], [0.3, -0.2], atol=1e-12)


# --- plant -------------------------------------------------------------------------------------

def test_static_dual_support_hold(planar):
    s, feet = planar_stance(planar)
    world = SimWorld(planar, s, Terrain.flat())
    for f in feet:
        world.add_contact(f)
    tau = holding_torque(world)
    for _ in range(10):
        q0 = world.state.q.copy()
        events = world.advance(tau, 10)
        assert not events
        assert np.abs(world.state.q - q0).max() <= 1e-8
        assert np.abs(world.state.qdot).max() <= 1e-8


@pytest.mark.parametrize("name", ["planar", "spatial"])
def test_free_fall(name, request):
    model = request.getfixturevalue(name)
    rng = np.random.default_rng(3)
    q = rng.normal(0, 0.3, model.n_dofs)
    q[model.coordinate("base_z")] = 3.0
    s = GeneralizedState(q, rng.normal(0, 0.5, model.n_dofs))
    world = SimWorld(model, s, Terrain.flat(), watch=())
    qdd, lam = world.acceleration(np.zeros(model.n_actuated))
    assert lam.size == 0
    _, J, jd = Kinematics(model, s).com()
    acc = J @ qdd + jd
    expected = np.zeros_like(acc)
    expected[-1] = -9.81
    np.testing.assert_allclose(acc, expected, atol=1e-9)


def test_plastic_impact(spatial):
    s, _ = spatial_stance(spatial)
    rng = np.random.default_rng(4)
    s = GeneralizedState(s.q, rng.normal(0, 0.5, spatial.n_dofs))
    world = SimWorld(spatial, s, Terrain.flat())
    world.add_contact("l_foot")
    v0 = world.state.qdot.copy()
    impulse = world.plastic_impact()
    kin = Kinematics(spatial, world.state)
    J = world.constraint_jacobian(kin)
    np.testing.assert_allclose(J @ world.state.qdot, 0.0, atol=1e-10)
    A = kin.mass_matrix(include_rotor_inertia=True)
    np.testing.assert_allclose(A @ (world.state.qdot - v0), -J.T @ impulse, atol=1e-9)


def test_touchdown_event_is_plastic(planar):
    s, _ = planar_stance(planar)
    q = s.q.copy()
    q[planar.coordinate("base_z")] += 0.01
    qdot = np.zeros(planar.n_dofs)
    qdot[planar.coordinate("base_z")] = -0.5
    world = SimWorld(planar, GeneralizedState(q, qdot), Terrain.flat())
    events = []
    for _ in range(100):
        events += world.advance(np.zeros(planar.n_actuated), 10)
        if events:
            break
    assert events[0].kind == "touchdown"
    foot = events[0].name
    kin = Kinematics(planar, world.state)
    np.testing.assert_allclose(kin.named_point(foot)[1] @ world.state.qdot, 0.0, atol=1e-10)


@pytest.mark.parametrize("name", ["planar", "spatial"])
def test_energy_drift_free_flight(name, request):
    model = request.getfixturevalue(name)
    rng = np.random.default_rng(5)
    q = rng.normal(0, 0.3, model.n_dofs)
    q[model.coordinate("base_z")] = 50.0
    s = GeneralizedState(q, rng.normal(0, 1.0, model.n_dofs))
    world = SimWorld(model, s, Terrain.flat(), dt=1e-4, watch=())
    e0 = energy(model, world.state)
    world.advance(np.zeros(model.n_actuated), 10_000)
    assert world.t == pytest.approx(1.0)
    assert abs(energy(model, world.state) - e0) / world.t <= 1e-5


def test_energy_drift_pinned_base(planar):
    # a fixed-base robot swinging its legs: locks do no work
    rng = np.random.default_rng(6)
    q = rng.normal(0, 0.5, planar.n_dofs)
    q[planar.coordinate("base_z")] = 2.0
    qdot = rng.normal(0, 1.0, planar.n_dofs)
    qdot[:planar.n_base] = 0.0
    world = SimWorld(planar, GeneralizedState(q, qdot), Terrain.flat(), watch=())
    for c in ("base_x", "base_z", "base_pitch"):
        world.add_lock(c)
    e0 = energy(planar, world.state)
    world.advance(np.zeros(planar.n_actuated), 10_000)
    assert abs(energy(planar, world.state) - e0) / world.t <= 1e-5


def test_diverged_simulation_dumps_state(planar):
    s, _ = planar_stance(planar)
    world = SimWorld(planar, s, Terrain.flat(), watch=(), v_max=1.0)
    with pytest.raises(SimulationDivergedError) as info:
        world.advance(np.full(planar.n_actuated, 500.0), 100)
    assert "qdot" in info.value.state_dump


def test_world_rejects_bad_dt(planar):
    s, _ = planar_stance(planar)
    with pytest.raises(ConfigError):
        SimWorld(planar, s, dt=1e-2)


def test_step_is_one_substep(planar):
    s, _ = planar_stance(planar)
    world = SimWorld(planar, s, Terrain.flat(), watch=())
    step(world, np.zeros(planar.n_actuated))
    assert world.t == pytest.approx(world.dt)


def test_push_force_maps_to_generalized_force(spatial):
    s, _ = spatial_stance(spatial)
    world = SimWorld(spatial, s, pushes=[Push(0.0, 0.1, np.array([10.0, 0, 0]))])
    f = world.external_generalized_force(0.05)
    assert f[spatial.coordinate("base_x")] == pytest.approx(10.0)
    assert not world.external_generalized_force(0.2).any()


def test_friction_violation_detaches(planar):
    s, feet = planar_stance(planar)
    world = SimWorld(planar, s, Terrain.flat(), mu=0.1, watch=())
    for f in feet:
        world.add_contact(f)
    tau = holding_torque(world)
    # a large hip torque pair drags both feet sideways
    tau[[0, 2]] += 60.0
    events = world.advance(tau, 10)
    assert events and events[0].kind in ("friction", "unilateral")
    assert events[0].name not in world.contact_names


# --- joint torque model ------------------------------------------------------------------------

def test_sea_ideal_pass_through():
    bank = SeaBank(4, IDEAL)
    tau = np.array([1.0, -2.0, 3.5, 0.0])
    np.testing.assert_array_equal(bank.deliver(tau, np.zeros(4), 1e-3), tau)


@pytest.mark.parametrize("kp", [50.0, 100.0])
def test_sea_lag_time_constant(kp):
    joint = SeaJoint(kp_tau=kp, mode=SEA_LAG)
    dt = 1e-3
    out = [sea_joint_torque(joint, 1.0, 0.0, dt) for _ in range(50)]
    t = dt * np.arange(1, 51)
    np.testing.assert_allclose(out, 1 - np.exp(-t / joint.time_constant), atol=1e-12)
    assert joint.time_constant == pytest.approx(1 / (joint.beta * kp))


def test_swing_gains_reduce_friction_error():
    def steady_error(kp, ki):
        joint = SeaJoint(kp_tau=kp, ki_tau=ki, mode=SEA_LAG, dry_friction=2.0)
        for _ in range(3000):
            out = sea_joint_torque(joint, 10.0, 0.5, 1e-3)
        return abs(10.0 - out)

    stance, swing = steady_error(94, 0), steady_error(200, 22)
    assert stance == pytest.approx(2.0, rel=1e-3)
    assert swing < 0.1 * stance


def test_sea_rejects_bad_mode():
    with pytest.raises(ConfigError):
        SeaJoint(mode="magic")


# --- swing curve -------------------------------------------------------------------------------

def test_lift_and_return():
    start = np.array([0.1, -0.15, 0.0])
    traj = SwingTrajectory(start, start, 0.0, 0.23, 0.26, apex=0.05, touchdown_speed=0.0)
    ts = np.linspace(0, 0.49, 200)
    p = np.array([traj(t)[0] for t in ts])
    np.testing.assert_allclose(p[:, :2], np.broadcast_to(start[:2], (len(ts), 2)), atol=1e-12)
    assert p[:, 2].max() <= 0.05 + 1e-12
    assert traj(0.23)[0][2] == pytest.approx(0.05, abs=1e-12)
    np.testing.assert_allclose(traj(0.49)[0], start, atol=1e-12)


def test_swing_function_matches_class():
    p, v, a = swing_trajectory([0, 0, 0], [0.2, 0, 0], 0.1)
    q, w, b = SwingTrajectory([0, 0, 0], [0.2, 0, 0], 0.0, 0.23, 0.26)(0.1)
    np.testing.assert_array_equal(p, q)
    np.testing.assert_array_equal(a, b)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-0.4, 0.4), min_size=3, max_size=3), st.lists(st.floats(-0.4, 0.4), min_size=3, max_size=3))
def test_swing_endpoints_and_smoothness(start, target):
    start, target = np.array(start), np.array(target)
    traj = SwingTrajectory(start, target, 1.0, 0.23, 0.26)
    p, v, a = traj(traj.t1)
    np.testing.assert_allclose(p, target, atol=1e-12)
    np.testing.assert_allclose(v, [0, 0, -traj.touchdown_speed], atol=1e-10)
    np.testing.assert_allclose(a, 0.0, atol=1e-8)
    p0, v0, a0 = traj(traj.t0)
    np.testing.assert_allclose(p0, start, atol=1e-12)
    np.testing.assert_allclose(v0, 0.0, atol=1e-10)
    np.testing.assert_allclose(a0, 0.0, atol=1e-8)
    # C2 at every knot of every axis
    for curve in traj.axes.values():
        for k in curve.knots[1:-1]:
            left, right = np.array(curve(k - 1e-9)), np.array(curve(k + 1e-9))
            np.testing.assert_allclose(left, right, atol=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.26, 0.47), st.lists(st.floats(-0.3, 0.3), min_size=3, max_size=3))
def test_retarget_is_continuous(t_re, new):
    traj = SwingTrajectory([0, 0, 0], [0.2, 0.1, 0.0], 0.0, 0.23, 0.26)
    before = np.array(traj(t_re))
    new = np.array(new)
    new[2] = 0.0
    traj.retarget(t_re, new)
    after = np.array(traj(t_re))
    np.testing.assert_allclose(after, before, atol=1e-6)
    np.testing.assert_allclose(traj(traj.t1)[0], new, atol=1e-12)


def test_reschedule_moves_end():
    traj = SwingTrajectory([0, 0, 0], [0.2, 0, 0], 0.0, 0.23, 0.26)
    before = np.array(traj(0.2))
    traj.reschedule(0.2, 0.4, np.array([0.25, 0, 0]))
    np.testing.assert_allclose(np.array(traj(0.2)), before, atol=1e-9)
    assert traj.t1 == pytest.approx(0.4)
    np.testing.assert_allclose(traj(0.4)[0], [0.25, 0, 0], atol=1e-12)


def test_piecewise_cubic_condition_count():
    with pytest.raises(ValueError):
        PiecewiseCubic([0, 1, 2], [(0, 0, 0.0), (2, 0, 1.0)])
    with pytest.raises(ValueError):
        PiecewiseCubic([0, 0], [(0, 0, 0.0)] * 3)


def test_piecewise_cubic_outside_range():
    c = PiecewiseCubic([0, 1], [(0, 0, 0.0), (0, 1, 0.0), (1, 0, 1.0), (1, 1, 2.0)])
    assert c(-1.0) == (0.0, 0.0, 0.0)
    p, v, a = c(2.0)
    assert (p, v, a) == pytest.approx((3.0, 2.0, 0.0))


# --- phase machine -----------------------------------------------------------------------------

def test_phase_sequence_with_transitions():
    m = WalkingStateMachine(PhaseTimes(), transitions=True)
    seen = [m.phase]
    t = 0.0
    for _ in range(2000):
        t += 1e-3
        new = m.update(t, touchdown=(m.phase == sm.LANDING and m.clock(t) >= 0.26))
        if new:
            seen.append(new)
        if m.steps == 2 and m.phase == sm.DUAL:
            break
    cycle = [sm.DUAL, sm.TRANSITION_LIFT, sm.LIFTING, sm.LANDING, sm.TRANSITION_LAND]
    assert seen == cycle * 2 + [sm.DUAL]
    assert m.swing == "l_foot"


def test_landing_waits_for_touchdown():
    m = WalkingStateMachine(PhaseTimes(), transitions=False)
    t = 0.0
    while m.phase != sm.LANDING:
        t += 1e-3
        m.update(t)
    for _ in range(2000):
        t += 1e-3
        assert m.update(t) is None
    assert m.update(t, touchdown=True) == sm.DUAL
    assert m.steps == 1 and m.swing == "r_foot"


def test_early_touchdown_during_lifting_counts():
    m = WalkingStateMachine(PhaseTimes(), transitions=False)
    m.update(0.08)
    assert m.phase == sm.LIFTING
    assert m.update(0.1, touchdown=True) == sm.DUAL


def test_transitions_skipped_when_zero():
    m = WalkingStateMachine(PhaseTimes(transition=0.0), transitions=True)
    assert m.update(0.08) == sm.LIFTING


def test_phase_times_validation():
    with pytest.raises(ConfigError):
        PhaseTimes(lifting=0.0)
    with pytest.raises(ConfigError):
        PhaseTimes(transition=-0.1)
    with pytest.raises(ConfigError):
        WalkingStateMachine(first_swing="hand")


# --- references and metrics --------------------------------------------------------------------

def test_ellipse_reference_ramp_and_derivatives():
    centre = np.array([0.0, 0.95])
    x, v, a = ellipse_reference(0.0, centre, (0.03, 0.02), 5.0, 1.0)
    np.testing.assert_allclose(x, centre, atol=1e-15)
    np.testing.assert_allclose(v, 0.0, atol=1e-15)
    h = 1e-6
    for t in (0.5, 1.5, 3.0):
        xp, vp, _ = ellipse_reference(t + h, centre, (0.03, 0.02), 5.0, 1.0)
        xm, vm, _ = ellipse_reference(t - h, centre, (0.03, 0.02), 5.0, 1.0)
        x, v, a = ellipse_reference(t, centre, (0.03, 0.02), 5.0, 1.0)
        np.testing.assert_allclose((xp - xm) / (2 * h), v, atol=1e-7)
        np.testing.assert_allclose((vp - vm) / (2 * h), a, atol=1e-6)


def test_settling_time_damped_oscillation():
    t = np.arange(0, 5, 1e-3)
    err = np.where(t < 1.0, 0.001, 0.001 + 0.05 * np.exp(-(t - 1.0) / 0.2) * np.cos(8 * (t - 1.0)))
    ts = settling_time(t, err, 1.0, 1.1)
    envelope = 0.2 * np.log(1 / 0.05)
    assert 0.3 < ts < envelope


def test_settling_time_no_push_response():
    t = np.arange(0, 2, 1e-3)
    assert settling_time(t, np.zeros_like(t), 1.0, 1.1) == 0.0


# --- sensing -----------------------------------------------------------------------------------

def _turning_states(model, n, rate=(0.0, 0.4, 0.6)):
    s, _ = spatial_stance(model)
    out = []
    for k in range(n):
        q = s.q.copy()
        t = k * 1e-3
        q[model.coordinate("base_yaw")] = rate[0] * t
        q[model.coordinate("base_pitch")] = 0.1 * np.sin(rate[1] * 10 * t)
        q[model.coordinate("base_roll")] = 0.1 * np.sin(rate[2] * 10 * t)
        out.append(GeneralizedState(q, np.zeros(model.n_dofs), t))
    return out


def test_sensing_without_noise_tracks_truth(spatial):
    states = _turning_states(spatial, 300)
    sense = TorsoSensing(spatial, states[0], 1e-3, np.random.default_rng(0))
    for s in states[1:]:
        view = sense.update(s)
        np.testing.assert_allclose(view.q, s.q, atol=1e-9)
    assert sense.buf.diagnostics.updates > 100


def test_sensing_with_noise_is_bounded(spatial):
    states = _turning_states(spatial, 600)
    sense = TorsoSensing(spatial, states[0], 1e-3, np.random.default_rng(0), gyro_noise=0.01, led_noise=1e-3)
    errs = []
    for s in states[1:]:
        sense.update(s)
        errs.append(sense.error(s))
    assert max(errs) < 0.02


# --- scenarios ---------------------------------------------------------------------------------

def test_unilateral_forces_nonnegative():
    cfg = resolve("stepping", ["sim.duration=1.4", "sim.log_every=1"])
    r = run_scenario("stepping", cfg)
    assert r.status == "completed" and r.summary["touchdowns"] >= 2
    cols = {c: i for i, c in enumerate(r.columns)}
    rows = np.array([[row[cols[f"lam_{f}_z"]] for f in ("r_foot", "l_foot")] for row in r.rows], dtype=float)
    normal = -rows[~np.isnan(rows)]
    assert normal.size and normal.min() >= -1e-9


def test_determinism(tmp_path):
    cfg = resolve("split_terrain", ["sim.duration=0.2", "sim.com_noise=0.001", "seed=7"])
    a = run_scenario("split_terrain", cfg)
    b = run_scenario("split_terrain", cfg)
    write_outputs(a, tmp_path / "a", cfg, ["sim.com_noise=0.001"])
    write_outputs(b, tmp_path / "b", cfg, ["sim.com_noise=0.001"])
    assert (tmp_path / "a" / "timeseries.csv").read_bytes() == (tmp_path / "b" / "timeseries.csv").read_bytes()
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    c = run_scenario("split_terrain", resolve("split_terrain", ["sim.duration=0.2", "sim.com_noise=0.001",
                                                                "seed=8"]))
    assert c.rows != a.rows


def test_summary_contents(tmp_path):
    cfg = resolve("split_terrain", ["sim.duration=0.1"])
    r = run_scenario("split_terrain", cfg)
    write_outputs(r, tmp_path, cfg, ["sim.duration=0.1"])
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["status"] == "completed" and doc["overrides"] == ["sim.duration=0.1"]
    assert doc["resolved_config"]["sim"]["duration"] == 0.1
    assert {"com_error_max", "tau_jump_max"} <= set(doc["envelopes"])


def test_weak_internal_force_falls():
    cfg = resolve("split_terrain", ["internal_force.ref=10", "sim.duration=0.5"])
    r = run_scenario("split_terrain", cfg)
    assert r.fell and r.summary["fall_reason"].startswith("friction")


def test_estimator_state_source_runs():
    cfg = resolve("stepping", ["sim.state_source=\"estimator\"", "sim.duration=0.7"])
    r = run_scenario("stepping", cfg)
    assert r.status == "completed" and r.summary["touchdowns"] >= 1
    assert r.summary["envelopes"]["orientation_error_max"] < 1e-6


def test_planar_walking_short():
    cfg = resolve("undirected_walking", ["sim.duration=2.0"])
    r = run_scenario("undirected_walking", cfg)
    assert r.status == "completed" and r.summary["steps_completed"] >= 2
    rows = r.plan_log.rows
    assert rows and all(abs(row["reversal_xdot"]) <= 1e-4 for row in rows)
    assert all(np.isfinite(row["p_achieved"]) for row in rows[:r.summary["steps_completed"]])
