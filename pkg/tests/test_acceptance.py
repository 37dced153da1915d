"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Timed sections are preceded by a short untimed warm-up so that JIT
compilation is not billed to the runtime limits.
"""

import time

import numpy as np
import pytest

from pointfoot import oracles
from pointfoot.config import resolve
from pointfoot.estimator import (
    AffineParams,
    FusionBuffer,
    LedPattern,
    Weights,
    build_regressor,
    closest_quaternion,
    run_fusion,
    solve_regularized,
    synthetic_trace,
)
from pointfoot.estimator import quaternion as Q
from pointfoot.model import GeneralizedState, Kinematics, random_state
from pointfoot.model.dynamics import bias_forces
from pointfoot.planner import HeightSurface, PipmState, find_footstep
from pointfoot.sim import SimWorld, Terrain, run_scenario
from pointfoot.sim.scenarios import ScenarioRunner
from pointfoot.wbosc import (
    constrained_forward_dynamics,
    contact_set_from_kinematics,
    point_contact,
    projection,
)

FEET = (("r_foot",), ("r_foot", "l_foot"))


def contacts(model, state, names):
    kin = Kinematics(model, state)
    terms = kin.terms()
    return terms, contact_set_from_kinematics(kin, terms, [point_contact(model, n) for n in names])


def scenario(name, *sets):
    cfg = resolve(name, list(sets))
    return run_scenario(cfg["scenario"], cfg)


# --- 1, 2: projectors --------------------------------------------------------------------------------

def test_01_projector_suite(planar, spatial, criterion):
    with criterion(1, "projector suite") as c:
        rng = np.random.default_rng(100)
        for model in (planar, spatial):
            for names in FEET:
                projection(model.U, contacts(model, random_state(model, rng), names)[1])
        worst = dict.fromkeys(["J_s N_s", "N_s^2 - N_s", "N_s A^-1 J_s^T", "L*^2 - L*", "(U N_s)^T L*^T"], 0.0)
        t0 = time.perf_counter()
        n = 0
        for model in (planar, spatial):
            for names in FEET:
                for _ in range(250):
                    _, cs = contacts(model, random_state(model, rng), names)
                    L = projection(model.U, cs).L_star
                    for key, M in zip(worst, (cs.J_s @ cs.N_s, cs.N_s @ cs.N_s - cs.N_s, cs.N_s @ cs.A_inv @ cs.J_s.T,
                                              L @ L - L, (model.U @ cs.N_s).T @ L.T)):
                        worst[key] = max(worst[key], float(np.abs(M).max()))
                    n += 1
        elapsed = time.perf_counter() - t0
        c.note(f"{n} configs, worst {max(worst.values()):.1e}, {elapsed:.2f} s")
        assert n == 1000
        for key, v in worst.items():
            assert v <= 1e-10, key
        assert elapsed < 10.0


def test_02_internal_force_orthogonality(planar, spatial, criterion):
    with criterion(2, "internal-force orthogonality") as c:
        rng = np.random.default_rng(200)
        worst = 0.0
        for model in (planar, spatial):
            for _ in range(100):
                terms, cs = contacts(model, random_state(model, rng), FEET[1])
                L = projection(model.U, cs).L_star
                tau_int = rng.normal(0, 100, model.n_actuated)
                # the motion due to L*^T tau_int alone: drift from gravity, bias and Jdot*qdot cancels
                qdd, _ = constrained_forward_dynamics(terms, cs, L.T @ tau_int, model.U)
                qdd0, _ = constrained_forward_dynamics(terms, cs, np.zeros(model.n_actuated), model.U)
                worst = max(worst, float(np.linalg.norm(qdd - qdd0)))
        c.note(f"max |qdd| = {worst:.1e}")
        assert worst <= 1e-8


# --- 3: closed-loop task law -----------------------------------------------------------------------

def _task_law(ticks):
    cfg = resolve("split_terrain", ["sim.omit_coriolis=false", 'com_reference.kind="hold"'])
    r = ScenarioRunner("split_terrain", cfg)
    z = r.tasks["COM_z"]
    z.set_reference(z.x_ref + 0.01)
    err = 0.0
    for _ in range(ticks):
        kin = Kinematics(r.model, r.world.state)
        terms = kin.terms(include_rotor_inertia=True)
        info, _ = r._dual_command(kin, terms, r.control_dt)
        qdd, _ = r.world.acceleration(info.tau)
        acc = []
        for name in r.dual_names:
            _, J, Jdqd = r.tasks[name].kinematics(kin)[:3]
            acc.append(J @ qdd + Jdqd)
        err = max(err, float(np.abs(np.concatenate(acc) - info.task_u).max()))
        r.tau_del = info.tau
        assert not r.world.advance(info.tau, r.n_sub)
    return err


def test_03_closed_loop_task_law(criterion):
    with criterion(3, "closed-loop task law") as c:
        _task_law(2)
        t0 = time.perf_counter()
        err = _task_law(500)
        elapsed = time.perf_counter() - t0
        c.note(f"max |xdd - u| = {err:.1e} over 0.5 s, {elapsed:.2f} s")
        assert err <= 1e-4
        assert elapsed < 5.0


# --- 4, 5: split terrain ----------------------------------------------------------------------------

@pytest.mark.slow
def test_04_split_terrain(criterion):
    with criterion(4, "split terrain") as c:
        scenario("split_terrain", "sim.duration=0.01")
        t0 = time.perf_counter()
        r = scenario("split_terrain", "internal_force.ref=100")
        elapsed = time.perf_counter() - t0
        env = r.summary["envelopes"]
        c.note(f"100 N: {r.status}, COM err {env['com_error_max'] * 100:.3f} cm, "
               f"F_int err {env['internal_force_steady_max']:.2e} N, {elapsed:.0f} s")
        assert r.status == "completed" and r.summary["t_end"] == pytest.approx(30.0)
        assert {"l_foot", "r_foot"} <= set(r.summary["contacts_at_end"])
        assert not [e for e in r.summary["events"] if e["kind"] != "touchdown"]
        assert env["com_error_max"] <= 0.02
        assert env["internal_force_steady_max"] <= 5.0
        assert elapsed < 120.0
        weak = scenario("split_terrain", "internal_force.ref=10")
        c.note(f"10 N: {weak.summary['fall_reason']}")
        assert weak.fell and weak.summary["fall_reason"].startswith("friction")


@pytest.mark.slow
def test_05_push_recovery(criterion):
    with criterion(5, "push recovery") as c:
        r = scenario("push_recovery")
        settle = r.summary["push_settling"]
        c.note(f"{r.status}, settling {', '.join(f'{s:.3f}' for s in settle)} s")
        assert r.status == "completed"
        assert settle and max(settle) <= 1.0


# --- 6: stepping ------------------------------------------------------------------------------------

@pytest.mark.slow
def test_06_stepping(criterion):
    with criterion(6, "stepping") as c:
        on = scenario("stepping")
        off = scenario("stepping", "stepping.transitions=false")
        env = on.summary["envelopes"]
        ratio = off.summary["envelopes"]["tau_jump_max"] / env["tau_jump_max"]
        c.note(f"{on.summary['steps_completed']} steps, COM_z err {env['com_z_error_max'] * 100:.3f} cm, "
               f"pitch err {env['pitch_error_max']:.1e} rad, torque-jump ratio {ratio:.1f}x")
        assert on.status == "completed" and on.summary["steps_completed"] >= 20
        assert env["com_z_error_max"] <= 0.02
        assert env["pitch_error_max"] <= 0.15
        assert ratio >= 10.0


# --- 7: planner oracle ------------------------------------------------------------------------------

def test_07_planner_oracle(criterion):
    with criterion(7, "planner oracle") as c:
        flat = HeightSurface.flat(1.0)
        rng = np.random.default_rng(700)
        x0 = rng.uniform(-0.2, 0.2, 1000)
        v0 = rng.uniform(-0.6, 0.6, 1000)
        tp = rng.uniform(0.15, 0.35, 1000)
        for a, b, t in zip(x0[:3], v0[:3], tp[:3]):
            find_footstep(PipmState(0, a, b, 0.0), flat, t, 1.0)
        t0 = time.perf_counter()
        p = np.array([find_footstep(PipmState(0, a, b, 0.0), flat, t, 1.0).p for a, b, t in zip(x0, v0, tp)])
        elapsed = time.perf_counter() - t0
        err = float(np.abs(p - oracles.lip_reversal_footstep(x0, v0, tp, 1.0)).max())
        c.note(f"max |p - closed form| = {err:.1e} m, {elapsed:.2f} s")
        assert err <= 1e-5
        assert elapsed < 5.0


# --- 8: undirected walking --------------------------------------------------------------------------

@pytest.mark.slow
def test_08_undirected_walking(criterion):
    with criterion(8, "undirected walking") as c:
        t0 = time.perf_counter()
        planar = scenario("undirected_walking")
        spatial = scenario("undirected_walking_3d")
        elapsed = time.perf_counter() - t0
        n2, n3 = planar.summary["steps_completed"], spatial.summary["steps_completed"]
        speed = spatial.summary["envelopes"]["com_speed_max"]
        c.note(f"planar {n2} steps ({planar.status}), 3D {n3} steps ({spatial.status}), "
               f"3D max COM speed {speed:.2f} m/s, {elapsed:.0f} s")
        assert not planar.fell and n2 >= 23
        if n2 < 50:
            c.note("planar stretch target of 50 steps missed")
        assert not spatial.fell and n3 >= 50
        assert speed <= 1.0
        assert elapsed < 300.0


# --- 9: estimator -----------------------------------------------------------------------------------

def test_09_estimator_suite(criterion):
    with criterion(9, "estimator suite") as c:
        pattern = LedPattern.default()
        rng = np.random.default_rng(900)
        R = build_regressor(pattern)
        w = Weights.half_life(pattern)
        rel = 0.0
        for _ in range(50):
            A, x = Q.to_matrix(Q.normalize(rng.normal(size=4))), rng.normal(size=3)
            prior = AffineParams(x, A + rng.normal(0, 0.05, (3, 3)))
            post = solve_regularized(R, x + pattern.points @ A.T, np.ones(7, bool), prior, w)
            half = 0.5 * (prior.A - A)
            rel = max(rel, float(np.linalg.norm(post.A - A - half) / np.linalg.norm(half)))
        c.note(f"half-life rel err {rel:.1e}")
        assert rel <= 1e-9

        worst_angle, worst_gap = 0.0, np.inf
        for seed in range(3):
            g = np.random.default_rng(910 + seed)
            A = Q.to_matrix(Q.normalize(g.normal(size=4))) + g.normal(0, 0.05, (3, 3))
            q = closest_quaternion(A)
            best = oracles.closest_quaternion_monte_carlo(A, rng=np.random.default_rng(seed))
            score = lambda p: np.trace(A.T @ Q.to_matrix(p))
            worst_angle = max(worst_angle, Q.angle_between(q, best))
            worst_gap = min(worst_gap, score(q) - score(best))
        c.note(f"quaternion vs Monte Carlo: angle {worst_angle:.3f} rad, score gap {worst_gap:.1e}")
        # 1e6 uniform samples resolve the optimum to a few hundredths of a radian
        assert worst_angle < 0.05 and worst_gap >= -1e-12

        trace = synthetic_trace(1.0, lambda t: (0.0, 0.0, 1.0), pattern, gyro_noise=1e-3, led_noise=2e-4, seed=3)
        lag = {}
        for comp in (True, False):
            est, _ = run_fusion(trace, FusionBuffer(pattern, trace.truth[0], latency_ticks=15, compensate=comp))
            lag[comp] = np.mean([Q.angle_between(a, b) for a, b in zip(est[300:], trace.truth[300:])])
        c.note(f"latency compensation gain {lag[False] / lag[True]:.1f}x")
        assert lag[False] >= 5 * lag[True]


# --- 10: dynamics oracles ---------------------------------------------------------------------------

def _energy(model, state):
    kin = Kinematics(model, state)
    v = state.qdot
    return 0.5 * float(v @ kin.mass_matrix(include_rotor_inertia=True) @ v) + kin.potential_energy()


def test_10_dynamics_oracles(planar, spatial, criterion):
    with criterion(10, "dynamics oracles") as c:
        rng = np.random.default_rng(1000)
        err = dict.fromkeys(["mass", "jacobian", "gravity", "drift"], 0.0)
        for model in (planar, spatial):
            for _ in range(20):
                s = random_state(model, rng)
                kin = Kinematics(model, s)
                A = kin.mass_matrix()
                err["mass"] = max(err["mass"], float(np.abs(A - oracles.mass_matrix_by_inverse_dynamics(model, s)).max()))
                _, g = bias_forces(model, s)
                err["gravity"] = max(err["gravity"], float(np.abs(g - oracles.potential_gradient_fd(model, s)).max()))
                for body in range(model.n_base - 1, model.n_dofs):
                    off = rng.uniform(-0.3, 0.3, 3)
                    if model.mode == "planar":
                        off[1] = 0.0
                    J = kin.point(body, off)[1]
                    fd = oracles.point_velocity_fd(model, s, body, off)
                    err["jacobian"] = max(err["jacobian"], float(np.abs(J @ s.qdot - fd).max()))
            q = rng.normal(0, 0.3, model.n_dofs)
            q[model.coordinate("base_z")] = 50.0
            world = SimWorld(model, GeneralizedState(q, rng.normal(0, 1.0, model.n_dofs)), Terrain.flat(),
                             dt=1e-4, watch=())
            e0 = _energy(model, world.state)
            world.advance(np.zeros(model.n_actuated), 10_000)
            err["drift"] = max(err["drift"], abs(_energy(model, world.state) - e0) / world.t)
        c.note(", ".join(f"{k} {v:.1e}" for k, v in err.items()))
        assert err["mass"] <= 1e-9
        assert err["jacobian"] <= 1e-6
        assert err["gravity"] <= 1e-6
        assert err["drift"] <= 1e-5
