import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pointfoot.errors import (
    ConfigError,
    DegenerateGeometryError,
    IllConditionedTaskError,
    SingularContactError,
    TransitionSetupError,
    UndefinedInternalForceError,
)
from pointfoot.model import GeneralizedState, Joint, Kinematics, Link, RobotModel, random_state
from pointfoot.model.dynamics import DynamicsTerms
from pointfoot.wbosc import (
    InternalForceSpec,
    Task,
    TransitionState,
    actual_internal_force,
    build_contact_set,
    build_W_int,
    constrained_forward_dynamics,
    contact_set_from_kinematics,
    coordinate_lock,
    damped_pinv,
    embed_W_int,
    internal_force_terms,
    internal_torque,
    point_contact,
    projection,
    swing_reaction,
    task_force,
    task_jacobian_star,
    transition_command,
    whole_body_command,
)


def stance(model, z=0.9, legs=(-0.3, 0.6, 0.2, -0.5)):
    q = np.zeros(model.n_dofs)
    q[model.coordinate("base_z")] = z
    if model.mode == "planar":
        q[3:] = legs
    else:
        q[model.n_base:] = [0.05, legs[0], legs[1], -0.05, legs[2], legs[3]]
    return GeneralizedState(q, np.zeros(model.n_dofs))


def setup(model, state, names=("r_foot", "l_foot"), lock=None):
    kin = Kinematics(model, state)
    terms = kin.terms()
    cs = [point_contact(model, n) for n in names]
    if lock:
        cs.append(coordinate_lock(model, lock))
    contacts = contact_set_from_kinematics(kin, terms, cs)
    return kin, terms, contacts


def no_bias(terms):
    return DynamicsTerms(terms.A, np.zeros_like(terms.b), np.zeros_like(terms.g))


# --- contact set ---------------------------------------------------------------------

def test_point_mass_single_contact_removes_translation():
    tiny = ((0.01, 0, 0), (0, 0.01, 0), (0, 0, 0.01))
    model = RobotModel("m", "spatial", (Link("b", None, Joint("floating-base"), 2.0, (0, 0, 0), tiny),))
    s = random_state(model, np.random.default_rng(0))
    kin = Kinematics(model, s)
    terms = kin.terms()
    cs = build_contact_set(terms, [kin.point(model.n_dofs - 1, (0, 0, 0))[1]])
    assert np.linalg.matrix_rank(cs.N_s, tol=1e-9) == 3
    np.testing.assert_allclose(cs.J_s @ cs.N_s, 0, atol=1e-12)


@pytest.mark.parametrize("name", ["planar", "spatial"])
@pytest.mark.parametrize("feet", [("r_foot",), ("r_foot", "l_foot")])
def test_projector_identities(name, feet, request):
    model = request.getfixturevalue(name)
    rng = np.random.default_rng(5)
    for _ in range(50):
        kin, terms, cs = setup(model, random_state(model, rng), feet)
        proj = projection(model.U, cs)
        L = proj.L_star
        assert np.abs(cs.J_s @ cs.N_s).max() <= 1e-10
        assert np.abs(cs.N_s @ cs.N_s - cs.N_s).max() <= 1e-10
        assert np.abs(cs.N_s @ cs.A_inv @ cs.J_s.T).max() <= 1e-10
        assert np.abs(L @ L - L).max() <= 1e-10
        assert np.abs((model.U @ cs.N_s).T @ L.T).max() <= 1e-10


def test_lambda_s_dense_oracle(spatial):
    kin, terms, cs = setup(spatial, random_state(spatial, np.random.default_rng(3)))
    M = cs.J_s @ np.linalg.inv(terms.A) @ cs.J_s.T
    np.testing.assert_allclose(cs.Lambda_s, np.linalg.inv(M), rtol=1e-9, atol=1e-9)


def test_singular_contacts_report_singular_values(planar):
    kin = Kinematics(planar, stance(planar))
    terms = kin.terms()
    J = kin.named_point("r_foot")[1]
    with pytest.raises(SingularContactError) as err:
        build_contact_set(terms, [J, J])
    assert err.value.singular_values is not None and len(err.value.singular_values) == 4


# --- constrained forward dynamics ----------------------------------------------------------

def kkt_oracle(terms, cs, tau, U):
    n, m = terms.A.shape[0], cs.n_rows
    K = np.block([[terms.A, cs.J_s.T], [cs.J_s, np.zeros((m, m))]])
    rhs = np.concatenate([U.T @ tau - terms.b - terms.g, -cs.Jdot_s_qdot])
    x = np.linalg.solve(K, rhs)
    return x[:n], x[n:]


@pytest.mark.parametrize("name", ["planar", "spatial"])
def test_forward_dynamics_matches_kkt(name, request):
    model = request.getfixturevalue(name)
    rng = np.random.default_rng(8)
    for _ in range(20):
        s = random_state(model, rng)
        kin, terms, cs = setup(model, s)
        tau = rng.normal(0, 20, model.n_actuated)
        qdd, lam = constrained_forward_dynamics(terms, cs, tau, model.U)
        qdd_o, lam_o = kkt_oracle(terms, cs, tau, model.U)
        np.testing.assert_allclose(qdd, qdd_o, atol=1e-9)
        np.testing.assert_allclose(lam, lam_o, atol=1e-9 * max(1, np.abs(lam_o).max()))
        np.testing.assert_allclose(cs.J_s @ qdd + cs.Jdot_s_qdot, 0, atol=1e-8)


def test_static_dual_support_weight(planar):
    s = stance(planar)
    kin, terms, cs = setup(planar, s)
    tasks = [Task("com_x", "com-planar-position", 50, 0, 5), Task("com_z", "com-height", 50, 0, 5),
             Task("pitch", "body-pitch", 50, 0, 5)]
    tau = whole_body_command(kin, terms, tasks, cs).tau
    qdd, lam = constrained_forward_dynamics(terms, cs, tau, planar.U)
    np.testing.assert_allclose(qdd, 0, atol=1e-9)
    # lam is what the robot exerts on the ground: it pushes down with its weight
    assert -(lam[1] + lam[3]) == pytest.approx(planar.total_mass * 9.81, rel=1e-12)


def test_vertical_momentum_balance(spatial):
    rng = np.random.default_rng(2)
    s = random_state(spatial, rng)
    kin, terms, cs = setup(spatial, s)
    qdd, lam = constrained_forward_dynamics(terms, cs, rng.normal(0, 10, 6), spatial.U)
    _, Jc, ac = kin.com()
    cdd = Jc @ qdd + ac
    reaction = -(lam[0:3] + lam[3:6])
    np.testing.assert_allclose(reaction, spatial.total_mass * (cdd + [0, 0, 9.81]), atol=1e-8)


@pytest.mark.parametrize("name", ["planar", "spatial"])
def test_internal_torque_produces_no_motion(name, request):
    model = request.getfixturevalue(name)
    rng = np.random.default_rng(11)
    for _ in range(100):
        kin, terms, cs = setup(model, random_state(model, rng))
        L = projection(model.U, cs).L_star
        tau = L.T @ rng.normal(0, 100, model.n_actuated)
        qdd, _ = constrained_forward_dynamics(terms, cs, tau, model.U)
        qdd0, _ = constrained_forward_dynamics(terms, cs, np.zeros(model.n_actuated), model.U)
        assert np.linalg.norm(qdd - qdd0) <= 1e-8


# --- task space ---------------------------------------------------------------------------------

def test_constrained_foot_has_zero_task_jacobian(planar):
    kin, terms, cs = setup(planar, random_state(planar, np.random.default_rng(1)), ("r_foot",))
    J = kin.named_point("r_foot")[1]
    np.testing.assert_allclose(task_jacobian_star(J, projection(planar.U, cs)), 0, atol=1e-10)


def test_com_height_rate_along_consistent_velocity(planar):
    rng = np.random.default_rng(4)
    s = random_state(planar, rng)
    kin, terms, cs = setup(planar, s)
    qdot = cs.N_s @ s.qdot
    J = kin.com((2,))[1]
    Js = task_jacobian_star(J, projection(planar.U, cs))
    h = 1e-7
    z = [Kinematics(planar, GeneralizedState(s.q + k * h * qdot, qdot)).com((2,))[0][0] for k in (1, -1)]
    assert (Js @ (planar.U @ qdot))[0] == pytest.approx((z[0] - z[1]) / (2 * h), abs=1e-6)


def test_swing_foot_task_full_rank(spatial):
    kin, terms, cs = setup(spatial, stance(spatial), ("r_foot",))
    J = kin.named_point("l_foot")[1]
    Js = task_jacobian_star(J, projection(spatial.U, cs))
    assert np.linalg.matrix_rank(Js) == 3


def test_zero_error_gravity_off_gives_zero_force(planar):
    kin, terms, cs = setup(planar, stance(planar))
    proj = projection(planar.U, cs)
    J = kin.com((2,))[1]
    tf = task_force(J, np.zeros(1), np.zeros(1), no_bias(terms), cs, proj)
    np.testing.assert_allclose(tf.F, 0, atol=1e-14)


def test_ill_conditioned_task(planar):
    kin, terms, cs = setup(planar, stance(planar))
    J = kin.com((2,))[1]
    with pytest.raises(IllConditionedTaskError) as err:
        task_force(np.vstack([J, J]), np.zeros(2), np.zeros(2), terms, cs, projection(planar.U, cs))
    assert err.value.condition_number > 1e10


@pytest.mark.parametrize("name,feet,extra", [
    ("planar", ("r_foot", "l_foot"), ("com_x",)),
    ("planar", ("r_foot",), ("foot",)),
    ("spatial", ("r_foot", "l_foot"), ("com_x", "roll")),
    ("spatial", ("r_foot",), ("foot", "roll")),
])
def test_one_tick_task_law(name, feet, extra, request):
    # xdd_task = u for random state, references and gains
    model = request.getfixturevalue(name)
    rng = np.random.default_rng(6)
    catalogue = {
        "com_x": Task("com_x", "com-planar-position", 40, 0, 10),
        "roll": Task("roll", "body-roll", 80, 0, 10),
        "foot": Task("foot", "foot-position", 300, 0, 20, point="l_foot"),
    }
    for _ in range(10):
        s = stance(model)
        s.q += rng.normal(0, 0.05, model.n_dofs)
        s.qdot = rng.normal(0, 0.5, model.n_dofs)
        kin, terms, cs = setup(model, s, feet)
        tasks = [Task("com_z", "com-height", 200, 0, 20), Task("pitch", "body-pitch", 150, 0, 15)]
        tasks += [catalogue[k] for k in extra]
        for t in tasks:
            x, J, _ = t.kinematics(kin)
            t.set_reference(x + rng.normal(0, 0.02, len(x)), rng.normal(0, 0.1, len(x)))
        info = whole_body_command(kin, terms, tasks, cs)
        qdd, _ = constrained_forward_dynamics(terms, cs, info.tau, model.U)
        acc = np.concatenate([t.kinematics(kin)[1] @ qdd + t.kinematics(kin)[2] for t in tasks])
        np.testing.assert_allclose(acc, info.task_u, atol=1e-6)


def test_omit_coriolis_breaks_law_only_through_velocity(planar):
    s = stance(planar)
    s.qdot = np.random.default_rng(0).normal(0, 1, 7)
    kin, terms, cs = setup(planar, s)
    tasks = [Task("com_x", "com-planar-position", 10), Task("com_z", "com-height", 10), Task("p", "body-pitch", 10)]
    full = whole_body_command(kin, terms, tasks, cs).tau
    omit = whole_body_command(kin, terms, tasks, cs, omit_coriolis=True).tau
    assert np.abs(full - omit).max() > 1e-3
    s.qdot[:] = 0
    kin, terms, cs = setup(planar, s)
    np.testing.assert_allclose(whole_body_command(kin, terms, tasks, cs).tau,
                               whole_body_command(kin, terms, tasks, cs, omit_coriolis=True).tau, atol=1e-12)


def test_task_integral_and_reset():
    t = Task("z", "com-height", kp=2.0, ki=1.0, kd=0.0, integral_limit=0.05)
    t.set_reference([1.0])
    for _ in range(100):
        t.command(np.array([0.0]), np.array([0.0]), dt=0.01)
    assert t.integral[0] == pytest.approx(0.05)
    t.reset()
    assert t.command(np.array([0.0]), np.array([0.0]))[0] == pytest.approx(2.0)


def test_negative_gain_rejected():
    with pytest.raises(ConfigError):
        Task("z", "com-height", kp=-1.0)


# --- internal forces ----------------------------------------------------------------------------

def test_W_int_axis_aligned():
    np.testing.assert_allclose(build_W_int((1, 0, 0), (0, 0, 0)), [[1, 0, 0, -1, 0, 0]])


def test_W_int_hand_example():
    W = build_W_int((0.2, -0.1, 0), (-0.2, 0.1, 0))
    np.testing.assert_allclose(W, [[0.894427, -0.447214, 0, -0.894427, 0.447214, 0]], atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       st.lists(st.floats(-100, 100), min_size=6, max_size=6))
def test_W_int_swap(P_R, P_L, F):
    P_R, P_L, F = np.array(P_R), np.array(P_L), np.array(F)
    if np.linalg.norm(P_R - P_L) < 1e-3:
        return
    swapped = np.concatenate([F[3:], F[:3]])
    W, Ws = build_W_int(P_R, P_L), build_W_int(P_L, P_R)
    # same reactions read with the roles swapped flip sign; relabelling them too restores the tension
    np.testing.assert_allclose(Ws @ F, -(W @ F), atol=1e-9)
    np.testing.assert_allclose(Ws @ swapped, W @ F, atol=1e-9)


def test_W_int_degenerate():
    with pytest.raises(DegenerateGeometryError):
        build_W_int((0.1, 0.2, 0), (0.1, 0.2, 0))


def _W(model, kin, cs):
    rows = list(model.task_rows)
    P = []
    for n in ("r_foot", "l_foot"):
        p = np.zeros(3)
        p[rows] = kin.named_point(n)[0]
        P.append(p)
    return embed_W_int(build_W_int(*P), cs, "r_foot", "l_foot", model.mode == "planar")


@pytest.mark.parametrize("name", ["planar", "spatial"])
def test_sensed_internal_force_matches_constraint_force(name, request):
    model = request.getfixturevalue(name)
    rng = np.random.default_rng(12)
    for _ in range(10):
        kin, terms, cs = setup(model, random_state(model, rng))
        tau = rng.normal(0, 30, model.n_actuated)
        _, lam = constrained_forward_dynamics(terms, cs, tau, model.U)
        W = _W(model, kin, cs)
        assert actual_internal_force(W, cs, terms, tau, model.U)[0] == pytest.approx((W @ lam)[0], abs=1e-8)


def test_symmetric_stance_zero_tension(spatial):
    # feet straight below the hips: the lateral tension vanishes by symmetry
    q = np.zeros(spatial.n_dofs)
    q[spatial.coordinate("base_z")] = 0.9
    q[spatial.n_base:] = [0.0, -0.3, 0.6, 0.0, -0.3, 0.6]
    kin, terms, cs = setup(spatial, GeneralizedState(q, np.zeros_like(q)))
    W = _W(spatial, kin, cs)
    assert abs(actual_internal_force(W, cs, terms, np.zeros(6), spatial.U)[0]) < 1e-9


def test_internal_force_needs_dual_contact(planar):
    kin, terms, cs = setup(planar, stance(planar), ("r_foot",))
    with pytest.raises(UndefinedInternalForceError):
        embed_W_int(build_W_int((1, 0, 0), (0, 0, 0)), cs, "r_foot", "l_foot", True)


def test_internal_torque_trivial_and_null_space(planar):
    s = random_state(planar, np.random.default_rng(2))
    s.qdot[:] = 0
    kin, terms, cs = setup(planar, s)
    proj = projection(planar.U, cs)
    it = internal_force_terms(_W(planar, kin, cs), no_bias(terms), cs, proj)
    # nothing to correct: reference met by the task-induced force, no bias, no sensed error
    np.testing.assert_allclose(internal_torque(it, proj, 0.0, 0.0, 0.0, 1.0), 0, atol=1e-14)
    np.testing.assert_allclose(internal_torque(it, proj, 30.0, 30.0, 30.0, 1.0), 0, atol=1e-14)
    tau = internal_torque(it, proj, 100.0, 5.0, 80.0, 1.0)
    assert np.linalg.norm((planar.U @ cs.N_s).T @ tau) <= 1e-8
    qdd, _ = constrained_forward_dynamics(terms, cs, tau, planar.U)
    qdd0, _ = constrained_forward_dynamics(terms, cs, np.zeros(4), planar.U)
    assert np.linalg.norm(qdd - qdd0) <= 1e-8


@pytest.mark.parametrize("name", ["planar", "spatial"])
def test_whole_body_internal_force_open_loop(name, request):
    model = request.getfixturevalue(name)
    s = stance(model)
    s.qdot = np.random.default_rng(3).normal(0, 0.5, model.n_dofs)
    kin, terms, cs = setup(model, s)
    tasks = [Task("com_z", "com-height", 200, 0, 20), Task("pitch", "body-pitch", 150, 0, 10),
             Task("com_x", "com-planar-position", 20, 0, 5)]
    if model.mode == "spatial":
        tasks += [Task("roll", "body-roll", 100, 0, 10)]
    info = whole_body_command(kin, terms, tasks, cs, InternalForceSpec("r_foot", "l_foot", 100.0, 1.0))
    qdd, lam = constrained_forward_dynamics(terms, cs, info.tau, model.U)
    assert (_W(model, kin, cs) @ lam)[0] == pytest.approx(100.0, abs=1e-6)
    # the internal part never changes the motion
    qdd_task, _ = constrained_forward_dynamics(terms, cs, info.tau_task, model.U)
    assert np.linalg.norm(qdd - qdd_task) <= 1e-8


def test_no_tasks_no_internal_zero_torque(planar):
    kin, terms, cs = setup(planar, stance(planar))
    np.testing.assert_array_equal(whole_body_command(kin, terms, [], cs).tau, np.zeros(4))


def test_damped_pinv_regular_and_singular():
    M = np.diag([2.0, 1e-9])
    P = damped_pinv(M)
    assert P[0, 0] == pytest.approx(0.5)
    assert P[1, 1] == pytest.approx(1e-9 / (1e-18 + 1e-8))
    np.testing.assert_allclose(damped_pinv(np.eye(3) * 4), np.eye(3) / 4)


# --- transitions ------------------------------------------------------------------------------------

def test_transition_weight_monotone():
    up = TransitionState("landing", 0.02, 1.0, np.zeros(2))
    down = TransitionState("lifting", 0.02, 1.0, np.zeros(2))
    ts = np.linspace(0.99, 1.03, 41)
    assert np.all(np.diff([up.weight(t) for t in ts]) >= 0)
    assert np.all(np.diff([down.weight(t) for t in ts]) <= 0)
    assert up.weight(1.0) == 0 and up.weight(1.02) == 1
    assert down.weight(1.0) == 1 and down.weight(1.02) == 0


def _transition_setup(planar):
    s = stance(planar)
    kin, terms, dual = setup(planar, s, lock="base_x")
    single = setup(planar, s, ("r_foot",), lock="base_x")[2]
    dual_tasks = [Task("com_z", "com-height", 100, 0, 10), Task("pitch", "body-pitch", 100, 0, 10)]
    single_tasks = dual_tasks + [Task("foot", "foot-position", 100, 0, 10, point="l_foot")]
    return kin, terms, dual, single, dual_tasks, single_tasks


def test_transition_static_equivalence(planar):
    kin, terms, dual, single, dual_tasks, single_tasks = _transition_setup(planar)
    tau_dual = whole_body_command(kin, terms, dual_tasks, dual).tau
    f = swing_reaction(terms, dual, tau_dual, planar.U, "l_foot")
    trans = TransitionState("lifting", 0.02, 0.0, f)
    tau = transition_command(kin, terms, single_tasks, single, "foot", trans, 0.0).tau
    np.testing.assert_allclose(swing_reaction(terms, dual, tau, planar.U, "l_foot"), f, atol=1e-6)
    np.testing.assert_allclose(tau, tau_dual, atol=1e-6)
    # at the end of the ramp it is the plain single-contact command
    end = transition_command(kin, terms, single_tasks, single, "foot", trans, 0.02).tau
    np.testing.assert_allclose(end, whole_body_command(kin, terms, single_tasks, single).tau, atol=1e-12)


def test_transition_requires_cached_force(planar):
    kin, terms, dual, single, _, single_tasks = _transition_setup(planar)
    with pytest.raises(TransitionSetupError):
        transition_command(kin, terms, single_tasks, single, "foot", TransitionState("landing", 0.02), 0.0)
