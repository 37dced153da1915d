"""Contact-constrained forward-dynamics world."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pointfoot.errors import ConfigError, ModelError, SimulationDivergedError
from pointfoot.model import GeneralizedState, Kinematics, RobotModel
from pointfoot.sim import plant
from pointfoot.sim.terrain import Terrain

FORCE_TOL = 1e-9
_EVENT_NAMES = {plant.UNILATERAL: "unilateral", plant.FRICTION: "friction", plant.TOUCHDOWN: "touchdown"}


@dataclass
class ActiveContact:
    """A body point pinned at ``anchor``, or a coordinate pinned at ``anchor[0]`` (``lock`` >= 0)."""

    name: str
    body: int = -1
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    anchor: np.ndarray = field(default_factory=lambda: np.zeros(3))
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    lock: int = -1


@dataclass
class Push:
    """Rectangular force pulse applied at a named point or body origin."""

    t_start: float
    duration: float
    force: np.ndarray
    point: str | None = None
    body: str = "torso"
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def active(self, t) -> bool:
        return self.t_start <= t < self.t_start + self.duration


@dataclass
class ContactEvent:
    t: float
    kind: str
    name: str
    impulse: np.ndarray | None = None


class SimWorld:
    """Plant state, active contacts, terrain and disturbances.

    ``dt`` is the plant substep; the integrator is RK4 unless ``method`` is
    "euler". Hard contacts are stabilised with Baumgarte gains ``kp``/``kd``.
    """

    def __init__(self, model: RobotModel, state: GeneralizedState, terrain: Terrain | None = None, mu=1.0,
                 dt=1e-4, method="rk4", pushes=(), watch=("r_foot", "l_foot"), kp=400.0, kd=40.0, v_max=100.0):
        if not 1e-5 <= dt <= 1e-3:
            raise ConfigError(f"plant dt must lie in [1e-5, 1e-3], got {dt}")
        if method not in ("rk4", "euler"):
            raise ConfigError(f"unknown integrator {method!r}")
        self.model = model
        self.state = state.copy()
        self.terrain = terrain or Terrain.flat()
        self.mu = float(mu)
        self.dt = float(dt)
        self.method = plant.RK4 if method == "rk4" else plant.EULER
        self.pushes = list(pushes)
        self.watch = [w for w in watch if w in model.points]
        self.kp, self.kd, self.v_max = float(kp), float(kd), float(v_max)
        self.contacts: list[ActiveContact] = []
        self.events: list[ContactEvent] = []
        self.lam = np.zeros(0)

    # --- contact set -------------------------------------------------------------------------

    @property
    def t(self) -> float:
        return self.state.time

    @property
    def contact_names(self) -> list:
        return [c.name for c in self.contacts]

    def point_position(self, name) -> np.ndarray:
        body, offset = self.model.point(name)
        return Kinematics(self.model, self.state).point(body, offset, (0, 1, 2))[0]

    def add_contact(self, name, anchor=None):
        if name in self.contact_names:
            return
        body, offset = self.model.point(name)
        pos = self.point_position(name) if anchor is None else np.asarray(anchor, dtype=float)
        self.contacts.append(ActiveContact(name, body, offset.copy(), pos.copy(), self.terrain.normal(pos)))

    def add_lock(self, coordinate, value=None):
        k = self.model.coordinate(coordinate)
        name = f"lock:{coordinate}"
        if name in self.contact_names:
            return
        val = self.state.q[k] if value is None else float(value)
        self.contacts.append(ActiveContact(name, lock=k, anchor=np.array([val, 0.0, 0.0]),
                                           normal=np.zeros(3)))

    def remove_contact(self, name):
        if name not in self.contact_names:
            raise ModelError(f"contact {name!r} is not active")
        self.contacts = [c for c in self.contacts if c.name != name]

    def constraint_rows(self) -> tuple:
        rows = self.model.task_rows
        mask = np.zeros(3, dtype=np.bool_)
        mask[list(rows)] = True
        return mask

    def _contact_arrays(self):
        m = len(self.contacts)
        mask = self.constraint_rows()
        c_body = np.array([c.body if c.lock < 0 else -1 for c in self.contacts], dtype=np.int64)
        c_offset = np.array([c.offset for c in self.contacts], dtype=float).reshape(m, 3)
        c_rows = np.array([mask for _ in self.contacts], dtype=np.bool_).reshape(m, 3)
        c_lock = np.array([c.lock for c in self.contacts], dtype=np.int64)
        c_normal = np.array([c.normal for c in self.contacts], dtype=float).reshape(m, 3)
        anchors = []
        for c in self.contacts:
            anchors.extend([c.anchor[0]] if c.lock >= 0 else list(c.anchor[mask]))
        return c_body, c_offset, c_rows, c_lock, np.array(anchors, dtype=float), c_normal

    def constraint_jacobian(self, kin: Kinematics | None = None) -> np.ndarray:
        kin = kin or Kinematics(self.model, self.state)
        rows = []
        for c in self.contacts:
            if c.lock >= 0:
                e = np.zeros(self.model.n_dofs)
                e[c.lock] = 1.0
                rows.append(e[None])
            else:
                rows.append(kin.point(c.body, c.offset)[1])
        return np.vstack(rows) if rows else np.zeros((0, self.model.n_dofs))

    def contact_forces(self) -> dict:
        """Last computed force each point contact applies to the ground (world xyz)."""
        out = {}
        mask = self.constraint_rows()
        r = 0
        for c in self.contacts:
            if c.lock >= 0:
                out[c.name] = np.array([self.lam[r]]) if r < len(self.lam) else np.zeros(1)
                r += 1
                continue
            f = np.zeros(3)
            n = int(mask.sum())
            if r + n <= len(self.lam):
                f[mask] = self.lam[r:r + n]
            out[c.name] = f
            r += n
        return out

    def plastic_impact(self) -> np.ndarray:
        """Project qdot so every active constraint has zero velocity.

        Returns the impulse applied to the environment (same sign as lam):
        A dqdot = -J^T impulse.
        """
        kin = Kinematics(self.model, self.state)
        J = self.constraint_jacobian(kin)
        if J.shape[0] == 0:
            return np.zeros(0)
        A = kin.mass_matrix(include_rotor_inertia=True)
        AiJt = np.linalg.solve(A, J.T)
        impulse = np.linalg.solve(J @ AiJt, J @ self.state.qdot)
        self.state = GeneralizedState(self.state.q, self.state.qdot - AiJt @ impulse, self.state.time)
        return impulse

    # --- disturbances ------------------------------------------------------------------------

    def external_generalized_force(self, t=None) -> np.ndarray:
        t = self.t if t is None else t
        out = np.zeros(self.model.n_dofs)
        active = [p for p in self.pushes if p.active(t)]
        if not active:
            return out
        kin = Kinematics(self.model, self.state)
        for p in active:
            if p.point is not None:
                body, offset = self.model.point(p.point)
            else:
                body, offset = self.model.body(p.body), p.offset
            J = kin.point(body, offset, (0, 1, 2))[1]
            out += J.T @ np.asarray(p.force, dtype=float)
        return out

    # --- integration -------------------------------------------------------------------------

    def acceleration(self, tau) -> tuple:
        """Plant (qdd, lam) at the current state under actuated torque ``tau``, without stepping."""
        a = self.model._arrays
        tau_gen = self.model.U.T @ np.asarray(tau, dtype=float) + self.external_generalized_force()
        c_body, c_offset, c_rows, c_lock, anchors, _ = self._contact_arrays()
        return plant.plant_accel(a.parent, a.jtype, a.axis, a.E_tree, a.r_tree, a.mass, a.com, a.Ic,
                                 float(self.model.gravity), a.armature, self.state.q, self.state.qdot, tau_gen,
                                 c_body, c_offset, c_rows, c_lock, anchors, self.kp, self.kd)

    def advance(self, tau, n_sub=1) -> list:
        """Advance ``n_sub`` substeps under actuated torque ``tau`` (zero-order hold).

        Contacts that leave the friction cone are removed; watched points
        that reach the ground become contacts after a plastic impact.
        Returns the new events.
        """
        tau = np.asarray(tau, dtype=float)
        a = self.model._arrays
        tau_gen = self.model.U.T @ tau + self.external_generalized_force()
        grav = float(self.model.gravity)
        new = []
        remaining = int(n_sub)
        while remaining > 0:
            c_body, c_offset, c_rows, c_lock, anchors, c_normal = self._contact_arrays()
            active = set(self.contact_names)
            watch = [w for w in self.watch if w not in active]
            w_body = np.array([self.model.point(w)[0] for w in watch], dtype=np.int64)
            w_offset = np.array([self.model.point(w)[1] for w in watch], dtype=float).reshape(len(watch), 3)
            code, done, idx, q, v, lam = plant.advance(
                a.parent, a.jtype, a.axis, a.E_tree, a.r_tree, a.mass, a.com, a.Ic, grav, a.armature,
                self.state.q, self.state.qdot, tau_gen, remaining, self.dt, self.method,
                c_body, c_offset, c_rows, c_lock, anchors, c_normal, self.kp, self.kd, self.mu, FORCE_TOL,
                w_body, w_offset, self.terrain.normals, self.terrain.offsets, self.v_max)
            t = self.state.time + done * self.dt
            self.state = GeneralizedState(q, v, t)
            if len(lam) or not self.contacts:
                self.lam = lam
            remaining -= done
            if code == plant.OK:
                break
            if code == plant.DIVERGED:
                raise SimulationDivergedError(
                    f"generalized velocity norm exceeded {self.v_max} at t = {t:.4f}",
                    state_dump={"t": t, "q": q.tolist(), "qdot": v.tolist(), "contacts": self.contact_names})
            if code in (plant.UNILATERAL, plant.FRICTION):
                ev = ContactEvent(t, _EVENT_NAMES[code], self.contacts[idx].name)
                self.remove_contact(ev.name)
            else:
                ev = ContactEvent(t, "touchdown", watch[idx])
                self.add_contact(ev.name)
                ev.impulse = self.plastic_impact()
            new.append(ev)
            self.events.append(ev)
        return new


def step(world: SimWorld, tau_command) -> SimWorld:
    """Advance one plant substep."""
    world.advance(tau_command, 1)
    return world
