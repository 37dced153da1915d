"""Walking phase sequencing for stepping and walking."""

from __future__ import annotations

from dataclasses import dataclass

from pointfoot.errors import ConfigError

DUAL = "dual"
TRANSITION_LIFT = "transition-lift"
LIFTING = "lifting"
LANDING = "landing"
TRANSITION_LAND = "transition-land"
PHASES = (DUAL, TRANSITION_LIFT, LIFTING, LANDING, TRANSITION_LAND)
SINGLE = (TRANSITION_LIFT, LIFTING, LANDING, TRANSITION_LAND)


@dataclass(frozen=True)
class PhaseTimes:
    transition: float = 0.02
    lifting: float = 0.23
    landing: float = 0.26
    dual: float = 0.079

    def __post_init__(self):
        for name in ("lifting", "landing", "dual"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"phase time {name} must be positive", problems=[(f"phases.{name}", "<= 0")])
        if self.transition < 0:
            raise ConfigError("phase time transition must be non-negative",
                              problems=[("phases.transition", "< 0")])


class WalkingStateMachine:
    """dual -> transition-lift -> lifting -> landing -> (touchdown) -> transition-land -> dual.

    Transitions are skipped when disabled or of zero length. Landing only
    ends on a touchdown event; the swing foot alternates every step.
    """

    def __init__(self, times: PhaseTimes = PhaseTimes(), transitions=True, first_swing="l_foot",
                 feet=("r_foot", "l_foot"), t0=0.0):
        if first_swing not in feet:
            raise ConfigError(f"first swing foot {first_swing!r} is not one of {feet}")
        self.times = times
        self.transitions = bool(transitions) and times.transition > 0
        self.feet = tuple(feet)
        self.swing = first_swing
        self.phase = DUAL
        self.t_start = t0
        self.steps = 0

    @property
    def stance(self) -> str:
        return self.feet[1] if self.swing == self.feet[0] else self.feet[0]

    @property
    def single_support(self) -> bool:
        """Controller uses the stance foot only (the transitions included)."""
        return self.phase in SINGLE

    @property
    def swing_airborne(self) -> bool:
        return self.phase in (LIFTING, LANDING)

    def clock(self, t) -> float:
        return t - self.t_start

    def _enter(self, phase, t):
        self.phase = phase
        self.t_start = t
        return phase

    def update(self, t, touchdown=False) -> str | None:
        """Advance on time or a swing-foot touchdown; returns the new phase on a switch."""
        c = self.clock(t) + 1e-12
        tm = self.times
        if self.phase == DUAL and c >= tm.dual:
            return self._enter(TRANSITION_LIFT if self.transitions else LIFTING, t)
        if self.phase == TRANSITION_LIFT and c >= tm.transition:
            return self._enter(LIFTING, t)
        if self.phase in (LIFTING, LANDING) and touchdown:
            self.steps += 1
            if self.transitions:
                return self._enter(TRANSITION_LAND, t)
            return self._finish_step(t)
        if self.phase == LIFTING and c >= tm.lifting:
            return self._enter(LANDING, t)
        if self.phase == TRANSITION_LAND and c >= tm.transition:
            return self._finish_step(t)
        return None

    def _finish_step(self, t):
        self.swing = self.stance
        return self._enter(DUAL, t)
