"""Cyclic gait scheduling.

A schedule is a phase clock: leg i is in stance iff
frac(phase - offset_i) < duty. Gait switches latch and apply at the
next instant where no leg is strictly mid-swing, so a swing is never
cut short; STAND (duty 1) switches immediately.
"""

from dataclasses import dataclass, replace

import numpy as np

_TOL = 1e-9


@dataclass(frozen=True)
class GaitParams:
    name: str
    period: float
    duty: float
    offsets: tuple

    def __post_init__(self):
        if not (0.0 < self.duty <= 1.0):
            raise ValueError(f"duty {self.duty} outside (0, 1]")
        if self.period <= 0.0:
            raise ValueError("period must be positive")
        if len(self.offsets) != 4 or any(not (0.0 <= o < 1.0) for o in self.offsets):
            raise ValueError("need 4 phase offsets in [0, 1)")


BUILTIN_GAITS = {
    "stand": GaitParams("stand", 0.5, 1.0, (0.0, 0.0, 0.0, 0.0)),
    "trot": GaitParams("trot", 0.5, 0.5, (0.0, 0.5, 0.5, 0.0)),
    "crawl": GaitParams("crawl", 1.0, 0.75, (0.0, 0.5, 0.25, 0.75)),
}


@dataclass
class ContactState:
    stance: np.ndarray      # (4,) bool
    sub_phase: np.ndarray   # (4,) fraction of the stance/swing window elapsed


class GaitSchedule:
    """Single-writer phase clock; value-copy snapshots are cheap."""

    def __init__(self, params=None):
        self.params = params or BUILTIN_GAITS["stand"]
        self.phase = 0.0
        self.pending = None

    def copy(self):
        s = GaitSchedule(self.params)
        s.phase = self.phase
        s.pending = self.pending
        return s

    # -- queries ----------------------------------------------------------

    def leg_phases(self, phase=None):
        """frac(phase - offset_i) per leg."""
        phase = self.phase if phase is None else phase
        return np.mod(phase - np.asarray(self.params.offsets), 1.0)

    def contact_state(self, phase=None):
        x = self.leg_phases(phase)
        beta = self.params.duty
        stance = x < beta - _TOL
        # the exact touchdown instant counts as stance
        stance |= x > 1.0 - _TOL
        stance |= x < _TOL
        if beta >= 1.0 - _TOL:
            stance[:] = True
        sub = np.where(stance, np.minimum(x, beta) / beta,
                       (x - beta) / max(1.0 - beta, _TOL))
        return ContactState(stance=stance, sub_phase=np.clip(sub, 0.0, 1.0))

    def stance_duration(self):
        return self.params.duty * self.params.period

    def swing_duration(self):
        return max(1.0 - self.params.duty, 0.0) * self.params.period

    # -- mutation ---------------------------------------------------------

    def request_gait(self, params):
        """Latch a switch; repeated requests overwrite the pending one."""
        if isinstance(params, str):
            params = BUILTIN_GAITS[params]
        self.pending = params

    def _switchable(self, phase):
        """No leg strictly mid-swing: stance or exactly at a boundary."""
        beta = self.params.duty
        if beta >= 1.0 - _TOL:
            return True
        x = self.leg_phases(phase)
        mid_swing = (x > beta + _TOL) & (x < 1.0 - _TOL)
        return not bool(np.any(mid_swing))

    def _next_boundary(self, start):
        """Smallest phase delta > 0 to any leg's touchdown/liftoff."""
        beta = self.params.duty
        deltas = []
        for off in self.params.offsets:
            for b in (off, (off + beta) % 1.0):
                delta = (b - start) % 1.0
                if delta < _TOL:
                    delta = 1.0
                deltas.append(delta)
        return min(deltas)

    def advance(self, dt):
        """Step the clock; apply a pending switch at a legal instant.

        Returns a list of event strings for the telemetry log.
        """
        if dt < 0.0:
            raise ValueError("dt must be non-negative")
        events = []
        remaining = float(dt)
        guard = 0
        while True:
            guard += 1
            if self.pending is not None and self._switchable(self.phase):
                events.append(f"gait_switch:{self.pending.name}")
                self.params = self.pending
                self.pending = None
                self.phase = 0.0
            if remaining <= 0.0 or self.pending is None or guard > 16:
                break
            dphi = remaining / self.params.period
            db = self._next_boundary(self.phase)
            if db >= dphi - _TOL:
                break
            self.phase = (self.phase + db) % 1.0
            remaining -= db * self.params.period
        if remaining > 0.0:
            self.phase = (self.phase + remaining / self.params.period) % 1.0
        return events


def make_gait(name, period=None, duty=None, offsets=None):
    """Built-in gait with optional config overrides."""
    base = BUILTIN_GAITS[name]
    return replace(base,
                   period=base.period if period is None else float(period),
                   duty=base.duty if duty is None else float(duty),
                   offsets=base.offsets if offsets is None else tuple(offsets))
