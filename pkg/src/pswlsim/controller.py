"""Wear-chase control loop.

A PID on the lifetime error between the original and extended disk groups
produces a hotness baseline u: migrations are approved while observed disk
hotness sits below it. Gains self-tune by coordinate descent on the ratio of
wear-leveling I/O to total I/O. The chase runs between an entry condition
(relative gap at least the restart threshold) and an exit condition
(relative gap under the exit threshold), with hysteresis between the two so
the phase does not flap at the boundary.

One quirk is kept on purpose: the derivative term uses the absolute error
difference |e(t) - e(t - T0)|, so it is non-negative. Tests pin that form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import DomainError, EmptyGroup


class ControllerPhase(Enum):
    IDLE = "idle"
    CHASING = "chasing"
    CONVERGED = "converged"


@dataclass
class PidState:
    kp: float = 0.5
    ki: float = 0.01
    kd: float = 0.1
    t0: int = 4096  # events between samples
    integral: float = 0.0
    prev_error: float = 0.0
    integral_limit: float | None = None  # anti-windup bound on |integral|

    def __post_init__(self):
        if self.t0 < 1:
            raise DomainError(f"sampling period must be >= 1, got {self.t0}")


@dataclass
class TunerState:
    alpha: float = 0.05
    prev_loss: float | None = None
    coord_cursor: int = 0  # selects kp/ki/kd round-robin

    def __post_init__(self):
        if self.alpha <= 0:
            raise DomainError(f"learning rate must be > 0, got {self.alpha}")


def lifetime_error(originals, extendeds) -> float:
    """Mean effective lifetime of the original group minus the extended's."""
    if not originals or not extendeds:
        raise EmptyGroup("both disk groups must be non-empty")
    return sum(originals) / len(originals) - sum(extendeds) / len(extendeds)


def pid_step(s: PidState, e_now: float) -> float:
    """One controller update; returns the hotness baseline u."""
    s.integral += e_now
    if s.integral_limit is not None:
        s.integral = min(max(s.integral, -s.integral_limit), s.integral_limit)
    u = s.kp * e_now + s.ki * s.integral + s.kd * abs(e_now - s.prev_error)
    s.prev_error = e_now
    return u


def tune_gains(t: TunerState, s: PidState, loss_now: float) -> None:
    """Coordinate step: move one gain against the observed loss trend.

    Gains never go below zero; the cursor advances even on a zero step so
    every coordinate keeps getting its turn.
    """
    if t.prev_loss is None:
        raise DomainError("tune_gains needs a prior loss observation")
    diff = t.prev_loss - loss_now
    sign = (diff > 0) - (diff < 0)
    name = ("kp", "ki", "kd")[t.coord_cursor]
    setattr(s, name, max(0.0, getattr(s, name) - t.alpha * sign))
    t.coord_cursor = (t.coord_cursor + 1) % 3
    t.prev_loss = loss_now


def should_exit(l_o_mean: float, l_s_mean: float, lam: float) -> bool:
    """Exit the chase when the relative lifetime gap drops under lam."""
    if l_o_mean <= 0:
        raise DomainError(f"original-group mean lifetime must be > 0, got {l_o_mean}")
    return abs(l_o_mean - l_s_mean) / l_o_mean < lam


def approve_migration(disk_hotness_scalar: float, u: float) -> bool:
    """Approve while observed hotness is strictly below the baseline."""
    return disk_hotness_scalar < u


@dataclass
class SampleResult:
    e: float
    u: float
    gap: float
    phase: ControllerPhase


class WlController:
    """Phase machine plus PID plus tuner, advanced once per sampling period."""

    def __init__(self, pid: PidState, tuner: TunerState | None = None, *,
                 exit_threshold: float = 0.02, restart_threshold: float | None = None,
                 u_max: float = 1.0, tuner_epoch: int = 16, self_tuning: bool = True):
        if exit_threshold <= 0:
            raise DomainError("exit threshold must be > 0")
        self.pid = pid
        self.tuner = tuner if tuner is not None else TunerState()
        self.exit_threshold = exit_threshold
        self.restart_threshold = (
            restart_threshold if restart_threshold is not None else 2.0 * exit_threshold)
        if self.restart_threshold <= self.exit_threshold:
            raise DomainError("restart threshold must exceed the exit threshold")
        self.u_max = u_max
        self.tuner_epoch = tuner_epoch
        self.self_tuning = self_tuning
        self.phase = ControllerPhase.IDLE
        self.u = 0.0
        self.sample_count = 0
        self.converged_at_sample: int | None = None
        self._refresh_windup()

    def _refresh_windup(self):
        self.pid.integral_limit = self.u_max / self.pid.ki if self.pid.ki > 0 else None

    def relative_gap(self, l_o_mean: float, l_s_mean: float) -> float:
        if l_o_mean <= 0:
            return 0.0
        return abs(l_o_mean - l_s_mean) / l_o_mean

    def sample(self, l_originals, l_extendeds, loss_now: float | None = None) -> SampleResult:
        """Advance the loop by one sampling period."""
        self.sample_count += 1
        e = lifetime_error(l_originals, l_extendeds)
        l_o = sum(l_originals) / len(l_originals)
        l_s = sum(l_extendeds) / len(l_extendeds)
        gap = self.relative_gap(l_o, l_s)
        self.u = pid_step(self.pid, e)

        if self.phase is ControllerPhase.IDLE:
            if gap >= self.restart_threshold:
                self.phase = ControllerPhase.CHASING
        elif self.phase is ControllerPhase.CHASING:
            if l_o > 0 and should_exit(l_o, l_s, self.exit_threshold):
                self.phase = ControllerPhase.CONVERGED
                if self.converged_at_sample is None:
                    self.converged_at_sample = self.sample_count
        else:  # CONVERGED
            if gap > self.restart_threshold:
                self.phase = ControllerPhase.CHASING

        if (self.self_tuning and loss_now is not None
                and self.sample_count % self.tuner_epoch == 0):
            if self.tuner.prev_loss is None:
                self.tuner.prev_loss = loss_now
            else:
                tune_gains(self.tuner, self.pid, loss_now)
                self._refresh_windup()

        return SampleResult(e=e, u=self.u, gap=gap, phase=self.phase)

    def migration_approved(self, disk_hotness_scalar: float) -> bool:
        return (self.phase is ControllerPhase.CHASING
                and approve_migration(disk_hotness_scalar, self.u))
