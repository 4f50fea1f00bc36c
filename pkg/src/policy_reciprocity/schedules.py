"""Visit-indexed step-size schedules for the two learning rates.

Updates fire only when a state-action pair is visited; the step sizes for
that update are functions of the pair's visit count ``k`` (0-based, i.e.
the count before the current visit):

    alpha_k = a / (k + 1) ** tau1        (temporal-difference rate)
    beta_k  = b / (k + 1) ** tau2        (reciprocity rate)

Polynomial mode enforces tau1 in (1/2, 1] and tau2 < tau1 - 1/(2 + eps1),
where eps1 > 0 parametrizes which reward moments are finite (bounded
rewards allow any eps1; the default is 2).  Under these constraints
beta_k / alpha_k grows without bound, so the reciprocity pull dominates
the temporal-difference term asymptotically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .validation import check_choice, check_scalar

POLYNOMIAL = "polynomial"
CONSTANT = "constant"
SCHEDULE_MODES = (POLYNOMIAL, CONSTANT)


@dataclass(frozen=True)
class ScheduleConfig:
    mode: str = POLYNOMIAL
    a: float = 1.0
    b: float = 1.0
    tau1: float = 0.65
    tau2: float = 0.35
    epsilon1: float = 2.0
    alpha_const: float = 0.5
    beta_const: float = 0.3

    def validate(self) -> "ScheduleConfig":
        check_choice(self.mode, "schedule.mode", SCHEDULE_MODES)
        if self.mode == POLYNOMIAL:
            check_scalar(self.a, "schedule.a", low=0.0, include_low=False)
            check_scalar(self.b, "schedule.b", low=0.0)
            check_scalar(self.epsilon1, "schedule.epsilon1", low=0.0,
                         include_low=False)
            check_scalar(self.tau1, "schedule.tau1", low=0.5,
                         include_low=False, high=1.0)
            check_scalar(self.tau2, "schedule.tau2", low=0.0,
                         include_low=False)
            bound = self.tau1 - 1.0 / (2.0 + self.epsilon1)
            if not self.tau2 < bound:
                raise ConfigError(
                    "schedule.tau2: polynomial schedules require "
                    f"tau2 < tau1 - 1/(2 + epsilon1) = {bound:.6g}, "
                    f"got tau2 = {self.tau2}")
        else:
            check_scalar(self.alpha_const, "schedule.alpha_const",
                         low=0.0, high=1.0, include_low=False)
            check_scalar(self.beta_const, "schedule.beta_const",
                         low=0.0, high=1.0)
        return self

    def satisfies_gap_tracking_condition(self) -> bool:
        """Extra condition under which the reciprocity process tracks its
        same-state-only counterpart: 2 * tau2 >= tau1 - 1/(2 + epsilon1)."""
        if self.mode != POLYNOMIAL:
            return False
        return 2.0 * self.tau2 >= self.tau1 - 1.0 / (2.0 + self.epsilon1)


def _broadcast_const(k, value):
    k = np.asarray(k, dtype=np.float64)
    out = np.full(k.shape, float(value))
    return out if out.ndim else float(value)


def _poly(k, coef, exponent):
    k = np.asarray(k, dtype=np.float64)
    out = coef / np.power(k + 1.0, exponent)
    return out if out.ndim else float(out)


def alpha_at(k, cfg: ScheduleConfig):
    """TD step size at visit count ``k`` (scalar or array)."""
    if cfg.mode == CONSTANT:
        return _broadcast_const(k, cfg.alpha_const)
    return _poly(k, cfg.a, cfg.tau1)


def beta_at(k, cfg: ScheduleConfig):
    """Reciprocity step size at visit count ``k`` (scalar or array)."""
    if cfg.mode == CONSTANT:
        return _broadcast_const(k, cfg.beta_const)
    return _poly(k, cfg.b, cfg.tau2)
