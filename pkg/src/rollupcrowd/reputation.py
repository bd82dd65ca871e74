"""Task ratings and reputation updates.

All functions are pure. Fractions live in [0, 1]; amounts are plain numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import (
    BoundsViolation,
    NegativeAmount,
    OutOfBounds,
    RangeViolation,
    WeightSumViolation,
)

WEIGHT_TOL = 1e-12
DEFAULT_R_INIT = 0.5
DEFAULT_T_MIN = 0.5


def _check_fraction(name: str, x: float) -> None:
    if not (0.0 <= x <= 1.0) or math.isnan(x):
        raise RangeViolation(f"{name}={x!r} not in [0, 1]")


@dataclass(frozen=True)
class AmountBounds:
    a_min: float
    a_max: float

    def __post_init__(self):
        if self.a_min < 0 or self.a_min > self.a_max:
            raise BoundsViolation(f"invalid amount bounds ({self.a_min}, {self.a_max})")


@dataclass(frozen=True)
class ProblemSolvingScores:
    completeness: float
    quality: float
    contextual: float
    alpha: float = 0.5
    beta: float = 0.5


@dataclass(frozen=True)
class SensingScores:
    observed: float
    truth: float
    lower_bound: float
    upper_bound: float
    contextual: float


@dataclass(frozen=True)
class RatingWeights:
    w_value: float = 1 / 3
    w_second: float = 1 / 3
    w_contextual: float = 1 / 3

    def __post_init__(self):
        for name in ("w_value", "w_second", "w_contextual"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise WeightSumViolation(f"{name} outside [0, 1]")
        if abs(self.w_value + self.w_second + self.w_contextual - 1.0) > WEIGHT_TOL:
            raise WeightSumViolation("rating weights must sum to 1")


@dataclass(frozen=True)
class ReputationRecord:
    score: float = DEFAULT_R_INIT
    submissions: int = 0
    r_init: float = DEFAULT_R_INIT
    t_min: float = DEFAULT_T_MIN

    def __post_init__(self):
        for name in ("score", "r_init", "t_min"):
            _check_fraction(name, getattr(self, name))
        if self.submissions < 0:
            raise RangeViolation("submission count must be non-negative")
        if self.t_min < self.r_init:
            raise RangeViolation("trust threshold must be at least the initial reputation")


def value_rating(amount: float, bounds: AmountBounds) -> float:
    if not bounds.a_min <= amount <= bounds.a_max:
        raise OutOfBounds(f"amount {amount} outside [{bounds.a_min}, {bounds.a_max}]")
    if bounds.a_max == bounds.a_min:
        # single-amount history: neither rewarded nor penalised
        return 0.5
    return (amount - bounds.a_min) / (bounds.a_max - bounds.a_min)


def effort_rating(scores: ProblemSolvingScores) -> float:
    for name in ("completeness", "quality", "contextual"):
        _check_fraction(name, getattr(scores, name))
    if not (0 <= scores.alpha <= 1 and 0 <= scores.beta <= 1) or abs(scores.alpha + scores.beta - 1) > WEIGHT_TOL:
        raise WeightSumViolation("alpha + beta must equal 1")
    return scores.alpha * scores.completeness + scores.beta * scores.quality


def distortion_rating(scores: SensingScores) -> float:
    lo, hi = scores.lower_bound, scores.upper_bound
    if not lo < hi:
        raise BoundsViolation("lower bound must be below upper bound")
    if not (lo <= scores.observed <= hi and lo <= scores.truth <= hi):
        raise BoundsViolation("sensed and aggregated values must lie within the sensing range")
    _check_fraction("contextual", scores.contextual)
    d = ((scores.observed - scores.truth) / (hi - lo)) ** 2
    return 1.0 - d


def task_rating(value: float, second: float, contextual: float, weights: RatingWeights = RatingWeights()) -> float:
    """Linear blend of value, effort-or-distortion and contextual ratings."""
    _check_fraction("value", value)
    _check_fraction("second", second)
    _check_fraction("contextual", contextual)
    t = weights.w_value * value + weights.w_second * second + weights.w_contextual * contextual
    # guard against 1.0000000000000002 from rounding
    return min(1.0, max(0.0, t))


def update_weight(submissions: int) -> float:
    return math.tanh(submissions)


def update_reputation(record: ReputationRecord, t_r: float, *, count_current: bool = True) -> ReputationRecord:
    """Fold one task rating into a reputation record.

    Good work (``t_r >= t_min``) leans on the old score; bad work leans on the
    new rating. The lean grows with the submission count through tanh, so an
    established worker is punished almost entirely by a single bad rating.
    With ``count_current`` the submission being rated is included in the count.
    """
    _check_fraction("t_r", t_r)
    s_new = record.submissions + 1
    omega = update_weight(s_new if count_current else record.submissions)
    if t_r >= record.t_min:
        score = omega * record.score + (1 - omega) * t_r
    else:
        score = (1 - omega) * record.score + omega * t_r
    lo, hi = min(record.score, t_r), max(record.score, t_r)
    score = min(hi, max(lo, score))
    return replace(record, score=score, submissions=s_new)


def update_bounds(bounds: AmountBounds | None, amount: float) -> AmountBounds:
    if amount < 0:
        raise NegativeAmount(f"amount {amount} is negative")
    if bounds is None:
        return AmountBounds(amount, amount)
    return AmountBounds(min(bounds.a_min, amount), max(bounds.a_max, amount))
