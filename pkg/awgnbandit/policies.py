"""Learner-side algorithms: the UCB index, and the UCB0 / UE-UCB / UE-UCB++ schedules.

Arms are 0-based; rounds t run 1..T. Exploration visits arms round-robin in
blocks of tau consecutive pulls, sub-phase by sub-phase. The exploitation phase
starts from a fresh UCB state, so every arm gets one forced pull there.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .infotheory import b_recursion, b_squared_sequence, integer_ceiling, sub_phase_length
from .link import DEFAULT_SNR_CAP, CasParams, ChannelParams

logger = logging.getLogger(__name__)


class Algorithm(str, Enum):
    UCB0 = "ucb0"
    UE_UCB = "ue-ucb"
    UE_UCB_PP = "ue-ucb++"


class Phase(str, Enum):
    EXPLORE = "explore"
    EXPLOIT = "exploit"


class InfeasibleHorizonError(ValueError):
    """The exploration phase does not fit inside the horizon."""

    def __init__(self, message: str, min_horizon: int):
        super().__init__(message)
        self.min_horizon = min_horizon


class Schedule(BaseModel):
    """Derived parameters of one algorithm for fixed (K, T, B, P, SNR).

    ``variance_bounds`` and ``thetas`` hold one entry per exploration sub-phase
    followed by one entry for the exploitation phase. ``variance_bounds[i]`` is
    the analytic bound V on E[(X - S)^2] for rounds in that segment, and
    ``thetas[i] = sqrt(P / V)``. For UE-UCB++ the variance bounds are exactly
    the B^2 recursion B_1^2, ..., B_{L+1}^2.
    """

    model_config = ConfigDict(frozen=True)

    algorithm: Algorithm
    num_arms: int = Field(ge=1)
    horizon: int = Field(ge=2)
    reward_bound: float = Field(ge=1.0)
    power: float = Field(gt=0.0)
    snr: float = Field(gt=0.0)
    sub_phases: int = Field(ge=0)
    block_length: int = Field(ge=0)
    variance_bounds: Tuple[float, ...] = Field(min_length=1)
    thetas: Tuple[float, ...] = Field(min_length=1)
    eta: float = Field(ge=0.0)

    @property
    def exploration_rounds(self) -> int:
        return self.sub_phases * self.num_arms * self.block_length

    @property
    def exploit_theta(self) -> float:
        return self.thetas[-1]

    @property
    def b_squared(self) -> Tuple[float, ...]:
        return self.variance_bounds

    def _check_round(self, t: int) -> None:
        if not 1 <= t <= self.horizon:
            raise ValueError(f"round {t} outside 1..{self.horizon}")

    def phase_at(self, t: int) -> Tuple[Phase, Optional[int]]:
        """Phase of round t and its 1-based sub-phase index (None when exploiting)."""
        self._check_round(t)
        if t <= self.exploration_rounds:
            return Phase.EXPLORE, (t - 1) // (self.num_arms * self.block_length) + 1
        return Phase.EXPLOIT, None

    def explore_arm(self, t: int) -> int:
        self._check_round(t)
        if t > self.exploration_rounds:
            raise ValueError(f"round {t} is not an exploration round")
        return ((t - 1) % (self.num_arms * self.block_length)) // self.block_length

    def _segment(self, t: int) -> int:
        _, level = self.phase_at(t)
        return level - 1 if level is not None else len(self.thetas) - 1

    def theta_at(self, t: int) -> float:
        return self.thetas[self._segment(t)]

    def power_bound_at(self, t: int) -> float:
        return self.variance_bounds[self._segment(t)]


def build_schedule(
    algorithm: Algorithm | str,
    num_arms: int,
    horizon: int,
    reward_bound: float,
    channel: ChannelParams,
    snr_cap: float = DEFAULT_SNR_CAP,
) -> Schedule:
    algorithm = Algorithm(algorithm)
    if num_arms < 1:
        raise ValueError(f"K must be >= 1, got {num_arms}")
    if horizon < 2:
        raise ValueError(f"T must be >= 2, got {horizon}")
    if reward_bound < 1.0:
        raise ValueError(f"B must be >= 1, got {reward_bound}")
    snr = channel.effective_snr(snr_cap)
    b_sq = reward_bound * reward_bound

    if algorithm is Algorithm.UCB0:
        sub_phases, block = 0, 0
        bounds: Tuple[float, ...] = (b_sq,)
    elif algorithm is Algorithm.UE_UCB:
        sub_phases, block = 1, integer_ceiling(b_sq / snr + 1.0)
        bounds = (b_sq, 2.0)
    else:
        bounds = b_recursion(reward_bound, snr) if reward_bound >= 2.0 else b_squared_sequence(reward_bound, snr)
        sub_phases, block = len(bounds) - 1, sub_phase_length(snr)

    eta = bounds[-1] / snr + 1.0
    thetas = tuple(math.sqrt(channel.power / v) for v in bounds)
    schedule = Schedule(
        algorithm=algorithm,
        num_arms=num_arms,
        horizon=horizon,
        reward_bound=reward_bound,
        power=channel.power,
        snr=snr,
        sub_phases=sub_phases,
        block_length=block,
        variance_bounds=bounds,
        thetas=thetas,
        eta=eta,
    )
    if schedule.exploration_rounds >= horizon:
        min_horizon = schedule.exploration_rounds + 1
        raise InfeasibleHorizonError(
            f"{algorithm.value} explores for {schedule.exploration_rounds} rounds "
            f"(L={sub_phases}, K={num_arms}, tau={block}); horizon must be at least {min_horizon}, got {horizon}",
            min_horizon=min_horizon,
        )
    logger.debug(
        f"Built {algorithm.value} schedule: K={num_arms} T={horizon} B={reward_bound:g} SNR={snr:g} "
        f"L={sub_phases} tau={block} eta={eta:.6g}"
    )
    return schedule


@dataclass
class UcbState:
    num_arms: int
    eta: float
    horizon: float
    counts: List[int] = field(default_factory=list)
    means: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.num_arms < 1:
            raise ValueError(f"K must be >= 1, got {self.num_arms}")
        if self.horizon < 2:
            raise ValueError(f"T must be >= 2, got {self.horizon}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if not self.counts:
            self.counts = [0] * self.num_arms
            self.means = [0.0] * self.num_arms
        self._radius_scale = 4.0 * self.eta * math.log(self.horizon)

    def update(self, arm: int, reward: float) -> None:
        n = self.counts[arm] + 1
        self.counts[arm] = n
        self.means[arm] += (reward - self.means[arm]) / n

    @property
    def total_pulls(self) -> int:
        return sum(self.counts)


def ucb_index(state: UcbState, arm: int) -> float:
    if not 0 <= arm < state.num_arms:
        raise ValueError(f"arm {arm} outside 0..{state.num_arms - 1}")
    n = state.counts[arm]
    if n == 0:
        return math.inf
    return state.means[arm] + math.sqrt(state._radius_scale / n)


def argmax_lowest(values: Sequence[float]) -> int:
    """Index of the largest value; ties go to the lowest index."""
    best = 0
    for idx in range(1, len(values)):
        if values[idx] > values[best]:
            best = idx
    return best


def select_arm(state: UcbState) -> int:
    return argmax_lowest([ucb_index(state, arm) for arm in range(state.num_arms)])


@dataclass
class PolicyState:
    """Learner memory for one episode.

    ``estimates`` is the side information currently sent for each arm: zeros
    until the first sub-phase completes, then the latest finalized sub-phase
    means. ``estimate_history`` keeps every finalized row.
    """

    num_arms: int
    ucb: UcbState
    next_round: int = 1
    pending: Optional[Tuple[int, int]] = None
    estimates: List[float] = field(default_factory=list)
    estimate_history: List[Tuple[float, ...]] = field(default_factory=list)
    block_sums: List[float] = field(default_factory=list)
    _cas_cache: Dict[Tuple[int, int], CasParams] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.estimates:
            self.estimates = [0.0] * self.num_arms
        if not self.block_sums:
            self.block_sums = [0.0] * self.num_arms


def new_policy_state(schedule: Schedule) -> PolicyState:
    ucb = UcbState(num_arms=schedule.num_arms, eta=schedule.eta, horizon=schedule.horizon)
    return PolicyState(num_arms=schedule.num_arms, ucb=ucb)


def _cas_for(schedule: Schedule, state: PolicyState, segment: int, arm: int) -> CasParams:
    key = (segment, arm)
    cas = state._cas_cache.get(key)
    if cas is None:
        cas = CasParams(theta=schedule.thetas[segment], side_info=state.estimates[arm])
        state._cas_cache[key] = cas
    return cas


def learner_step(schedule: Schedule, state: PolicyState, t: int) -> Tuple[int, float, CasParams]:
    """Choose the arm for round t and the CAS parameters the client must use."""
    if state.pending is not None:
        raise ValueError(f"round {state.pending[0]} has not been updated yet")
    if t != state.next_round:
        raise ValueError(f"expected round {state.next_round}, got {t}")
    phase, level = schedule.phase_at(t)
    if phase is Phase.EXPLORE:
        arm = schedule.explore_arm(t)
        segment = level - 1
    else:
        arm = select_arm(state.ucb)
        segment = len(schedule.thetas) - 1
    cas = _cas_for(schedule, state, segment, arm)
    state.pending = (t, arm)
    return arm, cas.side_info, cas


def learner_update(schedule: Schedule, state: PolicyState, t: int, arm: int, decoded: float) -> PolicyState:
    if state.pending != (t, arm):
        raise ValueError(f"out-of-order update for round {t}, arm {arm}; pending {state.pending}")
    if not math.isfinite(decoded):
        raise ValueError(f"decoded reward must be finite, got {decoded!r}")
    phase, level = schedule.phase_at(t)
    if phase is Phase.EXPLORE:
        state.block_sums[arm] += decoded
        if t == level * schedule.num_arms * schedule.block_length:
            row = tuple(total / schedule.block_length for total in state.block_sums)
            state.estimate_history.append(row)
            state.estimates = list(row)
            state.block_sums = [0.0] * state.num_arms
            state._cas_cache.clear()
            logger.debug(f"Sub-phase {level} finalized estimates {row}")
    else:
        state.ucb.update(arm, decoded)
    state.pending = None
    state.next_round = t + 1
    return state


__all__ = [
    "Algorithm",
    "Phase",
    "InfeasibleHorizonError",
    "Schedule",
    "build_schedule",
    "UcbState",
    "ucb_index",
    "argmax_lowest",
    "select_arm",
    "PolicyState",
    "new_policy_state",
    "learner_step",
    "learner_update",
]
