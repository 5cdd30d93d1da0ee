from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Annotated, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

logger = logging.getLogger(__name__)

# Draws are pulled from numpy in fixed-size blocks; the block size is part of
# the reproducibility contract, changing it changes every transcript.
RNG_BLOCK_SIZE = 4096
MAX_SEED = 2**64


class UnitGaussian(BaseModel):
    """Mean plus a standard normal draw (subgaussian, variance factor 1)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["unit_gaussian"] = "unit_gaussian"
    mean: float

    @field_validator("mean")
    @classmethod
    def _finite_mean(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("UnitGaussian mean must be finite")
        return v


class ShiftedRademacher(BaseModel):
    """Takes values in {-1, +1} with expectation ``mean``."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["shifted_rademacher"] = "shifted_rademacher"
    mean: float

    @field_validator("mean")
    @classmethod
    def _mean_in_range(cls, v: float) -> float:
        if not -1.0 <= v <= 1.0:
            raise ValueError(f"ShiftedRademacher mean must satisfy |mean| <= 1, got {v}")
        return v


class Deterministic(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["deterministic"] = "deterministic"
    value: float

    @field_validator("value")
    @classmethod
    def _finite_value(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Deterministic value must be finite")
        return v

    @property
    def mean(self) -> float:
        return self.value


RewardFamily = Annotated[
    Union[UnitGaussian, ShiftedRademacher, Deterministic],
    Field(discriminator="kind"),
]


def analytic_second_moment(family: UnitGaussian | ShiftedRademacher | Deterministic) -> float:
    """Closed-form E[X^2] for a reward family."""
    if isinstance(family, UnitGaussian):
        return family.mean**2 + 1.0
    if isinstance(family, ShiftedRademacher):
        return 1.0
    return family.value**2


class BanditInstance(BaseModel):
    """K reward distributions plus the declared second-moment bound B.

    Arms are addressed by 0-based index. ``best_arm`` breaks mean ties toward
    the lowest index.
    """

    model_config = ConfigDict(frozen=True)

    arms: Tuple[RewardFamily, ...] = Field(min_length=1)
    second_moment_bound: float = Field(ge=1.0)

    @model_validator(mode="after")
    def _check_second_moments(self) -> "BanditInstance":
        bound_sq = self.second_moment_bound**2
        for idx, arm in enumerate(self.arms):
            moment = analytic_second_moment(arm)
            # a hair of slack so Deterministic(B) with B**2 computed twice still passes
            if moment > bound_sq * (1.0 + 1e-12):
                raise ValueError(
                    f"arm {idx} has E[X^2] = {moment:g} which exceeds B^2 = {bound_sq:g}"
                )
        return self

    @property
    def num_arms(self) -> int:
        return len(self.arms)

    @property
    def means(self) -> List[float]:
        return [arm.mean for arm in self.arms]

    @property
    def best_arm(self) -> int:
        means = self.means
        best = 0
        for idx in range(1, len(means)):
            if means[idx] > means[best]:
                best = idx
        return best

    @property
    def best_mean(self) -> float:
        return self.means[self.best_arm]

    @property
    def gaps(self) -> List[float]:
        top = self.best_mean
        return [top - m for m in self.means]

    @property
    def digest(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def seeded_generator(seed: int, stream: int = 0, substream: int = 0) -> np.random.Generator:
    for name, value in (("seed", seed), ("stream", stream), ("substream", substream)):
        if not 0 <= int(value) < MAX_SEED:
            raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(substream)))
    return np.random.Generator(np.random.PCG64(seq))


@dataclass
class RandomSource:
    """Seeded draw stream.

    The generator is ``PCG64`` seeded by ``SeedSequence(seed, spawn_key=(stream, substream))``,
    so equal (seed, stream, substream) reproduce the same draws on every platform
    and distinct stream ids give independent streams. Normals come from numpy's
    ziggurat sampler and uniforms from ``Generator.random``, each buffered in
    blocks of ``RNG_BLOCK_SIZE``.
    """

    seed: int
    stream: int = 0
    substream: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)
    _normals: List[float] = field(init=False, repr=False, default_factory=list)
    _normal_pos: int = field(init=False, repr=False, default=0)
    _uniforms: List[float] = field(init=False, repr=False, default_factory=list)
    _uniform_pos: int = field(init=False, repr=False, default=0)

    def __post_init__(self) -> None:
        self._gen = seeded_generator(self.seed, self.stream, self.substream)

    def normal(self) -> float:
        if self._normal_pos >= len(self._normals):
            self._normals = self._gen.standard_normal(RNG_BLOCK_SIZE).tolist()
            self._normal_pos = 0
        value = self._normals[self._normal_pos]
        self._normal_pos += 1
        return value

    def uniform(self) -> float:
        if self._uniform_pos >= len(self._uniforms):
            self._uniforms = self._gen.random(RNG_BLOCK_SIZE).tolist()
            self._uniform_pos = 0
        value = self._uniforms[self._uniform_pos]
        self._uniform_pos += 1
        return value

    def substream_source(self, substream: int) -> "RandomSource":
        return RandomSource(self.seed, self.stream, substream)


def sample_reward(family: UnitGaussian | ShiftedRademacher | Deterministic, rng: RandomSource) -> float:
    if isinstance(family, UnitGaussian):
        return family.mean + rng.normal()
    if isinstance(family, ShiftedRademacher):
        return 1.0 if rng.uniform() < 0.5 * (1.0 + family.mean) else -1.0
    return family.value


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 0.25:
        raise ValueError(f"delta must lie in the open interval (0, 1/4), got {delta}")


def gap_instance(num_arms: int, delta: float) -> BanditInstance:
    """Rademacher arms, arm 0 with mean delta and the rest with mean 0, B = 1."""
    if num_arms < 2:
        raise ValueError(f"gap instance needs at least 2 arms, got {num_arms}")
    _check_delta(delta)
    arms = [ShiftedRademacher(mean=delta)] + [ShiftedRademacher(mean=0.0) for _ in range(num_arms - 1)]
    return BanditInstance(arms=arms, second_moment_bound=1.0)


def perturbed_gap_instance(num_arms: int, delta: float, perturbed_arm: int) -> BanditInstance:
    """The alternative to ``gap_instance``: arm ``perturbed_arm`` is raised to mean 2*delta."""
    if num_arms < 2:
        raise ValueError(f"gap instance needs at least 2 arms, got {num_arms}")
    _check_delta(delta)
    if not 1 <= perturbed_arm < num_arms:
        raise ValueError(f"perturbed_arm must be in [1, {num_arms - 1}], got {perturbed_arm}")
    means = [delta] + [0.0] * (num_arms - 1)
    means[perturbed_arm] = 2.0 * delta
    return BanditInstance(arms=[ShiftedRademacher(mean=m) for m in means], second_moment_bound=1.0)


def deterministic_hard_instance(num_arms: int, bound: float, good_arm: int) -> BanditInstance:
    """Arm ``good_arm`` always pays ``bound``, every other arm pays ``-bound``."""
    if num_arms < 1:
        raise ValueError("num_arms must be at least 1")
    if not 0 <= good_arm < num_arms:
        raise ValueError(f"good_arm must be in [0, {num_arms - 1}], got {good_arm}")
    arms = [Deterministic(value=bound if idx == good_arm else -bound) for idx in range(num_arms)]
    return BanditInstance(arms=arms, second_moment_bound=bound)


def instance_from_means(family: str, means: List[float], bound: float) -> BanditInstance:
    if not means:
        raise ValueError("means must not be empty")
    if family == "gaussian":
        arms = [UnitGaussian(mean=m) for m in means]
    elif family == "rademacher":
        arms = [ShiftedRademacher(mean=m) for m in means]
    else:
        raise ValueError(f"unknown reward family {family!r}; expected 'gaussian' or 'rademacher'")
    return BanditInstance(arms=arms, second_moment_bound=bound)


__all__ = [
    "UnitGaussian",
    "ShiftedRademacher",
    "Deterministic",
    "RewardFamily",
    "BanditInstance",
    "RandomSource",
    "seeded_generator",
    "analytic_second_moment",
    "sample_reward",
    "gap_instance",
    "perturbed_gap_instance",
    "deterministic_hard_instance",
    "instance_from_means",
]
