from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .core import (
    MAX_SEED,
    BanditInstance,
    deterministic_hard_instance,
    gap_instance,
    instance_from_means,
)
from .infotheory import DEFAULT_LOWER_C1, DEFAULT_LOWER_C2, hard_gap
from .link import DEFAULT_AUDIT_TOLERANCE, DEFAULT_SNR_CAP, ChannelParams
from .policies import Algorithm

logger = logging.getLogger(__name__)

InstanceFamily = Literal["gap", "gaussian", "rademacher", "deterministic_hard"]


class ExperimentConfig(BaseModel):
    """One experiment, stored as a flat JSON object.

    ``snr`` is shorthand: when it is set, ``noise_variance`` is derived as
    ``power / snr`` and any value given for it is replaced.
    """

    model_config = ConfigDict(extra="forbid")

    family: InstanceFamily = "gap"
    num_arms: int = Field(default=2, ge=1)
    means: Optional[List[float]] = None
    delta: Optional[float] = None
    good_arm: int = Field(default=0, ge=0)
    reward_bound: float = Field(default=1.0, ge=1.0)
    power: float = Field(default=1.0, gt=0.0)
    noise_variance: float = Field(default=1.0, ge=0.0)
    snr: Optional[float] = Field(default=None, gt=0.0)
    algorithm: Algorithm = Algorithm.UCB0
    horizon: int = Field(default=1000, ge=2)
    replications: int = Field(default=10, ge=1)
    seed: int = Field(default=0, ge=0, lt=MAX_SEED)
    out_dir: str = "results"
    audit_tolerance: float = Field(default=DEFAULT_AUDIT_TOLERANCE, ge=0.0)
    retain_full_transcript: bool = False
    parallel: int = Field(default=1, ge=1)
    snr_cap: float = Field(default=DEFAULT_SNR_CAP, gt=0.0)
    lower_bound_c1: float = Field(default=DEFAULT_LOWER_C1, gt=0.0)
    lower_bound_c2: float = Field(default=DEFAULT_LOWER_C2, gt=0.0)
    sweep_snr: List[float] = Field(default_factory=list)
    sweep_b: List[float] = Field(default_factory=list)
    sweep_horizon: List[int] = Field(default_factory=list)

    @field_validator("delta")
    @classmethod
    def _delta_in_range(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 < v < 0.25:
            raise ValueError(f"delta must lie in the open interval (0, 1/4), got {v}")
        return v

    @field_validator("sweep_snr")
    @classmethod
    def _positive_snrs(cls, v: List[float]) -> List[float]:
        for snr in v:
            if not snr > 0:
                raise ValueError(f"sweep SNR values must be positive, got {snr}")
        return v

    @field_validator("sweep_b")
    @classmethod
    def _bounds_at_least_one(cls, v: List[float]) -> List[float]:
        for b in v:
            if b < 1.0:
                raise ValueError(f"sweep B values must be >= 1, got {b}")
        return v

    @field_validator("sweep_horizon")
    @classmethod
    def _horizons_at_least_two(cls, v: List[int]) -> List[int]:
        for t in v:
            if t < 2:
                raise ValueError(f"sweep horizon values must be >= 2, got {t}")
        return v

    @model_validator(mode="after")
    def _check_instance_fields(self) -> "ExperimentConfig":
        if self.snr is not None:
            self.noise_variance = 0.0 if math.isinf(self.snr) else self.power / self.snr
        if self.family == "gap" and self.num_arms < 2:
            raise ValueError(f"gap instance needs num_arms >= 2, got {self.num_arms}")
        if self.family in ("gaussian", "rademacher"):
            if not self.means:
                raise ValueError(f"family {self.family!r} needs a non-empty 'means' list")
            if len(self.means) != self.num_arms:
                raise ValueError(f"means has {len(self.means)} entries but num_arms is {self.num_arms}")
        if self.family == "deterministic_hard" and self.good_arm >= self.num_arms:
            raise ValueError(f"good_arm must be in [0, {self.num_arms - 1}], got {self.good_arm}")
        return self

    def channel(self) -> ChannelParams:
        return ChannelParams(power=self.power, noise_variance=self.noise_variance)

    def effective_snr(self) -> float:
        return self.channel().effective_snr(self.snr_cap)


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def load_config(path: Path | str) -> ExperimentConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return ExperimentConfig.model_validate(raw)


def save_config(cfg: ExperimentConfig, path: Path | str) -> None:
    Path(path).write_text(json.dumps(cfg.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")


def apply_overrides(cfg: ExperimentConfig, **updates: Any) -> ExperimentConfig:
    """Return a re-validated copy with the non-None ``updates`` applied."""
    changes: Dict[str, Any] = {k: v for k, v in updates.items() if v is not None}
    if not changes:
        return cfg
    return ExperimentConfig.model_validate(cfg.model_copy(update=changes).model_dump())


def build_instance(cfg: ExperimentConfig) -> BanditInstance:
    """Construct the bandit instance a config describes.

    A gap config without ``delta`` uses the hard gap for its (K, T, SNR).
    """
    if cfg.family == "gap":
        delta = cfg.delta
        if delta is None:
            delta = hard_gap(cfg.num_arms, cfg.horizon, cfg.effective_snr())
            logger.info(f"No delta configured; using hard gap {delta:.6g} for K={cfg.num_arms}, T={cfg.horizon}")
        arms = gap_instance(cfg.num_arms, delta).arms
        return BanditInstance(arms=arms, second_moment_bound=cfg.reward_bound)
    if cfg.family == "deterministic_hard":
        return deterministic_hard_instance(cfg.num_arms, cfg.reward_bound, cfg.good_arm)
    return instance_from_means(cfg.family, list(cfg.means or []), cfg.reward_bound)


__all__ = [
    "InstanceFamily",
    "ExperimentConfig",
    "default_config",
    "load_config",
    "save_config",
    "apply_overrides",
    "build_instance",
]
