from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .core import RandomSource

logger = logging.getLogger(__name__)

DEFAULT_SNR_CAP = 1e12
DEFAULT_AUDIT_TOLERANCE = 0.1


class ChannelParams(BaseModel):
    """AWGN channel: power budget P on the encoded signal and noise variance sigma^2."""

    model_config = ConfigDict(frozen=True)

    power: float = Field(gt=0.0)
    noise_variance: float = Field(ge=0.0)

    @field_validator("power", "noise_variance")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("channel parameters must be finite")
        return v

    @classmethod
    def from_snr(cls, snr: float, power: float = 1.0) -> "ChannelParams":
        if not snr > 0:
            raise ValueError(f"snr must be positive, got {snr}")
        if math.isinf(snr):
            return cls(power=power, noise_variance=0.0)
        return cls(power=power, noise_variance=power / snr)

    @property
    def snr(self) -> float:
        if self.noise_variance == 0.0:
            return math.inf
        return self.power / self.noise_variance

    @property
    def noise_std(self) -> float:
        return math.sqrt(self.noise_variance)

    def effective_snr(self, cap: float = DEFAULT_SNR_CAP) -> float:
        """SNR clamped to ``cap`` so schedule formulas stay finite on a noiseless channel."""
        return min(self.snr, cap)


class CasParams(BaseModel):
    """Centre-and-scale encoder settings: scaling factor theta and side information S."""

    model_config = ConfigDict(frozen=True)

    theta: float = Field(gt=0.0)
    side_info: float = 0.0

    @field_validator("theta", "side_info")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("CAS parameters must be finite")
        return v


@dataclass
class PowerAudit:
    """Running record of squared encoded values for one episode (or a pool of them)."""

    budget: float
    total: float = 0.0
    count: int = 0

    def record(self, encoded: float) -> None:
        self.total += encoded * encoded
        self.count += 1

    def merge(self, other: "PowerAudit") -> None:
        self.total += other.total
        self.count += other.count

    @property
    def empirical_moment(self) -> float:
        if self.count == 0:
            raise AuditError("no transmissions recorded")
        return self.total / self.count


class AuditError(ValueError):
    pass


class AuditReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    empirical_moment: float
    count: int
    budget: float
    tolerance: float
    passed: bool


def cas_encode(x: float, params: CasParams, audit: Optional[PowerAudit] = None) -> float:
    if not math.isfinite(x):
        raise ValueError(f"cannot encode non-finite reward {x!r}")
    encoded = params.theta * (x - params.side_info)
    if audit is not None:
        audit.record(encoded)
    return encoded


def cas_decode(y: float, params: CasParams) -> float:
    return y / params.theta + params.side_info


def transmit(encoded: float, channel: ChannelParams, rng: RandomSource) -> float:
    """Add N(0, sigma^2) noise.

    One normal is consumed per call even on a noiseless channel, so runs that
    differ only in sigma^2 see the same reward and noise draws.
    """
    z = rng.normal()
    if channel.noise_variance == 0.0:
        return encoded
    return encoded + channel.noise_std * z


def audit_check(audit: PowerAudit, tolerance: float = DEFAULT_AUDIT_TOLERANCE) -> AuditReport:
    if tolerance < 0:
        raise ValueError(f"tolerance must be non-negative, got {tolerance}")
    if audit.count == 0:
        raise AuditError("power audit is empty: no transmissions recorded")
    moment = audit.empirical_moment
    passed = moment <= audit.budget * (1.0 + tolerance)
    if not passed:
        logger.warning(
            f"Power audit failed: empirical second moment {moment:.6g} exceeds "
            f"{audit.budget:.6g} * (1 + {tolerance:g}) over {audit.count} transmissions"
        )
    return AuditReport(
        empirical_moment=moment,
        count=audit.count,
        budget=audit.budget,
        tolerance=tolerance,
        passed=passed,
    )


__all__ = [
    "DEFAULT_SNR_CAP",
    "DEFAULT_AUDIT_TOLERANCE",
    "ChannelParams",
    "CasParams",
    "PowerAudit",
    "AuditError",
    "AuditReport",
    "cas_encode",
    "cas_decode",
    "transmit",
    "audit_check",
]
