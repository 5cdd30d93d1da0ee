"""Regret bound evaluators, the B^2 sub-phase recursion and discrete divergences.

Divergences are in nats. Capacity and mutual information are in bits.
"""

from __future__ import annotations

import logging
import math
import threading
from typing import List, Optional, Sequence, Tuple

import numpy as np
from cachetools import LRUCache
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator
from scipy import integrate, special, stats

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
RECURSION_CEILING = 4.0
DEFAULT_LOWER_C1 = 1.0 / 20.0
DEFAULT_LOWER_C2 = 1.0
DEFAULT_MI_NODES = 10_000
MIN_MI_NODES = 100
PROBABILITY_SUM_TOL = 1e-12
# values within this distance above an integer are treated as that integer
CEIL_SLACK = 1e-9


class RecursionCertificateError(RuntimeError):
    """The sub-phase recursion ended above its certified ceiling of 4."""


def integer_ceiling(value: float) -> int:
    return int(math.ceil(value - CEIL_SLACK))


def sub_phase_count(bound: float) -> int:
    """L = ceil(2 log2 B), never negative."""
    if bound < 1.0:
        raise ValueError(f"reward bound B must be >= 1, got {bound}")
    return max(integer_ceiling(2.0 * math.log2(bound)), 0)


def sub_phase_length(snr: float) -> int:
    """tau = max(ceil(2/SNR), 2) for the multi-stage explorer."""
    if not snr > 0:
        raise ValueError(f"SNR must be positive, got {snr}")
    return max(integer_ceiling(2.0 / snr), 2)


# Bounded LRU cache for recursion results keyed by (B, SNR)
_recursion_lock = threading.Lock()
_recursion_cache: LRUCache = LRUCache(maxsize=512)


def _get_cached_sequence(key: Tuple[float, float]) -> Optional[Tuple[float, ...]]:
    with _recursion_lock:
        try:
            return _recursion_cache[key]
        except KeyError:
            return None


def _set_cached_sequence(key: Tuple[float, float], seq: Tuple[float, ...]) -> None:
    with _recursion_lock:
        _recursion_cache[key] = seq


def b_squared_sequence(bound: float, snr: float) -> Tuple[float, ...]:
    """Iterate B_1^2 = B^2, B_{l+1}^2 = (B_l^2/SNR + 1)/tau + 1 for l = 1..L.

    Accepts any B >= 1; ``b_recursion`` is the checked public entry point.
    """
    if not math.isfinite(snr) or snr <= 0:
        raise ValueError(f"SNR must be positive and finite, got {snr}")
    key = (float(bound), float(snr))
    cached = _get_cached_sequence(key)
    if cached is not None:
        return cached
    levels = sub_phase_count(bound)
    tau = sub_phase_length(snr)
    seq: List[float] = [bound * bound]
    for _ in range(levels):
        seq.append((seq[-1] / snr + 1.0) / tau + 1.0)
    result = tuple(seq)
    _set_cached_sequence(key, result)
    return result


def b_recursion(bound: float, snr: float) -> Tuple[float, ...]:
    if bound < 2.0:
        raise ValueError(f"b_recursion needs B >= 2, got {bound}")
    seq = b_squared_sequence(bound, snr)
    if seq[-1] > RECURSION_CEILING:
        raise RecursionCertificateError(
            f"B^2_(L+1) = {seq[-1]:.12g} exceeds {RECURSION_CEILING:g} for B={bound:g}, SNR={snr:g}"
        )
    return seq


def contraction_offset(snr: float) -> float:
    """The fixed offset 2((SNR ^ 1)/2 + 1) the recursion contracts toward."""
    return 2.0 * (min(snr, 1.0) / 2.0 + 1.0)


class BoundTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    value: float


class BoundReport(BaseModel):
    """A regret bound evaluated at (K, T, B, SNR), kept as its named addends."""

    model_config = ConfigDict(frozen=True)

    algorithm: str
    num_arms: int
    horizon: float
    reward_bound: float
    snr: float
    terms: Tuple[BoundTerm, ...]
    unit: str = "reward"
    warnings: Tuple[str, ...] = ()

    @computed_field  # type: ignore[prop-decorator]
    @property
    def value(self) -> float:
        return math.fsum(term.value for term in self.terms)

    def term(self, name: str) -> float:
        for item in self.terms:
            if item.name == name:
                return item.value
        raise KeyError(name)


def _check_bound_args(num_arms: int, horizon: float, bound: float, snr: float) -> None:
    if num_arms < 1:
        raise ValueError(f"K must be >= 1, got {num_arms}")
    if horizon < 2:
        raise ValueError(f"T must be >= 2, got {horizon}")
    if bound < 1.0:
        raise ValueError(f"B must be >= 1, got {bound}")
    if not snr > 0:
        raise ValueError(f"SNR must be positive, got {snr}")


def _confidence_term(alpha_sq: float, num_arms: int, horizon: float) -> float:
    return 8.0 * math.sqrt(alpha_sq * num_arms * horizon * math.log(horizon))


def ucb_lemma_bound(alpha_sq: float, num_arms: int, horizon: float, bound: float) -> float:
    if horizon < 2:
        raise ValueError(f"T must be >= 2, got {horizon}")
    if alpha_sq < 0:
        raise ValueError(f"variance factor must be non-negative, got {alpha_sq}")
    return _confidence_term(alpha_sq, num_arms, horizon) + 6.0 * num_arms * bound


def ucb0_bound(num_arms: int, horizon: float, bound: float, snr: float) -> BoundReport:
    _check_bound_args(num_arms, horizon, bound, snr)
    alpha_sq = bound * bound / snr + 1.0
    return BoundReport(
        algorithm="ucb0",
        num_arms=num_arms,
        horizon=horizon,
        reward_bound=bound,
        snr=snr,
        terms=(
            BoundTerm(name="confidence", value=_confidence_term(alpha_sq, num_arms, horizon)),
            BoundTerm(name="forced_pulls", value=6.0 * num_arms * bound),
        ),
    )


def ue_ucb_bound(num_arms: int, horizon: float, bound: float, snr: float) -> BoundReport:
    _check_bound_args(num_arms, horizon, bound, snr)
    return BoundReport(
        algorithm="ue-ucb",
        num_arms=num_arms,
        horizon=horizon,
        reward_bound=bound,
        snr=snr,
        terms=(
            BoundTerm(name="exploration", value=2.0 * num_arms * bound**3 / snr),
            BoundTerm(name="forced_pulls", value=8.0 * num_arms * bound),
            BoundTerm(name="confidence", value=_confidence_term(2.0 / snr + 1.0, num_arms, horizon)),
        ),
    )


def ue_ucb_pp_bound(num_arms: int, horizon: float, bound: float, snr: float) -> BoundReport:
    _check_bound_args(num_arms, horizon, bound, snr)
    warnings: List[str] = []
    if bound < 2.0:
        exploration = 0.0
        levels = sub_phase_count(bound)
        if levels == 0:
            msg = f"B = {bound:g} < 2: sub-phase count 2*log2(B) is degenerate, exploration term set to 0"
        else:
            msg = (
                f"B = {bound:g} < 2: the schedule still explores {levels} sub-phases "
                f"but the exploration term assumes B >= 2 and is set to 0"
            )
        logger.warning(msg)
        warnings.append(msg)
    else:
        exploration = 8.0 * num_arms * bound * math.log2(bound) / min(snr, 1.0)
    return BoundReport(
        algorithm="ue-ucb++",
        num_arms=num_arms,
        horizon=horizon,
        reward_bound=bound,
        snr=snr,
        terms=(
            BoundTerm(name="exploration", value=exploration),
            BoundTerm(name="forced_pulls", value=6.0 * num_arms * bound),
            BoundTerm(name="confidence", value=_confidence_term(4.0 / snr + 1.0, num_arms, horizon)),
        ),
        warnings=tuple(warnings),
    )


def _horizon_warning(num_arms: int, horizon: float, snr: float, c2: float) -> Optional[str]:
    rate = min(awgn_capacity(snr), 1.0)
    threshold = math.inf if rate == 0 else c2 * num_arms / rate
    if horizon < threshold:
        return (
            f"lower bound needs T >= c2*K/(capacity ^ 1) = {threshold:.6g}; "
            f"T = {horizon:g} is below it"
        )
    return None


def minimax_lower_bound(
    num_arms: int,
    horizon: float,
    bound: float,
    snr: float,
    c1: float = DEFAULT_LOWER_C1,
    c2: float = DEFAULT_LOWER_C2,
) -> float:
    if not snr > 0:
        raise ValueError(f"SNR must be positive, got {snr}")
    warning = _horizon_warning(num_arms, horizon, snr, c2)
    if warning:
        logger.warning(warning)
    return c1 * (math.sqrt(num_arms * horizon) / math.sqrt(min(snr, 1.0)) + num_arms * bound)


def lower_bound_report(
    num_arms: int,
    horizon: float,
    bound: float,
    snr: float,
    c1: float = DEFAULT_LOWER_C1,
    c2: float = DEFAULT_LOWER_C2,
) -> BoundReport:
    _check_bound_args(num_arms, horizon, bound, snr)
    warning = _horizon_warning(num_arms, horizon, snr, c2)
    if warning:
        logger.warning(warning)
    return BoundReport(
        algorithm="lower",
        num_arms=num_arms,
        horizon=horizon,
        reward_bound=bound,
        snr=snr,
        terms=(
            BoundTerm(name="statistical", value=c1 * math.sqrt(num_arms * horizon) / math.sqrt(min(snr, 1.0))),
            BoundTerm(name="forced_pulls", value=c1 * num_arms * bound),
        ),
        warnings=(warning,) if warning else (),
    )


def capacity_lower_bound(
    num_arms: int,
    horizon: float,
    bound: float,
    snr: float,
    c1: float = DEFAULT_LOWER_C1,
    c2: float = DEFAULT_LOWER_C2,
) -> float:
    """c1 * (min(sqrt(KT / (capacity ^ 1)), c2*T) + KB), capacity in bits."""
    if not snr > 0:
        raise ValueError(f"SNR must be positive, got {snr}")
    warning = _horizon_warning(num_arms, horizon, snr, c2)
    if warning:
        logger.warning(warning)
    rate = min(awgn_capacity(snr), 1.0)
    statistical = min(math.sqrt(num_arms * horizon / rate), c2 * horizon)
    return c1 * (statistical + num_arms * bound)


def hard_gap(num_arms: int, horizon: float, snr: float) -> float:
    """Gap of the two-point construction: Delta^2 = (K-1) / (16 ln2 * T * (capacity ^ 1))."""
    if num_arms < 2:
        raise ValueError(f"hard_gap needs K >= 2, got {num_arms}")
    if horizon < 1:
        raise ValueError(f"T must be >= 1, got {horizon}")
    if not snr > 0:
        raise ValueError(f"SNR must be positive, got {snr}")
    rate = min(awgn_capacity(snr), 1.0)
    delta = math.sqrt((num_arms - 1) / (16.0 * LN2 * horizon * rate))
    if delta >= 0.25:
        raise ValueError(
            f"horizon T = {horizon:g} too short: hard gap {delta:.4g} is outside (0, 1/4)"
        )
    return delta


def two_point_regret_floor(horizon: float, delta: float, divergence: float) -> float:
    """T*Delta/2 * (1 - sqrt(D/2)), floored at 0; lower-bounds R(nu) + R(nu')."""
    if divergence < 0:
        raise ValueError(f"divergence must be non-negative, got {divergence}")
    return 0.5 * horizon * delta * max(0.0, 1.0 - math.sqrt(divergence / 2.0))


class DiscreteDistribution(BaseModel):
    model_config = ConfigDict(frozen=True)

    probs: Tuple[float, ...] = Field(min_length=1)

    @field_validator("probs")
    @classmethod
    def _is_probability_vector(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        for p in v:
            if not math.isfinite(p) or p < 0:
                raise ValueError(f"probabilities must be finite and >= 0, got {p}")
        total = math.fsum(v)
        if abs(total - 1.0) > PROBABILITY_SUM_TOL:
            raise ValueError(f"probabilities must sum to 1 within {PROBABILITY_SUM_TOL:g}, got {total!r}")
        return v

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "DiscreteDistribution":
        arr = np.asarray(weights, dtype=float)
        return cls(probs=tuple((arr / arr.sum()).tolist()))

    @property
    def size(self) -> int:
        return len(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


def _pair(p: DiscreteDistribution, q: DiscreteDistribution) -> Tuple[np.ndarray, np.ndarray]:
    if p.size != q.size:
        raise ValueError(f"alphabet mismatch: {p.size} vs {q.size} atoms")
    return p.as_array(), q.as_array()


def kl_divergence(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    pa, qa = _pair(p, q)
    if np.any((qa == 0) & (pa > 0)):
        return math.inf
    return float(stats.entropy(pa, qa))


def chi_square(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    pa, qa = _pair(p, q)
    diff = pa - qa
    if np.any((qa == 0) & (diff != 0)):
        return math.inf
    mask = qa > 0
    return math.fsum((diff[mask] ** 2 / qa[mask]).tolist())


def total_variation(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    pa, qa = _pair(p, q)
    return 0.5 * math.fsum(np.abs(pa - qa).tolist())


def max_density_ratio(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """c = max p/q over the support of p."""
    pa, qa = _pair(p, q)
    support = pa > 0
    if np.any(qa[support] == 0):
        return math.inf
    return float(np.max(pa[support] / qa[support]))


def binary_kl(p: float, q: float) -> float:
    """KL(Bernoulli(p) || Bernoulli(q)) in nats."""
    for name, value in (("p", p), ("q", q)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return kl_divergence(
        DiscreteDistribution(probs=(p, 1.0 - p)),
        DiscreteDistribution(probs=(q, 1.0 - q)),
    )


def awgn_capacity(snr: float) -> float:
    """Gaussian channel capacity 1/2 log2(1 + SNR) in bits."""
    if snr < 0 or math.isnan(snr):
        raise ValueError(f"SNR must be >= 0, got {snr}")
    return 0.5 * math.log2(1.0 + snr)


def awgn_capacity_nats(snr: float) -> float:
    if snr < 0 or math.isnan(snr):
        raise ValueError(f"SNR must be >= 0, got {snr}")
    return 0.5 * math.log1p(snr)


def binary_input_mi(amplitude: float, noise_variance: float, nodes: int = DEFAULT_MI_NODES) -> float:
    """I(V; V + Z) in bits for V uniform on {-a, +a} and Z ~ N(0, sigma^2).

    Trapezoidal rule on a fixed uniform grid over +-(a + 8 sigma).
    """
    if amplitude < 0 or not math.isfinite(amplitude):
        raise ValueError(f"amplitude must be finite and >= 0, got {amplitude}")
    if not noise_variance > 0:
        raise ValueError(f"noise variance must be > 0, got {noise_variance}")
    if nodes < MIN_MI_NODES:
        raise ValueError(f"quadrature needs at least {MIN_MI_NODES} nodes, got {nodes}")
    if amplitude == 0:
        return 0.0
    sigma = math.sqrt(noise_variance)
    half_width = amplitude + 8.0 * sigma
    grid = np.linspace(-half_width, half_width, nodes)
    density = 0.5 * (
        stats.norm.pdf(grid, loc=amplitude, scale=sigma) + stats.norm.pdf(grid, loc=-amplitude, scale=sigma)
    )
    output_entropy = float(integrate.trapezoid(-special.xlogy(density, density), grid))
    noise_entropy = 0.5 * math.log(2.0 * math.pi * math.e * noise_variance)
    return max(0.0, (output_entropy - noise_entropy) / LN2)


__all__ = [
    "RecursionCertificateError",
    "BoundTerm",
    "BoundReport",
    "DiscreteDistribution",
    "integer_ceiling",
    "sub_phase_count",
    "sub_phase_length",
    "b_squared_sequence",
    "b_recursion",
    "contraction_offset",
    "ucb_lemma_bound",
    "ucb0_bound",
    "ue_ucb_bound",
    "ue_ucb_pp_bound",
    "minimax_lower_bound",
    "lower_bound_report",
    "capacity_lower_bound",
    "hard_gap",
    "two_point_regret_floor",
    "kl_divergence",
    "chi_square",
    "total_variation",
    "max_density_ratio",
    "binary_kl",
    "awgn_capacity",
    "awgn_capacity_nats",
    "binary_input_mi",
]
