"""Numerical verification suites behind ``awgnbandit verify``.

Each suite evaluates an inequality or identity on a seeded grid and reports
the worst margin seen; a negative margin beyond the tolerance is a failure.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from .core import Deterministic, RandomSource, ShiftedRademacher, UnitGaussian, sample_reward, seeded_generator
from .infotheory import (
    DiscreteDistribution,
    awgn_capacity,
    b_recursion,
    binary_input_mi,
    chi_square,
    contraction_offset,
    kl_divergence,
    max_density_ratio,
    total_variation,
)
from .link import CasParams, ChannelParams, cas_decode, cas_encode
from .policies import Algorithm, InfeasibleHorizonError, Phase, build_schedule

logger = logging.getLogger(__name__)

VERIFY_SEED = 20240601
PAIR_COUNT = 10_000
MIN_ALPHABET = 2
MAX_ALPHABET = 16
PROBABILITY_FLOOR = 1e-3
INEQUALITY_TOL = 1e-12
MI_TOL = 1e-6
MI_SNR_GRID = (0.1, 0.5, 1.0, 2.0, 4.0, 10.0)
RECURSION_B_GRID = tuple(2.0**k for k in range(1, 11))
RECURSION_SNR_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
REFERENCE_SEQUENCE = (16.0, 9.5, 6.25, 4.625, 3.8125)
LINK_SAMPLES = 10_000
POWER_SAMPLES = 200_000

SUITES = ("kl-chisq", "chisq-kl", "pinsker", "capacity", "recursion", "link", "policies")
FAULTS = ("chi-square",)


class CheckResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    suite: str
    name: str
    passed: bool
    margin: float
    detail: str = ""


def random_distribution_pairs(
    count: int = PAIR_COUNT, seed: int = VERIFY_SEED
) -> List[Tuple[DiscreteDistribution, DiscreteDistribution]]:
    """Seeded pairs over alphabets of 2..16 atoms with every entry >= 1e-3."""
    gen = seeded_generator(seed)
    pairs = []
    for _ in range(count):
        size = int(gen.integers(MIN_ALPHABET, MAX_ALPHABET + 1))
        scale = 1.0 - size * PROBABILITY_FLOOR
        p = PROBABILITY_FLOOR + scale * gen.dirichlet(np.ones(size))
        q = PROBABILITY_FLOOR + scale * gen.dirichlet(np.ones(size))
        pairs.append((DiscreteDistribution.from_weights(p), DiscreteDistribution.from_weights(q)))
    return pairs


def _worst(suite: str, name: str, margins: Iterable[float], tol: float, detail: str = "") -> CheckResult:
    worst = min(margins)
    return CheckResult(suite=suite, name=name, passed=worst >= -tol, margin=worst, detail=detail)


def check_kl_chisq(pairs, chi: Callable = chi_square) -> List[CheckResult]:
    margins = [chi(p, q) - kl_divergence(p, q) for p, q in pairs]
    return [_worst("kl-chisq", "KL <= chi-square", margins, INEQUALITY_TOL, f"{len(margins)} pairs")]


def check_chisq_kl(pairs) -> List[CheckResult]:
    margins = []
    literal_violations = 0
    for p, q in pairs:
        c = max_density_ratio(p, q)
        kl = kl_divergence(p, q)
        chi = chi_square(p, q)
        margins.append(2.0 * c * kl - chi)
        literal_violations += chi > c * kl + INEQUALITY_TOL
    detail = f"{len(margins)} pairs; form chi2 <= c*KL without the factor 2 fails on {literal_violations}"
    return [_worst("chisq-kl", "chi-square <= 2c*KL", margins, INEQUALITY_TOL, detail)]


def check_pinsker(pairs) -> List[CheckResult]:
    margins = [math.sqrt(kl_divergence(p, q) / 2.0) - total_variation(p, q) for p, q in pairs]
    return [_worst("pinsker", "TV <= sqrt(KL/2)", margins, INEQUALITY_TOL, f"{len(margins)} pairs")]


def check_capacity() -> List[CheckResult]:
    results = []
    margins = []
    for snr in MI_SNR_GRID:
        mi = binary_input_mi(1.0, 1.0 / snr)
        margins.append(min(1.0, awgn_capacity(snr)) - mi)
    results.append(
        _worst("capacity", "binary-input MI <= min(1, capacity)", margins, MI_TOL, f"SNR grid {MI_SNR_GRID}")
    )
    spots = {0.0: 0.0, 1.0: 0.5, 3.0: 1.0}
    worst = min(-abs(awgn_capacity(snr) - bits) for snr, bits in spots.items())
    results.append(
        CheckResult(suite="capacity", name="capacity spot values", passed=worst == 0.0, margin=worst)
    )
    return results


def check_recursion() -> List[CheckResult]:
    ceiling_margins = []
    contraction_margins = []
    decrease_margins = []
    for bound in RECURSION_B_GRID:
        for snr in RECURSION_SNR_GRID:
            seq = b_recursion(bound, snr)
            ceiling_margins.append(4.0 - seq[-1])
            offset = contraction_offset(snr)
            for cur, nxt in zip(seq, seq[1:]):
                contraction_margins.append((cur - offset) / 2.0 - (nxt - offset) + INEQUALITY_TOL * cur)
                if cur > min(snr, 1.0) + 2.0:
                    decrease_margins.append(cur - nxt)
    top = 4.0 - min(ceiling_margins)
    results = [
        _worst("recursion", "final B^2 <= 4", ceiling_margins, 0.0, f"max final B^2 over grid {top:.6g}"),
        _worst("recursion", "contraction toward offset", contraction_margins, 0.0),
        CheckResult(
            suite="recursion",
            name="strictly decreasing above offset",
            passed=min(decrease_margins) > 0,
            margin=min(decrease_margins),
        ),
    ]
    ref = b_recursion(4.0, 1.0)
    results.append(
        CheckResult(
            suite="recursion",
            name="reference sequence B=4, SNR=1",
            passed=ref == REFERENCE_SEQUENCE,
            margin=-max(abs(a - b) for a, b in zip(ref, REFERENCE_SEQUENCE)) if len(ref) == 5 else -math.inf,
            detail=str(ref),
        )
    )
    return results


def check_link(seed: int = VERIFY_SEED) -> List[CheckResult]:
    gen = seeded_generator(seed, 1)
    xs = gen.normal(0.0, 10.0, LINK_SAMPLES)
    sides = gen.normal(0.0, 10.0, LINK_SAMPLES)
    thetas = np.exp(gen.uniform(-5.0, 5.0, LINK_SAMPLES))
    noises = gen.normal(0.0, 3.0, LINK_SAMPLES)
    trip = []
    linear = []
    for x, s, theta, z in zip(xs.tolist(), sides.tolist(), thetas.tolist(), noises.tolist()):
        params = CasParams(theta=theta, side_info=s)
        scale = max(1.0, abs(x), abs(s))
        trip.append(1e-12 * scale - abs(cas_decode(cas_encode(x, params), params) - x))
        err = cas_decode(cas_encode(x, params) + z, params) - x - z / theta
        linear.append(1e-12 * max(scale, abs(z / theta)) - abs(err))
    results = [
        _worst("link", "decode(encode(x)) = x", trip, 0.0, f"{LINK_SAMPLES} samples"),
        _worst("link", "decode(encode(x) + z) - x = z/theta", linear, 0.0, f"{LINK_SAMPLES} samples"),
    ]

    power = 1.0
    families = [
        ("unit_gaussian", UnitGaussian(mean=0.5), 2.0),
        ("shifted_rademacher", ShiftedRademacher(mean=0.3), 1.0),
        ("deterministic", Deterministic(value=-3.0), 3.0),
    ]
    margins = []
    for stream, (label, family, bound) in enumerate(families, start=2):
        rng = RandomSource(seed, stream)
        params = CasParams(theta=math.sqrt(power / bound**2))
        squares = np.array([cas_encode(sample_reward(family, rng), params) ** 2 for _ in range(POWER_SAMPLES)])
        stderr = squares.std(ddof=1) / math.sqrt(POWER_SAMPLES)
        margins.append(power + 5.0 * stderr - squares.mean() + 1e-12)
    results.append(_worst("link", "encoded second moment <= P (5 stderr)", margins, 0.0))
    return results


def check_policies() -> List[CheckResult]:
    power_margins = []
    accounting_ok = True
    channel_grid = [ChannelParams.from_snr(snr) for snr in (0.5, 1.0, 4.0)]
    num_arms = 3
    horizon = 10**7
    for algorithm in Algorithm:
        for bound in (1.0, 2.0, 4.0, 16.0):
            for channel in channel_grid:
                try:
                    schedule = build_schedule(algorithm, num_arms, horizon, bound, channel)
                except InfeasibleHorizonError:
                    logger.exception(f"schedule {algorithm.value} B={bound} infeasible at T={horizon}")
                    accounting_ok = False
                    continue
                for theta, v in zip(schedule.thetas, schedule.variance_bounds):
                    power_margins.append(channel.power * (1.0 + 1e-12) - theta * theta * v)
                visits = [0] * num_arms
                for t in range(1, schedule.exploration_rounds + 1):
                    phase, _ = schedule.phase_at(t)
                    if phase is not Phase.EXPLORE:
                        accounting_ok = False
                    visits[schedule.explore_arm(t)] += 1
                expected = schedule.sub_phases * schedule.block_length
                if any(n != expected for n in visits):
                    accounting_ok = False
    return [
        _worst("policies", "theta^2 * V <= P for every segment", power_margins, 0.0),
        CheckResult(
            suite="policies",
            name="exploration visits each arm L*tau times",
            passed=accounting_ok,
            margin=0.0 if accounting_ok else -1.0,
        ),
    ]


def faulty_chi_square(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """A deliberately wrong chi-square (scaled by 1/4) used as a negative control."""
    return 0.25 * chi_square(p, q)


def run_suites(selected: Optional[Iterable[str]] = None, inject_fault: Optional[str] = None) -> List[CheckResult]:
    names = list(selected) if selected else list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown verify suite(s) {unknown}; choose from {list(SUITES)}")
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ValueError(f"unknown fault {inject_fault!r}; choose from {list(FAULTS)}")

    pairs: List[Tuple[DiscreteDistribution, DiscreteDistribution]] = []
    if any(n in ("kl-chisq", "chisq-kl", "pinsker") for n in names):
        pairs = random_distribution_pairs()
    chi = faulty_chi_square if inject_fault == "chi-square" else chi_square
    runners: Dict[str, Callable[[], List[CheckResult]]] = {
        "kl-chisq": lambda: check_kl_chisq(pairs, chi),
        "chisq-kl": lambda: check_chisq_kl(pairs),
        "pinsker": lambda: check_pinsker(pairs),
        "capacity": check_capacity,
        "recursion": check_recursion,
        "link": check_link,
        "policies": check_policies,
    }
    results: List[CheckResult] = []
    for name in names:
        suite_results = runners[name]()
        for res in suite_results:
            level = logging.INFO if res.passed else logging.ERROR
            logger.log(level, f"{'PASS' if res.passed else 'FAIL'} [{res.suite}] {res.name}: margin {res.margin:.3g}")
        results.extend(suite_results)
    return results


__all__ = [
    "SUITES",
    "FAULTS",
    "CheckResult",
    "random_distribution_pairs",
    "check_kl_chisq",
    "check_chisq_kl",
    "check_pinsker",
    "check_capacity",
    "check_recursion",
    "check_link",
    "check_policies",
    "faulty_chi_square",
    "run_suites",
]
