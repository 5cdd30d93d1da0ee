"""Episode runner, Monte Carlo aggregation and the transcript-divergence probe.

One round of the protocol is::

    learner_step -> sample_reward -> cas_encode -> transmit -> cas_decode -> learner_update

Regret is pseudo-regret: the running sum of true mean gaps of the pulled arms.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats

from . import metrics
from .core import (
    BanditInstance,
    Deterministic,
    RandomSource,
    ShiftedRademacher,
    UnitGaussian,
    sample_reward,
    seeded_generator,
)
from .infotheory import DiscreteDistribution, kl_divergence
from .link import (
    DEFAULT_AUDIT_TOLERANCE,
    DEFAULT_SNR_CAP,
    AuditReport,
    ChannelParams,
    PowerAudit,
    audit_check,
    cas_decode,
    cas_encode,
    transmit,
)
from .policies import Algorithm, Schedule, build_schedule, learner_step, learner_update, new_policy_state

logger = logging.getLogger(__name__)

REWARD_SUBSTREAM = 0
NOISE_SUBSTREAM = 1
PROBE_SUBSTREAM = 2
TRACE_POINTS = 1000
PROBE_MAX_HORIZON = 6
PROBE_MIN_REPLICATIONS = 100_000


@dataclass
class RoundRecord:
    t: int
    arm: int
    raw_reward: float
    side_info: float
    theta: float
    encoded: float
    channel_output: float
    decoded: float


@dataclass
class RegretTrace:
    """Cumulative pseudo-regret at the retained rounds of one episode."""

    rounds: List[int]
    cumulative: List[float]
    seed: int
    stream: int
    algorithm: str
    instance_digest: str

    @property
    def final(self) -> float:
        return self.cumulative[-1]


@dataclass
class EpisodeResult:
    trace: RegretTrace
    audit: PowerAudit
    pull_counts: List[int]
    realized_regret: float
    transcript: Optional[List[RoundRecord]] = None


def retention_stride(horizon: int) -> int:
    return max(1, math.ceil(horizon / TRACE_POINTS))


def run_episode(
    instance: BanditInstance,
    schedule: Schedule,
    channel: ChannelParams,
    horizon: int,
    seed: int,
    stream: int = 0,
    retain_transcript: bool = False,
    retain_every: Optional[int] = None,
) -> EpisodeResult:
    if instance.num_arms != schedule.num_arms:
        raise ValueError(f"instance has {instance.num_arms} arms but schedule was built for {schedule.num_arms}")
    if horizon != schedule.horizon:
        raise ValueError(f"horizon {horizon} does not match schedule horizon {schedule.horizon}")
    if instance.second_moment_bound != schedule.reward_bound:
        raise ValueError(
            f"instance bound B={instance.second_moment_bound:g} does not match schedule B={schedule.reward_bound:g}"
        )
    if channel.power != schedule.power:
        raise ValueError(f"channel power {channel.power:g} does not match schedule power {schedule.power:g}")

    reward_rng = RandomSource(seed, stream, REWARD_SUBSTREAM)
    noise_rng = RandomSource(seed, stream, NOISE_SUBSTREAM)
    audit = PowerAudit(budget=channel.power)
    state = new_policy_state(schedule)
    arms = instance.arms
    gaps = instance.gaps
    stride = retain_every or retention_stride(horizon)

    transcript: Optional[List[RoundRecord]] = [] if retain_transcript else None
    rounds: List[int] = []
    cumulative: List[float] = []
    pulls = [0] * instance.num_arms
    regret = 0.0
    reward_sum = 0.0

    for t in range(1, horizon + 1):
        arm, side_info, cas = learner_step(schedule, state, t)
        raw = sample_reward(arms[arm], reward_rng)
        encoded = cas_encode(raw, cas, audit)
        output = transmit(encoded, channel, noise_rng)
        decoded = cas_decode(output, cas)
        learner_update(schedule, state, t, arm, decoded)

        pulls[arm] += 1
        regret += gaps[arm]
        reward_sum += raw
        if t % stride == 0 or t == horizon:
            rounds.append(t)
            cumulative.append(regret)
        if transcript is not None:
            transcript.append(RoundRecord(t, arm, raw, side_info, cas.theta, encoded, output, decoded))

    trace = RegretTrace(
        rounds=rounds,
        cumulative=cumulative,
        seed=seed,
        stream=stream,
        algorithm=schedule.algorithm.value,
        instance_digest=instance.digest,
    )
    logger.debug(
        f"Episode seed={seed} stream={stream} {schedule.algorithm.value}: final regret {regret:.6g}, pulls {pulls}"
    )
    return EpisodeResult(
        trace=trace,
        audit=audit,
        pull_counts=pulls,
        realized_regret=horizon * instance.best_mean - reward_sum,
        transcript=transcript,
    )


def realized_regret(transcript: Sequence[RoundRecord], instance: BanditInstance) -> float:
    """T * mu_star minus the rewards actually collected."""
    return len(transcript) * instance.best_mean - math.fsum(rec.raw_reward for rec in transcript)


@dataclass
class McSummary:
    algorithm: str
    replications: int
    rounds: List[int]
    mean_regret: List[float]
    stderr_regret: List[float]
    final_regrets: List[float]
    quantiles: Dict[str, float]
    audit: AuditReport
    episode_audit_failures: int
    episode_moments: List[float]
    schedule: Schedule
    traces: List[RegretTrace] = field(default_factory=list)

    @property
    def mean_final(self) -> float:
        return self.mean_regret[-1]

    @property
    def stderr_final(self) -> float:
        return self.stderr_regret[-1]


def _run_replication(args: Tuple) -> Tuple[int, EpisodeResult]:
    instance, schedule, channel, horizon, seed, stream, retain_every = args
    return stream, run_episode(instance, schedule, channel, horizon, seed, stream, retain_every=retain_every)


def run_monte_carlo(
    instance: BanditInstance,
    algorithm: Algorithm | str,
    channel: ChannelParams,
    horizon: int,
    replications: int,
    seed: int,
    snr_cap: float = DEFAULT_SNR_CAP,
    audit_tolerance: float = DEFAULT_AUDIT_TOLERANCE,
    parallel: int = 1,
    retain_every: Optional[int] = None,
) -> McSummary:
    """Run ``replications`` episodes on streams 1..R of ``seed`` and aggregate them.

    The power audit is pooled over all episodes; per-episode failures are
    counted separately.
    """
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    if parallel < 1:
        raise ValueError(f"parallel must be >= 1, got {parallel}")
    schedule = build_schedule(algorithm, instance.num_arms, horizon, instance.second_moment_bound, channel, snr_cap)
    jobs = [(instance, schedule, channel, horizon, seed, r, retain_every) for r in range(1, replications + 1)]

    if parallel > 1 and replications > 1:
        with ProcessPoolExecutor(max_workers=parallel) as executor:
            results = list(executor.map(_run_replication, jobs))
    else:
        results = [_run_replication(job) for job in jobs]
    results.sort(key=lambda item: item[0])
    episodes = [episode for _, episode in results]

    matrix = np.array([ep.trace.cumulative for ep in episodes], dtype=float)
    mean_regret = [math.fsum(col) / replications for col in matrix.T.tolist()]
    if replications > 1:
        stderr_regret = (matrix.std(axis=0, ddof=1) / math.sqrt(replications)).tolist()
    else:
        stderr_regret = [0.0] * matrix.shape[1]
    finals = matrix[:, -1]
    p5, p50, p95 = np.quantile(finals, [0.05, 0.5, 0.95]).tolist()

    pooled = PowerAudit(budget=channel.power)
    for ep in episodes:
        pooled.merge(ep.audit)
    report = audit_check(pooled, audit_tolerance)
    limit = channel.power * (1.0 + audit_tolerance)
    moments = [ep.audit.empirical_moment for ep in episodes]
    failures = 0
    for moment in moments:
        failed = moment > limit
        failures += failed
        metrics.record_episode(schedule.algorithm.value, horizon, failed)
    if failures:
        logger.info(f"{failures} of {replications} episodes exceeded the per-episode power limit {limit:.6g}")

    logger.info(
        f"Monte Carlo {schedule.algorithm.value}: R={replications} T={horizon} "
        f"mean final regret {mean_regret[-1]:.6g} +- {stderr_regret[-1]:.3g}"
    )
    return McSummary(
        algorithm=schedule.algorithm.value,
        replications=replications,
        rounds=list(episodes[0].trace.rounds),
        mean_regret=mean_regret,
        stderr_regret=stderr_regret,
        final_regrets=finals.tolist(),
        quantiles={"p5": p5, "p50": p50, "p95": p95},
        audit=report,
        episode_audit_failures=failures,
        episode_moments=moments,
        schedule=schedule,
        traces=[ep.trace for ep in episodes],
    )


class DivergenceProbeReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    horizon: int
    replications: int
    bins: int
    estimated_kl: float
    decomposition_rhs: float
    bias_allowance: float
    expected_pulls: Tuple[float, ...]
    per_round_kl: Tuple[float, ...]
    cells: int
    warnings: Tuple[str, ...] = ()


def _bin_edges(bins: int, span: float, sigma: float) -> np.ndarray:
    return np.linspace(-span * sigma, span * sigma, bins + 1)


def _binned_output_law(arm, theta: float, sigma: float, edges: np.ndarray) -> DiscreteDistribution:
    """Law of the binned channel output theta * X + Z; the outer bins absorb the tails."""
    cuts = np.concatenate(([-np.inf], edges[1:-1], [np.inf]))

    def gaussian_mass(loc: float, scale: float) -> np.ndarray:
        return np.diff(stats.norm.cdf(cuts, loc=loc, scale=scale))

    if isinstance(arm, ShiftedRademacher):
        up = 0.5 * (1.0 + arm.mean)
        probs = up * gaussian_mass(theta, sigma) + (1.0 - up) * gaussian_mass(-theta, sigma)
    elif isinstance(arm, UnitGaussian):
        probs = gaussian_mass(theta * arm.mean, math.sqrt(theta * theta + sigma * sigma))
    else:
        probs = gaussian_mass(theta * arm.value, sigma)
    return DiscreteDistribution.from_weights(probs)


def _vector_rewards(instance: BanditInstance, arms: np.ndarray, u: np.ndarray, z: np.ndarray) -> np.ndarray:
    rewards = np.empty(arms.shape[0], dtype=float)
    for idx, family in enumerate(instance.arms):
        mask = arms == idx
        if isinstance(family, ShiftedRademacher):
            rewards[mask] = np.where(u[mask] < 0.5 * (1.0 + family.mean), 1.0, -1.0)
        elif isinstance(family, UnitGaussian):
            rewards[mask] = family.mean + z[mask]
        elif isinstance(family, Deterministic):
            rewards[mask] = family.value
    return rewards


def _simulate_binned_transcripts(
    instance: BanditInstance,
    horizon: int,
    theta: float,
    sigma: float,
    eta: float,
    edges: np.ndarray,
    replications: int,
    generator: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """UCB on bin-centre decoded outputs, vectorised over replications.

    Returns a (replications, horizon) matrix of per-round codes ``arm * bins + cell``
    and the per-replication pull counts.
    """
    bins = len(edges) - 1
    centres = 0.5 * (edges[:-1] + edges[1:])
    counts = np.zeros((replications, 2), dtype=float)
    means = np.zeros((replications, 2), dtype=float)
    codes = np.zeros((replications, horizon), dtype=np.int64)
    radius_scale = 4.0 * eta * math.log(horizon)
    rows = np.arange(replications)

    for t in range(horizon):
        index = np.where(counts == 0, np.inf, means + np.sqrt(radius_scale / np.maximum(counts, 1.0)))
        arms = np.argmax(index, axis=1)
        u = generator.random(replications)
        z = generator.standard_normal(replications)
        noise = sigma * generator.standard_normal(replications)
        outputs = theta * _vector_rewards(instance, arms, u, z) + noise
        cell = np.clip(np.searchsorted(edges, outputs, side="right") - 1, 0, bins - 1)
        decoded = centres[cell] / theta
        counts[rows, arms] += 1.0
        n = counts[rows, arms]
        means[rows, arms] += (decoded - means[rows, arms]) / n
        codes[:, t] = arms * bins + cell
    return codes, counts


def _transcript_labels(codes_p: np.ndarray, codes_q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Map each transcript row of either sample to one shared integer label."""
    _, inverse = np.unique(np.vstack([codes_p, codes_q]), axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    return inverse[: len(codes_p)], inverse[len(codes_p) :]


def _smoothed_plugin_kl(keys_p: np.ndarray, keys_q: np.ndarray) -> Tuple[float, int]:
    """Plug-in KL between two empirical laws, pseudo-count 1/2 on every observed cell."""
    cells = np.union1d(keys_p, keys_q)
    p_counts = np.zeros(len(cells))
    q_counts = np.zeros(len(cells))
    uniq, cnt = np.unique(keys_p, return_counts=True)
    p_counts[np.searchsorted(cells, uniq)] = cnt
    uniq, cnt = np.unique(keys_q, return_counts=True)
    q_counts[np.searchsorted(cells, uniq)] = cnt
    p_counts += 0.5
    q_counts += 0.5
    p = DiscreteDistribution.from_weights(p_counts)
    q = DiscreteDistribution.from_weights(q_counts)
    return kl_divergence(p, q), len(cells)


def transcript_divergence_probe(
    instance: BanditInstance,
    alternative: BanditInstance,
    horizon: int,
    channel: ChannelParams,
    replications: int = PROBE_MIN_REPLICATIONS,
    seed: int = 0,
    theta: Optional[float] = None,
    bins: int = 32,
    span: float = 6.0,
) -> DivergenceProbeReport:
    """Compare the binned transcript KL of two 2-armed instances with its per-arm decomposition.

    Both instances run the same UCB learner with CAS encoding at ``theta``
    (default sqrt(P)/B) and zero side information. The learner sees the
    bin-centre decoded output, so the binned transcript determines every
    decision and the decomposition sum_k E[N_k] * KL(binned output law of arm k)
    is exact; the plug-in estimate should match it up to ``bias_allowance``.
    """
    if instance.num_arms != 2 or alternative.num_arms != 2:
        raise ValueError("the divergence probe needs two 2-armed instances")
    if not 2 <= horizon <= PROBE_MAX_HORIZON:
        raise ValueError(f"probe horizon must lie in 2..{PROBE_MAX_HORIZON}, got {horizon}")
    if channel.noise_variance <= 0:
        raise ValueError("the divergence probe needs a noisy channel (sigma^2 > 0)")
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications}")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")

    bound = max(instance.second_moment_bound, alternative.second_moment_bound)
    theta = theta if theta is not None else math.sqrt(channel.power) / bound
    sigma = channel.noise_std
    eta = channel.noise_variance / (theta * theta) + 1.0
    edges = _bin_edges(bins, span, sigma)

    warnings: List[str] = []
    if replications < PROBE_MIN_REPLICATIONS:
        msg = f"{replications} replications is below {PROBE_MIN_REPLICATIONS}; plug-in KL may be biased"
        logger.warning(msg)
        warnings.append(msg)

    codes_p, counts_p = _simulate_binned_transcripts(
        instance, horizon, theta, sigma, eta, edges, replications, seeded_generator(seed, 0, PROBE_SUBSTREAM)
    )
    codes_q, _ = _simulate_binned_transcripts(
        alternative, horizon, theta, sigma, eta, edges, replications, seeded_generator(seed, 1, PROBE_SUBSTREAM)
    )
    keys_p, keys_q = _transcript_labels(codes_p, codes_q)
    estimate, cells = _smoothed_plugin_kl(keys_p, keys_q)

    expected_pulls = counts_p.mean(axis=0).tolist()
    per_round = [
        kl_divergence(
            _binned_output_law(instance.arms[k], theta, sigma, edges),
            _binned_output_law(alternative.arms[k], theta, sigma, edges),
        )
        for k in range(2)
    ]
    rhs = math.fsum(n * d for n, d in zip(expected_pulls, per_round))
    logger.debug(f"Divergence probe T={horizon}: plug-in {estimate:.6g}, decomposition {rhs:.6g}, cells {cells}")
    return DivergenceProbeReport(
        horizon=horizon,
        replications=replications,
        bins=bins,
        estimated_kl=estimate,
        decomposition_rhs=rhs,
        bias_allowance=(cells - 1) / replications,
        expected_pulls=tuple(expected_pulls),
        per_round_kl=tuple(per_round),
        cells=cells,
        warnings=tuple(warnings),
    )


__all__ = [
    "RoundRecord",
    "RegretTrace",
    "EpisodeResult",
    "McSummary",
    "DivergenceProbeReport",
    "retention_stride",
    "run_episode",
    "realized_regret",
    "run_monte_carlo",
    "transcript_divergence_probe",
]
