"""Desk-scale Monte Carlo runs checking simulated regret against the analytic bounds."""

import math

import numpy as np
import pytest

from awgnbandit.core import BanditInstance, deterministic_hard_instance, gap_instance, instance_from_means
from awgnbandit.harness import run_episode, run_monte_carlo, transcript_divergence_probe
from awgnbandit.infotheory import ucb0_bound, ue_ucb_bound, ue_ucb_pp_bound
from awgnbandit.link import ChannelParams
from awgnbandit.policies import Algorithm, build_schedule

pytestmark = pytest.mark.slow


def _ci95(summary):
    half = 1.96 * summary.stderr_final
    return summary.mean_final - half, summary.mean_final + half


def test_ucb0_regret_below_bound():
    inst = gap_instance(2, 0.2)
    summary = run_monte_carlo(inst, Algorithm.UCB0, ChannelParams.from_snr(1.0), 20_000, 200, seed=101)
    assert summary.mean_final + 3 * summary.stderr_final <= ucb0_bound(2, 20_000, 1.0, 1.0).value


@pytest.mark.parametrize("algorithm,bound_fn", [(Algorithm.UE_UCB, ue_ucb_bound), (Algorithm.UE_UCB_PP, ue_ucb_pp_bound)])
def test_exploring_algorithms_below_bound(algorithm, bound_fn):
    inst = instance_from_means("gaussian", [0.2, 0.0], 4.0)
    summary = run_monte_carlo(inst, algorithm, ChannelParams.from_snr(1.0), 50_000, 100, seed=202)
    assert summary.mean_final + 3 * summary.stderr_final <= bound_fn(2, 50_000, 4.0, 1.0).value


def test_ue_ucb_pp_beats_ucb0_at_large_bound():
    inst = instance_from_means("gaussian", [0.5, 0.0, 0.0, 0.0, 0.0], 64.0)
    channel = ChannelParams.from_snr(1.0)
    pp = run_monte_carlo(inst, Algorithm.UE_UCB_PP, channel, 100_000, 50, seed=303, parallel=4)
    plain = run_monte_carlo(inst, Algorithm.UCB0, channel, 100_000, 50, seed=303, parallel=4)
    assert pp.mean_final < plain.mean_final
    assert _ci95(pp)[1] < _ci95(plain)[0]


def test_regret_falls_with_snr():
    inst = instance_from_means("gaussian", [0.2, 0.0], 4.0)
    finals = {
        snr: run_monte_carlo(inst, Algorithm.UE_UCB_PP, ChannelParams.from_snr(snr), 50_000, 100, seed=404).mean_final
        for snr in (0.25, 1.0, 4.0)
    }
    assert finals[0.25] > finals[1.0] > finals[4.0]
    assert 1.2 <= finals[0.25] / finals[1.0] <= 3.0


def _audit_instances(bound):
    gaussian_means = [0.0, 0.0] if bound == 1.0 else [0.2, 0.0]
    return [
        BanditInstance(arms=gap_instance(2, 0.2).arms, second_moment_bound=bound),
        instance_from_means("gaussian", gaussian_means, bound),
        deterministic_hard_instance(2, bound, good_arm=0),
    ]


@pytest.mark.parametrize("algorithm", list(Algorithm))
@pytest.mark.parametrize("bound", [1.0, 4.0, 16.0])
@pytest.mark.parametrize("snr", [0.5, 1.0, 4.0])
def test_power_audit(algorithm, bound, snr):
    channel = ChannelParams.from_snr(snr)
    for inst in _audit_instances(bound):
        summary = run_monte_carlo(inst, algorithm, channel, 10_000, 8, seed=505)
        moments = np.asarray(summary.episode_moments)
        if algorithm is Algorithm.UCB0:
            # no side information: every episode is bounded by P * E[X^2] / B^2
            assert moments.max() <= 1.1 * channel.power
        else:
            stderr = moments.std(ddof=1) / math.sqrt(len(moments))
            assert moments.mean() <= channel.power + 5 * stderr + 1e-12


def test_decoded_variance_identity():
    inst = instance_from_means("gaussian", [0.2, 0.0], 4.0)
    channel = ChannelParams.from_snr(1.0)
    schedule = build_schedule(Algorithm.UCB0, 2, 200_000, 4.0, channel)
    result = run_episode(inst, schedule, channel, 200_000, seed=606, retain_transcript=True)
    errors = np.array([rec.decoded - inst.means[rec.arm] for rec in result.transcript])
    assert errors.var() == pytest.approx(17.0, rel=0.05)


def test_zero_noise_ue_ucb_pp_regret():
    inst = deterministic_hard_instance(3, 2.0, good_arm=1)
    channel = ChannelParams(power=1.0, noise_variance=0.0)
    schedule = build_schedule(Algorithm.UE_UCB_PP, 3, 50, 2.0, channel)
    result = run_episode(inst, schedule, channel, 50, seed=707, retain_transcript=True)

    explore = schedule.exploration_rounds
    assert explore == 12
    arms = [rec.arm for rec in result.transcript]
    # fresh UCB state: one forced pull per arm, then only the best arm
    assert arms[explore:explore + 3] == [0, 1, 2]
    assert set(arms[explore + 3:]) == {1}

    explore_gap = sum(inst.gaps[arm] for arm in arms[:explore])
    assert explore_gap == 32.0
    assert result.trace.final == explore_gap + 2 * 4.0


def test_binned_transcript_kl_falls_with_noise():
    null = instance_from_means("rademacher", [0.0, 0.0], 1.0)
    alternative = gap_instance(2, 0.2)
    reports = [
        transcript_divergence_probe(null, alternative, 2, ChannelParams(power=1.0, noise_variance=v), seed=808)
        for v in (0.25, 1.0, 4.0)
    ]
    estimates = [r.estimated_kl for r in reports]
    assert estimates[0] > estimates[1] > estimates[2]
    for report in reports:
        assert report.estimated_kl <= report.decomposition_rhs + 2 * report.bias_allowance
