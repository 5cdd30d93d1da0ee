"""Prometheus counters for simulated work, written out in textfile-collector format."""

from __future__ import annotations

import logging
from pathlib import Path

from prometheus_client import CollectorRegistry, Counter, write_to_textfile

logger = logging.getLogger(__name__)

REGISTRY = CollectorRegistry()


def _get_or_create_metric(name, ctor, *args, **kwargs):
    try:
        return ctor(name, *args, registry=REGISTRY, **kwargs)
    except ValueError:
        # Metric already registered (module re-import in tests); reuse it
        return REGISTRY._names_to_collectors.get(name)


episodes_total = _get_or_create_metric(
    "awgnbandit_episodes", Counter, "Simulated episodes", ["algorithm"]
)
rounds_total = _get_or_create_metric(
    "awgnbandit_rounds", Counter, "Simulated protocol rounds", ["algorithm"]
)
audit_failures_total = _get_or_create_metric(
    "awgnbandit_audit_failures", Counter, "Episodes whose power audit failed", ["algorithm"]
)


def record_episode(algorithm: str, rounds: int, audit_failed: bool) -> None:
    episodes_total.labels(algorithm=algorithm).inc()
    rounds_total.labels(algorithm=algorithm).inc(rounds)
    if audit_failed:
        audit_failures_total.labels(algorithm=algorithm).inc()


def write_metrics(path: Path) -> None:
    write_to_textfile(str(path), REGISTRY)
    logger.debug(f"Wrote metrics to {path}")
