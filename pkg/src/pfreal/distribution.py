"""Monte Carlo distributions of the number of nontrivial real solutions.

Trial ``i`` draws its susceptances and all tracking randomness from a
generator keyed on ``(base_seed, i)``, so results do not depend on how
trials are scheduled across workers.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from pfreal.network import Network
from pfreal.solver import StartSet, solve_all

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.01
FSYNC_EVERY = 1000


class DistributionAborted(RuntimeError):
    pass


def trial_rng(base_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(index,)))


def sample_sphere(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform point on the unit sphere in ``R**dim`` (normalized Gaussian)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    while True:
        v = rng.standard_normal(dim)
        nrm = np.linalg.norm(v)
        if nrm > 1e-300:
            return v / nrm


def dkw_epsilon(n: int, alpha: float = DEFAULT_ALPHA) -> float:
    """Half-width of the uniform confidence band for an empirical CDF."""
    if n < 1:
        raise ValueError("need at least one sample")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


@dataclass
class Trial:
    index: int
    seed: list
    b: list
    count: int
    completeness: float
    degenerate: bool
    wall_time: float = 0.0

    @property
    def included(self) -> bool:
        return not self.degenerate and self.completeness == 1.0

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, line: str) -> "Trial":
        return cls(**json.loads(line))


@dataclass
class EmpiricalDistribution:
    histogram: dict[int, int]
    total: int
    excluded: int = 0
    alpha: float = DEFAULT_ALPHA
    max_complete_count: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def included(self) -> int:
        return self.total - self.excluded

    @property
    def frequencies(self) -> dict[int, float]:
        n = self.included
        return {k: v / n for k, v in sorted(self.histogram.items())} if n else {}

    @property
    def epsilon(self) -> float:
        return dkw_epsilon(self.included, self.alpha)

    @property
    def mean(self) -> float:
        return expected_value(self)

    def probability(self, count: int) -> float:
        return self.frequencies.get(count, 0.0)

    @property
    def support(self) -> set[int]:
        return {k for k, v in self.histogram.items() if v}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["count", "occurrences", "percentage"])
        n = self.included
        for k, v in sorted(self.histogram.items()):
            w.writerow([k, v, f"{100.0 * v / n:.4f}"])
        return buf.getvalue()

    def summary(self) -> dict:
        out = {"trials": self.total, "included": self.included, "excluded": self.excluded,
               "alpha": self.alpha, "epsilon": self.epsilon if self.included else None,
               "mean": self.mean if self.included else None,
               "max_observed": max(self.support) if self.support else None}
        out.update(self.extra)
        return out

    @classmethod
    def from_counts(cls, counts: Iterable[int], excluded: int = 0,
                    alpha: float = DEFAULT_ALPHA) -> "EmpiricalDistribution":
        counts = list(counts)
        return cls(dict(Counter(int(c) for c in counts)), len(counts) + excluded, excluded, alpha)

    @classmethod
    def from_trials(cls, trials: Iterable[Trial], alpha: float = DEFAULT_ALPHA):
        hist: Counter = Counter()
        total = excluded = 0
        for t in trials:
            total += 1
            if t.included:
                hist[t.count] += 1
            else:
                excluded += 1
        return cls(dict(hist), total, excluded, alpha)


def expected_value(dist: EmpiricalDistribution) -> float:
    if dist.included == 0:
        raise ValueError("distribution has no included trials")
    return sum(k * f for k, f in dist.frequencies.items())


def run_trial(net: Network, start: StartSet, base_seed: int, index: int) -> Trial:
    t0 = time.perf_counter()
    rng = trial_rng(base_seed, index)
    b = sample_sphere(net.n_edges, rng)
    sol = solve_all(net, b, start, rng)
    return Trial(index, [base_seed, index], b.tolist(), sol.n_real_nontrivial,
                 sol.completeness, sol.degenerate, time.perf_counter() - t0)


def _run_chunk(args):
    net, start, base_seed, indices = args
    return [run_trial(net, start, base_seed, i) for i in indices]


def read_log(path) -> dict[int, Trial]:
    """Trials already recorded in a JSONL log; a torn final line is ignored."""
    done: dict[int, Trial] = {}
    p = Path(path)
    if not p.exists():
        return done
    with open(p) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                t = Trial.from_json(line)
            except (json.JSONDecodeError, TypeError):
                log.warning("skipping malformed log line")
                continue
            done[t.index] = t
    return done


class _LogWriter:
    def __init__(self, path):
        self.fh = open(path, "a") if path is not None else None
        self.since_sync = 0

    def write(self, trial: Trial):
        if self.fh is None:
            return
        self.fh.write(trial.to_json() + "\n")
        self.since_sync += 1
        if self.since_sync >= FSYNC_EVERY:
            self.sync()

    def sync(self):
        if self.fh is None:
            return
        self.fh.flush()
        os.fsync(self.fh.fileno())
        self.since_sync = 0

    def close(self):
        if self.fh is not None:
            self.sync()
            self.fh.close()


def run_distribution(net: Network, start: StartSet, trials: int, base_seed: int,
                     workers: int = 1, log_path=None, resume: bool = False,
                     alpha: float = DEFAULT_ALPHA, max_failure_rate: float = 0.05,
                     chunk: int = 250, stop_after: int | None = None) -> EmpiricalDistribution:
    """Run ``trials`` random sphere trials and tally nontrivial real counts.

    With ``resume`` the trials already in ``log_path`` are reused and only
    the missing indices are computed. ``stop_after`` halts after that many
    new trials (used to simulate interrupted runs).
    """
    if not start.complete:
        raise ValueError("start set must be complete")
    done = read_log(log_path) if (resume and log_path is not None) else {}
    if log_path is not None and not resume and Path(log_path).exists():
        Path(log_path).unlink()
    todo = [i for i in range(trials) if i not in done]
    if stop_after is not None:
        todo = todo[:stop_after]
    writer = _LogWriter(log_path)
    results = {i: t for i, t in done.items() if i < trials}
    chunks = [todo[k:k + chunk] for k in range(0, len(todo), chunk)]

    def consume(batch):
        for t in batch:
            results[t.index] = t
            writer.write(t)
        n = len(results)
        bad = sum(not t.included for t in results.values())
        if n >= 1000 and bad / n > max_failure_rate:
            raise DistributionAborted(
                f"{bad} of {n} trials degenerate or incomplete (> {max_failure_rate:.0%})")

    try:
        if workers <= 1 or len(chunks) <= 1:
            for c in chunks:
                consume(_run_chunk((net, start, base_seed, c)))
        else:
            with ProcessPoolExecutor(workers) as pool:
                for batch in pool.map(_run_chunk, [(net, start, base_seed, c) for c in chunks]):
                    consume(batch)
    finally:
        writer.close()

    ordered = [results[i] for i in sorted(results)]
    dist = EmpiricalDistribution.from_trials(ordered, alpha)
    if dist.total and dist.excluded / dist.total > max_failure_rate and dist.total >= 100:
        raise DistributionAborted(
            f"{dist.excluded} of {dist.total} trials degenerate or incomplete")
    if dist.total:
        dist.extra["completeness_rate"] = dist.included / dist.total
    return dist
