"""Percentile-bootstrap uncertainty intervals from sub-neighborhood refits.

Each replicate draws floor(c * m) members uniformly *without replacement*
from the already-selected neighborhood (subsampling, not the classical
with-replacement bootstrap; a with-replacement mode exists behind a flag for
comparison studies), refits the surrogate with the same weighting mode as
the point estimate, and records every importance score.  Interval endpoints
are percentiles of the replicate scores, so they need not be symmetric
about the point estimate.

Replicate RNG streams are counter-based (Philox keyed by seed and replicate
index), which makes the replicate matrix independent of execution order and
safe to parallelize.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .data import QueryDataset
from .explain import ExplainConfig, LocalProblem, build_problem
from .neighborhood import QueryPoint

#: A run errors out when more than this fraction of replicates fail.
MAX_FAILED_FRACTION = 0.2

_MASK64 = (1 << 64) - 1


class BootstrapError(RuntimeError):
    """Raised for invalid bootstrap configurations or too many failed replicates."""


@dataclass(frozen=True)
class BootstrapConfig:
    """Replicate count B, sub-neighborhood fraction c, significance, seed."""

    B: int = 1000
    c: float = 0.9
    alpha: float = 0.05
    seed: int = 0
    with_replacement: bool = False

    def __post_init__(self):
        if self.B < 2:
            raise BootstrapError("replicate count B must be >= 2")
        if not 0.0 < self.c < 1.0:
            raise BootstrapError("sub-neighborhood fraction c must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise BootstrapError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class UncertaintyInterval:
    """Percentile interval [L, U] for one feature's importance score."""

    feature: str
    lower: float
    upper: float
    alpha: float


@dataclass(frozen=True)
class BootstrapDistribution:
    """Replicate score matrix (successful replicates x scores) plus bookkeeping."""

    names: tuple[str, ...]
    scores: np.ndarray
    failed_replicates: int
    B: int
    m_prime: int

    def column(self, name: str) -> np.ndarray:
        return self.scores[:, self.names.index(name)]


def percentile(values: np.ndarray, p: float) -> float:
    """Linear interpolation between closest ranks (the common "type 7" rule).

    With sorted values v_1..v_B and h = (B-1) * p / 100 the result is
    ``v_{floor(h)+1} + (h - floor(h)) * (v_{floor(h)+2} - v_{floor(h)+1})``.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise BootstrapError("percentile of empty values")
    if not 0.0 <= p <= 100.0:
        raise BootstrapError("percentile p must lie in [0, 100]")
    v = np.sort(values)
    B = v.size
    h = (B - 1) * p / 100.0
    lo = int(np.floor(h))
    if lo >= B - 1:
        return float(v[B - 1])
    return float(v[lo] + (h - lo) * (v[lo + 1] - v[lo]))


def replicate_indices(
    seed: int, replicate: int, m: int, m_prime: int, with_replacement: bool = False
) -> np.ndarray:
    """The member subset for one replicate, from a (seed, replicate) keyed stream."""
    key = np.array([seed & _MASK64, replicate & _MASK64], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    if with_replacement:
        return rng.integers(0, m, size=m_prime)
    return rng.choice(m, size=m_prime, replace=False)


def intervals_from_distribution(
    dist: BootstrapDistribution, alpha: float
) -> list[UncertaintyInterval]:
    """Percentile intervals at level alpha from an existing replicate matrix."""
    if not 0.0 < alpha < 1.0:
        raise BootstrapError("alpha must lie in (0, 1)")
    out = []
    for j, name in enumerate(dist.names):
        col = dist.scores[:, j]
        out.append(
            UncertaintyInterval(
                feature=name,
                lower=percentile(col, 100.0 * alpha / 2.0),
                upper=percentile(col, 100.0 * (1.0 - alpha / 2.0)),
                alpha=alpha,
            )
        )
    return out


def bootstrap_from_problem(
    problem: LocalProblem, boot: BootstrapConfig
) -> tuple[list[UncertaintyInterval], BootstrapDistribution]:
    """Run the replicate loop against an already-prepared local problem."""
    m = problem.m
    m_prime = int(np.floor(boot.c * m))
    if m_prime < 2:
        raise BootstrapError(
            f"sub-neighborhood size floor(c*m) = {m_prime} is too small (need >= 2)"
        )
    names = tuple(problem.score_names)
    rows: list[np.ndarray] = []
    failed = 0
    for b in range(boot.B):
        idx = replicate_indices(boot.seed, b, m, m_prime, boot.with_replacement)
        beta, rank = problem.solve_rows(idx)
        if rank < 2:
            failed += 1
            continue
        scores = problem.scores_from_coefficients(beta)
        if not np.all(np.isfinite(scores)):
            failed += 1
            continue
        rows.append(scores)
    if failed > MAX_FAILED_FRACTION * boot.B:
        raise BootstrapError(
            f"{failed} of {boot.B} bootstrap replicates failed "
            f"(more than {MAX_FAILED_FRACTION:.0%})"
        )
    Z = np.vstack(rows) if rows else np.zeros((0, len(names)))
    if Z.shape[0] == 0:
        raise BootstrapError("no successful bootstrap replicates")
    dist = BootstrapDistribution(
        names=names, scores=Z, failed_replicates=failed, B=boot.B, m_prime=m_prime
    )
    return intervals_from_distribution(dist, boot.alpha), dist


def bootstrap_intervals(
    dataset: QueryDataset,
    query: QueryPoint,
    config: ExplainConfig,
    boot: BootstrapConfig,
) -> tuple[list[UncertaintyInterval], BootstrapDistribution]:
    """Percentile-bootstrap intervals for every importance score at a query."""
    problem = build_problem(dataset, query, config)
    return bootstrap_from_problem(problem, boot)


def write_scores_csv(dist: BootstrapDistribution, path: str) -> None:
    """Dump the replicate score matrix (one named column per score) to CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(dist.names)
        for row in dist.scores:
            writer.writerow([repr(float(v)) for v in row])
