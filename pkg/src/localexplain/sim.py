"""Synthetic ground truth, dataset generation, and the coverage sweep harness.

The ground-truth model is

    S(x1, x2, a, b) = sin(a*x1) * cos(b*x2) * tan(1 / (1 + (x1 - x2)^2))

with continuous x1, x2 in [-5, 5] and categorical a, b in {1, 2, 3}.  The
tangent's argument lies in (0, 1], comfortably inside (0, pi/2), so no
singularity guard is needed on this domain; ``generate_dataset`` still
resamples non-finite outputs so user-supplied ground truths that do blow up
somewhere remain usable.

The sweep harness evaluates, over a grid of (k, m, c), how often the
bootstrap interval and the naive closed-form interval for x1's derivative
contain the analytic truth, and at what average width: one
(average width, coverage) record per method per parameter set, from which
Pareto frontiers are extracted.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .bootstrap import BootstrapConfig, BootstrapError, bootstrap_from_problem
from .data import DataError, FeatureSchema, FeatureSpec, QueryDataset
from .explain import GRADIENT, ExplainConfig, ExplainError, build_problem
from .neighborhood import BalanceError, QueryPoint
from .polyfit import FitError

#: Failures of these kinds mark a query point as failed for one method;
#: anything else is a real bug and propagates.
_POINT_ERRORS = (DataError, BalanceError, FitError, ExplainError, BootstrapError)

#: Coverage query points are drawn from this interior box so neighborhoods
#: stay two-sided near every query.
QUERY_BOX = 4.5

#: Parameter sets with more than this fraction of failed points are invalid.
MAX_FAILED_POINT_FRACTION = 0.1

_MASK64 = (1 << 64) - 1


def ground_truth_value(x1, x2, a, b):
    """Evaluate S at (x1, x2, a, b); broadcasts over array inputs."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    inner = 1.0 / (1.0 + (x1 - x2) ** 2)
    out = np.sin(a * x1) * np.cos(b * x2) * np.tan(inner)
    return float(out) if out.ndim == 0 else out


def ground_truth_gradient(x1, x2, a, b):
    """Analytic (dS/dx1, dS/dx2); broadcasts over array inputs."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = x1 - x2
    u = 1.0 / (1.0 + diff**2)
    tan_u = np.tan(u)
    sec2_u = 1.0 + tan_u**2
    du_dx1 = -2.0 * diff * u**2  # du/dx2 = -du/dx1
    d1 = np.cos(b * x2) * (a * np.cos(a * x1) * tan_u + np.sin(a * x1) * sec2_u * du_dx1)
    d2 = np.sin(a * x1) * (-b * np.sin(b * x2) * tan_u - np.cos(b * x2) * sec2_u * du_dx1)
    if d1.ndim == 0:
        return float(d1), float(d2)
    return d1, d2


def simulation_schema() -> FeatureSchema:
    return FeatureSchema(
        features=(
            FeatureSpec(name="x1", kind="continuous"),
            FeatureSpec(name="x2", kind="continuous"),
            FeatureSpec(name="a", kind="categorical", categories=("1", "2", "3"), baseline="1"),
            FeatureSpec(name="b", kind="categorical", categories=("1", "2", "3"), baseline="1"),
        ),
        output_kind="raw",
    )


def generate_dataset(
    n: int,
    seed: int,
    ground_truth: Callable[..., np.ndarray] = ground_truth_value,
    max_resample_rounds: int = 100,
) -> QueryDataset:
    """Sample n points uniformly from the domain and record S at each.

    x1, x2 ~ Uniform[-5, 5]; a, b uniform over {1, 2, 3}.  Rows whose output
    comes back non-finite are resampled (never needed for the built-in S,
    whose tan argument stays in (0, 1]).
    """
    if n < 1:
        raise ValueError("dataset size n must be >= 1")
    rng = np.random.default_rng(seed)
    numeric = rng.uniform(-5.0, 5.0, size=(n, 2))
    codes = rng.integers(0, 3, size=(n, 2))
    outputs = np.asarray(
        ground_truth(numeric[:, 0], numeric[:, 1], codes[:, 0] + 1, codes[:, 1] + 1), dtype=float
    ).reshape(n)
    for _ in range(max_resample_rounds):
        bad = ~np.isfinite(outputs)
        if not bad.any():
            break
        k = int(bad.sum())
        numeric[bad] = rng.uniform(-5.0, 5.0, size=(k, 2))
        codes[bad] = rng.integers(0, 3, size=(k, 2))
        outputs[bad] = np.asarray(
            ground_truth(
                numeric[bad, 0], numeric[bad, 1], codes[bad, 0] + 1, codes[bad, 1] + 1
            ),
            dtype=float,
        ).reshape(k)
    else:
        raise ValueError("ground truth kept producing non-finite outputs while resampling")
    return QueryDataset(simulation_schema(), numeric, codes, outputs)


@dataclass(frozen=True)
class SweepGrid:
    """The (k, m, c) grid plus the Monte Carlo scale of a coverage sweep.

    ``coverage_feature`` selects which continuous feature's derivative the
    intervals are checked against (x1 by default).
    """

    k_values: tuple[int, ...]
    m_values: tuple[int, ...]
    c_values: tuple[float, ...]
    n: int = 2000
    p: int = 250
    B: int = 500
    alpha: float = 0.05
    seed: int = 0
    coverage_feature: str = "x1"

    def __post_init__(self):
        if not (self.k_values and self.m_values and self.c_values):
            raise ValueError("sweep grid must have at least one k, m, and c value")
        if self.p < 1:
            raise ValueError("query point count p must be >= 1")
        if self.coverage_feature not in ("x1", "x2"):
            raise ValueError("coverage_feature must be 'x1' or 'x2'")
        for c in self.c_values:
            if not 0.0 < c < 1.0:
                raise ValueError(f"c value {c} outside (0, 1)")
            if int(np.floor(c * min(self.m_values))) < 2:
                raise ValueError(f"floor(c*m) < 2 for c={c}, m={min(self.m_values)}")


@dataclass(frozen=True)
class SweepRecord:
    """(average interval width, coverage rate) for one method on one parameter set."""

    method: str
    k: int | None
    m: int | None
    c: float | None
    avg_width: float
    coverage: float
    failed_points: int = 0
    points: int = 0

    @property
    def invalid(self) -> bool:
        return self.points > 0 and self.failed_points > MAX_FAILED_POINT_FRACTION * self.points


def _unit_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence([seed & _MASK64, *key])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_query_points(grid: SweepGrid) -> tuple[list[QueryPoint], np.ndarray]:
    """The shared coverage query points and the true derivative at each."""
    rng = np.random.default_rng(np.random.SeedSequence([grid.seed & _MASK64, 1]))
    numeric = rng.uniform(-QUERY_BOX, QUERY_BOX, size=(grid.p, 2))
    codes = rng.integers(0, 3, size=(grid.p, 2))
    points = [QueryPoint(numeric=numeric[j], codes=codes[j]) for j in range(grid.p)]
    d1, d2 = ground_truth_gradient(
        numeric[:, 0], numeric[:, 1], codes[:, 0] + 1, codes[:, 1] + 1
    )
    truths = d1 if grid.coverage_feature == "x1" else d2
    return points, np.atleast_1d(truths)


def run_sweep(grid: SweepGrid, threads: int = 1) -> list[SweepRecord]:
    """Monte Carlo coverage/width records for both interval methods.

    For every (k, m, c) and every shared query point, computes the weighted
    bootstrap interval and the unweighted naive interval for the coverage
    feature's derivative and checks them against the analytic truth.  Deterministic for a fixed
    grid (including across thread counts): every bootstrap run draws from a
    stream keyed by (seed, k-index, m-index, c-index, point-index).
    """
    dataset = generate_dataset(grid.n, grid.seed)
    points, truths = sample_query_points(grid)
    n_k, n_c = len(grid.k_values), len(grid.c_values)

    def run_unit(unit: tuple[int, int]) -> dict:
        mi, pj = unit
        m = grid.m_values[mi]
        point = points[pj]
        truth = float(truths[pj])
        out: dict[tuple, tuple[float, bool] | None] = {}
        for ki, k in enumerate(grid.k_values):
            problem = None
            try:
                problem = build_problem(
                    dataset,
                    point,
                    ExplainConfig(
                        degree=k, m=m, kind=GRADIENT, weighted=True,
                        balance=True, balance_fallback=True,
                    ),
                )
            except _POINT_ERRORS:
                problem = None
            if problem is None:
                out[(ki, "naive")] = None
                for ci in range(n_c):
                    out[(ki, ci)] = None
                continue
            try:
                iv = problem.naive_interval(grid.coverage_feature, grid.alpha)
                out[(ki, "naive")] = (iv.upper - iv.lower, iv.lower <= truth <= iv.upper)
            except _POINT_ERRORS:
                out[(ki, "naive")] = None
            for ci, c in enumerate(grid.c_values):
                seed = _unit_seed(grid.seed, 2, ki, mi, ci, pj)
                try:
                    intervals, _ = bootstrap_from_problem(
                        problem,
                        BootstrapConfig(B=grid.B, c=c, alpha=grid.alpha, seed=seed),
                    )
                    iv = next(i for i in intervals if i.feature == grid.coverage_feature)
                    out[(ki, ci)] = (iv.upper - iv.lower, iv.lower <= truth <= iv.upper)
                except _POINT_ERRORS:
                    out[(ki, ci)] = None
        return out

    units = [(mi, pj) for mi in range(len(grid.m_values)) for pj in range(grid.p)]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            unit_results = list(pool.map(run_unit, units))
    else:
        unit_results = [run_unit(u) for u in units]

    by_unit = dict(zip(units, unit_results))
    records: list[SweepRecord] = []
    for ki, k in enumerate(grid.k_values):
        for mi, m in enumerate(grid.m_values):
            per_point = [by_unit[(mi, pj)] for pj in range(grid.p)]
            for method, keys in [
                ("bootstrap", [(ki, ci) for ci in range(n_c)]),
                ("naive", [(ki, "naive")] * n_c),
            ]:
                for ci, key in enumerate(keys):
                    c = grid.c_values[ci]
                    results = [pp[key] for pp in per_point]
                    ok = [r for r in results if r is not None]
                    covered = sum(1 for r in ok if r[1])
                    widths = [r[0] for r in ok]
                    records.append(
                        SweepRecord(
                            method=method,
                            k=k,
                            m=m,
                            c=c,
                            avg_width=float(np.mean(widths)) if widths else float("nan"),
                            coverage=covered / grid.p,
                            failed_points=grid.p - len(ok),
                            points=grid.p,
                        )
                    )
    records.sort(key=_record_sort_key)
    return records


def _record_sort_key(rec: SweepRecord):
    return (
        rec.method,
        rec.k if rec.k is not None else -1,
        rec.m if rec.m is not None else -1,
        rec.c if rec.c is not None else -1.0,
    )


def pareto_frontier(records: Sequence[SweepRecord], method: str) -> list[SweepRecord]:
    """Records of ``method`` not dominated by another of the same method.

    A record is dominated when another has coverage >= and width <= with at
    least one strict inequality.  Invalid records (too many failed points)
    are excluded up front.
    """
    pool = [r for r in records if r.method == method and not r.invalid and np.isfinite(r.avg_width)]
    out = []
    for r in pool:
        dominated = any(
            (o.coverage >= r.coverage and o.avg_width <= r.avg_width)
            and (o.coverage > r.coverage or o.avg_width < r.avg_width)
            for o in pool
        )
        if not dominated:
            out.append(r)
    return out


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("method", "k", "m", "c", "avg_width", "coverage", "failed_points")


def write_sweep_csv(records: Iterable[SweepRecord], path: str, header_comment: str | None = None) -> None:
    """Write records in the stable (method, k, m, c) order, one row each."""
    rows = sorted(records, key=_record_sort_key)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.method,
                    "" if r.k is None else r.k,
                    "" if r.m is None else r.m,
                    "" if r.c is None else repr(float(r.c)),
                    repr(float(r.avg_width)),
                    repr(float(r.coverage)),
                    r.failed_points,
                ]
            )


def read_baseline_csv(path: str) -> list[SweepRecord]:
    """Externally produced (method, avg_width, coverage) rows for overlay plots."""
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        return records
    header = [h.strip() for h in rows[0]]
    for col in ("method", "avg_width", "coverage"):
        if col not in header:
            raise ValueError(f"baseline CSV is missing column {col!r}")
    for row in rows[1:]:
        entry = dict(zip(header, row))
        records.append(
            SweepRecord(
                method=entry["method"],
                k=int(entry["k"]) if entry.get("k") else None,
                m=int(entry["m"]) if entry.get("m") else None,
                c=float(entry["c"]) if entry.get("c") else None,
                avg_width=float(entry["avg_width"]),
                coverage=float(entry["coverage"]),
            )
        )
    return records
