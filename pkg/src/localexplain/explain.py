"""Local explanation pipeline: neighborhood, surrogate fit, importance scores.

Given a dataset of recorded model inputs/outputs and a query point, the
pipeline standardizes the numeric features, one-hot encodes the categorical
ones, selects the m nearest rows (optionally class-balanced), fits a
degree-k polynomial surrogate with interaction terms, and reads per-feature
importance scores off the surrogate:

* continuous/ordinal features: the partial derivative at the query point
  (reported in raw feature units), or the symmetric function difference
  ``g(x+delta) - g(x-delta)``;
* categorical features: the baseline difference ``g(x) - g(x_base)`` with
  the feature switched to its baseline category.

When the recorded outputs are probabilities, targets are fit on the
log-odds scale and differences are mapped back through the inverse
transform before reporting; gradients are unavailable in that mode.

Every score is a functional of the coefficient vector, which is what makes
bootstrap replicates cheap: refit the coefficients on a sub-neighborhood and
re-apply the same functionals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np

from .data import (
    DataError,
    OneHotLayout,
    QueryDataset,
    StandardizationStats,
    from_log_odds,
    standardize,
    to_log_odds,
)
from .neighborhood import Neighborhood, QueryPoint, compute_weights, select_neighborhood
from .polyfit import MonomialBasis, PolynomialSurrogate, expand_basis, fit, lstsq_min_norm

GRADIENT = "gradient"
FUNCTION_DIFFERENCE = "function_difference"
BASELINE_DIFFERENCE = "baseline_difference"

#: Default perturbation step, as a fraction of a feature's raw sample
#: stddev, used when neither the schema nor the config supplies a delta.
DEFAULT_DELTA_FRACTION = 0.5


class ExplainError(RuntimeError):
    """Raised when an explanation cannot be produced (degenerate fit, bad config)."""


@dataclass(frozen=True)
class ExplainConfig:
    """Hyperparameters of a single explanation.

    ``kind`` picks the importance proxy for continuous/ordinal features;
    categorical features always use the baseline difference.  ``deltas``
    overrides perturbation steps per feature name.  ``naive_dof`` selects
    the noise-variance denominator: ``"m-d-1"`` (d = number of raw
    features) or the conventional ``"m-q"``.  ``categorical_mode="pairs"``
    reports one baseline difference per non-baseline category instead of
    only the query's own category.
    """

    degree: int
    m: int
    kind: str = FUNCTION_DIFFERENCE
    weighted: bool = True
    balance: bool = True
    balance_fallback: bool = False
    deltas: Mapping[str, float] = field(default_factory=dict)
    standardized_units: bool = False
    naive_dof: str = "m-d-1"
    categorical_mode: str = "query"
    weight_formula: str = "minmax"

    def __post_init__(self):
        if self.kind not in (GRADIENT, FUNCTION_DIFFERENCE):
            raise ExplainError(f"unknown importance kind {self.kind!r}")
        if self.degree < 1:
            raise ExplainError("polynomial degree must be >= 1")
        if self.m < 1:
            raise ExplainError("neighborhood size m must be >= 1")
        if self.naive_dof not in ("m-d-1", "m-q"):
            raise ExplainError(f"unknown naive_dof {self.naive_dof!r}")
        if self.categorical_mode not in ("query", "pairs"):
            raise ExplainError(f"unknown categorical_mode {self.categorical_mode!r}")


@dataclass(frozen=True)
class ImportanceScore:
    """One feature's local importance in model-output units."""

    feature: str
    value: float
    kind: str


@dataclass(frozen=True)
class NaiveInterval:
    """Closed-form z-interval for a derivative estimate, symmetric about it."""

    feature: str
    lower: float
    upper: float
    alpha: float
    standard_error: float


@dataclass(frozen=True)
class _Functional:
    """A score as a function of the coefficient vector.

    Either a linear form (``linear`` set: score = beta . linear) or a
    difference of two basis evaluations with an optional inverse-link on
    each side (score = link(beta . plus) - link(beta . minus)).
    """

    name: str
    feature: str
    kind: str
    linear: np.ndarray | None = None
    plus: np.ndarray | None = None
    minus: np.ndarray | None = None
    log_odds: bool = False


class LocalProblem:
    """All precomputed state for explaining one query point.

    Shared by the point estimate, the naive interval, and bootstrap
    replicates so that they agree on the neighborhood, basis, targets and
    score functionals.  Instances are immutable in practice and safe to
    share across threads.
    """

    def __init__(self, dataset: QueryDataset, query: QueryPoint, config: ExplainConfig):
        schema = dataset.schema
        self.config = config
        self.schema = schema
        self.log_odds = schema.output_kind == "probability"
        if self.log_odds and config.kind == GRADIENT:
            raise ExplainError(
                "gradient scores are unavailable with probability outputs; "
                "use function_difference"
            )
        std_dataset, stats = standardize(dataset)
        self.stats = stats
        self.query = query
        self.query_std = query.standardized(stats)
        self.layout = OneHotLayout(schema)
        self.neighborhood: Neighborhood = select_neighborhood(
            std_dataset, self.query_std, config.m, balance=config.balance,
            fallback=config.balance_fallback,
        )
        members = self.neighborhood.member_indices
        rows = self.layout.encode(std_dataset.numeric[members], std_dataset.codes[members])
        targets = dataset.outputs[members]
        if self.log_odds:
            targets = np.asarray(to_log_odds(targets))
        self.basis: MonomialBasis = expand_basis(
            self.layout.width, config.degree, self.layout.binary_mask
        )
        self.X = self.basis.design_matrix(rows)
        self.y = targets
        if config.weighted:
            weights = compute_weights(self.neighborhood.distances, config.weight_formula)
            self.neighborhood = replace(self.neighborhood, weights=weights)
            sw = np.sqrt(weights)
            self.Xw = self.X * sw[:, None]
            self.yw = self.y * sw
        else:
            self.Xw, self.yw = self.X, self.y
        self.encoded_rows = rows
        self.query_enc = self.layout.encode(
            self.query_std.numeric.reshape(1, -1), self.query_std.codes.reshape(1, -1)
        )[0]
        self.deltas = self._resolve_deltas()
        self.functionals = self._build_functionals()
        self.notes: dict[str, object] = {}
        self._surrogate: PolynomialSurrogate | None = None
        if config.m < self.basis.q:
            warnings.warn(
                f"neighborhood size m={config.m} is below the basis size q={self.basis.q}; "
                "the local fit is underdetermined",
                RuntimeWarning,
                stacklevel=3,
            )

    # -- construction helpers ---------------------------------------------

    def _resolve_deltas(self) -> dict[str, float]:
        deltas: dict[str, float] = {}
        for spec in self.schema.numeric_features:
            if spec.name in self.config.deltas:
                delta = float(self.config.deltas[spec.name])
            elif spec.delta is not None:
                delta = spec.delta
            else:
                delta = DEFAULT_DELTA_FRACTION * self.stats.stddev(spec.name)
            if not delta > 0:
                raise ExplainError(f"resolved delta for feature {spec.name!r} is not positive")
            deltas[spec.name] = delta
        return deltas

    def _build_functionals(self) -> list[_Functional]:
        config = self.config
        funcs: list[_Functional] = []
        for spec in self.schema.features:
            if spec.is_numeric:
                col = self.layout.numeric_columns[spec.name]
                sigma = self.stats.stddev(spec.name)
                if config.kind == GRADIENT:
                    v = self.basis.derivative_row(self.query_enc, col)
                    if not config.standardized_units:
                        v = v / sigma
                    funcs.append(
                        _Functional(name=spec.name, feature=spec.name, kind=GRADIENT, linear=v)
                    )
                else:
                    step = self.deltas[spec.name] / sigma  # delta in standardized units
                    hi = self.query_enc.copy()
                    hi[col] += step
                    lo = self.query_enc.copy()
                    lo[col] -= step
                    funcs.append(
                        _Functional(
                            name=spec.name,
                            feature=spec.name,
                            kind=FUNCTION_DIFFERENCE,
                            plus=self.basis.basis_row(hi),
                            minus=self.basis.basis_row(lo),
                            log_odds=self.log_odds,
                        )
                    )
            else:
                cols = self.layout.categorical_columns[spec.name]
                base_row = self.query_enc.copy()
                for c in cols.values():
                    base_row[c] = 0.0  # baseline encodes as all zeros
                phi_base = self.basis.basis_row(base_row)
                if config.categorical_mode == "pairs":
                    for cat, c in cols.items():
                        cat_row = base_row.copy()
                        cat_row[c] = 1.0
                        funcs.append(
                            _Functional(
                                name=f"{spec.name}={cat}",
                                feature=spec.name,
                                kind=BASELINE_DIFFERENCE,
                                plus=self.basis.basis_row(cat_row),
                                minus=phi_base,
                                log_odds=self.log_odds,
                            )
                        )
                else:
                    funcs.append(
                        _Functional(
                            name=spec.name,
                            feature=spec.name,
                            kind=BASELINE_DIFFERENCE,
                            plus=self.basis.basis_row(self.query_enc),
                            minus=phi_base,
                            log_odds=self.log_odds,
                        )
                    )
        return funcs

    # -- fitting and scoring ----------------------------------------------

    @property
    def m(self) -> int:
        return self.neighborhood.m

    @property
    def score_names(self) -> list[str]:
        return [f.name for f in self.functionals]

    def surrogate(self) -> PolynomialSurrogate:
        """The full-neighborhood fit (cached)."""
        if self._surrogate is None:
            weights = self.neighborhood.weights if self.config.weighted else None
            surrogate = fit(self.encoded_rows, self.y, self.basis, weights=weights)
            if surrogate.diagnostics.effective_rank < 2:
                raise ExplainError(
                    "surrogate rank collapse: effective rank "
                    f"{surrogate.diagnostics.effective_rank} < 2 "
                    f"(m={self.m}, q={self.basis.q})"
                )
            self._surrogate = surrogate
        return self._surrogate

    def scores_from_coefficients(self, beta: np.ndarray) -> np.ndarray:
        """Apply every score functional to coefficient vector(s).

        ``beta`` may be a single (q,) vector or a (B, q) batch; returns
        (n_scores,) or (B, n_scores) accordingly.
        """
        beta = np.asarray(beta, dtype=float)
        single = beta.ndim == 1
        B = np.atleast_2d(beta)
        out = np.empty((B.shape[0], len(self.functionals)))
        for j, f in enumerate(self.functionals):
            if f.linear is not None:
                out[:, j] = B @ f.linear
            else:
                hi = B @ f.plus
                lo = B @ f.minus
                if f.log_odds:
                    hi = np.asarray(from_log_odds(hi))
                    lo = np.asarray(from_log_odds(lo))
                out[:, j] = hi - lo
        return out[0] if single else out

    def point_scores(self) -> list[ImportanceScore]:
        surrogate = self.surrogate()
        values = self.scores_from_coefficients(surrogate.coefficients)
        if not np.all(np.isfinite(values)):
            raise ExplainError("non-finite importance score in point estimate")
        return [
            ImportanceScore(feature=f.name, value=float(v), kind=f.kind)
            for f, v in zip(self.functionals, values)
        ]

    def solve_rows(self, row_indices: np.ndarray) -> tuple[np.ndarray, int]:
        """Minimum-norm LS coefficients on a row subset of the neighborhood.

        Rows are pre-scaled by sqrt-weights when the problem is weighted, so
        a subset fit uses the same weighting mode as the point estimate.
        """
        return lstsq_min_norm(self.Xw[row_indices], self.yw[row_indices])

    # -- naive closed-form interval -----------------------------------------

    def naive_interval(self, feature: str, alpha: float = 0.05) -> NaiveInterval:
        """Closed-form z-interval for the derivative of ``feature`` at the query.

        Always computed from an ordinary (unweighted) least-squares fit on
        the neighborhood, per the classical derivation: theta = beta . v,
        Var(theta) = v' (X'X)^{-1} v * sigma2 with sigma2 = RSS / dof.
        Requires raw (non-probability) outputs and a numeric feature.
        """
        if self.log_odds:
            raise ExplainError("naive intervals are not defined for log-odds targets")
        spec = self.schema.feature(feature)
        if not spec.is_numeric:
            raise ExplainError("naive intervals apply to continuous/ordinal features only")
        if not 0 < alpha < 1:
            raise ExplainError("alpha must be in (0, 1)")
        d = len(self.schema.features)
        m = self.m
        dof = m - d - 1 if self.config.naive_dof == "m-d-1" else m - self.basis.q
        if dof <= 0:
            raise ExplainError(
                f"nonpositive degrees of freedom ({dof}) for the naive interval"
            )
        beta, _ = lstsq_min_norm(self.X, self.y)
        resid = self.y - self.X @ beta
        sigma2 = float(resid @ resid) / dof
        col = self.layout.numeric_columns[feature]
        v = self.basis.derivative_row(self.query_enc, col)
        if not self.config.standardized_units:
            v = v / self.stats.stddev(feature)
        theta = float(beta @ v)
        XtX = self.X.T @ self.X
        try:
            solved = np.linalg.solve(XtX, v)
        except np.linalg.LinAlgError:
            solved = np.full_like(v, np.nan)
        if not np.all(np.isfinite(solved)):
            solved = np.linalg.pinv(XtX, hermitian=True) @ v
            self.notes["naive_pseudo_inverse"] = True
        var = float(v @ solved) * sigma2
        se = math.sqrt(max(var, 0.0))
        z = NormalDist().inv_cdf(1.0 - alpha / 2.0)
        return NaiveInterval(
            feature=feature,
            lower=theta - z * se,
            upper=theta + z * se,
            alpha=alpha,
            standard_error=se,
        )


def build_problem(
    dataset: QueryDataset, query: QueryPoint, config: ExplainConfig
) -> LocalProblem:
    """Prepare the full local-regression problem for one query point."""
    return LocalProblem(dataset, query, config)


def explain(
    dataset: QueryDataset, query: QueryPoint, config: ExplainConfig
) -> tuple[list[ImportanceScore], PolynomialSurrogate]:
    """Importance scores for every feature plus the fitted local surrogate."""
    problem = build_problem(dataset, query, config)
    return problem.point_scores(), problem.surrogate()


def naive_interval(problem: LocalProblem, feature: str, alpha: float = 0.05) -> NaiveInterval:
    """Module-level alias for :meth:`LocalProblem.naive_interval`."""
    return problem.naive_interval(feature, alpha)
