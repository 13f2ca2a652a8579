"""Explain one instance of the synthetic ground-truth model.

The model S(x1, x2, a, b) = sin(a*x1) * cos(b*x2) * tan(1 / (1 + (x1-x2)^2))
is observed only through a static sample of 2000 input/output pairs.  We
pick a query point, fit a local degree-4 polynomial to its 66 nearest
neighbors, and compare three things per feature:

  * the point estimate read off the surrogate,
  * the percentile-bootstrap uncertainty interval (500 sub-neighborhood
    refits of 59 points each),
  * the naive closed-form z-interval from classical regression theory,

against the analytic truth.  The punchline: the bootstrap interval tends to
capture the truth, while the naive interval is usually far too narrow,
because the local polynomial is misspecified and the classical theory
assumes it is not.
"""

import warnings

import numpy as np

import localexplain as lx

# m=66 < q=104 here: the local fit interpolates, which is the point of the
# exercise, so silence the underdetermination warning
warnings.simplefilter("ignore", RuntimeWarning)

# A fixed dataset of model queries: this is all the explainer ever sees.
dataset = lx.generate_dataset(2000, seed=7)

# The instance whose prediction we want to explain.
query = lx.QueryPoint.from_mapping(
    dataset.schema, {"x1": 1.3, "x2": -0.8, "a": "2", "b": "3"}
)

config = lx.ExplainConfig(
    degree=4,
    m=66,
    kind="gradient",           # continuous features -> partial derivatives
    weighted=True,
    balance=True,              # keep baseline/query classes evenly represented
    balance_fallback=True,
)
problem = lx.build_problem(dataset, query, config)

scores = problem.point_scores()
intervals, dist = lx.bootstrap_from_problem(
    problem, lx.BootstrapConfig(B=500, c=0.9, alpha=0.05, seed=42)
)
print(f"neighborhood m={problem.m}, basis size q={problem.basis.q}, "
      f"sub-neighborhood m'={dist.m_prime}, failed replicates={dist.failed_replicates}")

# Naive intervals need an unweighted OLS fit and gradient-kind scores; the
# problem computes that fit internally regardless of the weighted config.
naive = {name: problem.naive_interval(name, 0.05) for name in ("x1", "x2")}

# Analytic truths for this query point.
d1, d2 = lx.ground_truth_gradient(1.3, -0.8, 2, 3)
S = lx.ground_truth_value
truths = {
    "x1": d1,
    "x2": d2,
    "a": S(1.3, -0.8, 2, 3) - S(1.3, -0.8, 1, 3),   # a=2 versus baseline a=1
    "b": S(1.3, -0.8, 2, 3) - S(1.3, -0.8, 2, 1),   # b=3 versus baseline b=1
}

print(f"\n{'feature':>8} {'truth':>9} {'estimate':>9} "
      f"{'bootstrap interval':>22} {'naive interval':>22}")
for score, interval in zip(scores, intervals):
    name = score.feature
    boot = f"[{interval.lower:+.3f}, {interval.upper:+.3f}]"
    if name in naive:
        iv = naive[name]
        cls = f"[{iv.lower:+.3f}, {iv.upper:+.3f}]"
    else:
        cls = "-"
    hit = "covered" if interval.lower <= truths[name] <= interval.upper else "MISSED"
    print(f"{name:>8} {truths[name]:>+9.3f} {score.value:>+9.3f} {boot:>22} {cls:>22}  {hit}")

print("\nBootstrap replicate spread per feature (std of the replicate scores):")
for j, name in enumerate(dist.names):
    print(f"  {name:>4}: {dist.scores[:, j].std():.3f}")
