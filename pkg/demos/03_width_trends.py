"""How the bootstrap interval width responds to m, k, and c.

Practitioners cannot see coverage without a ground truth, but they can see
width, and width is what the hyperparameters control:

  * larger c (bigger sub-neighborhoods) -> more overlap between replicates
    -> narrower intervals;
  * larger k (more flexible surrogate) -> higher variance fits -> wider;
  * larger m (bigger neighborhood) -> the polynomial averages over more
    territory and its coefficients attenuate -> narrower.

This demo isolates each knob on the synthetic ground truth and prints the
average width as the knob moves.
"""

import warnings

import numpy as np

import localexplain as lx

warnings.simplefilter("ignore")

dataset = lx.generate_dataset(2000, seed=11)
rng = np.random.default_rng(5)
queries = [
    lx.QueryPoint(numeric=rng.uniform(-4.5, 4.5, 2), codes=rng.integers(0, 3, 2))
    for _ in range(12)
]


def mean_width(k, m, c):
    widths = []
    for i, query in enumerate(queries):
        problem = lx.build_problem(
            dataset, query,
            lx.ExplainConfig(degree=k, m=m, kind="gradient", weighted=True,
                             balance=True, balance_fallback=True),
        )
        intervals, _ = lx.bootstrap_from_problem(
            problem, lx.BootstrapConfig(B=150, c=c, alpha=0.05, seed=100 + i)
        )
        widths.append(intervals[0].upper - intervals[0].lower)  # x1's interval
    return float(np.mean(widths))


print("varying c (k=3, m=128):")
for c in (0.3, 0.5, 0.7, 0.9):
    print(f"  c={c:.1f}  (m'={int(c * 128)})  avg width {mean_width(3, 128, c):8.3f}")

print("\nvarying k (m=128, c=0.7):")
for k in (1, 2, 3, 4):
    print(f"  k={k}  avg width {mean_width(k, 128, 0.7):8.3f}")

print("\nvarying m (k=3, c=0.7):")
q = 56  # basis size for degree 3 over the encoded columns
for m in (32, 64, 128, 256):
    m_prime = int(0.7 * m)
    note = "  (m' < q: underdetermined, widths erratic)" if m_prime < q else ""
    print(f"  m={m:<4d} (m'={m_prime:<3d})  avg width {mean_width(3, m, 0.7):8.3f}{note}")

print("\nThe m trend only settles once the sub-neighborhood can actually "
      "determine the fit (m' >= q); below that the replicates swing wildly.")
print("Rule of thumb: pick a target width, then move c first, m second; "
      "raise k only when the local fit is visibly too rigid.")
