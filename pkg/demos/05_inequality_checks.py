"""The standalone inequality checkers, each with its negative control.

Every analytic guarantee the package relies on is runnable: a tail bound
for predictably-selected bounded sums, the dynamic-regret bound for
projected SGD, the link between an increasing Lipschitz function and its
integral, and the GSP subset-core inequality.  Violating inputs must fail.

Run: python demos/05_inequality_checks.py
"""

import math

import numpy as np

from pacesim import (
    MartingaleSetup,
    PiecewiseLinear,
    SGDTestProblem,
    UniformValues,
    concentration_check,
    gsp_core_slack,
    lipschitz_integral_check,
    sgd_regret_check,
)


def show(report):
    flag = "PASS" if report.passed else "FAIL"
    print(f"  [{flag}] {report.checker}: statistic {report.statistic:.4g} "
          f"vs bound {report.bound:.4g}")


print("== tail bound for selected sums ==")
rho, T = 0.5, 200
theta = math.sqrt(T) * rho
fair = MartingaleSetup(UniformValues(0, 2 * rho), "always", T, 2 * rho, rho)
show(concentration_check(fair, theta, trials=50_000, seed=1))
adversarial = MartingaleSetup(UniformValues(0, 2 * rho), "adversarial", T, 2 * rho, rho)
show(concentration_check(adversarial, theta / 2, trials=50_000, seed=2))
hot = MartingaleSetup(UniformValues(0.8, 1.2), "always", T, 2.0, rho)
print("  negative control (mean above target):")
show(concentration_check(hot, theta / 2, trials=10_000, seed=3))

print()
print("== projected SGD vs a drifting comparator ==")
drift = SGDTestProblem(
    (0.0, 1.0),
    np.where((np.arange(3000) // 300) % 2 == 0, 0.2, 0.8),
    noise_width=0.5,
    trials=60,
)
show(sgd_regret_check(drift, drift.tuned_step_size(), seed=4))
frozen = SGDTestProblem((0.0, 1.0), np.full(3000, 1.0), trials=10)
print("  negative control (no learning):")
show(sgd_regret_check(frozen, 0.0, seed=5))

print()
print("== increasing Lipschitz functions vs their integral ==")
tight = PiecewiseLinear([0.0, 2.0], [0.0, 6.0])  # slope exactly 3: equality case
show(lipschitz_integral_check(tight, 2.0, lam=3.0))
rng = np.random.default_rng(6)
bad = 0
for _ in range(2000):
    k = int(rng.integers(2, 8))
    xs = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 1.0, k))])
    slopes = rng.uniform(0.0, 2.0, k)
    ys = np.concatenate([[0.0], np.cumsum(slopes * np.diff(xs))])
    ok = lipschitz_integral_check(
        PiecewiseLinear(xs, ys), float(rng.uniform(0, xs[-1])),
        max(float(slopes.max()), 1e-9),
    ).passed
    bad += not ok
print(f"  2000 random monotone functions: {bad} violations")
jump = PiecewiseLinear([0.0, 1e-9, 1.0], [0.0, 1.0, 1.0])
print("  negative control (a near-jump, validation off):",
      "FAIL as expected" if not lipschitz_integral_check(jump, 1e-9, 1.0, validate=False).passed
      else "unexpectedly passed")

print()
print("== GSP subset-core inequality ==")
slack = gsp_core_slack([1.0, 0.5], [3.0, 2.0, 1.0])
print(f"  worked instance, min slack over subsets: {slack:.4g}")
scrambled = gsp_core_slack([1.0, 0.5, 0.0], [5.0, 1.0, 10.0], assume_sorted=True)
print(f"  negative control (bids fed unsorted): min slack {scrambled:.4g} < 0")
