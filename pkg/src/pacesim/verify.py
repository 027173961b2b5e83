"""Executable checkers for the standalone probabilistic and deterministic
inequalities the rest of the package relies on.

Each checker computes its statistic and the analytic bound from the same
formula, with any implementation constants taken from `constants`; Monte
Carlo checkers pass with MC_SIGMA standard errors of slack, deterministic
ones with SURE_TOL.  Every checker has a falsifiable negative control
(a deliberately violating input must fail).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .constants import MC_SIGMA, SGD_BOUND_CONSTANT, SURE_TOL
from .errors import ConfigurationError, PreconditionError
from .simulation import Trace

# ---------------------------------------------------------------------------
# Concentration of predictably-selected bounded sums


@dataclass(frozen=True)
class UniformValues:
    low: float
    high: float

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, n)

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    @property
    def max(self) -> float:
        return self.high


@dataclass(frozen=True)
class DiscreteValues:
    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if abs(sum(self.probs) - 1.0) > 1e-12 or any(p < 0 for p in self.probs):
            raise ConfigurationError("probabilities must be a distribution")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(self.values, size=n, p=self.probs)

    @property
    def mean(self) -> float:
        return float(sum(v * p for v, p in zip(self.values, self.probs)))

    @property
    def max(self) -> float:
        return max(self.values)


def _selector(name_or_fn) -> Callable:
    if callable(name_or_fn):
        return name_or_fn
    table = {
        # X_t may only depend on information available before round t.
        "always": lambda t, stat, rho: np.ones_like(stat),
        "never": lambda t, stat, rho: np.zeros_like(stat),
        "adversarial": lambda t, stat, rho: (stat < rho * t).astype(np.float64),
    }
    if name_or_fn not in table:
        raise ConfigurationError(f"unknown selector {name_or_fn!r}")
    return table[name_or_fn]


@dataclass(frozen=True)
class MartingaleSetup:
    """Per-round value distribution, a predictable [0,1] selector, and the
    parameters of the tail inequality being exercised.

    The selector receives (t, running statistic, rho) and must not look at
    the round's own draw; the named selectors honor that by construction.
    """

    y_dist: UniformValues | DiscreteValues
    selector: str | Callable
    horizon: int
    v_max: float
    rho: float

    def __post_init__(self):
        if self.y_dist.max > self.v_max + 1e-12:
            raise ConfigurationError("value distribution exceeds v_max")


@dataclass(frozen=True)
class CheckReport:
    checker: str
    trials: int
    statistic: float
    bound: float
    passed: bool
    detail: dict | None = None

    def as_dict(self) -> dict:
        out = {
            "checker": self.checker,
            "trials": self.trials,
            "statistic": self.statistic,
            "bound": self.bound,
            "pass": self.passed,
        }
        if self.detail:
            out.update(self.detail)
        return out


def concentration_check(
    setup: MartingaleSetup, theta: float, trials: int = 100_000, seed: int = 0
) -> CheckReport:
    """Empirical tail frequency of the selected sum exceeding rho*T + theta,
    against the analytic bound exp(-2 theta^2 / (T v_max^2)).

    Passes when the frequency is at most the bound plus MC_SIGMA binomial
    standard errors.  Feeding a value distribution with mean above rho is
    the negative control: the bound no longer applies and the check fails.
    """
    select = _selector(setup.selector)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    stat = np.zeros(trials)
    for t in range(setup.horizon):
        x = np.clip(select(t, stat, setup.rho), 0.0, 1.0)
        y = setup.y_dist.draw(rng, trials)
        stat += x * y + (1.0 - x) * setup.rho
    threshold = setup.rho * setup.horizon + theta
    freq = float((stat >= threshold).mean())
    bound = math.exp(-2.0 * theta**2 / (setup.horizon * setup.v_max**2))
    stderr = math.sqrt(max(freq * (1 - freq), 0.0) / trials)
    passed = freq <= bound + MC_SIGMA * stderr
    return CheckReport(
        "concentration",
        trials,
        freq,
        bound,
        passed,
        {"theta": theta, "stderr": stderr, "mean_y": setup.y_dist.mean},
    )


# ---------------------------------------------------------------------------
# Projected SGD dynamic regret


@dataclass(frozen=True)
class SGDTestProblem:
    """Quadratic losses 0.5 (x - m_t)^2 with drifting minimizers on an
    interval domain, with bounded uniform gradient noise.

    The comparator sequence is the minimizers themselves, so its path bound
    is sum |m_{t+1} - m_t| + 1 and the gradient norm is surely at most the
    domain diameter plus the noise width.
    """

    domain: tuple[float, float]
    minimizers: np.ndarray
    noise_width: float = 0.0
    trials: int = 100

    def __post_init__(self):
        lo, hi = self.domain
        m = np.asarray(self.minimizers, dtype=np.float64).copy()
        if hi <= lo:
            raise ConfigurationError("empty domain")
        if np.any(m < lo) or np.any(m > hi):
            raise ConfigurationError("minimizers must lie in the domain")
        if self.noise_width < 0:
            raise ConfigurationError("noise width must be non-negative")
        m.flags.writeable = False
        object.__setattr__(self, "minimizers", m)

    @property
    def horizon(self) -> int:
        return len(self.minimizers)

    @property
    def diameter(self) -> float:
        return self.domain[1] - self.domain[0]

    @property
    def gradient_bound(self) -> float:
        return self.diameter + self.noise_width

    @property
    def path_bound(self) -> float:
        return float(np.abs(np.diff(self.minimizers)).sum()) + 1.0

    def tuned_step_size(self) -> float:
        return self.diameter * math.sqrt(
            self.path_bound / (self.gradient_bound**2 * self.horizon)
        )


def sgd_regret_bound(problem: SGDTestProblem, eps: float) -> float:
    """C * (D^2 P / eps + eps G^2 T); at eps <= 0 the bound is evaluated at
    the optimally tuned step size so a no-learning control is falsifiable."""
    d, g, t, p = (
        problem.diameter,
        problem.gradient_bound,
        problem.horizon,
        problem.path_bound,
    )
    if eps <= 0:
        return SGD_BOUND_CONSTANT * 2.0 * d * g * math.sqrt(p * t)
    return SGD_BOUND_CONSTANT * (d**2 * p / eps + eps * g**2 * t)


def sgd_regret_check(problem: SGDTestProblem, eps: float, seed: int = 0) -> CheckReport:
    """Run projected SGD with noisy gradients against the drifting
    comparator and compare mean regret to the analytic bound."""
    lo, hi = problem.domain
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    x = np.full(problem.trials, lo)
    regret = np.zeros(problem.trials)
    for t in range(problem.horizon):
        m = problem.minimizers[t]
        regret += 0.5 * (x - m) ** 2
        grad = x - m
        if problem.noise_width > 0:
            grad = grad + rng.uniform(-problem.noise_width, problem.noise_width, x.shape)
        if eps > 0:
            x = np.clip(x - eps * grad, lo, hi)
    measured = float(regret.mean())
    bound = sgd_regret_bound(problem, eps)
    return CheckReport(
        "sgd_regret",
        problem.trials,
        measured,
        bound,
        measured <= bound,
        {"eps": eps, "path_bound": problem.path_bound},
    )


# ---------------------------------------------------------------------------
# Increasing Lipschitz functions vs. their integral


@dataclass(frozen=True)
class PiecewiseLinear:
    """f given by breakpoints; must cover 0 so that f(0) is defined."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64).copy()
        ys = np.asarray(self.ys, dtype=np.float64).copy()
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
            raise ConfigurationError("need matching breakpoint arrays, length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise ConfigurationError("breakpoints must strictly increase")
        if not xs[0] <= 0 <= xs[-1]:
            raise ConfigurationError("breakpoints must straddle 0")
        xs.flags.writeable = False
        ys.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __call__(self, x: float) -> float:
        return float(np.interp(x, self.xs, self.ys))

    def max_slope(self) -> float:
        return float((np.abs(np.diff(self.ys)) / np.diff(self.xs)).max())

    def is_nondecreasing(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.ys) >= -tol))

    def integral_from_zero(self, x: float) -> float:
        """Exact signed integral of the interpolant from 0 to x."""
        lo, hi = (0.0, x) if x >= 0 else (x, 0.0)
        pts = np.unique(np.concatenate([[lo, hi], self.xs[(self.xs > lo) & (self.xs < hi)]]))
        vals = np.interp(pts, self.xs, self.ys)
        area = float(np.trapezoid(vals, pts))
        return area if x >= 0 else -area


def lipschitz_integral_check(
    f: PiecewiseLinear,
    x: float,
    lam: float,
    tol: float = SURE_TOL,
    validate: bool = True,
) -> CheckReport:
    """Check |f(x)| <= sqrt(2 lam * integral_0^x f) for an increasing
    lam-Lipschitz f with f(0) = 0; the integral is exact (trapezoid on the
    linear pieces).

    With validate=True the preconditions are enforced and a violating spec
    raises; validate=False lets negative controls exercise the inequality
    directly.
    """
    if validate:
        if not f.is_nondecreasing():
            raise PreconditionError("f must be non-decreasing")
        if f.max_slope() > lam + 1e-12:
            raise PreconditionError(f"slope {f.max_slope()} exceeds lambda {lam}")
        if abs(f(0.0)) > 1e-12:
            raise PreconditionError("f(0) must be 0")
        if not f.xs[0] <= x <= f.xs[-1]:
            raise PreconditionError("x outside the function's breakpoints")
    r = f.integral_from_zero(x)
    fx = f(x)
    bound = math.sqrt(max(2.0 * lam * r, 0.0))
    passed = abs(fx) <= bound + tol
    return CheckReport(
        "lipschitz_integral", 1, abs(fx), bound, passed, {"x": x, "integral": r, "lambda": lam}
    )


# ---------------------------------------------------------------------------
# GSP subset-core inequality


def gsp_core_slack(
    click_rates: Sequence[float], bids: Sequence[float], assume_sorted: bool = False
) -> float:
    """Minimum over agent subsets of (seller revenue from outsiders plus the
    subset's declared welfare) minus the subset's best greedy reallocation.

    Bids are reindexed in descending order and click rates zero-padded;
    assume_sorted skips the reindexing so deliberately scrambled instances
    can serve as negative controls.
    """
    b = [float(x) for x in bids]
    if not assume_sorted:
        b = sorted(b, reverse=True)
    n = len(b)
    if n == 0:
        raise ConfigurationError("empty bid profile")
    if n > 8 or len(click_rates) > 8:
        raise PreconditionError("exhaustive subset check supports n, m <= 8")
    alpha = [0.0] * n
    for i, a in enumerate(click_rates):
        if i < n:
            alpha[i] = float(a)
    b_next = b[1:] + [0.0]
    worst = math.inf
    for mask in range(1 << n):
        members = [i for i in range(n) if mask >> i & 1]
        inside = set(members)
        lhs = sum(b_next[i] * alpha[i] for i in range(n) if i not in inside)
        lhs += sum(b[i] * alpha[i] for i in members)
        rhs = 0.0
        for pos, i in enumerate(members):
            rhs += b[i] * alpha[pos]  # sigma(i)-th best slot, sigma = rank within S
        worst = min(worst, lhs - rhs)
    return worst


def gsp_core_check(
    click_rates: Sequence[float], bids: Sequence[float], tol: float = SURE_TOL
) -> bool:
    return gsp_core_slack(click_rates, bids) >= -tol


# ---------------------------------------------------------------------------
# The R_k diagnostic from the welfare proof


def benchmark_value_diagnostic(
    trace: Trace,
    rule_allocations: np.ndarray,
    agent: int,
    profiles: np.ndarray | None = None,
) -> float:
    """Benchmark value with paced rounds replaced by the target rate.

    Sums, over rounds, the benchmark rule's value for the agent whenever
    her multiplier was exactly zero and the target rate otherwise (stopped
    rounds count as paced).  The rule is indexed by the trace's scenario
    indices, or matched against `profiles` rows when those were not kept.
    """
    rule = np.asarray(rule_allocations, dtype=np.float64)
    if trace.scenario_indices is not None:
        idx = trace.scenario_indices
    else:
        if profiles is None:
            raise ConfigurationError("need scenario indices or the support profiles")
        prof = np.asarray(profiles, dtype=np.float64)
        idx = np.empty(trace.horizon, dtype=np.int64)
        for t in range(trace.horizon):
            match = np.flatnonzero(np.all(np.abs(prof - trace.values[t]) < 1e-12, axis=1))
            if len(match) == 0:
                raise ConfigurationError(f"round {t + 1} value profile not in the rule support")
            idx[t] = match[0]
    if np.any(idx >= len(rule)):
        raise ConfigurationError("scenario index outside the rule support")
    y = rule[idx, agent]
    mu = trace.multipliers[:, agent]
    unpaced = mu == 0.0  # NaN (stopped) compares false: counts as paced
    rho = float(trace.target_rates[agent])
    return float(np.where(unpaced, y * trace.values[:, agent], rho).sum())


def benchmark_value_ceiling(rho: float, horizon: int, value_cap: float, n_agents: int) -> float:
    """High-probability ceiling for the diagnostic: rho*T plus the
    concentration slack."""
    return rho * horizon + value_cap * math.sqrt(
        horizon * math.log(value_cap * n_agents * horizon)
    )


# ---------------------------------------------------------------------------
# Mechanism fuzzing: IR, MBB, monotonicity, sampled core deviations


def _random_bids(rng: np.random.Generator, n: int) -> list[float]:
    bids = (rng.uniform(0.0, 3.0, n) * (rng.random(n) > 0.15)).tolist()
    if n >= 2 and rng.random() < 0.3:
        i, j = rng.choice(n, size=2, replace=False)
        bids[j] = bids[i]  # force ties to exercise deterministic resolution
    return [float(b) for b in bids]


def _random_feasible(rng: np.random.Generator, feasible, n: int) -> list[float]:
    from .auctions import SingleSlot

    scale = rng.random()
    if isinstance(feasible, SingleSlot):
        weights = rng.exponential(size=n)
        return list(scale * weights / weights.sum())
    rates = feasible.click_rates
    y = np.zeros(n)
    perm = rng.permutation(n)
    for j, k in enumerate(perm):
        rate = rates[j] if j < len(rates) else 0.0
        y[k] = rate * rng.random() * scale
    return list(y)


def _random_mechanism(rng: np.random.Generator, kind: str):
    from .auctions import Mechanism, Polymatroid, SingleSlot

    if kind == "second_price":
        return Mechanism(kind, SingleSlot())
    if kind == "first_price" and rng.random() < 0.5:
        return Mechanism(kind, SingleSlot())
    m = int(rng.integers(1, 5))
    rates = np.sort(rng.random(m))[::-1]
    if rng.random() < 0.3:
        rates[0] = 1.0
    return Mechanism(kind, Polymatroid(tuple(rates)))


def fuzz_mechanisms(
    instances: int = 10_000, seed: int = 0, max_agents: int = 6
) -> list[CheckReport]:
    """Random-instance sweep of the auction predicates.

    Per mechanism and instance: individual rationality of the outcome,
    monotone bang-per-buck on a sampled bid pair, weak monotonicity of
    allocation and payment in one agent's bid, and the coalition condition
    against a sampled feasible deviation.  Statistic is the violation
    count; the bound is zero.
    """
    from .auctions import allocate, check_core, check_ir, check_mbb

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    reports = []
    for kind in ("first_price", "second_price", "gsp"):
        violations = {"ir": 0, "mbb": 0, "monotone": 0, "core": 0}
        for _ in range(instances):
            n = int(rng.integers(2, max_agents + 1))
            mech = _random_mechanism(rng, kind)
            bids = _random_bids(rng, n)
            out = allocate(mech, bids)
            if not check_ir(out, bids):
                violations["ir"] += 1

            agent = int(rng.integers(0, n))
            lo, hi = np.sort(rng.uniform(0.0, 3.0, 2))
            others = bids[:agent] + bids[agent + 1 :]
            if not check_mbb(mech, agent, float(lo), float(hi), others):
                violations["mbb"] += 1

            raised = list(bids)
            raised[agent] = bids[agent] + float(rng.uniform(0.0, 2.0))
            out_hi = allocate(mech, raised)
            if (
                out_hi.allocations[agent] < out.allocations[agent] - 1e-9
                or out_hi.payments[agent] < out.payments[agent] - 1e-9
            ):
                violations["monotone"] += 1

            size = int(rng.integers(0, n + 1))
            subset = rng.choice(n, size=size, replace=False).tolist()
            deviation = _random_feasible(rng, mech.feasible, n)
            if not check_core(mech, bids, subset, deviation):
                violations["core"] += 1
        for prop, count in violations.items():
            reports.append(
                CheckReport(f"{prop}_fuzz[{kind}]", instances, float(count), 0.0, count == 0)
            )
    return reports


def gsp_exhaustive_core_fuzz(instances: int = 2_000, seed: int = 0) -> CheckReport:
    """Random GSP instances with n, m <= 5, every agent subset enumerated."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    worst = math.inf
    violations = 0
    for _ in range(instances):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        rates = np.sort(rng.random(m))[::-1]
        bids = rng.uniform(0.0, 3.0, n)
        slack = gsp_core_slack(tuple(rates), bids.tolist())
        worst = min(worst, slack)
        if slack < -SURE_TOL:
            violations += 1
    return CheckReport(
        "gsp_core_exhaustive",
        instances,
        float(violations),
        0.0,
        violations == 0,
        {"min_slack": worst},
    )
