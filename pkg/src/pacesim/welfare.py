"""Liquid welfare: realized reports, the exact ex-ante benchmark, and the
no-regret-but-terrible-welfare counterexample scenario.

The ex-ante benchmark maximizes, over one allocation rule applied to every
support point, the sum over agents of min(budget, horizon * expected
per-round value).  The min is linearized with one auxiliary welfare
variable per agent and the resulting LP is solved exactly by the dense
simplex in `lp`; a frontier grid search over the same program serves as an
independent oracle on two-agent instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .auctions import FeasibleSet, Polymatroid, SingleSlot, second_price
from .constants import WELFARE_BOUND_CONSTANT, Z99
from .errors import (
    CapacityError,
    ConfigurationError,
    InvariantViolationError,
    StatisticsError,
)
from .lp import solve_lp_max
from .simulation import ScriptedAgent, SimulationConfig, Trace, ValueModel, run_simulation

#: Largest n * support_size the exact solver accepts.
SOLVER_VARIABLE_CAP = 10_000

#: Polymatroid subset-constraint generation refuses this many agents or more.
POLYMATROID_AGENT_CAP = 12


@dataclass(frozen=True)
class LiquidWelfareReport:
    """Per-agent liquid value min(budget, total value won) and total spend.

    Spend can exceed liquid value on a single realization (only the
    expectation is ordered), but can never exceed the budget; that is
    asserted here.
    """

    liquid_values: np.ndarray
    spends: np.ndarray
    budgets: np.ndarray

    def __post_init__(self):
        if np.any(self.spends > self.budgets + 1e-9):
            raise InvariantViolationError("agent spend exceeds its budget")

    @property
    def total(self) -> float:
        return float(self.liquid_values.sum())


def liquid_welfare(trace: Trace, budgets: Sequence[float] | None = None) -> LiquidWelfareReport:
    b = trace.budgets if budgets is None else np.asarray(budgets, dtype=np.float64)
    if b.shape != (trace.n_agents,):
        raise ConfigurationError("one budget per agent required")
    totals = (trace.allocations * trace.values).sum(axis=0)
    return LiquidWelfareReport(
        liquid_values=np.minimum(b, totals),
        spends=trace.payments.sum(axis=0),
        budgets=b.copy(),
    )


@dataclass(frozen=True)
class ExAnteRule:
    """A per-scenario allocation rule with its ex-ante liquid welfare."""

    allocations: np.ndarray  # (support, agents)
    liquid_values: np.ndarray  # per-agent min(budget, horizon * expected value)
    value: float

    def allocation_for(self, scenario: int) -> np.ndarray:
        return self.allocations[scenario]


def ex_ante_value(
    allocations: np.ndarray,
    model: ValueModel,
    budgets: Sequence[float],
    horizon: int,
) -> float:
    """Ex-ante liquid welfare of an arbitrary per-scenario rule."""
    y = np.asarray(allocations, dtype=np.float64)
    b = np.asarray(budgets, dtype=np.float64)
    expected = (model.probs[:, None] * y * model.profiles).sum(axis=0)
    return float(np.minimum(b, horizon * expected).sum())


def _polymatroid_rank(rates: tuple[float, ...], n: int) -> np.ndarray:
    padded = np.zeros(n)
    padded[: min(len(rates), n)] = rates[: min(len(rates), n)]
    return np.cumsum(padded)


def solve_ex_ante_optimum(
    model: ValueModel,
    feasible: FeasibleSet,
    budgets: Sequence[float],
    horizon: int,
) -> ExAnteRule:
    """Maximize ex-ante liquid welfare exactly over per-scenario allocations.

    Variables are one allocation per (scenario, agent) plus one welfare
    variable w_k per agent with w_k <= budget_k and w_k <= horizon *
    expected value; single-slot scenarios contribute simplex constraints,
    polymatroid scenarios one constraint per agent subset.
    """
    S, n = model.support_size, model.n_agents
    b = np.asarray(budgets, dtype=np.float64)
    if b.shape != (n,):
        raise ConfigurationError("one budget per agent required")
    if np.any(b < 0):
        raise ConfigurationError("budgets must be non-negative")
    if horizon < 0:
        raise ConfigurationError("horizon must be non-negative")
    if n * S > SOLVER_VARIABLE_CAP:
        raise CapacityError(f"{n * S} allocation variables exceed {SOLVER_VARIABLE_CAP}")
    if isinstance(feasible, Polymatroid) and n >= POLYMATROID_AGENT_CAP:
        raise CapacityError(
            f"polymatroid subset constraints refuse n >= {POLYMATROID_AGENT_CAP}"
        )

    if horizon == 0 or not np.any(model.profiles > 0):
        return ExAnteRule(np.zeros((S, n)), np.zeros(n), 0.0)

    nvars = S * n + n

    def yi(s: int, k: int) -> int:
        return s * n + k

    rows: list[np.ndarray] = []
    rhs: list[float] = []

    def add(indices, coeffs, bound):
        row = np.zeros(nvars)
        row[list(indices)] = coeffs
        rows.append(row)
        rhs.append(bound)

    for k in range(n):
        add([S * n + k], [1.0], float(b[k]))
        coeffs = [-horizon * float(model.probs[s] * model.profiles[s, k]) for s in range(S)]
        add([yi(s, k) for s in range(S)] + [S * n + k], coeffs + [1.0], 0.0)

    if isinstance(feasible, SingleSlot):
        for s in range(S):
            add([yi(s, k) for k in range(n)], [1.0] * n, 1.0)
            for k in range(n):
                add([yi(s, k)], [1.0], 1.0)
    else:
        rank = _polymatroid_rank(feasible.click_rates, n)
        for s in range(S):
            for size in range(1, n + 1):
                for subset in itertools.combinations(range(n), size):
                    add([yi(s, k) for k in subset], [1.0] * size, float(rank[size - 1]))

    c = np.zeros(nvars)
    c[S * n :] = 1.0
    sol = solve_lp_max(c, np.array(rows), np.array(rhs))
    y = np.clip(sol.x[: S * n].reshape(S, n), 0.0, None)
    w = sol.x[S * n :].copy()
    return ExAnteRule(y, w, sol.value)


def _frontier_grid(feasible: FeasibleSet, n: int, step: float) -> np.ndarray:
    """Maximal-boundary allocations for <= 2 agents on a regular grid.

    The objective is non-decreasing in every coordinate, so the optimum is
    attained on the maximal frontier of the (downward-closed) feasible set;
    for one or two agents that frontier is a segment.
    """
    if isinstance(feasible, SingleSlot):
        top = 1.0
        second = 1.0 if n == 2 else 0.0
    else:
        rates = feasible.click_rates
        top = rates[0]
        second = rates[1] if len(rates) > 1 and n == 2 else 0.0
    if n == 1:
        grid = np.arange(0.0, top + step / 2, step)
        return np.clip(grid, 0.0, top)[:, None]
    if n != 2:
        raise CapacityError("the grid oracle handles at most two agents")
    total = top + second if isinstance(feasible, Polymatroid) else 1.0
    lo, hi = total - top, top
    first = np.arange(lo, hi + step / 2, step)
    first = np.clip(first, lo, hi)
    if first[-1] < hi - 1e-15:
        first = np.append(first, hi)
    return np.column_stack([first, total - first])


def ex_ante_grid_oracle(
    model: ValueModel,
    feasible: FeasibleSet,
    budgets: Sequence[float],
    horizon: int,
    step: float = 0.01,
) -> tuple[float, np.ndarray]:
    """Brute-force the ex-ante program over a grid of frontier allocations.

    Independent of the simplex path: pure enumeration over the Cartesian
    product of per-scenario grids.  Restricted to n <= 2 and a small
    support so the product stays desk-sized.
    """
    S, n = model.support_size, model.n_agents
    b = np.asarray(budgets, dtype=np.float64)
    if n > 2:
        raise CapacityError("the grid oracle handles at most two agents")
    grid = _frontier_grid(feasible, n, step)
    if len(grid) ** S > 5_000_000:
        raise CapacityError("grid enumeration too large; coarsen the step")

    choice_axes = np.indices((len(grid),) * S).reshape(S, -1)  # (S, combos)
    expected = np.zeros((choice_axes.shape[1], n))
    for s in range(S):
        expected += model.probs[s] * grid[choice_axes[s]] * model.profiles[s]
    welfare = np.minimum(b[None, :], horizon * expected).sum(axis=1)
    best = int(np.argmax(welfare))
    rule = grid[choice_axes[:, best]]
    return float(welfare[best]), rule


def rule_to_csv(allocations: np.ndarray, path) -> None:
    """Write a per-scenario allocation rule as CSV: scenario index followed
    by one allocation column per agent, 17 significant digits."""
    import csv

    y = np.asarray(allocations, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario"] + [f"agent_{k}" for k in range(y.shape[1])])
        for s in range(y.shape[0]):
            writer.writerow([s] + [format(v, ".17g") for v in y[s]])


@dataclass(frozen=True)
class CollapsedRule:
    allocations: np.ndarray  # (support, agents)
    approximate: bool
    stderr: np.ndarray | None = None


def collapse_sequence_rule(
    seq_rule: Callable[[tuple[int, ...]], np.ndarray],
    model: ValueModel,
    horizon: int,
    max_enumeration: int = 1_000_000,
    mc_samples: int = 20_000,
    seed: int = 0,
) -> CollapsedRule:
    """Average a sequence rule into one single-round rule with the same
    ex-ante liquid welfare.

    seq_rule maps a tuple of support indices (one per round) to a (horizon,
    agents) allocation array.  When the support^horizon product is small
    the conditional expectations are enumerated exactly; otherwise they are
    Monte Carlo estimates flagged approximate, with a standard error per
    (scenario, agent) entry.
    """
    S, n = model.support_size, model.n_agents
    if horizon < 1:
        raise ConfigurationError("horizon must be positive")
    q = model.probs

    if S**horizon <= max_enumeration:
        cond = np.zeros((horizon, S, n))  # E[alloc_t 1{v_t = s}]
        for seq in itertools.product(range(S), repeat=horizon):
            p = float(np.prod(q[list(seq)]))
            y = np.asarray(seq_rule(seq), dtype=np.float64)
            if y.shape != (horizon, n):
                raise ConfigurationError("sequence rule returned a bad shape")
            for t, s in enumerate(seq):
                cond[t, s] += p * y[t]
        cond /= q[None, :, None]
        return CollapsedRule(cond.mean(axis=0), approximate=False)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    per_sample = np.empty((mc_samples, S, n))
    for i in range(mc_samples):
        seq = tuple(int(s) for s in model.sample_indices(rng, horizon))
        y = np.asarray(seq_rule(seq), dtype=np.float64)
        h = np.zeros((S, n))
        for t, s in enumerate(seq):
            h[s] += y[t] / q[s]
        per_sample[i] = h / horizon
    mean = per_sample.mean(axis=0)
    stderr = per_sample.std(axis=0, ddof=1) / math.sqrt(mc_samples)
    return CollapsedRule(mean, approximate=True, stderr=stderr)


@dataclass(frozen=True)
class WelfareBoundReport:
    mean: float
    stderr: float
    optimum: float
    ratio: float
    slack: float
    rhs: float
    passed: bool
    replications: int

    def as_dict(self) -> dict:
        return {
            "expected_welfare": self.mean,
            "stderr": self.stderr,
            "optimum": self.optimum,
            "ratio": self.ratio,
            "slack": self.slack,
            "rhs": self.rhs,
            "passed": self.passed,
            "replications": self.replications,
        }


def welfare_bound_slack(n_agents: int, value_cap: float, horizon: int) -> float:
    return WELFARE_BOUND_CONSTANT * n_agents * value_cap * math.sqrt(
        horizon * math.log(value_cap * n_agents * horizon)
    )


def verify_welfare_bound(
    welfare_samples: Sequence[float],
    optimum: float,
    n_agents: int,
    value_cap: float,
    horizon: int,
    min_replications: int = 200,
) -> WelfareBoundReport:
    """Check the half-of-optimum guarantee on replicated welfare samples.

    Passes when the sample mean, minus its 99% Monte Carlo error, is at
    least optimum/2 minus the additive implementation slack.
    """
    samples = np.asarray(welfare_samples, dtype=np.float64)
    if len(samples) < max(2, min_replications):
        raise StatisticsError(
            f"need at least {max(2, min_replications)} replications, got {len(samples)}"
        )
    mean = float(samples.mean())
    stderr = float(samples.std(ddof=1) / math.sqrt(len(samples)))
    slack = welfare_bound_slack(n_agents, value_cap, horizon)
    rhs = optimum / 2.0 - slack
    passed = mean - Z99 * stderr >= rhs
    ratio = mean / optimum if optimum > 0 else math.inf
    return WelfareBoundReport(
        mean, stderr, optimum, ratio, slack, rhs, passed, len(samples)
    )


def counterexample_scenario(mu_cap: float, horizon: int) -> SimulationConfig:
    """The scripted scenario where individually no-regret bidding wrecks
    liquid welfare.

    Values are (2, 1) every round; agent 1 (budget horizon/(1 + mu_cap))
    always bids 2 and agent 2 (budget horizon) always bids 0, so agent 1
    wins everything for free and total liquid welfare is stuck at its
    budget, a 1/(1 + mu_cap) fraction of the welfare of handing every item
    to agent 2.
    """
    if mu_cap < 0:
        raise ConfigurationError("mu_cap must be non-negative")
    if horizon < 1:
        raise ConfigurationError("horizon must be positive")
    model = ValueModel(probs=[1.0], profiles=[[2.0, 1.0]])
    return SimulationConfig(
        mechanism=second_price(),
        agents=(
            ScriptedAgent(budget=horizon / (1.0 + mu_cap), bid=2.0),
            ScriptedAgent(budget=float(horizon), bid=0.0),
        ),
        value_model=model,
        horizon=horizon,
        seed=0,
    )


def counterexample_report(mu_cap: float, horizon: int) -> dict:
    """Run the counterexample and report realized welfare against the
    benchmark of allocating every item to the budget-unconstrained agent."""
    config = counterexample_scenario(mu_cap, horizon)
    trace = run_simulation(config)
    report = liquid_welfare(trace)
    benchmark = float(horizon)
    return {
        "mu_cap": mu_cap,
        "horizon": horizon,
        "realized_welfare": report.total,
        "benchmark_welfare": benchmark,
        "ratio": report.total / benchmark,
        "expected_ratio": 1.0 / (1.0 + mu_cap),
    }
