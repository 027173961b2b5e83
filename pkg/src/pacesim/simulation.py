"""Seeded market simulation: paced and scripted agents in a repeated auction.

Value profiles are drawn i.i.d. across rounds from a finite-support joint
distribution, every agent submits a bid, the mechanism allocates and
charges, and each pacing agent updates its multiplier.  The full per-round
record (values, multipliers, bids, allocations, payments, remaining
budgets) is kept as a Trace.

Replications run in lockstep as rows of vectorized state arrays, one
counter-based RNG substream per replication, so a batch of runs is
bit-identical to running each replication alone and is deterministic under
any worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .auctions import FIRST_PRICE, GSP, Mechanism, SingleSlot
from .errors import ConfigurationError
from .pacing import EXHAUSTION_FRACTION, AgentConfig

EPOCH_TOL = 1e-9


@dataclass(frozen=True)
class ValueModel:
    """Finite-support joint distribution over per-agent value profiles.

    Each support point is a probability and one value per agent; points may
    carry impression-type labels.  Profiles are drawn independently across
    rounds.
    """

    probs: np.ndarray
    profiles: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64).copy()
        profiles = np.atleast_2d(np.asarray(self.profiles, dtype=np.float64)).copy()
        if probs.ndim != 1 or profiles.ndim != 2 or len(probs) != len(profiles):
            raise ConfigurationError("need one probability per value profile")
        if len(probs) == 0:
            raise ConfigurationError("empty support")
        if np.any(probs < 0):
            raise ConfigurationError("negative probability")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise ConfigurationError(f"probabilities sum to {probs.sum()}, not 1")
        if np.any(profiles < 0):
            raise ConfigurationError("values must be non-negative")
        if self.labels is not None and len(self.labels) != len(probs):
            raise ConfigurationError("one label per support point")
        probs.flags.writeable = False
        profiles.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "profiles", profiles)

    @property
    def n_agents(self) -> int:
        return self.profiles.shape[1]

    @property
    def support_size(self) -> int:
        return self.profiles.shape[0]

    @property
    def value_cap(self) -> float:
        """Uniform value bound, at least 1 by the scaling convention."""
        return max(1.0, float(self.profiles.max()))

    def sample_indices(self, rng: np.random.Generator, horizon: int) -> np.ndarray:
        cum = np.cumsum(self.probs)
        u = rng.random(horizon)
        return np.minimum(
            np.searchsorted(cum, u, side="right"), self.support_size - 1
        ).astype(np.int64)


@dataclass(frozen=True)
class PacedAgent:
    """An agent running the gradient pacing algorithm.

    learning_rate and mu_cap default at simulation time to 1/sqrt(horizon)
    and value_cap/target_rate.
    """

    budget: float
    learning_rate: float | None = None
    mu_cap: float | None = None

    def __post_init__(self):
        if not self.budget > 0:
            raise ConfigurationError("budget must be positive")


@dataclass(frozen=True)
class ScriptedAgent:
    """A fixed-script opponent: a constant bid or a piecewise-constant schedule.

    schedule entries are (last_round, bid) with increasing boundaries; bids
    are clamped to the remaining budget so scripted agents also satisfy the
    ex-post budget constraint.
    """

    budget: float
    bid: float | None = None
    schedule: tuple[tuple[int, float], ...] | None = None

    def __post_init__(self):
        if not self.budget > 0:
            raise ConfigurationError("budget must be positive")
        if (self.bid is None) == (self.schedule is None):
            raise ConfigurationError("give exactly one of bid or schedule")
        if self.bid is not None and self.bid < 0:
            raise ConfigurationError("scripted bid must be non-negative")
        if self.schedule is not None:
            last = 0
            for until, bid in self.schedule:
                if until <= last or bid < 0:
                    raise ConfigurationError("bad schedule segment")
                last = until

    def bids_over(self, horizon: int) -> np.ndarray:
        if self.bid is not None:
            return np.full(horizon, float(self.bid))
        out = np.empty(horizon)
        start = 0
        for until, bid in self.schedule:
            out[start : min(until, horizon)] = bid
            start = min(until, horizon)
        if start < horizon:
            out[start:] = self.schedule[-1][1]
        return out


AgentSpec = PacedAgent | ScriptedAgent


@dataclass(frozen=True)
class SimulationConfig:
    mechanism: Mechanism
    agents: tuple[AgentSpec, ...]
    value_model: ValueModel
    horizon: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if self.horizon < 0:
            raise ConfigurationError("horizon must be non-negative")
        if len(self.agents) != self.value_model.n_agents:
            raise ConfigurationError(
                f"{len(self.agents)} agents but value model has dimension "
                f"{self.value_model.n_agents}"
            )

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def agent_config(self, k: int) -> AgentConfig:
        """Resolved pacing parameters for agent k (must be paced)."""
        spec = self.agents[k]
        if not isinstance(spec, PacedAgent):
            raise ConfigurationError(f"agent {k} is scripted")
        return AgentConfig(
            budget=spec.budget,
            horizon=self.horizon,
            learning_rate=spec.learning_rate,
            mu_cap=spec.mu_cap,
            value_cap=self.value_model.value_cap,
        )


@dataclass(frozen=True)
class Trace:
    """Per-round record of one simulation run.

    Arrays are (horizon, n_agents); multipliers are NaN for scripted agents
    and for paced agents after they stop.  remaining_budgets holds each
    agent's budget at the start of the round.  stop_rounds is the first
    round an agent could no longer bid (horizon + 1 if it never ran out).
    """

    values: np.ndarray
    multipliers: np.ndarray
    bids: np.ndarray
    allocations: np.ndarray
    payments: np.ndarray
    remaining_budgets: np.ndarray
    budgets: np.ndarray
    agent_kinds: tuple[str, ...]
    target_rates: np.ndarray
    learning_rates: np.ndarray
    mu_caps: np.ndarray
    value_cap: float
    stop_rounds: np.ndarray
    scenario_indices: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.values.shape[0]

    @property
    def n_agents(self) -> int:
        return self.values.shape[1]

    def spend(self, agent: int | None = None):
        if agent is None:
            return self.payments.sum(axis=0)
        return float(self.payments[:, agent].sum())


def _resolve_params(config: SimulationConfig):
    n = config.n_agents
    paced = np.array([isinstance(a, PacedAgent) for a in config.agents])
    budgets = np.array([a.budget for a in config.agents], dtype=np.float64)
    eps = np.full(n, np.nan)
    mu_cap = np.full(n, np.nan)
    rho = np.full(n, np.nan)
    v_cap = config.value_model.value_cap
    for k, spec in enumerate(config.agents):
        if isinstance(spec, PacedAgent) and config.horizon >= 1:
            cfg = config.agent_config(k)
            eps[k] = cfg.learning_rate
            mu_cap[k] = cfg.mu_cap
            rho[k] = cfg.target_rate
    return paced, budgets, eps, mu_cap, rho, v_cap


def _mechanism_step(mechanism: Mechanism, bids: np.ndarray):
    """Vectorized one-round outcome for a (rows, n_agents) bid matrix."""
    rows, n = bids.shape
    x = np.zeros_like(bids)
    z = np.zeros_like(bids)
    if isinstance(mechanism.feasible, SingleSlot):
        winners = np.argmax(bids, axis=1)  # first max: lowest index wins ties
        r = np.arange(rows)
        wb = bids[r, winners]
        won = wb > 0.0
        x[r, winners] = won.astype(np.float64)
        if mechanism.kind == FIRST_PRICE:
            pay = wb
        else:
            if n >= 2:
                pay = np.partition(bids, n - 2, axis=1)[:, n - 2]
            else:
                pay = np.zeros(rows)
        z[r, winners] = np.where(won, pay, 0.0)
        return x, z

    rates = np.zeros(n)
    m = len(mechanism.feasible.click_rates)
    rates[: min(m, n)] = mechanism.feasible.click_rates[: min(m, n)]
    order = np.argsort(-bids, axis=1, kind="stable")
    sorted_bids = np.take_along_axis(bids, order, axis=1)
    xs = rates[None, :] * (sorted_bids > 0.0)
    if mechanism.kind == GSP:
        nxt = np.concatenate([sorted_bids[:, 1:], np.zeros((rows, 1))], axis=1)
        zs = xs * nxt
    else:
        zs = xs * sorted_bids
    np.put_along_axis(x, order, xs, axis=1)
    np.put_along_axis(z, order, zs, axis=1)
    return x, z


def _simulate_chunk(config: SimulationConfig, seed_children: Sequence) -> list[Trace]:
    T = config.horizon
    n = config.n_agents
    rc = len(seed_children)
    paced, budgets, eps, mu_cap, rho, v_cap = _resolve_params(config)

    idx = np.empty((rc, T), dtype=np.int64)
    for r, child in enumerate(seed_children):
        rng = np.random.Generator(np.random.Philox(child))
        idx[r] = config.value_model.sample_indices(rng, T)

    script_bids = np.zeros((T, n))
    for k, spec in enumerate(config.agents):
        if isinstance(spec, ScriptedAgent):
            script_bids[:, k] = spec.bids_over(T)

    mu = np.zeros((rc, n))
    remaining = np.tile(budgets, (rc, 1))
    stopped = np.zeros((rc, n), dtype=bool)
    stop_round = np.full((rc, n), T + 1, dtype=np.int64)
    thresh = EXHAUSTION_FRACTION * budgets

    rec_v = np.empty((rc, T, n))
    rec_mu = np.empty((rc, T, n))
    rec_b = np.empty((rc, T, n))
    rec_x = np.empty((rc, T, n))
    rec_z = np.empty((rc, T, n))
    rec_rem = np.empty((rc, T, n))

    profiles = config.value_model.profiles
    paced_row = paced[None, :]
    for t in range(T):
        v = profiles[idx[:, t]]
        live = ~stopped
        bids = np.where(
            paced_row,
            np.where(live, np.minimum(v / (1.0 + mu), remaining), 0.0),
            np.minimum(script_bids[t][None, :], remaining),
        )
        x, z = _mechanism_step(config.mechanism, bids)

        rec_v[:, t] = v
        rec_mu[:, t] = np.where(paced_row & live, mu, np.nan)
        rec_b[:, t] = bids
        rec_x[:, t] = x
        rec_z[:, t] = z
        rec_rem[:, t] = remaining

        new_mu = np.clip(mu - eps * (rho - z), 0.0, mu_cap)
        mu = np.where(paced_row & live, new_mu, mu)
        remaining = remaining - z
        newly = paced_row & live & (remaining < thresh)
        stop_round[newly] = t + 2
        stopped |= newly

    kinds = tuple("paced" if p else "scripted" for p in paced)
    traces = []
    for r in range(rc):
        traces.append(
            Trace(
                values=rec_v[r].copy(),
                multipliers=rec_mu[r].copy(),
                bids=rec_b[r].copy(),
                allocations=rec_x[r].copy(),
                payments=rec_z[r].copy(),
                remaining_budgets=rec_rem[r].copy(),
                budgets=budgets.copy(),
                agent_kinds=kinds,
                target_rates=rho.copy(),
                learning_rates=eps.copy(),
                mu_caps=mu_cap.copy(),
                value_cap=v_cap,
                stop_rounds=stop_round[r].copy(),
                scenario_indices=idx[r].copy(),
            )
        )
    return traces


def run_simulation(config: SimulationConfig) -> Trace:
    """Run one seeded simulation; identical config and seed give a
    bit-identical trace."""
    return _simulate_chunk(config, [np.random.SeedSequence(config.seed)])[0]


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get("PACESIM_THREADS")
    return max(1, int(env)) if env else 1


def replicate(
    config: SimulationConfig,
    replications: int,
    reducer: Callable[[Trace, int], object] | None = None,
    chunk_size: int = 32,
    workers: int | None = None,
) -> list:
    """Run independent replications on spawned RNG substreams.

    Replication r always uses substream r of the config seed, so results
    are deterministic for any chunk size or worker count.  reducer(trace,
    rep_index) is applied per replication (traces are dropped afterwards,
    keeping memory flat); by default the traces themselves are returned.
    """
    if replications < 0:
        raise ConfigurationError("replications must be non-negative")
    children = np.random.SeedSequence(config.seed).spawn(max(replications, 1))
    chunks = [
        (i, children[i : i + chunk_size])
        for i in range(0, replications, chunk_size)
    ]
    results: list = [None] * replications

    def handle(chunk):
        start, seeds = chunk
        traces = _simulate_chunk(config, seeds)
        return start, [
            trace if reducer is None else reducer(trace, start + j)
            for j, trace in enumerate(traces)
        ]

    nworkers = _worker_count(workers)
    if nworkers == 1 or len(chunks) <= 1:
        done = map(handle, chunks)
        for start, items in done:
            results[start : start + len(items)] = items
    else:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            for start, items in pool.map(handle, chunks):
                results[start : start + len(items)] = items
    return results


# ---------------------------------------------------------------------------
# Epochs


@dataclass(frozen=True)
class Epoch:
    """Half-open round interval [start, end): multiplier zero at start,
    strictly positive strictly inside, end maximal."""

    start: int
    end: int
    agent: int

    @property
    def length(self) -> int:
        return self.end - self.start


def _live_rounds(trace: Trace, agent: int) -> int:
    return min(int(trace.stop_rounds[agent]) - 1, trace.horizon)


def extract_epochs(trace: Trace, agent: int) -> list[Epoch]:
    """Partition the agent's live rounds [1, stop) into maximal epochs."""
    if trace.agent_kinds[agent] != "paced":
        raise ConfigurationError(f"agent {agent} is scripted and has no multipliers")
    live = _live_rounds(trace, agent)
    if live == 0:
        return []
    mus = trace.multipliers[:live, agent]
    zeros = np.flatnonzero(mus == 0.0) + 1  # 1-based rounds with multiplier 0
    if len(zeros) == 0 or zeros[0] != 1:
        raise ConfigurationError("pacing multipliers must start at 0")
    bounds = np.append(zeros, live + 1)
    return [
        Epoch(int(bounds[i]), int(bounds[i + 1]), agent) for i in range(len(zeros))
    ]


@dataclass(frozen=True)
class EpochBoundReport:
    agent: int
    epochs: tuple[Epoch, ...]
    checked: tuple[bool, ...]
    slacks: tuple[float, ...]
    tol: float = EPOCH_TOL

    @property
    def n_checked(self) -> int:
        return sum(self.checked)

    @property
    def n_skipped(self) -> int:
        return len(self.epochs) - self.n_checked

    @property
    def min_slack(self) -> float:
        vals = [s for s, c in zip(self.slacks, self.checked) if c]
        return min(vals) if vals else math.inf

    @property
    def violations(self) -> list[Epoch]:
        return [
            e
            for e, s, c in zip(self.epochs, self.slacks, self.checked)
            if c and s < -self.tol
        ]

    @property
    def passed(self) -> bool:
        return not self.violations


def _epoch_bound_arrays(trace: Trace, agent: int):
    """Vectorized epoch boundaries and slacks for one agent: arrays of
    (start, end, checked, slack), where checked means the epoch ends on a
    live round so the sure inequality applies."""
    if trace.agent_kinds[agent] != "paced":
        raise ConfigurationError(f"agent {agent} is scripted and has no multipliers")
    live = _live_rounds(trace, agent)
    if live == 0:
        empty = np.empty(0)
        return empty.astype(np.int64), empty.astype(np.int64), empty.astype(bool), empty
    mus = trace.multipliers[:live, agent]
    zeros = np.flatnonzero(mus == 0.0) + 1
    if len(zeros) == 0 or zeros[0] != 1:
        raise ConfigurationError("pacing multipliers must start at 0")
    bounds = np.append(zeros, live + 1)
    starts = bounds[:-1]
    ends = bounds[1:]
    checked = ends <= live
    rho = float(trace.target_rates[agent])
    xv = trace.allocations[:, agent] * trace.values[:, agent]
    z = trace.payments[:, agent]
    cum = np.concatenate([[0.0], np.cumsum(xv)])
    totals = cum[ends - 1] - cum[starts - 1]
    needs = xv[starts - 1] - z[starts - 1] + rho * (ends - starts - 1)
    return starts, ends, checked, totals - needs


def epoch_bound_stats(trace: Trace, agent: int, tol: float = EPOCH_TOL):
    """(epochs checked, violations, min slack) without materializing epoch
    objects; the fast path for sweeping thousands of replications."""
    _starts, _ends, checked, slacks = _epoch_bound_arrays(trace, agent)
    if not checked.any():
        return 0, 0, math.inf
    used = slacks[checked]
    return int(checked.sum()), int((used < -tol).sum()), float(used.min())


def verify_epoch_value_bound(trace: Trace, agent: int) -> EpochBoundReport:
    """Check, per epoch, that the value collected is at least the first
    round's value net of its spend plus the target rate for every later
    round of the epoch.

    Epochs whose end falls on a stopped round (including the horizon's end)
    are skipped and reported as such; the inequality is a sure statement
    only while the agent is live at the epoch's right endpoint.
    """
    starts, ends, checked, slacks = _epoch_bound_arrays(trace, agent)
    epochs = tuple(
        Epoch(int(a), int(b), agent) for a, b in zip(starts, ends)
    )
    return EpochBoundReport(
        agent, epochs, tuple(bool(c) for c in checked), tuple(float(s) for s in slacks)
    )


# ---------------------------------------------------------------------------
# The sure early-stopping bound on traces


@dataclass(frozen=True)
class StoppingBoundReport:
    agent: int
    applicable: bool
    bound: int | None
    missed_rounds: int
    passed: bool


def check_stopping_bound(trace: Trace) -> list[StoppingBoundReport]:
    """Per paced agent: the number of rounds lost to budget exhaustion must
    stay within the analytic stopping bound whenever its hypotheses hold.

    The stopping time is the round on which the budget ran out (the round
    before the first unplayable one); agents who never ran out miss zero
    rounds.
    """
    reports = []
    T = trace.horizon
    v = trace.value_cap
    for k in range(trace.n_agents):
        if trace.agent_kinds[k] != "paced":
            continue
        eps = float(trace.learning_rates[k])
        cap = float(trace.mu_caps[k])
        rho = float(trace.target_rates[k])
        applicable = cap >= v / rho - 1 and eps * v <= 1
        missed = max(0, T - int(trace.stop_rounds[k]) + 1)
        if applicable:
            bound = math.ceil(cap / (eps * rho) + v / rho)
            passed = missed <= bound
        else:
            bound = None
            passed = True
        reports.append(StoppingBoundReport(k, applicable, bound, missed, passed))
    return reports


# ---------------------------------------------------------------------------
# Persistence

TRACE_COLUMNS = (
    "round",
    "agent",
    "value",
    "multiplier",
    "bid",
    "allocation",
    "payment",
    "remaining_budget",
)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_trace(trace: Trace, csv_path, envelope_path=None, config_doc=None) -> None:
    """Write the per-round CSV and (optionally) the JSON envelope.

    Floats are serialized with 17 significant digits so a round-trip
    through load_trace is bit-exact.
    """
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for t in range(trace.horizon):
            for k in range(trace.n_agents):
                w.writerow(
                    [
                        t + 1,
                        k,
                        _fmt(trace.values[t, k]),
                        _fmt(trace.multipliers[t, k]),
                        _fmt(trace.bids[t, k]),
                        _fmt(trace.allocations[t, k]),
                        _fmt(trace.payments[t, k]),
                        _fmt(trace.remaining_budgets[t, k]),
                    ]
                )
    if envelope_path is not None:
        with open(envelope_path, "w") as fh:
            json.dump(trace_envelope(trace, config_doc), fh, indent=2, sort_keys=True)
            fh.write("\n")


def trace_envelope(trace: Trace, config_doc=None) -> dict:
    """JSON-serializable envelope: agent metadata plus a spend/welfare summary."""
    liquid = [
        min(float(b), float((trace.allocations[:, k] * trace.values[:, k]).sum()))
        for k, b in enumerate(trace.budgets)
    ]
    env = {
        "horizon": trace.horizon,
        "value_cap": trace.value_cap,
        "agents": [
            {
                "kind": trace.agent_kinds[k],
                "budget": float(trace.budgets[k]),
                "target_rate": _nan_none(trace.target_rates[k]),
                "learning_rate": _nan_none(trace.learning_rates[k]),
                "mu_cap": _nan_none(trace.mu_caps[k]),
                "stop_round": int(trace.stop_rounds[k]),
            }
            for k in range(trace.n_agents)
        ],
        "summary": {
            "total_spend": [float(s) for s in trace.payments.sum(axis=0)],
            "liquid_value": liquid,
            "liquid_welfare": float(sum(liquid)),
        },
    }
    if config_doc is not None:
        env["config"] = config_doc
    return env


def _nan_none(x: float):
    x = float(x)
    return None if math.isnan(x) else x


def load_trace(csv_path, envelope_path) -> Trace:
    """Rebuild a Trace from its CSV and envelope (scenario indices are not
    persisted)."""
    with open(envelope_path) as fh:
        env = json.load(fh)
    T = env["horizon"]
    n = len(env["agents"])
    arrays = {name: np.empty((T, n)) for name in TRACE_COLUMNS[2:]}
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ConfigurationError(f"unexpected trace columns {header}")
        for row in reader:
            t = int(row[0]) - 1
            k = int(row[1])
            for name, cell in zip(TRACE_COLUMNS[2:], row[2:]):
                arrays[name][t, k] = float(cell)

    def meta(field, default=np.nan):
        return np.array(
            [a[field] if a[field] is not None else default for a in env["agents"]],
            dtype=np.float64,
        )

    return Trace(
        values=arrays["value"],
        multipliers=arrays["multiplier"],
        bids=arrays["bid"],
        allocations=arrays["allocation"],
        payments=arrays["payment"],
        remaining_budgets=arrays["remaining_budget"],
        budgets=meta("budget"),
        agent_kinds=tuple(a["kind"] for a in env["agents"]),
        target_rates=meta("target_rate"),
        learning_rates=meta("learning_rate"),
        mu_caps=meta("mu_cap"),
        value_cap=env["value_cap"],
        stop_rounds=np.array([a["stop_round"] for a in env["agents"]], dtype=np.int64),
    )
