"""Gradient-based budget pacing for a single bidding agent.

An agent shades her bid to value/(1 + multiplier) and nudges the multiplier
after every round by the learning rate times the gap between realized spend
and the per-round budget target, projected back onto [0, mu_cap].  The
module also ships the sure bound on how early the agent can run out of
budget, and a conformance checker for the wider family of pacing policies
the welfare guarantee actually covers (no overbidding, no unnecessary
pacing, and the same multiplier recurrence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Protocol, Sequence

from .errors import (
    BoundInapplicableError,
    ConfigurationError,
    InvariantViolationError,
    StoppedAgentError,
)

#: An agent is treated as out of budget once the remainder drops below this
#: fraction of the starting budget; avoids bidding dust amounts forever.
EXHAUSTION_FRACTION = 1e-12


@dataclass(frozen=True)
class AgentConfig:
    """Parameters of one pacing agent.

    learning_rate defaults to 1/sqrt(horizon) and mu_cap to
    value_cap/target_rate; both defaults satisfy the hypotheses of the
    early-stopping bound whenever value_cap <= sqrt(horizon).
    """

    budget: float
    horizon: int
    learning_rate: float | None = None
    mu_cap: float | None = None
    value_cap: float = 1.0

    def __post_init__(self):
        if not self.budget > 0:
            raise ConfigurationError("budget must be positive")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigurationError("horizon must be a positive integer")
        if self.value_cap < 1:
            raise ConfigurationError("value_cap must be at least 1 (rescale values)")
        if self.learning_rate is None:
            object.__setattr__(self, "learning_rate", 1.0 / math.sqrt(self.horizon))
        if self.mu_cap is None:
            object.__setattr__(self, "mu_cap", self.value_cap / self.target_rate)
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.mu_cap < 0:
            raise ConfigurationError("mu_cap must be non-negative")

    @property
    def target_rate(self) -> float:
        """Per-round spend target: budget / horizon."""
        return self.budget / self.horizon

    @property
    def stopping_bound_applicable(self) -> bool:
        """Whether the early-stopping bound's hypotheses hold for this config."""
        return (
            self.mu_cap >= self.value_cap / self.target_rate - 1
            and self.learning_rate * self.value_cap <= 1
        )


@dataclass(frozen=True)
class PacingState:
    """Multiplier, remaining budget, and round counter of one agent.

    A stopped state is terminal; `update` and `compute_bid` refuse to touch
    it.  The multiplier always lies in [0, mu_cap] while the agent is live.
    """

    config: AgentConfig
    multiplier: float
    remaining_budget: float
    round: int
    stopped: bool = False


def init_state(config: AgentConfig) -> PacingState:
    """Fresh state: zero multiplier, full budget, round one."""
    return PacingState(config, 0.0, float(config.budget), 1)


def compute_bid(state: PacingState, value: float) -> float:
    """Bid value/(1 + multiplier), clamped to the remaining budget.

    Never exceeds the value (the multiplier is non-negative), so a paced
    agent cannot overbid.
    """
    if state.stopped:
        raise StoppedAgentError("stopped agent cannot bid; caller should bid 0")
    if value < 0 or value > state.config.value_cap:
        raise ConfigurationError("value outside [0, value_cap]")
    return min(value / (1.0 + state.multiplier), state.remaining_budget)


def update(state: PacingState, spend: float) -> PacingState:
    """Advance one round after observing the realized spend.

    The multiplier moves by learning_rate * (spend - target_rate) and is
    projected onto [0, mu_cap]; the budget decreases by the spend.  The
    state becomes stopped when the budget is (numerically) exhausted or the
    horizon has elapsed.
    """
    if state.stopped:
        raise StoppedAgentError("stopped agent state never changes")
    cfg = state.config
    if spend < 0 or spend > state.remaining_budget:
        raise InvariantViolationError(
            f"spend {spend} outside [0, remaining {state.remaining_budget}]; "
            "auction-side bug"
        )
    mu = state.multiplier - cfg.learning_rate * (cfg.target_rate - spend)
    mu = min(max(mu, 0.0), cfg.mu_cap)
    remaining = state.remaining_budget - spend
    rnd = state.round + 1
    stopped = remaining < EXHAUSTION_FRACTION * cfg.budget or rnd > cfg.horizon
    return replace(
        state, multiplier=mu, remaining_budget=remaining, round=rnd, stopped=stopped
    )


def stopping_time_bound(config: AgentConfig) -> int:
    """Sure bound on how many rounds before the horizon the agent can stop.

    Requires mu_cap >= value_cap/target_rate - 1 and
    learning_rate * value_cap <= 1; under those hypotheses the number of
    missed rounds never exceeds
    ceil(mu_cap/(learning_rate * target_rate) + value_cap/target_rate).
    """
    if not config.stopping_bound_applicable:
        raise BoundInapplicableError(
            "need mu_cap >= value_cap/target_rate - 1 and "
            "learning_rate * value_cap <= 1"
        )
    rho = config.target_rate
    return math.ceil(
        config.mu_cap / (config.learning_rate * rho) + config.value_cap / rho
    )


class BiddingPolicy(Protocol):
    """Minimal agent interface: observe a value, emit a bid; observe spend.

    Implementations must expose the internal pacing multiplier so recorded
    traces can be conformance-checked.
    """

    @property
    def multiplier(self) -> float: ...

    def bid(self, value: float) -> float: ...

    def observe(self, spend: float) -> None: ...


class PacingPolicy:
    """Reference implementation of the agent interface using PacingState."""

    def __init__(self, config: AgentConfig):
        self.state = init_state(config)

    @property
    def multiplier(self) -> float:
        return self.state.multiplier

    @property
    def stopped(self) -> bool:
        return self.state.stopped

    def bid(self, value: float) -> float:
        if self.state.stopped:
            return 0.0
        return compute_bid(self.state, value)

    def observe(self, spend: float) -> None:
        if not self.state.stopped:
            self.state = update(self.state, spend)


class ConstantBid:
    """Scripted opponent bidding a fixed amount, clamped to its budget."""

    def __init__(self, bid: float, budget: float = math.inf):
        if bid < 0:
            raise ConfigurationError("scripted bid must be non-negative")
        self.constant = float(bid)
        self.remaining = float(budget)

    @property
    def multiplier(self) -> float:
        return math.nan

    def bid(self, value: float) -> float:
        return min(self.constant, self.remaining)

    def observe(self, spend: float) -> None:
        self.remaining -= spend


class ScheduleBid:
    """Scripted opponent following a piecewise-constant bid schedule.

    segments is a sequence of (last_round, bid) pairs with strictly
    increasing round boundaries; the final segment must reach the horizon.
    """

    def __init__(self, segments: Sequence[tuple[int, float]], budget: float = math.inf):
        if not segments:
            raise ConfigurationError("empty bid schedule")
        last = 0
        for until, bid in segments:
            if until <= last:
                raise ConfigurationError("schedule boundaries must increase")
            if bid < 0:
                raise ConfigurationError("scripted bid must be non-negative")
            last = until
        self.segments = [(int(u), float(b)) for u, b in segments]
        self.remaining = float(budget)
        self.round = 1

    @property
    def multiplier(self) -> float:
        return math.nan

    def bid_at(self, round_index: int) -> float:
        for until, bid in self.segments:
            if round_index <= until:
                return bid
        return self.segments[-1][1]

    def bid(self, value: float) -> float:
        return min(self.bid_at(self.round), self.remaining)

    def observe(self, spend: float) -> None:
        self.remaining -= spend
        self.round += 1


@dataclass(frozen=True)
class ConformanceReport:
    no_overbidding: bool
    no_unnecessary_pacing: bool
    recurrence: bool
    first_violation: str | None

    @property
    def conformant(self) -> bool:
        return self.no_overbidding and self.no_unnecessary_pacing and self.recurrence


def check_generalized_pacing(
    values: Sequence[float],
    bids: Sequence[float],
    spends: Sequence[float],
    multipliers: Sequence[float],
    config: AgentConfig,
    tol: float = 1e-9,
) -> ConformanceReport:
    """Validate a recorded trace against the generalized-pacing contract.

    multipliers must have one more entry than the other sequences (the
    post-update multiplier after the last recorded round).  The recurrence
    check is bit-exact: replaying the spends through the projected update
    must reproduce the recorded multipliers.
    """
    T = len(values)
    if not (len(bids) == len(spends) == T and len(multipliers) == T + 1):
        raise ConfigurationError("trace sequences have inconsistent lengths")
    if multipliers[0] != 0.0:
        return ConformanceReport(True, True, False, "multiplier must start at 0")

    no_over = True
    no_unnec = True
    recurrence = True
    first = None
    remaining = float(config.budget)
    rho = config.target_rate
    for t in range(T):
        if bids[t] > values[t] + tol:
            no_over = False
            first = first or f"round {t + 1}: bid {bids[t]} exceeds value {values[t]}"
        if multipliers[t] == 0.0:
            expected = min(values[t], remaining)
            if abs(bids[t] - expected) > tol:
                no_unnec = False
                first = first or (
                    f"round {t + 1}: multiplier 0 but bid {bids[t]} != {expected}"
                )
        mu_next = multipliers[t] - config.learning_rate * (rho - spends[t])
        mu_next = min(max(mu_next, 0.0), config.mu_cap)
        if multipliers[t + 1] != mu_next:
            recurrence = False
            first = first or (
                f"round {t + 1}: recorded multiplier {multipliers[t + 1]} "
                f"!= recurrence value {mu_next}"
            )
        remaining -= spends[t]
    return ConformanceReport(no_over, no_unnec, recurrence, first)
