"""Single-round core auction mechanisms over divisible-good feasible sets.

First-price and second-price auctions run over a single-slot simplex; the
generalized second-price (GSP) auction runs over a polymatroid induced by
non-increasing click rates.  Everything here is deterministic: ties in bids
are broken toward the lowest agent index, and a fractional allocation is a
deterministic fraction of the good, not a lottery.

Besides the mechanisms themselves, the module ships predicate checkers for
the three structural properties the rest of the package leans on:
individual rationality (payment at most declared welfare), the core
condition (no coalition gains by renegotiating with the seller), and
monotone bang-per-buck (raising a bid costs at least the old bid per unit
of extra allocation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ConfigurationError, PreconditionError

#: Tolerance for every deterministic predicate check in money units.
#: Chosen for double precision sums over horizons up to 1e6 rounds.
PREDICATE_TOL = 1e-9

FIRST_PRICE = "first_price"
SECOND_PRICE = "second_price"
GSP = "gsp"


@dataclass(frozen=True)
class SingleSlot:
    """One divisible slot per round: profiles with x_k in [0,1] and sum <= 1."""

    def contains(self, profile: Sequence[float], tol: float = PREDICATE_TOL) -> bool:
        xs = [float(x) for x in profile]
        if any(x < -tol or x > 1 + tol for x in xs):
            return False
        return sum(xs) <= 1 + tol


@dataclass(frozen=True)
class Polymatroid:
    """Multi-slot feasible set induced by non-increasing click rates.

    A profile is feasible when, for every subset of agents, its total
    allocation is at most the sum of the largest click rates it could
    occupy; rates beyond the slot count contribute zero.  Sorting the
    profile reduces the subset test to prefix sums.
    """

    click_rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(a) for a in self.click_rates)
        object.__setattr__(self, "click_rates", rates)
        if not rates:
            raise ConfigurationError("polymatroid needs at least one click rate")
        if rates[0] > 1 + 1e-12 or min(rates) < -1e-12:
            raise ConfigurationError("click rates must lie in [0, 1]")
        if any(b > a + 1e-12 for a, b in zip(rates, rates[1:])):
            raise ConfigurationError("click rates must be non-increasing")

    def contains(self, profile: Sequence[float], tol: float = PREDICATE_TOL) -> bool:
        xs = sorted((float(x) for x in profile), reverse=True)
        if xs and xs[-1] < -tol:
            return False
        cap = 0.0
        total = 0.0
        for j, x in enumerate(xs):
            cap += self.click_rates[j] if j < len(self.click_rates) else 0.0
            total += x
            if total > cap + tol:
                return False
        return True


FeasibleSet = SingleSlot | Polymatroid


@dataclass(frozen=True)
class Mechanism:
    """An auction rule together with the feasible set it allocates over."""

    kind: str
    feasible: FeasibleSet

    def __post_init__(self):
        if self.kind not in (FIRST_PRICE, SECOND_PRICE, GSP):
            raise ConfigurationError(f"unknown mechanism kind {self.kind!r}")
        if self.kind == SECOND_PRICE and not isinstance(self.feasible, SingleSlot):
            raise ConfigurationError("second-price requires a single-slot feasible set")
        if self.kind == GSP and not isinstance(self.feasible, Polymatroid):
            raise ConfigurationError("GSP requires a polymatroid feasible set")


def first_price(feasible: FeasibleSet | None = None) -> Mechanism:
    return Mechanism(FIRST_PRICE, feasible if feasible is not None else SingleSlot())


def second_price() -> Mechanism:
    return Mechanism(SECOND_PRICE, SingleSlot())


def gsp(click_rates: Iterable[float]) -> Mechanism:
    return Mechanism(GSP, Polymatroid(tuple(click_rates)))


@dataclass(frozen=True)
class AuctionOutcome:
    allocations: tuple[float, ...]
    payments: tuple[float, ...]


def _clean_bids(bids: Sequence[float]) -> list[float]:
    bs = [float(b) for b in bids]
    if not bs:
        raise ConfigurationError("empty bid profile")
    if any(b < 0 for b in bs):
        raise ConfigurationError("bids must be non-negative")
    return bs


def allocate(mechanism: Mechanism, bids: Sequence[float]) -> AuctionOutcome:
    """Run one round of the auction on a bid profile.

    First-price and second-price allocate the whole slot to the highest
    bidder; GSP (and first-price over a polymatroid) assigns click rates
    greedily by bid.  Agents bidding exactly zero never win anything, even
    when slots remain.
    """
    bs = _clean_bids(bids)
    n = len(bs)
    if isinstance(mechanism.feasible, SingleSlot):
        winner = 0
        for k in range(1, n):
            if bs[k] > bs[winner]:
                winner = k
        x = [0.0] * n
        p = [0.0] * n
        if bs[winner] > 0:
            x[winner] = 1.0
            if mechanism.kind == FIRST_PRICE:
                p[winner] = bs[winner]
            else:
                p[winner] = max((bs[k] for k in range(n) if k != winner), default=0.0)
        return AuctionOutcome(tuple(x), tuple(p))

    order = sorted(range(n), key=lambda k: (-bs[k], k))
    rates = mechanism.feasible.click_rates
    x = [0.0] * n
    p = [0.0] * n
    for j, k in enumerate(order):
        rate = rates[j] if j < len(rates) else 0.0
        if bs[k] <= 0 or rate <= 0:
            continue
        x[k] = rate
        if mechanism.kind == GSP:
            nxt = bs[order[j + 1]] if j + 1 < n else 0.0
            p[k] = rate * nxt
        else:
            p[k] = rate * bs[k]
    return AuctionOutcome(tuple(x), tuple(p))


def check_ir(outcome: AuctionOutcome, bids: Sequence[float], tol: float = PREDICATE_TOL) -> bool:
    """Payment never exceeds declared welfare: p_k <= b_k * x_k for every k."""
    bs = _clean_bids(bids)
    if len(bs) != len(outcome.allocations) or len(bs) != len(outcome.payments):
        raise ConfigurationError("outcome and bid profile dimensions differ")
    return all(
        pk <= bk * xk + tol
        for pk, bk, xk in zip(outcome.payments, bs, outcome.allocations)
    )


def check_core(
    mechanism: Mechanism,
    bids: Sequence[float],
    subset: Iterable[int],
    deviation: Sequence[float],
    tol: float = PREDICATE_TOL,
) -> bool:
    """Check the coalition condition for one candidate deviation.

    The seller plus the agents in `subset` must weakly prefer the auction
    outcome to switching the coalition onto the allocation `deviation`:
    revenue from outsiders plus the coalition's declared welfare under the
    auction is at least the coalition's declared welfare under the
    deviation.
    """
    bs = _clean_bids(bids)
    ys = [float(y) for y in deviation]
    if len(ys) != len(bs):
        raise ConfigurationError("deviation and bid profile dimensions differ")
    members = set(subset)
    if any(k < 0 or k >= len(bs) for k in members):
        raise ConfigurationError("subset index out of range")
    if not mechanism.feasible.contains(ys):
        raise PreconditionError("deviation lies outside the feasible set")
    out = allocate(mechanism, bs)
    lhs = sum(out.payments[k] for k in range(len(bs)) if k not in members)
    lhs += sum(bs[k] * out.allocations[k] for k in members)
    rhs = sum(bs[k] * ys[k] for k in members)
    return lhs >= rhs - tol


def check_mbb(
    mechanism: Mechanism,
    agent: int,
    b_low: float,
    b_high: float,
    others: Sequence[float],
    tol: float = PREDICATE_TOL,
) -> bool:
    """Monotone bang-per-buck between two bids of one agent.

    With the opponents' bids fixed, moving the agent's bid up from b_low to
    b_high must raise her payment by at least b_low per unit of additional
    allocation.
    """
    if not (0 <= b_low <= b_high):
        raise PreconditionError("need 0 <= b_low <= b_high")
    lo = _insert_bid(others, agent, b_low)
    hi = _insert_bid(others, agent, b_high)
    out_lo = allocate(mechanism, lo)
    out_hi = allocate(mechanism, hi)
    dp = out_hi.payments[agent] - out_lo.payments[agent]
    dx = out_hi.allocations[agent] - out_lo.allocations[agent]
    return dp >= b_low * dx - tol


def _insert_bid(others: Sequence[float], agent: int, bid: float) -> list[float]:
    profile = [float(b) for b in others]
    if not 0 <= agent <= len(profile):
        raise ConfigurationError("agent index out of range")
    profile.insert(agent, float(bid))
    return profile
