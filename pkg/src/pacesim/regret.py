"""Single-agent regret analysis against the perfect pacing sequence.

The agent faces, each round, a joint finite-support distribution over her
own value and the competing bids.  From that distribution the module
computes the exact expected spend Z and expected value V as functions of
the pacing multiplier, the perfect multiplier where expected spend equals
the target rate, the convex surrogate objective the pacing update descends
(target_rate * mu minus the integral of Z), the throttled value curve W,
and finally the dynamic regret of a simulated pacing run together with the
analytic right-hand sides it should stay under.

Raw finite-support environments make Z a step function of the multiplier;
adding uniform noise of width eta to every competing bid makes it
continuous and Lipschitz, and all noise integrals are evaluated in closed
form (piecewise Gauss-Legendre, exact for the piecewise-polynomial win
probabilities involved).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .auctions import (
    FIRST_PRICE,
    GSP,
    SECOND_PRICE,
    Mechanism,
    SingleSlot,
    allocate,
)
from .constants import REGRET_BOUND_CONSTANT
from .errors import ConfigurationError, PreconditionError, SmoothingRequiredError
from .pacing import EXHAUSTION_FRACTION

BISECTION_TOL = 1e-9
BISECTION_MAX_ITER = 200
QUADRATURE_TOL = 1e-8

#: Default bid-noise width as a fraction of the value cap.
DEFAULT_SMOOTHING_FRACTION = 0.05


class _NoisedMax:
    """Distribution of the largest competing bid after uniform noise.

    Competing bids d_j each get independent U[0, eta] noise; the CDF of the
    max is a piecewise polynomial of degree at most J between the edges
    d_j and d_j + eta, so its integral is evaluated exactly by fixed-order
    Gauss-Legendre per piece.
    """

    def __init__(self, comp: np.ndarray, eta: float):
        self.comp = comp
        self.eta = eta
        self.dmax = float(comp.max())
        edges = np.unique(np.concatenate([comp, comp + eta]))
        self.pts = edges[edges >= self.dmax - 1e-15]
        nodes, weights = np.polynomial.legendre.leggauss(len(comp) // 2 + 1)
        self._gl = (nodes, weights)
        self.cum = np.zeros(len(self.pts))
        for i in range(len(self.pts) - 1):
            piece = self._gl_piece(self.pts[i], np.array([self.pts[i + 1]]))
            self.cum[i + 1] = self.cum[i] + piece[0]

    def cdf(self, u: np.ndarray) -> np.ndarray:
        g = np.clip((u[..., None] - self.comp) / self.eta, 0.0, 1.0)
        return g.prod(axis=-1)

    def _gl_piece(self, lo: float, b: np.ndarray) -> np.ndarray:
        nodes, weights = self._gl
        half = (b - lo) / 2.0
        pts = lo + half[:, None] * (nodes[None, :] + 1.0)
        return half * (self.cdf(pts) * weights[None, :]).sum(axis=1)

    def integral_cdf(self, b: np.ndarray) -> np.ndarray:
        out = np.zeros_like(b)
        inside = b > self.pts[0]
        if not np.any(inside):
            return out
        bi = b[inside]
        seg = np.minimum(np.searchsorted(self.pts, bi, side="right") - 1, len(self.pts) - 1)
        lo = self.pts[seg]
        partial = np.where(
            seg == len(self.pts) - 1,
            bi - lo,  # CDF is 1 beyond the last edge
            self._gl_piece_varlo(lo, bi),
        )
        out[inside] = self.cum[seg] + partial
        return out

    def _gl_piece_varlo(self, lo: np.ndarray, b: np.ndarray) -> np.ndarray:
        nodes, weights = self._gl
        half = (b - lo) / 2.0
        pts = lo[:, None] + half[:, None] * (nodes[None, :] + 1.0)
        return half * (self.cdf(pts) * weights[None, :]).sum(axis=1)

    def expected_below(self, b: np.ndarray) -> np.ndarray:
        """E[max 1{max < b}] = b F(b) - integral of F up to b."""
        return b * self.cdf(b) - self.integral_cdf(b)


@dataclass(frozen=True)
class EnvironmentStep:
    """One round's environment: joint atoms over (own value, competing bids).

    eta > 0 adds independent U[0, eta] noise to every competing bid, which
    smooths the expected-spend curve; it is supported for single-slot
    first-price and second-price mechanisms (GSP curves are exact but
    unsmoothed).  agent_index fixes deterministic tie-breaking at eta = 0.
    """

    mechanism: Mechanism
    probs: np.ndarray
    values: np.ndarray
    competing_bids: np.ndarray
    eta: float = 0.0
    agent_index: int = 0

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64).copy()
        values = np.asarray(self.values, dtype=np.float64).copy()
        comp = np.atleast_2d(np.asarray(self.competing_bids, dtype=np.float64)).copy()
        if len(values) != len(probs):
            raise ConfigurationError("one value per atom required")
        if comp.shape[0] == 1 and len(probs) > 1 and comp.size == 0:
            comp = np.zeros((len(probs), 0))
        if comp.shape[0] != len(probs):
            comp = np.broadcast_to(comp, (len(probs), comp.shape[1])).copy()
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ConfigurationError("atom probabilities must sum to 1")
        if np.any(values < 0) or np.any(comp < 0):
            raise ConfigurationError("values and bids must be non-negative")
        if self.eta < 0:
            raise ConfigurationError("noise width must be non-negative")
        if self.eta > 0 and not (
            isinstance(self.mechanism.feasible, SingleSlot)
            and self.mechanism.kind in (FIRST_PRICE, SECOND_PRICE)
        ):
            raise ConfigurationError(
                "bid-noise smoothing is supported for single-slot "
                "first-price and second-price only"
            )
        n_opp = comp.shape[1]
        if not 0 <= self.agent_index <= n_opp:
            raise ConfigurationError("agent_index out of range")
        for arr in (probs, values, comp):
            arr.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "competing_bids", comp)
        object.__setattr__(self, "_noised", {})

    @property
    def n_atoms(self) -> int:
        return len(self.probs)

    @property
    def n_opponents(self) -> int:
        return self.competing_bids.shape[1]

    @property
    def value_cap(self) -> float:
        return max(1.0, float(self.values.max(initial=0.0)))

    def _noised_max(self, s: int) -> _NoisedMax:
        cache = self.__dict__.get("_noised") or {}
        if s not in cache:
            cache[s] = _NoisedMax(self.competing_bids[s], self.eta)
            object.__setattr__(self, "_noised", cache)
        return cache[s]

    def spend_value(self, mu) -> tuple[np.ndarray, np.ndarray]:
        """Exact expected payment and expected value at each multiplier."""
        mu_arr = np.atleast_1d(np.asarray(mu, dtype=np.float64))
        if np.any(mu_arr < 0):
            raise PreconditionError("multipliers must be non-negative")
        if self.eta > 0:
            z, v = self._curves_noised(mu_arr)
        else:
            z, v = self._curves_exact(mu_arr)
        return z, v

    def spend(self, mu):
        return self.spend_value(mu)[0]

    def value(self, mu):
        return self.spend_value(mu)[1]

    def _curves_noised(self, mu_arr: np.ndarray):
        bids = self.values[:, None] / (1.0 + mu_arr[None, :])  # (S, M)
        if self.n_opponents == 0:
            win = (bids > 0).astype(np.float64)
        else:
            g = np.clip(
                (bids[:, :, None] - self.competing_bids[:, None, :]) / self.eta,
                0.0,
                1.0,
            )
            win = g.prod(axis=2) * (bids > 0)
        v = (self.probs[:, None] * self.values[:, None] * win).sum(axis=0)
        if self.mechanism.kind == FIRST_PRICE:
            z = (self.probs[:, None] * bids * win).sum(axis=0)
        else:
            z = np.zeros_like(mu_arr)
            if self.n_opponents > 0:
                for s in range(self.n_atoms):
                    pay = self._noised_max(s).expected_below(bids[s])
                    z += self.probs[s] * pay * (bids[s] > 0)
        return z, v

    def _curves_exact(self, mu_arr: np.ndarray):
        z = np.zeros_like(mu_arr)
        v = np.zeros_like(mu_arr)
        for s in range(self.n_atoms):
            comp = list(self.competing_bids[s])
            for i, m in enumerate(mu_arr):
                bid = self.values[s] / (1.0 + m)
                profile = comp.copy()
                profile.insert(self.agent_index, bid)
                out = allocate(self.mechanism, profile)
                z[i] += self.probs[s] * out.payments[self.agent_index]
                v[i] += self.probs[s] * self.values[s] * out.allocations[self.agent_index]
        return z, v

    def curve_breakpoints(self, mu_max: float) -> np.ndarray:
        """Multipliers where the spend curve can kink or jump: each bid
        crossing of a competing-bid edge."""
        edges = [self.competing_bids]
        if self.eta > 0:
            edges.append(self.competing_bids + self.eta)
        pts = []
        for edge in edges:
            with np.errstate(divide="ignore"):
                m = self.values[:, None] / np.where(edge > 0, edge, np.inf) - 1.0
            pts.append(m[(m > 0) & (m < mu_max)])
        out = np.unique(np.concatenate(pts)) if pts else np.empty(0)
        return out

    def draw(self, rng: np.random.Generator, rounds: int, replications: int):
        """Sample (values, noised competing bids) arrays of shape
        (replications, rounds[, opponents])."""
        cum = np.cumsum(self.probs)
        u = rng.random((replications, rounds))
        idx = np.minimum(np.searchsorted(cum, u.ravel(), side="right"), self.n_atoms - 1)
        idx = idx.reshape(replications, rounds)
        vals = self.values[idx]
        comp = self.competing_bids[idx]
        if self.eta > 0 and self.n_opponents > 0:
            comp = comp + self.eta * rng.random(comp.shape)
        return vals, comp


def expected_curves(env: EnvironmentStep, mu):
    """Expected (payment, value) at multiplier mu; scalars in, scalars out."""
    z, v = env.spend_value(mu)
    if np.isscalar(mu) or np.ndim(mu) == 0:
        return float(z[0]), float(v[0])
    return z, v


def uniform_opponent_env(
    mechanism_kind: str = FIRST_PRICE,
    value: float = 1.0,
    low: float = 0.0,
    width: float = 1.0,
    agent_index: int = 0,
) -> EnvironmentStep:
    """Single-slot environment against one opponent bidding low + U[0, width]."""
    mech = Mechanism(mechanism_kind, SingleSlot())
    return EnvironmentStep(
        mechanism=mech,
        probs=[1.0],
        values=[value],
        competing_bids=[[low]],
        eta=width,
        agent_index=agent_index,
    )


# ---------------------------------------------------------------------------
# Perfect pacing multipliers


def perfect_multiplier(
    env: EnvironmentStep,
    rho: float,
    mu_cap: float,
    tol: float = BISECTION_TOL,
) -> float:
    """Bisect the non-increasing spend curve for Z(mu) = rho on [0, mu_cap].

    Returns 0 when even unshaded bidding spends below the target.  A step
    discontinuity at the root cannot meet the residual tolerance, in which
    case the caller is told to smooth the environment.
    """
    if rho <= 0:
        raise PreconditionError("target rate must be positive")
    if mu_cap < env.value_cap / rho:
        raise PreconditionError("need mu_cap >= value_cap / rho")
    z0 = float(env.spend(np.array([0.0]))[0])
    if z0 < rho:
        return 0.0
    if abs(z0 - rho) <= tol:
        return 0.0
    lo, hi = 0.0, float(mu_cap)
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        zm = float(env.spend(np.array([mid]))[0])
        if abs(zm - rho) <= tol:
            return mid
        if zm > rho:
            lo = mid
        else:
            hi = mid
    raise SmoothingRequiredError(
        f"spend residual {zm - rho:+.3e} after bisection; "
        "the curve is discontinuous at the root - add bid noise"
    )


@dataclass(frozen=True)
class PerfectPacingSequence:
    """Per-round perfect multipliers, their path length, and spend residuals."""

    multipliers: np.ndarray
    residuals: np.ndarray

    @property
    def path_length(self) -> float:
        return float(np.abs(np.diff(self.multipliers)).sum())


def perfect_sequence(
    envs: Sequence[EnvironmentStep],
    rho: float,
    mu_cap: float,
    tol: float = BISECTION_TOL,
) -> PerfectPacingSequence:
    """Perfect multiplier per round; repeated env objects are solved once."""
    cache: dict[int, float] = {}
    mus = np.empty(len(envs))
    res = np.empty(len(envs))
    for t, env in enumerate(envs):
        key = id(env)
        if key not in cache:
            cache[key] = perfect_multiplier(env, rho, mu_cap, tol)
        mus[t] = cache[key]
        res[t] = abs(float(env.spend(np.array([mus[t]]))[0]) - rho)
    return PerfectPacingSequence(mus, res)


# ---------------------------------------------------------------------------
# The surrogate objective and throttled value curve


def _simpson_segments(f, lo: np.ndarray, hi: np.ndarray, tol: float) -> np.ndarray:
    """Adaptive Simpson integral of f over each [lo_i, hi_i], vectorized
    across segments; per-segment tolerance is allocated by width."""
    k = len(lo)
    total = np.zeros(k)
    if k == 0:
        return total
    width = hi - lo
    span = float(width.sum())
    if span <= 0:
        return total
    a, b = lo.copy(), hi.copy()
    owner = np.arange(k)
    seg_tol = tol * width / span
    depth = np.zeros(k, dtype=np.int64)
    while len(a):
        m = 0.5 * (a + b)
        m1 = 0.5 * (a + m)
        m2 = 0.5 * (m + b)
        vals = f(np.concatenate([a, m1, m, m2, b]))
        fa, f1, fm, f2, fb = np.split(vals, 5)
        s1 = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
        s2 = (m - a) / 6.0 * (fa + 4.0 * f1 + fm) + (b - m) / 6.0 * (fm + 4.0 * f2 + fb)
        err = np.abs(s2 - s1)
        done = (err <= 15.0 * seg_tol) | (depth >= 28) | (b - a < 1e-14)
        np.add.at(total, owner[done], s2[done] + (s2[done] - s1[done]) / 15.0)
        keep = ~done
        a = np.concatenate([a[keep], m[keep]])
        b = np.concatenate([m[keep], b[keep]])
        owner = np.concatenate([owner[keep], owner[keep]])
        seg_tol = np.concatenate([seg_tol[keep] / 2.0, seg_tol[keep] / 2.0])
        depth = np.concatenate([depth[keep] + 1, depth[keep] + 1])
    return total


def _spend_integrals(env: EnvironmentStep, pts: np.ndarray, tol: float) -> np.ndarray:
    """Cumulative integral of the spend curve from 0 to each point of the
    ascending grid pts (pts[0] must be 0)."""
    inner = env.curve_breakpoints(float(pts[-1])) if len(pts) else np.empty(0)
    grid = np.unique(np.concatenate([pts, inner]))
    segs = _simpson_segments(env.spend, grid[:-1], grid[1:], tol)
    cum = np.concatenate([[0.0], np.cumsum(segs)])
    return cum[np.searchsorted(grid, pts)]


def surrogate_objective(
    env: EnvironmentStep, rho: float, mu: float, tol: float = QUADRATURE_TOL
) -> float:
    """The convex surrogate rho*mu - integral of the spend curve on [0, mu].

    Its derivative is rho - Z(mu), which is exactly the expected drift of
    the pacing update, so the pacing algorithm is projected SGD on this
    objective.
    """
    if mu < 0:
        raise PreconditionError("mu must be non-negative")
    if mu == 0:
        return 0.0
    cum = _spend_integrals(env, np.array([0.0, float(mu)]), tol)
    return rho * mu - float(cum[1])


def objective_values(
    env: EnvironmentStep, rho: float, mus: np.ndarray, tol: float = QUADRATURE_TOL
) -> np.ndarray:
    """Surrogate objective at many multipliers, sharing one cumulative
    integration pass along the sorted grid."""
    mus = np.asarray(mus, dtype=np.float64)
    if np.any(mus < 0):
        raise PreconditionError("multipliers must be non-negative")
    uniq, inverse = np.unique(mus, return_inverse=True)
    grid = uniq if uniq[0] == 0.0 else np.concatenate([[0.0], uniq])
    cum = _spend_integrals(env, grid, tol)
    h = rho * grid - cum
    offset = 0 if uniq[0] == 0.0 else 1
    return h[inverse + offset].reshape(mus.shape)


def throttled_value_curve(env: EnvironmentStep, rho: float, mu) -> float | np.ndarray:
    """Throttled per-round value: V when spending under the target rate,
    otherwise V scaled by rho/Z (the pace at which budget would actually
    sustain the rounds)."""
    z, v = env.spend_value(mu)
    w = np.where(z < rho, v, np.where(z > 0, v * (rho / np.where(z > 0, z, 1.0)), v))
    if np.isscalar(mu) or np.ndim(mu) == 0:
        return float(w[0])
    return w


@dataclass(frozen=True)
class SmoothingSpec:
    """Noise width plus the measured Lipschitz constant and spend floors of
    the smoothed curve; the relative floor is against expected value over
    the value cap."""

    eta: float
    lipschitz: float
    floor_absolute: float
    floor_relative: float


def measure_smoothing(
    env_or_envs, mu_cap: float, grid_points: int = 2001
) -> SmoothingSpec:
    envs = [env_or_envs] if isinstance(env_or_envs, EnvironmentStep) else list(env_or_envs)
    seen: dict[int, tuple[float, float, float]] = {}
    lam = 0.0
    floor_abs = math.inf
    floor_rel = math.inf
    eta = 0.0
    for env in envs:
        key = id(env)
        if key not in seen:
            mus = np.linspace(0.0, mu_cap, grid_points)
            z, v = env.spend_value(mus)
            slopes = np.abs(np.diff(z)) / np.diff(mus)
            rel = z[0] * env.value_cap / v[0] if v[0] > 0 else math.inf
            seen[key] = (float(slopes.max()), float(z[0]), float(rel))
        s, f, r = seen[key]
        lam = max(lam, s)
        floor_abs = min(floor_abs, f)
        floor_rel = min(floor_rel, r)
        eta = max(eta, env.eta)
    return SmoothingSpec(eta, lam, floor_abs, floor_rel)


# ---------------------------------------------------------------------------
# Single-agent pacing simulation


@dataclass(frozen=True)
class PacingRun:
    """Trace of one pacing agent against an environment sequence.

    multipliers are NaN from the stop round on; stop_round is horizon + 1
    when the budget never ran out.
    """

    multipliers: np.ndarray
    values: np.ndarray
    bids: np.ndarray
    allocations: np.ndarray
    payments: np.ndarray
    stop_round: int
    budget: float
    learning_rate: float
    mu_cap: float

    @property
    def horizon(self) -> int:
        return len(self.values)

    @property
    def target_rate(self) -> float:
        return self.budget / self.horizon

    @property
    def live_rounds(self) -> int:
        return min(self.stop_round - 1, self.horizon)


def _as_env_list(envs, horizon: int | None) -> list[EnvironmentStep]:
    if isinstance(envs, EnvironmentStep):
        if horizon is None:
            raise ConfigurationError("horizon required with a single environment")
        return [envs] * horizon
    envs = list(envs)
    if horizon is not None and horizon != len(envs):
        raise ConfigurationError("environment list length must equal the horizon")
    if not envs:
        raise ConfigurationError("empty environment sequence")
    return envs


def _env_outcome(env: EnvironmentStep, bids: np.ndarray, comp: np.ndarray):
    """Vectorized one-round outcome for the focal agent: allocation and
    payment given her bid and the realized competing bids."""
    mech = env.mechanism
    if isinstance(mech.feasible, SingleSlot):
        if env.n_opponents == 0:
            win = bids > 0
            top = np.zeros_like(bids)
        else:
            top = comp.max(axis=-1)
            first = np.argmax(comp, axis=-1)
            comp_profile_idx = first + (first >= env.agent_index)
            win = (bids > top) | (
                (bids == top) & (bids > 0) & (env.agent_index < comp_profile_idx)
            )
            win &= bids > 0
        x = win.astype(np.float64)
        pay = bids * x if mech.kind == FIRST_PRICE else top * x
        return x, pay
    # Polymatroid: agent's rank among all bids, ties by profile index.
    opp_idx = np.arange(env.n_opponents)
    opp_profile = opp_idx + (opp_idx >= env.agent_index)
    above = (comp > bids[..., None]) | (
        (comp == bids[..., None]) & (opp_profile < env.agent_index)
    )
    rank = above.sum(axis=-1)
    rates = np.zeros(env.n_opponents + 1)
    m = len(mech.feasible.click_rates)
    take = min(m, len(rates))
    rates[:take] = mech.feasible.click_rates[:take]
    x = rates[rank] * (bids > 0)
    if mech.kind == GSP:
        below = np.sort(comp, axis=-1)[..., ::-1]  # descending
        padded = np.concatenate([below, np.zeros_like(bids[..., None])], axis=-1)
        nxt = np.take_along_axis(padded, rank[..., None], axis=-1)[..., 0]
        pay = x * nxt
    else:
        pay = x * bids
    return x, pay


def simulate_pacing(
    envs,
    budget: float,
    learning_rate: float,
    mu_cap: float,
    horizon: int | None = None,
    seed: int = 0,
    replications: int = 1,
) -> list[PacingRun]:
    """Run the pacing agent against the environment sequence.

    Replications advance in lockstep on spawned substreams; each run's
    update arithmetic matches the scalar pacing state transition bit for
    bit.
    """
    env_list = _as_env_list(envs, horizon)
    T = len(env_list)
    R = replications
    rho = budget / T

    children = np.random.SeedSequence(seed).spawn(R)
    # One uniform per (rep, round) selects the atom; one per competing bid
    # realizes the noise.  Draws are per-replication substreams.
    max_opp = max(e.n_opponents for e in env_list)
    atom_u = np.empty((R, T))
    noise_u = np.empty((R, T, max_opp)) if max_opp else np.zeros((R, T, 0))
    for r, child in enumerate(children):
        rng = np.random.Generator(np.random.Philox(child))
        atom_u[r] = rng.random(T)
        if max_opp:
            noise_u[r] = rng.random((T, max_opp))

    mu = np.zeros(R)
    remaining = np.full(R, float(budget))
    stopped = np.zeros(R, dtype=bool)
    stop_round = np.full(R, T + 1, dtype=np.int64)
    thresh = EXHAUSTION_FRACTION * budget

    rec_mu = np.empty((R, T))
    rec_v = np.empty((R, T))
    rec_b = np.empty((R, T))
    rec_x = np.empty((R, T))
    rec_z = np.empty((R, T))

    for t, env in enumerate(env_list):
        cum = np.cumsum(env.probs)
        idx = np.minimum(np.searchsorted(cum, atom_u[:, t], side="right"), env.n_atoms - 1)
        v = env.values[idx]
        comp = env.competing_bids[idx]
        if env.eta > 0 and env.n_opponents > 0:
            comp = comp + env.eta * noise_u[:, t, : env.n_opponents]
        live = ~stopped
        bids = np.where(live, np.minimum(v / (1.0 + mu), remaining), 0.0)
        x, z = _env_outcome(env, bids, comp)
        x = np.where(live, x, 0.0)
        z = np.where(live, z, 0.0)

        rec_mu[:, t] = np.where(live, mu, np.nan)
        rec_v[:, t] = v
        rec_b[:, t] = bids
        rec_x[:, t] = x
        rec_z[:, t] = z

        mu = np.where(live, np.clip(mu - learning_rate * (rho - z), 0.0, mu_cap), mu)
        remaining = remaining - z
        newly = live & (remaining < thresh)
        stop_round[newly] = t + 2
        stopped |= newly

    return [
        PacingRun(
            multipliers=rec_mu[r].copy(),
            values=rec_v[r].copy(),
            bids=rec_b[r].copy(),
            allocations=rec_x[r].copy(),
            payments=rec_z[r].copy(),
            stop_round=int(stop_round[r]),
            budget=float(budget),
            learning_rate=learning_rate,
            mu_cap=mu_cap,
        )
        for r in range(R)
    ]


# ---------------------------------------------------------------------------
# Dynamic regret


@dataclass(frozen=True)
class RegretReport:
    value_regret: float
    sgd_regret: float
    path_length: float
    value_bound: float
    sgd_bound: float
    smoothing: SmoothingSpec
    perfect: PerfectPacingSequence
    live_rounds: int
    horizon: int

    def as_dict(self) -> dict:
        return {
            "value_regret": self.value_regret,
            "sgd_regret": self.sgd_regret,
            "path_length": self.path_length,
            "value_bound": self.value_bound,
            "sgd_bound": self.sgd_bound,
            "lambda": self.smoothing.lipschitz,
            "delta_absolute": self.smoothing.floor_absolute,
            "delta_relative": self.smoothing.floor_relative,
            "live_rounds": self.live_rounds,
            "horizon": self.horizon,
        }


def regret_bounds(
    path_length: float,
    mu_cap: float,
    rho: float,
    value_cap: float,
    horizon: int,
    smoothing: SmoothingSpec,
) -> tuple[float, float]:
    """Analytic right-hand sides: the SGD-regret bound and the value-regret
    bound it feeds, with the implementation constant applied."""
    c = REGRET_BOUND_CONSTANT
    reg1 = ((path_length + 1.0) * mu_cap**2 + (rho + value_cap) ** 2) * math.sqrt(horizon)
    sgd_bound = c * reg1
    delta = min(smoothing.floor_absolute, rho)
    if delta <= 0 or smoothing.lipschitz < 0:
        value_bound = math.inf
    else:
        value_bound = c * (
            (value_cap / delta) * math.sqrt(2.0 * smoothing.lipschitz * horizon * reg1)
            + value_cap * mu_cap * math.sqrt(horizon) / rho
        )
    return sgd_bound, value_bound


def dynamic_regret(
    run: PacingRun,
    envs,
    rho: float | None = None,
    mu_cap: float | None = None,
    tol: float = QUADRATURE_TOL,
) -> RegretReport:
    return dynamic_regret_batch([run], envs, rho, mu_cap, tol)[0]


def dynamic_regret_batch(
    runs: Sequence[PacingRun],
    envs,
    rho: float | None = None,
    mu_cap: float | None = None,
    tol: float = QUADRATURE_TOL,
) -> list[RegretReport]:
    """Dynamic regret reports for runs that faced the same environment
    sequence; perfect multipliers and curve integrals are computed once.

    Value regret compares the exact per-round expected value at the perfect
    multiplier against the expected value at the multipliers actually
    played (stopped rounds contribute zero).  SGD regret sums the surrogate
    objective gaps over live rounds; each summand is non-negative because
    the perfect multiplier minimizes the surrogate.
    """
    if not runs:
        return []
    T = runs[0].horizon
    if any(r.horizon != T for r in runs):
        raise ConfigurationError("all runs must share one horizon")
    env_list = _as_env_list(envs, T)
    rho = runs[0].target_rate if rho is None else rho
    mu_cap = runs[0].mu_cap if mu_cap is None else mu_cap

    smoothing = measure_smoothing(env_list, mu_cap)
    perfect = perfect_sequence(env_list, rho, mu_cap)

    groups: dict[int, list[int]] = {}
    env_by_key: dict[int, EnvironmentStep] = {}
    for t, env in enumerate(env_list):
        groups.setdefault(id(env), []).append(t)
        env_by_key[id(env)] = env

    v_star = np.empty(T)
    h_star = np.empty(T)
    v_run = [np.zeros(T) for _ in runs]
    h_run = [np.zeros(T) for _ in runs]
    live_mask = [
        ~np.isnan(run.multipliers) for run in runs
    ]
    for key, rounds in groups.items():
        env = env_by_key[key]
        rounds_arr = np.asarray(rounds)
        mu_star = perfect.multipliers[rounds_arr[0]]
        zs, vs = env.spend_value(np.array([mu_star]))
        hs = surrogate_objective(env, rho, float(mu_star), tol)
        v_star[rounds_arr] = vs[0]
        h_star[rounds_arr] = hs
        for i, run in enumerate(runs):
            mask = live_mask[i][rounds_arr]
            mus = run.multipliers[rounds_arr[mask]]
            if len(mus) == 0:
                continue
            _, vv = env.spend_value(mus)
            hh = objective_values(env, rho, mus, tol)
            v_run[i][rounds_arr[mask]] = vv
            h_run[i][rounds_arr[mask]] = hh

    sgd_bound, value_bound = regret_bounds(
        perfect.path_length, mu_cap, rho, smoothing_value_cap(env_list), T, smoothing
    )
    reports = []
    for i, run in enumerate(runs):
        mask = live_mask[i]
        value_regret = float(v_star.sum() - v_run[i][mask].sum())
        sgd_regret = float((h_run[i][mask] - h_star[mask]).sum())
        reports.append(
            RegretReport(
                value_regret=value_regret,
                sgd_regret=sgd_regret,
                path_length=perfect.path_length,
                value_bound=value_bound,
                sgd_bound=sgd_bound,
                smoothing=smoothing,
                perfect=perfect,
                live_rounds=int(mask.sum()),
                horizon=T,
            )
        )
    return reports


def smoothing_value_cap(env_list: Sequence[EnvironmentStep]) -> float:
    return max(env.value_cap for env in env_list)


def fit_growth_exponent(horizons: Sequence[int], regrets: Sequence[float]) -> float:
    """Least-squares slope of log regret against log horizon."""
    h = np.asarray(horizons, dtype=np.float64)
    r = np.asarray(regrets, dtype=np.float64)
    if np.any(r <= 0):
        raise PreconditionError("regrets must be positive for a log-log fit")
    slope = np.polyfit(np.log(h), np.log(r), 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# Fixed-multiplier stochastic value (time-invariant environments)


def stochastic_value(
    env: EnvironmentStep,
    mu: float,
    budget: float,
    horizon: int,
    replications: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo expected total value of pacing at a fixed multiplier
    until the budget runs out.

    The agent bids value/(1 + mu) every round without clamping; the round
    on which cumulative spend first reaches the budget still counts toward
    the total, matching the stopped-process accounting of the analytic
    upper bound.
    """
    if budget <= 0 or horizon == 0:
        return 0.0, 0.0
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    vals, comp = env.draw(rng, horizon, replications)
    bids = vals / (1.0 + mu)
    x, z = _env_outcome(env, bids, comp)
    gained = x * vals
    spend_cum = np.cumsum(z, axis=1)
    alive = np.concatenate(
        [np.ones((replications, 1), dtype=bool), spend_cum[:, :-1] < budget], axis=1
    )
    totals = (gained * alive).sum(axis=1)
    mean = float(totals.mean())
    stderr = float(totals.std(ddof=1) / math.sqrt(replications)) if replications > 1 else 0.0
    return mean, stderr
