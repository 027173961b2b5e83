"""Bundled scenario files and the environment construction for regret runs.

The welfare suite covers two, three, and five agents across second-price,
first-price, and GSP mechanisms at a common horizon; the regret bundle
provides the smoothed first-price environment and a piecewise (switching)
variant.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .config import Scenario, parse_scenario
from .errors import ConfigurationError, EnvironmentError_
from .regret import EnvironmentStep
from .simulation import PacedAgent, ScriptedAgent

WELFARE_SUITE = (
    "welfare_uncontested_second_price",
    "welfare_symmetric_second_price",
    "welfare_first_price_three",
    "welfare_gsp_five",
    "welfare_contested_paced_pair",
)

BUNDLED = WELFARE_SUITE + (
    "counterexample",
    "regret_first_price_uniform",
    "regret_switching",
)


def scenario_text(name: str) -> str:
    fname = name if name.endswith(".json") else name + ".json"
    ref = resources.files("pacesim.data").joinpath(fname)
    if not ref.is_file():
        raise ConfigurationError(f"no bundled scenario named {name!r}")
    return ref.read_text()


def load_scenario(name: str) -> Scenario:
    return parse_scenario(scenario_text(name))


def regret_environment(scenario: Scenario) -> tuple[int, list[EnvironmentStep], dict]:
    """Reconstruct the focal agent's per-round environments from a scenario.

    Requires exactly one paced agent; all opponents must be scripted, since
    only scripted bid processes are reconstructible as per-round
    distributions.  Returns (agent index, one environment per round, agent
    parameters).  Environments are shared objects within each script
    segment, so downstream caches collapse piecewise-constant stretches.
    """
    config = scenario.config
    paced = [k for k, a in enumerate(config.agents) if isinstance(a, PacedAgent)]
    if len(paced) != 1:
        raise EnvironmentError_(
            f"regret analysis needs exactly one paced agent, found {len(paced)}"
        )
    agent = paced[0]
    horizon = config.horizon
    if horizon < 1:
        raise EnvironmentError_("regret analysis needs a positive horizon")
    opponents = [a for k, a in enumerate(config.agents) if k != agent]
    if not all(isinstance(a, ScriptedAgent) for a in opponents):
        raise EnvironmentError_("opponents must be scripted")

    opp_bids = np.column_stack(
        [a.bids_over(horizon) for a in opponents]
    ) if opponents else np.zeros((horizon, 0))
    eta = scenario.smoothing_eta or 0.0
    model = config.value_model

    envs: list[EnvironmentStep] = []
    cache: dict[tuple, EnvironmentStep] = {}
    for t in range(horizon):
        key = tuple(opp_bids[t])
        if key not in cache:
            comp = np.tile(opp_bids[t], (model.support_size, 1))
            cache[key] = EnvironmentStep(
                mechanism=config.mechanism,
                probs=model.probs,
                values=model.profiles[:, agent],
                competing_bids=comp,
                eta=eta,
                agent_index=agent,
            )
        envs.append(cache[key])

    spec = config.agents[agent]
    cfg = config.agent_config(agent)
    params = {
        "agent": agent,
        "budget": spec.budget,
        "learning_rate": cfg.learning_rate,
        "mu_cap": cfg.mu_cap,
        "target_rate": cfg.target_rate,
        "value_cap": cfg.value_cap,
    }
    return agent, envs, params
