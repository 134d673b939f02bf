import random

import pytest

from xswap.harness import ScenarioConfig, run_scenario

_CACHE = {}


@pytest.fixture(scope="session")
def run_cached():
    """Memoized scenario runner: identical configs share one execution."""

    def _run(protocol, scenario, seed=1, **kwargs):
        import json

        key = (protocol, scenario, seed, json.dumps(kwargs, sort_keys=True))
        if key not in _CACHE:
            overrides = kwargs.pop("fault_overrides", {})
            cfg = ScenarioConfig(
                protocol=protocol,
                scenario=scenario,
                seed=seed,
                fault_overrides=overrides,
                **kwargs,
            )
            _CACHE[key] = run_scenario(cfg)
        return _CACHE[key]

    return _run


@pytest.fixture()
def rng():
    return random.Random(1234)
