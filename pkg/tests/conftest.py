import numpy as np
import pytest

from risoutmin.channel import init_rng, realize_scenario, stream_rng
from risoutmin.config import ScenarioConfig
from risoutmin.ssca import initialize


def desk_config(**kw):
    """Small deployment with the RIS close to the BS so both paths matter."""
    base = dict(
        n_tx=4,
        elems_per_ris=8,
        ris_radius=[3.0],
        ris_angle=[-0.7],
        target_rate_bps_hz=0.1,
        n_clusters=3,
        n_subpaths=8,
    )
    base.update(kw)
    return ScenarioConfig(**base)


def desk_setup(seed=0, trials=16, **kw):
    scenario = realize_scenario(desk_config(**kw), seed)
    rng = stream_rng(seed, 1)
    state, params = initialize(scenario, rng, trials, trial_rng=init_rng(seed))
    return scenario, state, params, rng


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
