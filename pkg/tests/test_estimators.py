import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from risoutmin import SAABeamformer, SMMBeamformer, SSCABeamformer
from risoutmin.channel import realize_scenario
from risoutmin.estimators import check_channel_array
from risoutmin.objective import BeamformingState, sinr

from conftest import desk_config
from oracles import random_complex, random_phases


def channels(n_users=1, n=200, seed=0, p_block=0.5):
    scenario = realize_scenario(desk_config(n_users=n_users, p_block=p_block), seed)
    rng = np.random.default_rng(seed + 10)
    return scenario, scenario.draw_many(rng, n), scenario.draw_many(rng, n)


def kwargs(scenario, **kw):
    base = dict(p_max=scenario.p_max, gamma=scenario.gamma, noise_power=scenario.noise_power,
                max_iter=60, init_trials=8)
    base.update(kw)
    return base


def test_check_channel_array():
    X = check_channel_array(np.ones((5, 9, 4)))
    assert X.shape == (5, 1, 9, 4) and X.dtype == complex
    for bad in (np.ones((9, 4)), np.empty((0, 1, 9, 4)), np.full((2, 1, 9, 4), np.nan)):
        with pytest.raises(ValueError):
            check_channel_array(bad)


@pytest.mark.parametrize("cls,n_users", [(SMMBeamformer, 1), (SSCABeamformer, 2), (SAABeamformer, 1)])
def test_fit_predict_score(cls, n_users):
    scenario, train, test = channels(n_users)
    est = cls(**kwargs(scenario)).fit(train)
    assert est.state_.is_feasible(scenario.p_max, atol=1e-9)
    assert 1 <= est.n_iter_ <= 60
    values = est.predict(test)
    assert values.shape == (len(test), n_users)
    np.testing.assert_allclose(values, sinr(est.state_, test, scenario.noise_power))
    score = est.score(test)
    assert score == pytest.approx(1.0 - np.max(np.mean(values <= scenario.gamma, axis=0)))


def test_fit_beats_random_beamformer():
    scenario, train, test = channels(1, n=300, seed=1)
    est = SMMBeamformer(**kwargs(scenario, max_iter=300)).fit(train)
    rng = np.random.default_rng(3)
    F = random_complex(rng, 4, 1)
    F *= np.sqrt(scenario.p_max) / np.linalg.norm(F)
    baseline = BeamformingState(F, np.append(random_phases(rng, 8), 1.0))
    base_score = 1.0 - np.mean(sinr(baseline, test, scenario.noise_power) <= scenario.gamma)
    assert est.score(test) >= base_score


def test_unfitted_and_shape_errors():
    scenario, train, test = channels(1, n=20)
    est = SMMBeamformer(**kwargs(scenario, max_iter=5))
    with pytest.raises(NotFittedError):
        est.predict(test)
    est.fit(train)
    with pytest.raises(ValueError):
        est.predict(test[:, :, :5])


def test_params_and_clone():
    est = SSCABeamformer(gamma=2.0, tau=0.5, random_state=7)
    params = est.get_params()
    assert params["tau"] == 0.5 and params["gamma"] == 2.0 and params["random_state"] == 7
    twin = clone(est)
    assert twin is not est and twin.get_params() == params
    assert SAABeamformer().set_params(n_samples=10).n_samples == 10
    assert SMMBeamformer().get_params()["squarem"] is True


def test_fit_is_deterministic():
    scenario, train, _ = channels(1, n=50)
    a = SMMBeamformer(**kwargs(scenario, max_iter=20)).fit(train)
    b = SMMBeamformer(**kwargs(scenario, max_iter=20)).fit(train)
    np.testing.assert_array_equal(a.F_, b.F_)
    np.testing.assert_array_equal(a.e_, b.e_)
