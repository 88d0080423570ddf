import warnings

import numpy as np
import pytest

from sspbound import corpus
from sspbound.frontend import load_model
from sspbound.oracle import Policy, SimEstimate, UnsupportedModel, simulate, trial_keys, uniforms, value_iteration
from sspbound.solve import inf_bounds, lower_bound_fixed, upper_bound

from test_solve import CONTINUOUS_GAMBLER

LATTICE_BOXES = {
    "gambler": [(0, 400)],
    "robot2d": [(-40, 60), (-60, 40)],
    "mini_roulette": [(0, 400)],
}


@pytest.fixture(scope="module")
def gambler5():
    return corpus.load("gambler").with_init([5])


def test_wald_always_one(gambler5):
    # [DERIVED] reward 0.4 per bet, drift -0.2 per bet: value 2 x0 = 10
    est = simulate(gambler5, Policy.always(1), 200_000, seed=7)
    assert abs(est.mean - 10.0) <= 3 * est.stderr
    assert est.truncated_fraction == 0


def test_wald_always_two(gambler5):
    # [DERIVED] reward 0.3 per bet, drift -0.4 per bet: value 0.75 x0 = 3.75
    est = simulate(gambler5, Policy.always(2), 200_000, seed=7)
    assert abs(est.mean - 3.75) <= 3 * est.stderr


def test_start_outside_guard(gambler5):
    # [TRIVIAL] the loop is never entered
    est = simulate(gambler5, Policy.always(1), 100, x0=[0])
    assert est.mean == 0.0 and est.stderr == 0.0


def test_single_trial_has_no_stderr(gambler5):
    est = simulate(gambler5, Policy.uniform(), 1, seed=3)
    assert est.stderr is None and est.trials == 1


def test_parallel_invariance(gambler5):
    a = simulate(gambler5, Policy.uniform(), 300_000, seed=5)
    b = simulate(gambler5, Policy.uniform(), 300_000, seed=5, workers=3)
    assert a == b


def test_trial_streams_do_not_depend_on_batch():
    keys = trial_keys(9, np.arange(10))
    full = uniforms(keys, 4, [0, 1, 2])
    part = uniforms(keys[3:5], 4, [2])
    assert np.array_equal(full[3:5, 2:], part)


def test_seed_changes_estimate(gambler5):
    a = simulate(gambler5, Policy.always(1), 2000, seed=1)
    b = simulate(gambler5, Policy.always(1), 2000, seed=2)
    assert a.mean != b.mean


def test_step_cap_flags_unreliable(gambler5):
    est = simulate(gambler5, Policy.always(1), 1000, step_cap=2)
    assert est.truncated_fraction == 1.0 and not est.reliable


def test_step_cap_sensitivity(gambler5):
    a = simulate(gambler5, Policy.always(1), 50_000, seed=4, step_cap=5_000)
    b = simulate(gambler5, Policy.always(1), 50_000, seed=4, step_cap=10_000)
    assert a.truncated_fraction < 0.001
    assert abs(a.mean - b.mean) < a.stderr


def test_policy_validation(gambler5):
    with pytest.raises(ValueError):
        simulate(gambler5, Policy.always(3), 10)
    with pytest.raises(ValueError):
        Policy.parse("sometimes")
    assert Policy.parse("always:2") == Policy.always(2)


def test_sim_estimate_round_trip(gambler5):
    est = simulate(gambler5, Policy.always(1), 100)
    assert SimEstimate.from_dict(est.to_dict()) == est


def test_continuous_distribution_simulates():
    # [DERIVED] value 2(x0 - E x_exit) lies in (2 x0 - 2, 2 x0 - 0.4]
    m = load_model(CONTINUOUS_GAMBLER)
    est = simulate(m, Policy.always(1), 50_000, seed=1)
    assert 18 - 3 * est.stderr <= est.mean <= 19.6 + 3 * est.stderr


def test_value_iteration_gambler_sup(gambler5):
    # [DERIVED] supval is 2x
    r = value_iteration(gambler5, [(0, 400)], tol=1e-6, sense="sup",
                        boundary=lambda x: upper_bound(gambler5).bound_at(x))
    assert 9.9 <= r.value_at([5]) <= 10.1
    assert r.policy.table[5] == 1


def test_value_iteration_gambler_inf(gambler5):
    # [DERIVED] infval is 0.75x
    r = value_iteration(gambler5, [(0, 400)], tol=1e-6, sense="inf", boundary=inf_bounds(gambler5)[0].bound_at)
    assert 3.70 <= r.value_at([5]) <= 3.80


def test_value_iteration_zero_model(zero_model):
    r = value_iteration(zero_model, [(0, 20)])
    assert np.all(r.values == 0)


def test_value_iteration_warns_without_boundary(gambler5):
    with pytest.warns(UserWarning, match="leave the box"):
        value_iteration(gambler5, [(0, 50)])


def test_value_iteration_rejects_off_lattice(models):
    with pytest.raises(UnsupportedModel):
        value_iteration(models["american_roulette"], [(0, 100)])
    with pytest.raises(UnsupportedModel):
        value_iteration(load_model(CONTINUOUS_GAMBLER), [(0, 100)])


@pytest.mark.parametrize("name", sorted(LATTICE_BOXES))
def test_vi_sandwich_and_greedy_dominance(models, name):
    m = models[name]
    up, lo = upper_bound(m), lower_bound_fixed(m)
    r = value_iteration(m, LATTICE_BOXES[name], tol=1e-6, sense="sup", boundary=up.bound_at)
    v = r.value_at(m.init)
    assert lo.value_at_init - 1e-6 <= v <= up.value_at_init + 1e-6
    greedy = simulate(m, r.policy, 40_000, seed=2)
    for l in range(1, m.k + 1):
        fixed = simulate(m, Policy.always(l), 40_000, seed=3)
        assert greedy.mean >= fixed.mean - 3 * np.hypot(greedy.stderr, fixed.stderr)
