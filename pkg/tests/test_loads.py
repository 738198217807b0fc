"""Demand model checks: mean vectors, power factor, sampling, fitting."""

import math

import numpy as np
import pytest

from gridsynth.distributions import make_rng, sample_truncnormal
from gridsynth.inference import FitConfig
from gridsynth.loads import (
    BusDemand,
    draw_power_factor,
    fit_load_model,
    mean_vector,
    power_factor_from_uniform,
    sample_demand,
)
from gridsynth.phases import CONFIGS, PhaseConfig

FAST = FitConfig(chains=4, warmup=600, draws=600, thin=2, seed=77)

TRUTH = {
    "p_pot_mono": 2.0,
    "p_pot_bi": 5.0,
    "p_pot_tri": 12.0,
    "delta_bi": 0.6,
    "delta_tri": np.array([0.40, 0.35, 0.25]),
    "sigma_p": 0.3,
}


def test_power_factor_thresholds_exact():
    cases = {0.10: 0.85, 0.1649: 0.85, 0.20: 0.90, 0.27: 0.90, 0.50: 0.95}
    for u, pf in cases.items():
        assert power_factor_from_uniform(u) == pf
    assert power_factor_from_uniform(1.0) == 0.95
    with pytest.raises(ValueError):
        power_factor_from_uniform(1.2)


def test_draw_power_factor_levels():
    rng = make_rng(1)
    levels = {draw_power_factor(rng) for _ in range(500)}
    assert levels == {0.85, 0.90, 0.95}


def test_mean_vector_symmetric_bi_split():
    draw = dict(TRUTH, p_pot_bi=10.0, delta_bi=0.5)
    np.testing.assert_allclose(mean_vector(draw, PhaseConfig.AB), [5.0, 5.0, 0.0])


def test_mean_vector_balanced_tri():
    draw = dict(TRUTH, p_pot_tri=9.0, delta_tri=np.full(3, 1 / 3))
    np.testing.assert_allclose(mean_vector(draw, PhaseConfig.ABC), [3.0, 3.0, 3.0])


def test_mean_vector_mono_b():
    draw = dict(TRUTH, p_pot_mono=7.0)
    np.testing.assert_allclose(mean_vector(draw, PhaseConfig.B), [0.0, 7.0, 0.0])


def test_mean_vector_ca_puts_delta_on_a():
    # alphabetically first active phase takes the delta share
    draw = dict(TRUTH, p_pot_bi=10.0, delta_bi=0.7)
    np.testing.assert_allclose(mean_vector(draw, PhaseConfig.CA), [7.0, 0.0, 3.0])
    np.testing.assert_allclose(mean_vector(draw, PhaseConfig.BC), [0.0, 7.0, 3.0])


def test_split_conservation():
    for cfg in (PhaseConfig.AB, PhaseConfig.BC, PhaseConfig.CA):
        assert mean_vector(TRUTH, cfg).sum() == pytest.approx(TRUTH["p_pot_bi"])
    assert mean_vector(TRUTH, PhaseConfig.ABC).sum() == pytest.approx(TRUTH["p_pot_tri"])


def test_reactive_power_arithmetic():
    demand = BusDemand(
        p_kw=np.array([100.0, 0.0, 0.0]),
        q_kvar=np.array([100.0, 0.0, 0.0]) * math.tan(math.acos(0.95)),
        pf=0.95,
    )
    assert demand.q_kvar[0] == pytest.approx(32.87, abs=0.01)


def test_sample_demand_q_follows_pf():
    rng = make_rng(2)
    d = sample_demand(TRUTH, PhaseConfig.ABC, rng, 0.9)
    np.testing.assert_allclose(d.q_kvar, d.p_kw * math.tan(math.acos(0.9)))


def test_sample_demand_degenerate_sigma():
    draw = dict(TRUTH, sigma_p=0.0)
    rng = make_rng(3)
    d = sample_demand(draw, PhaseConfig.AB, rng, 0.95)
    np.testing.assert_array_equal(d.p_kw, mean_vector(draw, PhaseConfig.AB))


def test_sample_demand_sparsity_all_configs():
    rng = make_rng(4)
    for cfg in CONFIGS:
        for _ in range(50):
            d = sample_demand(TRUTH, cfg, rng, 0.95)
            active = [ord(p) - ord("A") for p in cfg.phase_list]
            inactive = [i for i in range(3) if i not in active]
            assert np.all(d.p_kw[inactive] == 0.0)
            assert np.all(d.p_kw[active] >= 0.0)
            assert np.all(d.q_kvar[inactive] == 0.0)


def test_demand_support_one_million_draws():
    # the truncation engine behind sample_demand never goes negative
    rng = make_rng(5)
    draws = sample_truncnormal(rng, 0.5, 0.3, 0.0, 1_000_000)
    assert np.all(draws >= 0.0)


def _synthetic_dataset(n, rng, truth=TRUTH):
    probs = np.array([0.14, 0.14, 0.14, 0.14, 0.14, 0.15, 0.15])
    allocations = {}
    demands = {}
    for i in range(n):
        cfg = CONFIGS[int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum()))]
        bus = f"b{i:05d}"
        allocations[bus] = cfg
        demands[bus] = sample_demand(truth, cfg, rng, 0.95).p_kw
    return demands, allocations


def test_fit_recovers_potentials():
    rng = make_rng(202)
    demands, allocations = _synthetic_dataset(1500, rng)
    posterior = fit_load_model(demands, allocations, FAST)
    for name in ("p_pot_mono", "p_pot_bi", "p_pot_tri", "delta_bi", "sigma_p"):
        mean = posterior.ensemble.mean(name)
        assert mean == pytest.approx(TRUTH[name], rel=0.15), name
    # posterior-predictive total demand tracks the training data within 5%
    observed_total = np.mean([v.sum() for v in demands.values()])
    idx_rng = make_rng(203)
    predictive = []
    for _ in range(500):
        draw = posterior.draw(int(idx_rng.random() * posterior.ensemble.size))
        cfg = list(allocations.values())[int(idx_rng.random() * len(allocations))]
        predictive.append(sample_demand(draw, cfg, idx_rng, 0.95).p_kw.sum())
    assert np.mean(predictive) == pytest.approx(observed_total, rel=0.05)


def test_fit_balanced_tri_recovers_even_split():
    rng = make_rng(204)
    truth = dict(TRUTH, delta_tri=np.full(3, 1 / 3))
    demands = {}
    allocations = {}
    for i in range(1200):
        bus = f"b{i:05d}"
        allocations[bus] = PhaseConfig.ABC
        demands[bus] = sample_demand(truth, PhaseConfig.ABC, rng, 0.95).p_kw
    with pytest.warns(UserWarning, match="no (mono|bi)-phase observations"):
        posterior = fit_load_model(demands, allocations, FAST)
    np.testing.assert_allclose(posterior.ensemble.mean("delta_tri"), 1 / 3, atol=0.03)


def test_fit_constant_loads_shrink_sigma():
    demands = {}
    allocations = {}
    for i in range(400):
        bus = f"b{i:05d}"
        allocations[bus] = PhaseConfig.A
        demands[bus] = np.array([4.0, 0.0, 0.0])
    with pytest.warns(UserWarning):
        posterior = fit_load_model(demands, allocations, FAST)
    assert posterior.ensemble.mean("sigma_p") < 0.05 * 4.0


def test_fit_rejects_demand_on_inactive_phase():
    with pytest.raises(ValueError, match="absent"):
        fit_load_model({"b": np.array([1.0, 1.0, 0.0])}, {"b": PhaseConfig.A}, FAST)
    with pytest.raises(ValueError, match="negative"):
        fit_load_model({"b": np.array([-1.0, 0.0, 0.0])}, {"b": PhaseConfig.A}, FAST)
