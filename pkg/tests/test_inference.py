"""Sampler-engine checks: transforms, HDI, conjugate oracles, diagnostics."""

import math

import numpy as np
import pytest

from gridsynth.distributions import (
    logpdf_beta,
    logpdf_dirichlet,
    logpdf_gamma,
    logpdf_halfnormal,
    make_rng,
)
from gridsynth.inference import (
    FitConfig,
    InitializationError,
    ParamDef,
    ParamSpace,
    PosteriorEnsemble,
    fit,
    hdi,
    posterior_predictive,
)

FAST = FitConfig(chains=4, warmup=800, draws=800, thin=2, seed=42)


# ---------------------------------------------------------------------------
# Transforms


@pytest.mark.parametrize(
    "definition,z",
    [
        (ParamDef("a", (), "real"), [0.7]),
        (ParamDef("a", (), "positive"), [-0.3]),
        (ParamDef("a", (3,), "positive"), [0.1, -1.0, 2.0]),
        (ParamDef("a", (), "unit"), [0.4]),
        (ParamDef("a", (4,), "simplex"), [0.3, -0.2, 0.9]),
        (ParamDef("a", (3,), "ordered_positive"), [0.2, -0.5, 0.1]),
    ],
)
def test_transform_round_trip(definition, z):
    space = ParamSpace([definition])
    z = np.asarray(z, dtype=float)
    values = space.to_constrained(z)
    back = space.to_unconstrained(values)
    np.testing.assert_allclose(back, z, atol=1e-9)


@pytest.mark.parametrize(
    "definition,z",
    [
        (ParamDef("a", (), "positive"), [-0.3]),
        (ParamDef("a", (2,), "positive"), [0.1, -1.0]),
        (ParamDef("a", (), "unit"), [0.4]),
        (ParamDef("a", (3,), "simplex"), [0.3, -0.2]),
        (ParamDef("a", (4,), "simplex"), [0.3, -0.2, 1.1]),
        (ParamDef("a", (3,), "ordered_positive"), [0.2, -0.5, 0.1]),
    ],
)
def test_log_jacobian_matches_finite_differences(definition, z):
    # oracle: numerical determinant of the free coordinates of the forward map
    space = ParamSpace([definition])
    z = np.asarray(z, dtype=float)
    dim = len(z)

    def free_coords(zz):
        v = np.atleast_1d(np.asarray(space.to_constrained(zz)[definition.name]))
        return v[:dim]  # simplex drops its last (dependent) coordinate

    eps = 1e-6
    jac = np.empty((dim, dim))
    for j in range(dim):
        zp, zm = z.copy(), z.copy()
        zp[j] += eps
        zm[j] -= eps
        jac[:, j] = (free_coords(zp) - free_coords(zm)) / (2 * eps)
    numeric = math.log(abs(np.linalg.det(jac)))
    assert space.log_jacobian(z) == pytest.approx(numeric, abs=1e-5)


def test_simplex_support_of_draws():
    space = ParamSpace([ParamDef("w", (5,), "simplex"), ParamDef("m", (3,), "ordered_positive")])
    rng = make_rng(3)
    for _ in range(200):
        z = rng.standard_normal(space.dim) * 3
        vals = space.to_constrained(z)
        w = vals["w"]
        assert np.all(w >= 0.0) and abs(w.sum() - 1.0) < 1e-12
        m = vals["m"]
        assert np.all(np.diff(m) > 0.0) and np.all(m > 0.0)


# ---------------------------------------------------------------------------
# HDI


def test_hdi_uniform_order_statistics():
    draws = np.arange(1.0, 101.0)
    interval = hdi(draws, 0.94)
    assert interval.upper - interval.lower == pytest.approx(93.0)
    assert interval.lower == 1.0  # first narrowest window


def test_hdi_degenerate():
    interval = hdi(np.full(500, 3.25), 0.94)
    assert (interval.lower, interval.upper) == (3.25, 3.25)


def test_hdi_standard_normal():
    rng = make_rng(4)
    draws = rng.standard_normal(100_000)
    interval = hdi(draws, 0.94)
    assert interval.lower == pytest.approx(-1.8808, abs=0.05)
    assert interval.upper == pytest.approx(1.8808, abs=0.05)


def test_hdi_too_few_draws():
    with pytest.raises(ValueError):
        hdi(np.arange(50.0), 0.94)


# ---------------------------------------------------------------------------
# fit() against conjugate / analytic oracles


def test_beta_bernoulli_conjugate():
    # Beta(1,1) prior, 7 successes / 3 failures -> Beta(8,4): mean 2/3
    space = ParamSpace([ParamDef("p", (), "unit")])

    def logpost(v):
        return float(logpdf_beta(v["p"], 1.0, 1.0)) + 7 * math.log(v["p"]) + 3 * math.log(
            1.0 - v["p"]
        )

    ensemble = fit(logpost, space, FAST)
    assert ensemble.mean("p") == pytest.approx(8.0 / 12.0, abs=0.02)


TABLE_PROBS = np.array([0.142, 0.137, 0.131, 0.187, 0.143, 0.223, 0.038])


def test_dirichlet_categorical_recovery():
    counts = np.round(TABLE_PROBS * 13_500)
    space = ParamSpace(
        [ParamDef("conc", (7,), "positive"), ParamDef("probs", (7,), "simplex")]
    )

    def logpost(v):
        lp = float(np.sum(logpdf_halfnormal(v["conc"], 1.0)))
        lp += logpdf_dirichlet(v["probs"], v["conc"])
        lp += float(np.dot(counts, np.log(v["probs"])))
        return lp

    ensemble = fit(logpost, space, FAST, init={"conc": np.ones(7), "probs": counts / counts.sum()})
    mean = ensemble.mean("probs")
    empirical = counts / counts.sum()
    assert np.max(np.abs(mean - empirical)) <= 0.01


def test_zero_data_posterior_equals_prior():
    # no likelihood: the HalfNormal(1) prior's mean is sqrt(2/pi)
    space = ParamSpace([ParamDef("s", (), "positive")])
    ensemble = fit(lambda v: float(logpdf_halfnormal(v["s"], 1.0)), space, FAST)
    assert ensemble.mean("s") == pytest.approx(math.sqrt(2.0 / math.pi), abs=0.05)


def test_detailed_balance_standard_normal():
    space = ParamSpace([ParamDef("x", (), "real")])
    config = FitConfig(chains=4, warmup=1000, draws=100_000, thin=4, seed=7)
    ensemble = fit(lambda v: -0.5 * v["x"] ** 2, space, config)
    draws = ensemble.draws["x"]
    assert draws.size == 100_000
    assert abs(draws.mean()) < 0.02
    assert 0.95 < draws.var() < 1.05


def test_reproducible_ensembles():
    space = ParamSpace([ParamDef("x", (), "positive")])

    def logpost(v):
        return float(logpdf_gamma(v["x"], 3.0, 2.0))

    a = fit(logpost, space, FitConfig(chains=2, warmup=200, draws=200, thin=2, seed=9))
    b = fit(logpost, space, FitConfig(chains=2, warmup=200, draws=200, thin=2, seed=9))
    np.testing.assert_array_equal(a.draws["x"], b.draws["x"])


def test_initialization_error():
    space = ParamSpace([ParamDef("x", (), "real")])
    with pytest.raises(InitializationError):
        fit(lambda v: float("nan"), space, FAST)


def test_rhat_warning_on_stuck_chains():
    # two narrow modes far apart: chains starting on opposite sides cannot mix
    space = ParamSpace([ParamDef("x", (), "real")])

    def logpost(v):
        x = v["x"]
        return float(
            np.logaddexp(-0.5 * ((x - 40) / 0.1) ** 2, -0.5 * ((x + 40) / 0.1) ** 2)
        )

    config = FitConfig(chains=4, warmup=300, draws=300, thin=1, init_jitter=45.0, seed=11)
    with pytest.warns(UserWarning, match="R-hat"):
        ensemble = fit(logpost, space, config)
    assert ensemble.warnings


def test_acceptance_rate_near_target():
    space = ParamSpace([ParamDef("x", (3,), "real")])
    ensemble = fit(lambda v: float(-0.5 * np.sum(v["x"] ** 2)), space, FAST)
    rate = ensemble.diagnostics["acceptance"]["x"]
    assert 0.2 < rate < 0.55


# ---------------------------------------------------------------------------
# Posterior predictive


def test_posterior_predictive_empty():
    ensemble = PosteriorEnsemble(draws={"m": np.arange(600.0)})
    assert posterior_predictive(ensemble, lambda d, r: d["m"], 0, make_rng(0)) == []


def test_posterior_predictive_single_draw_ensemble():
    ensemble = PosteriorEnsemble(draws={"m": np.full(1, 2.5)})
    out = posterior_predictive(ensemble, lambda d, r: d["m"], 50, make_rng(0))
    assert out == [2.5] * 50


def test_posterior_predictive_gamma_recovery():
    # fit a Gamma mean to synthetic data with known mean 5.0, then push draws
    # through the generative pass; predictive mean must recover the truth
    rng = make_rng(21)
    from gridsynth.distributions import sample_gamma

    data = sample_gamma(rng, 25.0, 5.0, 400)  # mean 5, sd 1
    space = ParamSpace([ParamDef("mu", (), "positive")])

    def logpost(v):
        return float(np.sum(logpdf_gamma(data, 25.0, 25.0 / v["mu"])))

    ensemble = fit(logpost, space, FAST, init={"mu": float(data.mean())})
    predictive = posterior_predictive(
        ensemble,
        lambda d, r: sample_gamma(r, 25.0, 25.0 / d["mu"]),
        4000,
        make_rng(22),
    )
    assert np.mean(predictive) == pytest.approx(5.0, abs=0.3)
