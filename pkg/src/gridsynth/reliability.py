"""Zone-conditioned reliability indices.

Interruption duration (CAIDI, hours) is a hurdle model: a per-zone Bernoulli
gate decides whether a bus sees any interruption at all, and positive
durations follow a per-zone Weibull. Interruption frequency (CAIFI,
events/year) is Negative Binomial with a per-zone mean and one global
overdispersion parameter. The hurdle indicator is marginalized analytically
in the likelihood rather than sampled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import (
    logpdf_beta,
    logpdf_halfnormal,
    logpdf_weibull,
    logpmf_negbinomial,
    sample_negbinomial,
    sample_weibull,
)
from .inference import FitConfig, ParamDef, ParamSpace, PosteriorEnsemble, fit
from .topology import ZoneAssignment

__all__ = [
    "BusReliability",
    "CaidiPosterior",
    "CaifiPosterior",
    "sample_caidi",
    "sample_caifi",
    "fit_caidi",
    "fit_caifi",
]


@dataclass(frozen=True)
class BusReliability:
    caidi_hours: float
    caifi_per_year: int

    def __post_init__(self) -> None:
        if self.caidi_hours < 0.0:
            raise ValueError("caidi_hours must be nonnegative")
        if self.caifi_per_year < 0:
            raise ValueError("caifi_per_year must be nonnegative")


def sample_caidi(draw, zone: int, rng) -> float:
    """Zero with probability 1 - p_zone, else a Weibull duration draw."""
    p = np.asarray(draw["hurdle_p"], dtype=float)[zone - 1]
    if rng.random() >= p:
        return 0.0
    shape = np.asarray(draw["weib_shape"], dtype=float)[zone - 1]
    scale = np.asarray(draw["weib_scale"], dtype=float)[zone - 1]
    return float(sample_weibull(rng, shape, scale))


def sample_caifi(draw, zone: int, rng) -> int:
    mu = np.asarray(draw["freq_mean"], dtype=float)[zone - 1]
    alpha = float(draw["dispersion"])
    return sample_negbinomial(rng, mu, alpha)


@dataclass
class CaidiPosterior:
    ensemble: PosteriorEnsemble
    zone_count: int

    def draw(self, index: int) -> dict:
        return self.ensemble.draw(index)


@dataclass
class CaifiPosterior:
    ensemble: PosteriorEnsemble
    zone_count: int

    def draw(self, index: int) -> dict:
        return self.ensemble.draw(index)


def _group_by_zone(observations: dict[str, float], zones: ZoneAssignment) -> list[np.ndarray]:
    grouped: list[list[float]] = [[] for _ in range(zones.zone_count)]
    for bus, value in observations.items():
        grouped[zones.bus_zone[bus] - 1].append(float(value))
    return [np.asarray(g) for g in grouped]


def fit_caidi(
    durations: dict[str, float],
    zones: ZoneAssignment,
    config: FitConfig | None = None,
) -> CaidiPosterior:
    """Fit per-zone hurdle probabilities and Weibull duration parameters.

    One duration value per bus; zeros feed the hurdle only. Zones with no
    positive durations keep the Weibull prior (warning).
    """
    if not durations:
        raise ValueError("no duration observations")
    if any(v < 0.0 for v in durations.values()):
        raise ValueError("durations must be nonnegative")
    grouped = _group_by_zone(durations, zones)
    z_count = zones.zone_count
    n_zero = np.array([float(np.sum(g == 0.0)) for g in grouped])
    positives = [g[g > 0.0] for g in grouped]
    n_pos = np.array([float(p.size) for p in positives])
    empty = [z + 1 for z, p in enumerate(positives) if p.size == 0]
    if empty:
        warnings.warn(
            f"zones without positive durations keep the prior Weibull: {empty}",
            stacklevel=2,
        )

    space = ParamSpace(
        [
            ParamDef("hurdle_p", (z_count,), "unit"),
            ParamDef("weib_shape", (z_count,), "positive"),
            ParamDef("weib_scale", (z_count,), "positive"),
        ]
    )

    def logpost(v) -> float:
        p = np.atleast_1d(v["hurdle_p"])
        shape = np.atleast_1d(v["weib_shape"])
        scale = np.atleast_1d(v["weib_scale"])
        lp = float(np.sum(logpdf_beta(p, 1.0, 1.0)))
        lp += float(np.sum(logpdf_halfnormal(shape, 1.0)))
        lp += float(np.sum(logpdf_halfnormal(scale, 1.0)))
        # hurdle indicator marginalized: zeros -> log(1-p), positives -> log p + Weibull
        lp += float(np.dot(n_zero, np.log1p(-p)) + np.dot(n_pos, np.log(p)))
        for z in range(z_count):
            if positives[z].size:
                lp += float(np.sum(logpdf_weibull(positives[z], shape[z], scale[z])))
        return lp

    init = {
        "hurdle_p": np.clip(n_pos / np.maximum(n_pos + n_zero, 1.0), 0.02, 0.98),
        "weib_shape": np.ones(z_count),
        "weib_scale": np.array(
            [float(np.mean(p)) if p.size else 1.0 for p in positives]
        ),
    }
    ensemble = fit(logpost, space, config, init=init)
    return CaidiPosterior(ensemble=ensemble, zone_count=z_count)


def fit_caifi(
    counts: dict[str, int],
    zones: ZoneAssignment,
    config: FitConfig | None = None,
) -> CaifiPosterior:
    """Fit per-zone Negative Binomial means and the global dispersion."""
    if not counts:
        raise ValueError("no count observations")
    if any(v < 0 or int(v) != v for v in counts.values()):
        raise ValueError("counts must be nonnegative integers")
    grouped = _group_by_zone(counts, zones)
    z_count = zones.zone_count
    empty = [z + 1 for z, g in enumerate(grouped) if g.size == 0]
    if empty:
        warnings.warn(f"zones without count observations keep the prior: {empty}", stacklevel=2)

    space = ParamSpace(
        [
            ParamDef("freq_mean", (z_count,), "positive"),
            ParamDef("dispersion", (), "positive"),
        ]
    )

    def logpost(v) -> float:
        mu = np.atleast_1d(v["freq_mean"])
        alpha = v["dispersion"]
        lp = float(np.sum(logpdf_halfnormal(mu, 1.0)))
        lp += float(logpdf_halfnormal(alpha, 1.0))
        for z in range(z_count):
            if grouped[z].size:
                lp += float(np.sum(logpmf_negbinomial(grouped[z], mu[z], alpha)))
        return lp

    init = {
        "freq_mean": np.array(
            [max(float(np.mean(g)), 0.05) if g.size else 0.5 for g in grouped]
        ),
        "dispersion": 1.0,
    }
    ensemble = fit(logpost, space, config, init=init)
    return CaifiPosterior(ensemble=ensemble, zone_count=z_count)
