"""Hierarchical per-phase power-demand model.

Buses are grouped by phase category (single-, dual-, three-phase). Each
category has a characteristic potential power drawn from a Gamma whose shape
and rate are themselves Gamma draws from shared hyperparameters, so sparse
categories borrow strength from the others. Dual-phase potentials split
between the two active phases through a Beta factor, three-phase potentials
through a Dirichlet simplex. Per-bus demand deviates from the category mean
through an independent zero-truncated normal on each active phase, and
reactive power follows a network-wide power factor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import (
    logpdf_beta,
    logpdf_dirichlet,
    logpdf_gamma,
    logpdf_halfnormal,
    logpdf_truncnormal,
    sample_truncnormal,
)
from .inference import FitConfig, ParamDef, ParamSpace, PosteriorEnsemble, fit
from .phases import PhaseConfig

__all__ = [
    "BusDemand",
    "LoadPosterior",
    "power_factor_from_uniform",
    "draw_power_factor",
    "mean_vector",
    "sample_demand",
    "fit_load_model",
]

# network-wide power factor levels and the uniform-draw thresholds picking them
_PF_RULES = ((0.1649, 0.85), (0.27, 0.90))
_PF_DEFAULT = 0.95

# Gamma(2, 0.5) hyperprior on the shared hyperparameters (weakly informative,
# mean 4); declared here because the category priors hang off it.
_HYPER_SHAPE = 2.0
_HYPER_RATE = 0.5


def power_factor_from_uniform(u: float) -> float:
    """Map a uniform draw to the three-level network power factor."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"uniform draw outside [0, 1]: {u}")
    for threshold, pf in _PF_RULES:
        if 0.0 < u <= threshold:
            return pf
    return _PF_DEFAULT


def draw_power_factor(rng) -> float:
    return power_factor_from_uniform(rng.random())


@dataclass(frozen=True)
class BusDemand:
    """Per-phase active/reactive demand; entries are zero exactly on absent phases."""

    p_kw: np.ndarray
    q_kvar: np.ndarray
    pf: float

    def __post_init__(self) -> None:
        p = np.asarray(self.p_kw, dtype=float)
        if p.shape != (3,) or np.any(p < 0.0):
            raise ValueError("p_kw must be a nonnegative 3-vector")


def _category(config: PhaseConfig) -> str:
    n = len(config.phases)
    return ("mono", "bi", "tri")[n - 1]


def mean_vector(draw, config: PhaseConfig) -> np.ndarray:
    """Category mean demand placed on the configuration's active phases.

    Dual-phase splits give the alphabetically first active phase the
    ``delta_bi`` share; three-phase splits follow ``delta_tri``.
    """
    mu = np.zeros(3)
    active = [ord(p) - ord("A") for p in config.phase_list]
    if len(active) == 1:
        mu[active[0]] = draw["p_pot_mono"]
    elif len(active) == 2:
        pot = draw["p_pot_bi"]
        delta = draw["delta_bi"]
        mu[active[0]] = pot * delta
        mu[active[1]] = pot * (1.0 - delta)
    else:
        mu[:] = draw["p_pot_tri"] * np.asarray(draw["delta_tri"], dtype=float)
    return mu


def sample_demand(draw, config: PhaseConfig, rng, pf: float) -> BusDemand:
    """Draw one bus demand. ``pf`` is the network-level power factor,
    drawn once per network sample, not per bus."""
    mu = mean_vector(draw, config)
    sigma = float(draw["sigma_p"])
    p = np.zeros(3)
    for phase in config.phase_list:
        i = ord(phase) - ord("A")
        p[i] = sample_truncnormal(rng, mu[i], sigma, 0.0)
    q = p * math.tan(math.acos(pf))
    return BusDemand(p_kw=p, q_kvar=q, pf=pf)


@dataclass
class LoadPosterior:
    ensemble: PosteriorEnsemble

    def draw(self, index: int) -> dict:
        return self.ensemble.draw(index)


def fit_load_model(
    demands: dict[str, np.ndarray],
    allocations: dict[str, PhaseConfig],
    config: FitConfig | None = None,
) -> LoadPosterior:
    """Fit the demand hierarchy to observed per-bus 3-vectors (kW).

    Observations are grouped by each bus's configuration; entries on inactive
    phases must be zero. Empty categories fall back toward the shared
    hyperprior with a warning.
    """
    mono_rows: list[np.ndarray] = []
    bi_rows: list[np.ndarray] = []
    tri_rows: list[np.ndarray] = []
    for bus, vec in demands.items():
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (3,):
            raise ValueError(f"bus {bus}: demand must be a 3-vector")
        if np.any(vec < 0.0):
            raise ValueError(f"bus {bus}: negative demand")
        cfg = allocations[bus]
        active = [ord(p) - ord("A") for p in cfg.phase_list]
        inactive = [i for i in (0, 1, 2) if i not in active]
        if np.any(vec[inactive] != 0.0):
            raise ValueError(
                f"bus {bus}: nonzero demand on a phase absent from {cfg.name}"
            )
        row = vec[active]
        {1: mono_rows, 2: bi_rows, 3: tri_rows}[len(active)].append(row)
    if not (mono_rows or bi_rows or tri_rows):
        raise ValueError("no demand observations")
    for name, rows in (("mono", mono_rows), ("bi", bi_rows), ("tri", tri_rows)):
        if not rows:
            warnings.warn(
                f"no {name}-phase observations; its potential falls back to the "
                "shared hyperprior",
                stacklevel=2,
            )
    mono = np.array(mono_rows).reshape(-1) if mono_rows else np.empty(0)
    bi = np.array(bi_rows) if bi_rows else np.empty((0, 2))
    tri = np.array(tri_rows) if tri_rows else np.empty((0, 3))

    all_values = np.concatenate([mono, bi.ravel(), tri.ravel()])
    sigma_scale = float(np.std(all_values)) or 1.0

    space = ParamSpace(
        [
            ParamDef("alpha_hp", (), "positive"),
            ParamDef("beta_hp", (), "positive"),
            ParamDef("alpha_mono", (), "positive"),
            ParamDef("beta_mono", (), "positive"),
            ParamDef("alpha_bi", (), "positive"),
            ParamDef("beta_bi", (), "positive"),
            ParamDef("alpha_tri", (), "positive"),
            ParamDef("beta_tri", (), "positive"),
            ParamDef("p_pot_mono", (), "positive"),
            ParamDef("p_pot_bi", (), "positive"),
            ParamDef("p_pot_tri", (), "positive"),
            ParamDef("delta_bi", (), "unit"),
            ParamDef("delta_tri", (3,), "simplex"),
            ParamDef("sigma_p", (), "positive"),
        ],
        blocks=[
            ["alpha_hp", "beta_hp"],
            ["alpha_mono", "beta_mono"],
            ["alpha_bi", "beta_bi"],
            ["alpha_tri", "beta_tri"],
        ],
    )

    def logpost(v) -> float:
        lp = float(logpdf_gamma(v["alpha_hp"], _HYPER_SHAPE, _HYPER_RATE))
        lp += float(logpdf_gamma(v["beta_hp"], _HYPER_SHAPE, _HYPER_RATE))
        for cat in ("mono", "bi", "tri"):
            lp += float(logpdf_gamma(v[f"alpha_{cat}"], v["alpha_hp"], v["beta_hp"]))
            lp += float(logpdf_gamma(v[f"beta_{cat}"], v["alpha_hp"], v["beta_hp"]))
            lp += float(logpdf_gamma(v[f"p_pot_{cat}"], v[f"alpha_{cat}"], v[f"beta_{cat}"]))
        lp += float(logpdf_beta(v["delta_bi"], 2.0, 2.0))
        lp += logpdf_dirichlet(v["delta_tri"], np.array([2.0, 2.0, 2.0]))
        lp += float(logpdf_halfnormal(v["sigma_p"], sigma_scale))
        sigma = v["sigma_p"]
        if mono.size:
            lp += float(np.sum(logpdf_truncnormal(mono, v["p_pot_mono"], sigma, 0.0)))
        if bi.size:
            mu_first = v["p_pot_bi"] * v["delta_bi"]
            mu_second = v["p_pot_bi"] * (1.0 - v["delta_bi"])
            lp += float(np.sum(logpdf_truncnormal(bi[:, 0], mu_first, sigma, 0.0)))
            lp += float(np.sum(logpdf_truncnormal(bi[:, 1], mu_second, sigma, 0.0)))
        if tri.size:
            mu = v["p_pot_tri"] * v["delta_tri"]
            for i in (0, 1, 2):
                lp += float(np.sum(logpdf_truncnormal(tri[:, i], mu[i], sigma, 0.0)))
        return lp

    init = {
        "alpha_hp": 4.0,
        "beta_hp": 1.0,
        "alpha_mono": 2.0,
        "beta_mono": 1.0,
        "alpha_bi": 2.0,
        "beta_bi": 1.0,
        "alpha_tri": 2.0,
        "beta_tri": 1.0,
        "p_pot_mono": float(np.mean(mono)) if mono.size else 1.0,
        "p_pot_bi": float(np.mean(bi.sum(axis=1))) if bi.size else 1.0,
        "p_pot_tri": float(np.mean(tri.sum(axis=1))) if tri.size else 1.0,
        "delta_bi": float(np.clip(bi[:, 0].mean() / max(bi.sum(axis=1).mean(), 1e-9), 0.05, 0.95))
        if bi.size
        else 0.5,
        "delta_tri": (tri.mean(axis=0) / tri.mean(axis=0).sum())
        if tri.size and np.all(tri.mean(axis=0) > 0)
        else np.full(3, 1.0 / 3.0),
        "sigma_p": max(sigma_scale * 0.5, 1e-3),
    }
    ensemble = fit(logpost, space, config, init=init)
    return LoadPosterior(ensemble=ensemble)
