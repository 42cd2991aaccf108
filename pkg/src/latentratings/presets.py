"""Bundled simulation presets and the flat key=value config format.

``study1``: homogeneous rater noise, 1000 calls x 5 ratings.
``study2``: difficulty-driven heterogeneous noise, 1500 calls x 10 ratings;
the state-regression truth is shared with study1 (recorded in the manifest).

Config files are plain text, one ``key = value`` per line, ``#`` comments.
Lists are comma-separated. Every simulate run echoes its effective config.
"""

from __future__ import annotations

from pathlib import Path

from .model import BaseParams, ConfigurationError, ExtParams
from .simulate import CovariateSpec, SimConfig

STUDY1 = {
    "preset": "study1",
    "n_calls": "1000",
    "n_ratings": "5",
    "model": "base",
    "intercept": "-1.5",
    "betas": "0.75, -0.5",
    "tau": "-0.8",
    "fpr": "0.15",
    "fnr": "0.10",
    "covariates": "normal, bernoulli:0.4",
    "treatment_prob": "0.5",
    "difficulty": "none",
    "seed": "20240509",
}

STUDY2 = {
    "preset": "study2",
    "n_calls": "1500",
    "n_ratings": "10",
    "model": "extended",
    # state-regression truth shared with study1
    "intercept": "-1.5",
    "betas": "0.75, -0.5",
    "tau": "-0.8",
    "alpha0": "-1.5",
    "alpha1": "-1.5",
    "gamma0": "3.5",
    "gamma1": "4.0",
    "covariates": "normal, bernoulli:0.4",
    "treatment_prob": "0.5",
    "difficulty": "uniform",
    "seed": "20240502",
}

PRESETS = {"study1": STUDY1, "study2": STUDY2}

# prior hyperparameter keys accepted in --priors files (PriorConfig fields)
PRIOR_KEYS = (
    "mu_theta",
    "sigma_theta",
    "mu_beta",
    "sigma_beta",
    "mu_tau",
    "sigma_tau",
    "mu_alpha0",
    "sigma_alpha0",
    "mu_alpha1",
    "sigma_alpha1",
    "mu_gamma0",
    "sigma_gamma0",
    "mu_gamma1",
    "sigma_gamma1",
)


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` config file."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text or text == "none":
        return ()
    return tuple(float(v) for v in text.split(","))


def sim_config_from_dict(cfg: dict[str, str], seed: int | None = None) -> SimConfig:
    """Build a simulation config from flat key/value strings."""
    missing = [k for k in ("n_calls", "n_ratings", "model") if k not in cfg]
    if missing:
        raise ConfigurationError(f"config missing keys: {missing}")
    model = cfg["model"]
    betas = _floats(cfg.get("betas", ""))
    if model == "base":
        params = BaseParams(
            intercept=float(cfg["intercept"]),
            betas=betas,
            tau=float(cfg.get("tau", "0")),
            fpr=float(cfg["fpr"]),
            fnr=float(cfg["fnr"]),
        )
    elif model == "extended":
        params = ExtParams(
            intercept=float(cfg["intercept"]),
            betas=betas,
            tau=float(cfg.get("tau", "0")),
            alpha0=float(cfg["alpha0"]),
            alpha1=float(cfg["alpha1"]),
            gamma0=float(cfg["gamma0"]),
            gamma1=float(cfg["gamma1"]),
        )
    else:
        raise ConfigurationError(f"unknown model {model!r}")

    cov_text = cfg.get("covariates", "").strip()
    specs = tuple(
        CovariateSpec.parse(tok, name=f"x{i + 1}")
        for i, tok in enumerate(t.strip() for t in cov_text.split(",") if t.strip())
    )
    difficulty = cfg.get("difficulty", "none").strip()
    if difficulty not in ("none", "uniform"):
        raise ConfigurationError(f"unknown difficulty distribution {difficulty!r}")
    return SimConfig(
        n_calls=int(cfg["n_calls"]),
        n_ratings=int(cfg["n_ratings"]),
        true_params=params,
        covariate_spec=specs,
        treatment_prob=float(cfg.get("treatment_prob", "0.5")),
        difficulty_uniform=difficulty == "uniform",
        seed=seed if seed is not None else int(cfg.get("seed", "0")),
    )


def effective_config(cfg: dict[str, str], seed: int | None = None) -> dict[str, str]:
    out = dict(cfg)
    if seed is not None:
        out["seed"] = str(seed)
    return out
