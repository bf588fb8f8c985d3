import json
from pathlib import Path

import numpy as np
import pytest

from seqbandit import expfam
from seqbandit.harness import ExperimentConfig, run_cell

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def random_naturals(model, rng, size):
    """Natural parameters spread over a comfortable part of the domain."""
    if isinstance(model, expfam.GaussianKnownVariance):
        return rng.uniform(-3, 3, (size, 1))
    if isinstance(model, expfam.GaussianKnownMean):
        return -rng.uniform(0.1, 3, (size, 1))
    if isinstance(model, expfam.GaussianBothUnknown):
        mu = rng.uniform(-2, 2, size)
        var = rng.uniform(0.2, 4, size)
        return model.to_natural(np.stack([mu, mu**2 + var], axis=-1))
    if isinstance(model, expfam.Poisson):
        return rng.uniform(-2, 2, (size, 1))
    if isinstance(model, expfam.Bernoulli):
        return rng.uniform(-3, 3, (size, 1))
    raise TypeError(model)


ALL_FAMILIES = [
    expfam.GaussianKnownVariance(2.0),
    expfam.GaussianKnownMean(0.5),
    expfam.GaussianBothUnknown(),
    expfam.Poisson(),
    expfam.Bernoulli(),
]


@pytest.fixture(params=ALL_FAMILIES, ids=lambda m: m.name)
def family(request):
    return request.param


def instance(name):
    cfg = ExperimentConfig.load(CONFIGS / f"{name}.json")
    return cfg.structure(), cfg.true_natural


# Desk-scale mean-shift campaign shared by the policy, harness and acceptance tests.
CAMPAIGN_CELLS = [(L, 1.0, 0.5) for L in range(6)] + [(L, 0.2, 0.5) for L in (1, 3, 5)]
CAMPAIGN_TRIALS = 500


@pytest.fixture(scope="session")
def campaign():
    raw = json.loads((CONFIGS / "odd_mean.json").read_text())
    raw["trials"] = CAMPAIGN_TRIALS
    cfg = ExperimentConfig.from_dict(raw)
    d = cfg.oracle().d_star
    return {(L, g, b): run_cell(cfg, float(L), g, b, d_star=d) for L, g, b in CAMPAIGN_CELLS}
