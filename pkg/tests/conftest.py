import numpy as np
import pytest

from mimolab.channel import build_los, orthogonal_beam_angles, sample_los
from mimolab.scenario import ScenarioConfig, build_table, sample_large_scale


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_config():
    return ScenarioConfig(L=3, K=4, N=32, kappa=1.0, alpha=0.2)


@pytest.fixture
def small_instance(small_config, rng):
    table = sample_large_scale(small_config)
    los = sample_los(table, rng, orthogonal=True)
    return table, los


def random_instance(rng, L=3, K=4, N=32, kappa=None, phi_design=None, orthogonal=False):
    """Random heterogeneous large-scale table with random LoS angles."""
    beta = rng.uniform(0.02, 0.3, size=(L, L, K))
    idx = np.arange(L)
    beta[idx, idx, :] = rng.uniform(0.5, 2.0, size=(L, K))
    kappa = rng.uniform(0.0, 5.0, size=(L, K)) if kappa is None else kappa
    pd = rng.uniform(0.001, 0.05) if phi_design is None else phi_design
    table = build_table(beta, kappa, N, 10 ** rng.uniform(0, 1.5), 10.0, 10.0, pd)
    return table, sample_los(table, rng, orthogonal=orthogonal)
