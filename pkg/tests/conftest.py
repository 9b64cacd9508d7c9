import pytest

from balancecast import SyntheticConfig, align_horizon, generate_synthetic

# Noise-free single-nonlinear-driver series: shape recovery and attribution.
CLEAN_CFG = SyntheticConfig(
    n_rows=1200, seed=5, noise_sd=0.0, spike_prob=0.0, spike_scale=60.0
)
# Realistic series with forecast noise and occasional spikes.
SPIKY_CFG = SyntheticConfig(
    n_rows=2000, seed=11, noise_sd=2.0, spike_prob=0.015, spike_scale=40.0
)


@pytest.fixture(scope="session")
def clean_data():
    return generate_synthetic(CLEAN_CFG)


@pytest.fixture(scope="session")
def spiky_data():
    return generate_synthetic(SPIKY_CFG)


@pytest.fixture(scope="session")
def aligned_spiky(spiky_data):
    dataset, _ = spiky_data
    return align_horizon(dataset, 32)
