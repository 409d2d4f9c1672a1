import math

import pytest

from ehsas.plant import PlantParams, PlantState, simulate_open_loop
from ehsas.signals import (
    MultisineSpec,
    chirp_for_band,
    excitation_band,
    multisine,
    multisine_frequencies,
)
from ehsas.sysid import Dataset, SplitSpec, arx_fit, resample_dataset, split_dataset

BANDWIDTH = 2 * math.pi
SIM_DT = 1e-3
MODEL_TS = 0.05


def plant_dataset(u, params=None):
    params = params or PlantParams()
    y = simulate_open_loop(u, PlantState.at_rest(params), params)
    return resample_dataset(Dataset(u, y), MODEL_TS)


@pytest.fixture(scope="session")
def params():
    return PlantParams()


@pytest.fixture(scope="session")
def chirp_data():
    u = chirp_for_band(*excitation_band(BANDWIDTH), 9.0, 50.0, SIM_DT)
    return plant_dataset(u)


@pytest.fixture(scope="session")
def multisine_data():
    u = multisine(MultisineSpec(3.0, tuple(multisine_frequencies(BANDWIDTH)), 50.0, SIM_DT))
    return plant_dataset(u)


@pytest.fixture(scope="session")
def chirp_model(chirp_data):
    estimation, _ = split_dataset(chirp_data, SplitSpec(0.8))
    return arx_fit(estimation, 3, 3, 1)
