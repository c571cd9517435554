import numpy as np
import pytest
import torch

from layoutdiff.schema import builtin_schema

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def toy():
    return builtin_schema("toy")


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
