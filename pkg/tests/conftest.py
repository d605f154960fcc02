import numpy as np
import pytest
from scipy import sparse

from snacks.data_io import Dataset


def random_dataset(n, d, seed=0, density=None, scale=1.0):
    rng = np.random.default_rng(seed)
    if density is None:
        X = sparse.csr_matrix(scale * rng.standard_normal((n, d)))
    else:
        X = sparse.random(n, d, density=density, random_state=seed, format="csr")
        X.data = scale * rng.standard_normal(X.data.size)
    y = rng.choice([-1.0, 1.0], size=n)
    return Dataset(X, y)


@pytest.fixture
def make_dataset():
    return random_dataset
