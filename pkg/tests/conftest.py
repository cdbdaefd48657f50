import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def expm_series(a: np.ndarray, terms: int = 30) -> np.ndarray:
    """Truncated matrix-power exponential; independent oracle for exp maps."""
    out = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out
