"""Shared fixtures."""

import numpy as np
import pytest

from permclt.core.rng import substream
from permclt.services import matrix_service, tableau_service


@pytest.fixture
def rng():
    return substream(12345)


@pytest.fixture
def random_matrix():
    """Centered 5 x 5 matrix of uniform scores."""
    return matrix_service.center_rows(substream(7).uniform(size=(5, 5)))


@pytest.fixture
def exceedance():
    """Exceedance score matrix factory."""
    return tableau_service.exceedance_matrix


@pytest.fixture
def csv_matrix(tmp_path):
    """Write rows to a CSV file and return its path."""

    def write(rows, name="matrix.csv"):
        path = tmp_path / name
        path.write_text("\n".join(",".join(str(v) for v in row) for row in rows) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture
def random_paths():
    """Factory for random-walk step paths on the k/n grid, (count, n+1)."""

    def make(rng, count: int, n: int, scale: float = 1.0) -> np.ndarray:
        paths = np.zeros((count, n + 1))
        paths[:, 1:] = np.cumsum(rng.standard_normal((count, n)) * scale / np.sqrt(n), axis=1)
        return paths

    return make
