import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spectempo.diffusion import exact_templates
from spectempo.graphs import (ADJACENCY, NORMALIZED_LAPLACIAN, Graph,
                              ShiftConstraintSet, adjacency,
                              normalized_laplacian)


@pytest.fixture
def k2():
    return Graph(2, ((0, 1, 1.0),))


@pytest.fixture
def path3():
    return Graph(3, ((0, 1, 1.0), (1, 2, 1.0)))


@pytest.fixture
def triangle():
    return Graph(3, ((0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)))


@pytest.fixture
def cset_adj():
    return ShiftConstraintSet(ADJACENCY)


@pytest.fixture
def cset_lap():
    return ShiftConstraintSet(NORMALIZED_LAPLACIAN)


@pytest.fixture
def k2_adj_templates(k2):
    return exact_templates(adjacency(k2))


@pytest.fixture
def path3_adj_templates(path3):
    return exact_templates(adjacency(path3))


@pytest.fixture
def k2_lap_templates(k2):
    return exact_templates(normalized_laplacian(k2))


def random_orthonormal(n, rng):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q
