import warnings

import numpy as np
import pytest

from nbrewire.graphcore import build_halfedge_space, sample_uniform_configuration

# numba emits a TBB version notice on this box; irrelevant to correctness
warnings.filterwarnings("ignore", message=".*TBB.*")


@pytest.fixture
def cubic4():
    """3-regular on 4 vertices: |H| = 12."""
    return build_halfedge_space([3, 3, 3, 3])


@pytest.fixture
def mixed_space():
    """Small mixed-degree space."""
    return build_halfedge_space([3, 4, 2, 3, 2, 4])


@pytest.fixture
def cubic_medium():
    return build_halfedge_space([3] * 200)


@pytest.fixture
def rng0():
    return np.random.default_rng(0)


def sampled_config(space, seed=0):
    return sample_uniform_configuration(space, np.random.default_rng(seed))


def acceptance_line(cid: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {cid}: {'PASS' if ok else 'FAIL'} -- {detail}")
