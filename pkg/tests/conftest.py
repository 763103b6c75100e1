import pytest

from polarot.autgroup import BitPermutation
from polarot.construct import mi_profile
from polarot.optimize import inner_topk

# sigma_2 of the n=16 worked example: swaps the two most significant bits
SIGMA2 = BitPermutation((0, 1, 3, 2))


@pytest.fixture(scope="session")
def profile16():
    """GA profile for n=16 at channel mutual information 1/2."""
    return mi_profile(4, i0=0.5)


@pytest.fixture(scope="session")
def sigma2():
    return SIGMA2


@pytest.fixture(scope="session")
def selection16(profile16):
    return inner_topk(SIGMA2, profile16, 2)


def idx1(*idx):
    """1-based indices to 0-based."""
    return tuple(i - 1 for i in idx)
