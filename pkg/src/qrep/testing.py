import typing as t

import numpy as np
import pytest
from _pytest.fixtures import SubRequest

from qrep.config import DEFAULT_TOLERANCES, Tolerances
from qrep.examples import voiculescu_quasi_rep
from qrep.words import QuasiRep

F = t.TypeVar("F", bound=t.Callable[..., t.Any])

DEFAULT_VOICULESCU_DIM = 32


@pytest.fixture
def voiculescu(request: SubRequest) -> QuasiRep:
    """Quasi-representation of Z2 spanned by the Voiculescu pair."""
    if hasattr(request, "param"):
        params = dict(request.param)
    else:
        params = {}
    return voiculescu_quasi_rep(params.get("n", DEFAULT_VOICULESCU_DIM))


def parametrize_voiculescu(*n: int) -> t.Callable[[F], F]:
    """Run a test once per dimension of the Voiculescu pair."""
    sizes = n or (DEFAULT_VOICULESCU_DIM,)
    return pytest.mark.parametrize(
        "voiculescu",
        [{"n": size} for size in sizes],
        indirect=True,
        ids=[f"n={size}" for size in sizes],
    )


@pytest.fixture
def rng(request: SubRequest) -> np.random.Generator:
    """Seeded generator, parametrizable with an integer seed."""
    return np.random.default_rng(getattr(request, "param", 20240607))


@pytest.fixture
def tolerances() -> Tolerances:
    return DEFAULT_TOLERANCES
