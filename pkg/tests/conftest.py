import pytest

from gencp.mock import build_mock, default_corpus

TINY = "the little boy ran . the little girl ran ."


def constant_clock():
    return 0.0


@pytest.fixture(scope="session")
def mock():
    return build_mock(default_corpus(), n=2, seed=0)


@pytest.fixture(scope="session")
def tiny():
    return build_mock(TINY, n=2, seed=0, split_min=None)
