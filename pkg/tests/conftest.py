import pytest

import steklovlab as sl
from steklovlab.assembly import assemble_gram
from steklovlab.spectrum import solve_eigs
from steklovlab.weights import BOUNDARY, INTERIOR, MatrixField


def steklov_fields(k=1, a=0.0, sigma=0.0, m=0.0, p=1.0):
    """Constant weight fields (scalar values mean multiples of the identity)."""
    return (
        MatrixField.constant("A", k, a, INTERIOR),
        MatrixField.constant("Sigma", k, sigma, BOUNDARY),
        MatrixField.constant("M", k, m, INTERIOR),
        MatrixField.constant("P", k, p, BOUNDARY),
    )


@pytest.fixture(scope="session")
def disk64():
    return sl.make_unit_disk(64, 16)


@pytest.fixture(scope="session")
def steklov64(disk64):
    """Pure Steklov problem on the s=64, r=16 disk polygon."""
    gram = assemble_gram(disk64, *steklov_fields())
    return disk64, gram, solve_eigs(gram, count=8)


@pytest.fixture(scope="session")
def robin64(disk64):
    """Robin-shifted problem (unit boundary term) on the same mesh."""
    gram = assemble_gram(disk64, *steklov_fields(sigma=1.0))
    return disk64, gram, solve_eigs(gram, count=8)
