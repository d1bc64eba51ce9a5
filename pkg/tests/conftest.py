import numpy as np
import pytest

from ufgkit.exprparse import parse_expr
from ufgkit.liealg import VectorField
from ufgkit.sdesim.model import SdeModel


def vf(components, params=("k", "a", "c")):
    """Vector field from component strings."""
    return VectorField([parse_expr(c, len(components), params) for c in components])


def grusin_fields():
    return [vf(["k*x", "0"]), vf(["0", "x"])]


def heisenberg_fields():
    return [vf(["-k*x", "-k*y", "-2*k*z"]), vf(["0", "0", "-y"]), vf(["0", "1", "x"])]


def ou_fields(drift="a*x"):
    return [vf([drift]), vf(["1"])]


@pytest.fixture
def grusin():
    return SdeModel(grusin_fields(), {"k": 1.0}, "grusin")


@pytest.fixture
def heisenberg():
    return SdeModel(heisenberg_fields(), {"k": 1.0}, "heisenberg")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
