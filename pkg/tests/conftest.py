import numpy as np
import pytest

from hvfif.core import ExtendedDataSet, FactorQuad, build_univariate

# Abscissae and ordinates of the reference data set; the hidden ordinates are arbitrary.
X = (0.0, 0.25, 0.5, 0.75, 1.0)
Y = (20.0, 30.0, 10.0, 50.0, 40.0)
Z = (2.0, 3.0, 1.0, 5.0, 4.0)

EXAMPLE_A = dict(
    s=("0.3", "0.85", "0.8", "0.5"),
    s_prime=("0.8", "0.6", "0.4", "0.5"),
    s_tilde=("0", "0", "0", "0"),
    s_tilde_prime=("0.19", "0.37", "0.48", "0.43"),
)
EXAMPLE_B = dict(EXAMPLE_A, s_tilde=("0.64", "0.14", "0.19", "0.49"))
EXAMPLE_C = dict(
    s=("sin(x)", "cos(30*x)", "sin(x)", "cos(5*x)"),
    s_prime=("2.9*x", "1.9*x", "x", "x"),
    s_tilde=("0", "0", "0", "0"),
    s_tilde_prime=("0.9 - 2.9*x", "0.95 - 1.9*x", "0.9 - x", "0.99 - x"),
)
EXAMPLE_D = dict(
    EXAMPLE_C,
    s_tilde=("0.9 - abs(sin(x))", "0.89 - abs(cos(30*x))", "0.94 - abs(sin(x))", "0.9 - abs(cos(5*x))"),
)


def quads(table):
    return [FactorQuad.of(*(table[k][i] for k in FactorQuad.NAMES)) for i in range(4)]


def reference_data():
    return ExtendedDataSet(X, Y, Z)


def constant_system(c, data=None):
    data = data or reference_data()
    return build_univariate(data, [FactorQuad.constant(c)] * data.n)


def example_system(table, strict=True):
    return build_univariate(reference_data(), quads(table), strict=strict)


@pytest.fixture(scope="session")
def data():
    return reference_data()


@pytest.fixture(scope="session")
def const04():
    return constant_system(0.4)


@pytest.fixture(scope="session")
def zero_system():
    return constant_system(0.0)


@pytest.fixture(scope="session")
def example_a():
    return example_system(EXAMPLE_A)


@pytest.fixture(scope="session")
def example_c():
    return example_system(EXAMPLE_C, strict=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
