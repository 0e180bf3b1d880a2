import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qspec.definite import pointwise_context, scalar_context
from qspec.operators import profile
from qspec.spaces import SampleSpec, sample_set

settings.register_profile(
    "qspec", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("qspec")


@pytest.fixture(scope="session")
def sctx():
    return scalar_context()


@pytest.fixture(scope="session")
def ssamples(sctx):
    return sample_set(sctx.space, SampleSpec(count=1000), seed=0)


@pytest.fixture(scope="session")
def pctx():
    return pointwise_context(16)


@pytest.fixture(scope="session")
def psamples(pctx):
    return sample_set(pctx.space, SampleSpec(count=1000), seed=0)


@pytest.fixture(scope="session")
def sin_abs(sctx):
    """F(x) = sin(x)|x| on the scalar algebra, as a profile over the canonical gamma."""
    return profile(sctx.space, lambda X: np.sin(X[:, 0]), phi_range=(-1.0, 1.0), name="sin_abs")


@pytest.fixture(scope="session")
def sin_sum(pctx):
    return profile(pctx.space, lambda X: np.sin(X.sum(axis=1)), phi_range=(-1.0, 1.0), name="sin_sum")


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
