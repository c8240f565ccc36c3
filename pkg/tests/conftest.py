import os

import pytest
from hypothesis import HealthCheck, settings

from bds_sim import EnvironmentPath, FunctionalModel, ToyModel, ToyParams

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def toy():
    return ToyModel()


@pytest.fixture
def toy_params():
    return ToyParams(d1=1.0, d2=2.0, b=0.2, lam=0.3, k12=1.0, k21=1.0)


@pytest.fixture
def toy_env(toy_params):
    return EnvironmentPath.constant(toy_params.regime())


def birth_only_model(p: int, rate: float) -> FunctionalModel:
    """Immigration at a constant rate into each subgroup, nothing else."""
    return FunctionalModel(p, lambda regime, t, z, ev: rate if ev.kind == "birth" else 0.0,
                           [lambda n: rate] * p, k_fn=lambda r: 1.0, sup_fn=lambda *a: 0.0,
                           name=f"immigration[{rate}]")


def pure_birth_toy(lam: float, b: float = 0.3) -> ToyParams:
    return ToyParams(d1=0.0, d2=0.0, b=b, lam=lam, k12=0.0, k21=0.0)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
