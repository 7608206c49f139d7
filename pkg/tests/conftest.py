import json

import pytest
from hypothesis import HealthCheck, settings

from blackstart import data_path, load_grid
from blackstart.simulate import RestorationScheme

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ieee39():
    return load_grid(data_path("ieee39.json"))


@pytest.fixture(scope="session")
def toy6():
    return load_grid(data_path("toy6.json"))


@pytest.fixture(scope="session")
def reference_scheme():
    with open(data_path("ieee39_reference_scheme.json")) as fh:
        return RestorationScheme.from_dict(json.load(fh))


@pytest.fixture(scope="session")
def reference_timeline(ieee39, reference_scheme):
    from blackstart.simulate import simulate

    return simulate(ieee39, reference_scheme)


@pytest.fixture
def grid_doc():
    with open(data_path("toy6.json")) as fh:
        return json.load(fh)


def pytest_terminal_summary(terminalreporter):
    from _report import lines

    out = lines()
    if out:
        terminalreporter.section("acceptance criteria")
        for line in out:
            terminalreporter.write_line(line)
