import functools

import pytest
from hypothesis import HealthCheck, settings

from tepkit.cases import garver, garver_scenarios, random_instance
from tepkit.feasibility import ensure_big_m

settings.register_profile("tepkit", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("tepkit")


@functools.lru_cache(maxsize=None)
def cached_instance(seed):
    inst = random_instance(seed)
    inst.network = ensure_big_m(inst.network)
    return inst


@pytest.fixture(scope="session")
def garver_net():
    return ensure_big_m(garver())


@pytest.fixture(scope="session")
def garver_scen():
    return garver_scenarios()


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, list] = {}


def record(criterion, passed, detail=""):
    entry = ACCEPTANCE.setdefault(criterion, [True, []])
    entry[0] = entry[0] and bool(passed)
    if detail:
        entry[1].append(detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, details = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {'; '.join(details)}")
