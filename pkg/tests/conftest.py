import pytest

from risradar.scenario import load_config

# "A<n>" -> (passed, detail); filled by test_acceptance, printed after the run
ACCEPTANCE = {}

# interior-optimum scenario small enough for brute force over every element count
DESK_OVERRIDES = [
    "ris.l_max=40",
    "ris.g_st_db=20",
    "ris.g_sr_db=20",
    "geometry.ris_pos=[450,-30]",
    "radar.p_max=2.000000001",
    "ris.rho_s=1e-10",
    "ris.p_c=1e-10",
    "ris.a_max_db=60",
]


@pytest.fixture(scope="session")
def table1():
    return load_config("table1.json")


@pytest.fixture(scope="session")
def desk():
    return load_config("table1.json", DESK_OVERRIDES)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
