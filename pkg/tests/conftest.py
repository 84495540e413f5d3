import pytest

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def verdicts(pytestconfig):
    """Criterion number -> one-line PASS/FAIL verdict, echoed in the terminal summary."""
    return pytestconfig.stash.setdefault(_RESULTS, {})


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
