import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion and fail on FAIL."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(label, failures, detail=""):
        line = f"{'FAIL' if failures else 'PASS'} {label}" + (f": {detail}" if detail else "")
        lines.append(line)
        print(line)
        for f in failures:
            print("    " + f)
        assert not failures, f"{label}: " + "; ".join(failures)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
