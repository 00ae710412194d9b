import numpy as np
import pytest

from fracbem.geometry import Disk, discretize_boundary, generate_interior_nodes


@pytest.fixture(scope="session")
def disk_mesh_100():
    return discretize_boundary(Disk(1.0), 100)


@pytest.fixture(scope="session")
def disk_interior_25():
    return generate_interior_nodes(Disk(1.0), 25)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def report(request):
    """Record one acceptance line ``criterion n: PASS|FAIL detail``; returns the verdict."""
    def record(number, checks: dict, detail: str) -> bool:
        ok = all(checks.values())
        failed = [name for name, good in checks.items() if not good]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        if failed:
            line += f"  [failed: {', '.join(failed)}]"
        request.config.stash[_ACCEPTANCE_KEY].append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
