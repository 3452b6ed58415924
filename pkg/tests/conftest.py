import os
from pathlib import Path

import pytest

# reuse exact wait-tail tables across test sessions
os.environ.setdefault("SLAPROV_TABLE_CACHE", str(Path(__file__).resolve().parents[1] / ".cache" / "tables"))

from slaprov.domain import ServiceClass  # noqa: E402
from slaprov.workload import DistributionDescriptor  # noqa: E402


def standard_classes(d4=0.1, charges=(10, 10, 10, 10), penalties=(10, 10, 10, 10), service=None):
    service = service or DistributionDescriptor.exponential(1.0)
    gam = (2.0, 2.0, 2.0, 1.0)
    delta = (0.1, 0.04, 0.08, d4)
    return [ServiceClass(i + 1, charges[i], penalties[i], 1.0, 50, gam[i], delta[i], service) for i in range(4)]


@pytest.fixture
def classes():
    return standard_classes()


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
