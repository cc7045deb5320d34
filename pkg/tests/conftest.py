from __future__ import annotations

import numpy as np
import pytest

from berislab.qtensor import Params


@pytest.fixture
def params():
    return Params(eps=1.0, xi=0.0, kappa=1.0, a=-0.2, b=1.0, c=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sym_traceless(rng, shape=(), scale=1.0):
    """Components of random symmetric traceless tensors."""
    return scale * rng.standard_normal((5,) + tuple(shape))


# --- acceptance summary --------------------------------------------------------

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    num, title = mark.args
    entry = _criteria.setdefault(num, {"title": title, "failed": [], "seconds": 0.0})
    entry["seconds"] += rep.duration
    if rep.failed:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(_criteria):
        e = _criteria[num]
        status = "FAIL" if e["failed"] else "PASS"
        line = f"criterion {num}: {status}  {e['title']}  ({e['seconds']:.1f} s)"
        if e["failed"]:
            line += "  failing: " + ", ".join(e["failed"])
        terminalreporter.write_line(line)
