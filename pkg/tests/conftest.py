from __future__ import annotations

import numpy as np
import pytest

from sbc_opinion import SeedPolicy


class FixedRng:
    """Stands in for a numpy Generator and replays given values.

    ``random`` returns the queued uniforms; ``uniform``/``standard_normal``
    return the queued raw values unchanged, so a test can dictate the exact
    noise draw of a step.
    """

    def __init__(self, values):
        self.values = list(values)

    def _take(self, size):
        n = 1 if size is None else int(np.prod(size))
        out, self.values = self.values[:n], self.values[n:]
        assert len(out) == n, "FixedRng ran out of values"
        return np.array(out, dtype=float)

    def random(self, size=None):
        return self._take(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._take(size)

    def standard_normal(self, size=None):
        return self._take(size)


class FixedStream:
    def __init__(self, coins=(), noise=(), pairing=None):
        self.coin = FixedRng(coins)
        self.noise = FixedRng(noise)
        self.pairing = pairing if pairing is not None else np.random.default_rng(0)


@pytest.fixture
def seed():
    return SeedPolicy(12345)


# --- acceptance summary ----------------------------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        num, title = mark.args
        if num in _CRITERIA:       # parametrized: all cases must pass
            _, ok, prev = _CRITERIA[num]
            _CRITERIA[num] = (title, ok and rep.passed, "; ".join(filter(None, [prev, detail])))
        else:
            _CRITERIA[num] = (title, rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA, key=lambda s: (int(s.rstrip("ab")), s)):
        title, ok, detail = _CRITERIA[num]
        line = f"criterion {num:>3}: {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
