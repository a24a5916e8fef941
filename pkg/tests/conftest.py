import itertools

import numpy as np
import pytest

_ACCEPTANCE = pytest.StashKey[list]()


def all_permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp)


def brute_force_min(c: np.ndarray) -> float:
    """Minimum of sum_i c[i, p[i]] over every permutation p."""
    perms = all_permutations(c.shape[0])
    return float(c[np.arange(c.shape[0]), perms].sum(axis=1).min())


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, passed: bool, detail: str) -> None:
        lines.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
