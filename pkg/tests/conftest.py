"""Shared fixtures and random-instance helpers."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_hpd(rng, m, cond=None):
    """Random Hermitian PD matrix; ``cond`` fixes the condition number."""
    Q, _ = np.linalg.qr(crandn(rng, m, m))
    if cond is None:
        lam = rng.uniform(0.5, 3.0, size=m)
    else:
        lam = np.geomspace(1.0, 1.0 / cond, m)
    return (Q * lam) @ Q.conj().T


def random_problem(rng, K, m, n):
    """Observations with super-Gaussian frame energy, plus positive weights."""
    X = crandn(rng, K, m, n) * rng.exponential(size=(1, 1, n))
    lam = rng.uniform(0.2, 3.0, size=(m, n))
    return X, lam


def surrogate_from_y(Y, W, lam):
    """Per-bin surrogate ``sum_i (1/2n) sum_j lam_ij |y_ij|^2 - log |det W|^2`` computed from ``Y``."""
    n = Y.shape[-1]
    quad = np.sum(lam * np.abs(Y) ** 2, axis=(-2, -1)) / (2 * n)
    return quad - 2.0 * np.linalg.slogdet(W)[1]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_REPORT = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one acceptance verdict line; lines are printed in the terminal summary."""
    lines = request.config.stash.setdefault(_REPORT, [])

    def record(number, title, ok, detail, seconds):
        lines.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail} | {seconds:.1f} s")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_REPORT, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
