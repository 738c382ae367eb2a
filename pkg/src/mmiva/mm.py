"""MM outer loop: weight update followed by one inner BCD pass per bin."""

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .contrast import EPS, LAPLACE, ContrastModel
from .core import SeparatorState, frame_norms, total_cost, update_weights
from .exceptions import ConfigError, DomainError, OddChannelCount
from .ip import ip1_pass, ip2_pass
from .iss import iss_pass

__all__ = ["SOLVERS", "SolverConfig", "check_solver", "bin_chunks", "inner_pass", "mm_step", "separate"]

SOLVERS = ("ip1", "ip2", "iss1", "iss2")


@dataclass
class SolverConfig:
    """Solver choice and MM loop settings.

    ``tol`` enables early stopping on relative cost change; ``None`` runs the
    full iteration budget.
    """

    kind: str = "iss2"
    iterations: int = 50
    beta: float = 1.0
    eps: float = EPS
    seed: int = 0
    tol: Optional[float] = None

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in SOLVERS:
            raise ConfigError(f"unknown solver {self.kind!r}; choose from {SOLVERS}")
        if self.iterations < 0:
            raise ConfigError("iterations must be nonnegative")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        try:
            ContrastModel(self.beta)
        except DomainError as err:
            raise ConfigError(str(err)) from err

    @property
    def model(self):
        return ContrastModel(self.beta)


def check_solver(kind, m):
    kind = kind.lower()
    if kind not in SOLVERS:
        raise ConfigError(f"unknown solver {kind!r}; choose from {SOLVERS}")
    if kind in ("ip2", "iss2") and m % 2:
        raise OddChannelCount(f"{kind} pairs rows and needs an even channel count, got m={m}")
    return kind


CHUNK_BYTES = 1 << 21


def bin_chunks(K, m, n, chunk_bytes=CHUNK_BYTES):
    """Split ``range(K)`` into slices whose signals take about ``chunk_bytes``."""
    step = max(1, int(chunk_bytes // (16 * m * n)))
    return [slice(k, min(k + step, K)) for k in range(0, K, step)]


def _pass(kind, X, W, Y, lam):
    if kind == "ip1":
        return ip1_pass(X, W, lam)
    if kind == "ip2":
        return ip2_pass(X, W, lam)
    Y, W = iss_pass(Y, W, lam, 1 if kind == "iss1" else 2)
    return W, Y


def inner_pass(kind, X, W, Y, lam, chunk_bytes=CHUNK_BYTES):
    """Run one inner pass of ``kind`` on every bin, updating ``W`` and ``Y`` in place.

    Bins are independent given ``lam``, so they are processed in chunks
    small enough to stay in cache for the whole pass.

    Returns:
        ``(W, Y)``.
    """
    K, m, n = Y.shape
    for sl in bin_chunks(K, m, n, chunk_bytes):
        # W chunks are updated through the view; IP returns a fresh Y chunk
        _, Yc = _pass(kind, X[sl], W[sl], Y[sl], lam)
        if not np.shares_memory(Yc, Y):
            Y[sl] = Yc
    return W, Y


def mm_step(state, solver, model=LAPLACE, eps=EPS):
    """One MM iteration: recompute the weights, then one inner pass on every bin.

    Args:
        state: :class:`SeparatorState` (not modified).
        solver: One of ``ip1``, ``ip2``, ``iss1``, ``iss2``.
        model: Source contrast.
        eps: Weight stabilizer.

    Returns:
        New :class:`SeparatorState`; ``info["lam"]`` holds the weights used and
        ``info["pass_ms"]`` the wall time of the inner pass.
    """
    kind = check_solver(solver, state.m)
    lam = update_weights(state.Y, model, eps)
    W = state.W.copy()
    Y = state.Y.copy()
    t0 = time.perf_counter()
    W, Y = inner_pass(kind, state.X, W, Y, lam)
    elapsed = (time.perf_counter() - t0) * 1e3
    return SeparatorState(state.X, W, Y, state.iteration + 1, {"lam": lam, "pass_ms": elapsed})


def separate(
    X,
    solver="iss2",
    iterations=50,
    model=LAPLACE,
    eps=EPS,
    W0=None,
    tol=None,
    callback: Optional[Callable[[SeparatorState], None]] = None,
):
    """Run MM-based IVA on stacked observations ``X`` of shape ``(K, m, n)``.

    Args:
        X: Observations, or a :class:`~mmiva.core.MixtureSet`.
        solver: One of ``ip1``, ``ip2``, ``iss1``, ``iss2``.
        iterations: MM iteration budget.
        model: Source contrast. Default: Laplace.
        eps: Weight stabilizer.
        W0: Initial separation matrices; whitening when ``None``.
        tol: Stop early when the relative cost change drops below ``tol``.
        callback: Called with the state after initialization and after every
            MM iteration. Arrays are updated in place by later iterations, so
            use ``state.copy()`` to keep a snapshot.

    Returns:
        Final :class:`SeparatorState`; ``info["cost"]`` lists the cost trace.
    """
    state = SeparatorState.from_mixture(X, W0)
    kind = check_solver(solver, state.m)
    if eps <= 0:
        raise ConfigError("eps must be positive")
    W, Y = state.W, state.Y
    r = frame_norms(Y)
    costs = [total_cost(Y, W, model, r)]
    if callback is not None:
        callback(state)
    for it in range(1, iterations + 1):
        # the norms of the previous iterate serve both the cost and the new weights
        lam = model.weight(r, eps)
        t0 = time.perf_counter()
        W, Y = inner_pass(kind, state.X, W, Y, lam)
        elapsed = (time.perf_counter() - t0) * 1e3
        state = SeparatorState(state.X, W, Y, it, {"lam": lam, "pass_ms": elapsed})
        r = frame_norms(Y)
        costs.append(total_cost(Y, W, model, r))
        if callback is not None:
            callback(state)
        if tol is not None and abs(costs[-2] - costs[-1]) <= tol * max(abs(costs[-2]), 1.0):
            break
    state.info["cost"] = np.array(costs)
    return state
