"""Problem state and the quantities shared by all MM solvers.

Array conventions used throughout the package:

* observations ``X``: ``(K, m, n)`` -- bins, channels, frames
* separation matrices ``W``: ``(K, m, m)``; row ``i`` of ``W[k]`` is ``w_i^H``
* separated signals ``Y = W @ X``: ``(K, m, n)``
* auxiliary weights ``lam``: ``(m, n)``, shared by all bins
"""

from dataclasses import dataclass, field

import numpy as np

from .contrast import EPS, ContrastModel
from .exceptions import DimensionMismatch, NotPositiveDefinite, ShapeMismatch, SingularMatrix
from .linalg import PD_EPS, eig_hermitian

__all__ = [
    "MixtureSet",
    "SeparatorState",
    "whiten_init",
    "frame_norms",
    "update_weights",
    "weighted_gram",
    "build_covariance",
    "build_covariances",
    "surrogate_value",
    "log_abs_det",
    "total_cost",
]


@dataclass
class MixtureSet:
    """``K`` complex observation matrices of shape ``(m, n)`` stacked as ``(K, m, n)``."""

    X: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X)
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3:
            raise ShapeMismatch(f"observations must have shape (K, m, n), got {X.shape}")
        K, m, n = X.shape
        if n == 0 or K == 0 or m == 0:
            raise ShapeMismatch("empty observation")
        if n < m:
            raise ShapeMismatch(f"need at least as many frames as channels (n={n} < m={m})")
        self.X = X.astype(np.complex128, copy=False)

    @property
    def K(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]

    @property
    def n(self):
        return self.X.shape[2]


@dataclass
class SeparatorState:
    """Per-bin separation matrices and separated signals.

    ``Y`` is kept equal to ``W @ X`` by every solver.
    """

    X: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    iteration: int = 0
    info: dict = field(default_factory=dict)

    @classmethod
    def from_mixture(cls, mixture, W=None):
        """Start from ``W`` (default: per-bin whitening)."""
        if not isinstance(mixture, MixtureSet):
            mixture = MixtureSet(mixture)
        X = mixture.X
        if W is None:
            W, Y = whiten_init(X)
        else:
            W = np.array(W, dtype=np.complex128)
            if W.ndim == 2:
                W = np.broadcast_to(W, (X.shape[0],) + W.shape).copy()
            if W.shape != (X.shape[0], X.shape[1], X.shape[1]):
                raise ShapeMismatch(f"W has shape {W.shape}, expected {(X.shape[0], X.shape[1], X.shape[1])}")
            Y = W @ X
        return cls(X=X, W=W, Y=Y)

    @property
    def K(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]

    @property
    def n(self):
        return self.X.shape[2]

    def copy(self):
        return SeparatorState(self.X, self.W.copy(), self.Y.copy(), self.iteration, dict(self.info))

    def consistency_error(self):
        """Relative deviation ``max |Y - W X| / max |Y|``."""
        ref = np.max(np.abs(self.Y))
        return float(np.max(np.abs(self.Y - self.W @ self.X)) / (ref if ref > 0 else 1.0))


def whiten_init(X):
    """Whitening initialization ``W = D^{-1/2} U^H`` with ``U D U^H = X X^H / n``.

    Args:
        X: Observation of one bin ``(m, n)`` or a stack ``(K, m, n)``.

    Returns:
        ``(W, Y)`` with ``Y = W X`` and ``Y Y^H / n = I``.

    Raises:
        NotPositiveDefinite: the sample covariance is rank deficient.
    """
    X = np.asarray(X, dtype=np.complex128)
    n = X.shape[-1]
    C = X @ np.swapaxes(X, -1, -2).conj() / n
    lam, U = eig_hermitian(C)
    if not np.all((lam[..., -1] > PD_EPS * lam[..., 0]) & (lam[..., 0] > 0)):
        raise NotPositiveDefinite("sample covariance is rank deficient")
    W = np.swapaxes(U, -1, -2).conj() / np.sqrt(lam)[..., :, None]
    return W, W @ X


def frame_norms(Y):
    """Norm across bins of every source at every frame, ``(m, n)``."""
    Y = np.asarray(Y)
    if Y.ndim == 2:
        Y = Y[None]
    return np.sqrt(np.einsum("kij,kij->ij", Y.real, Y.real) + np.einsum("kij,kij->ij", Y.imag, Y.imag))


def update_weights(Y, model, eps=EPS):
    """Auxiliary weights ``lam_ij = phi'(||y_ij|| + eps) / (||y_ij|| + eps)``.

    ``||y_ij||`` is the norm across bins of source ``i`` at frame ``j``.

    Args:
        Y: Separated signals ``(K, m, n)``.
        model: :class:`ContrastModel`.
        eps: Stabilizing offset.

    Returns:
        ``(m, n)`` array of positive weights.
    """
    return model.weight(frame_norms(Y), eps)


def weighted_gram(Y_block, lam_row, y_target=None):
    """``G = Y_block diag(lam) Y_block^H / 2n`` and optionally ``g = Y_block diag(lam) y_target^H / 2n``.

    Args:
        Y_block: ``(d, n)`` rows.
        lam_row: ``(n,)`` nonnegative weights.
        y_target: optional ``(n,)`` row.

    Returns:
        ``G`` of shape ``(d, d)``, or ``(G, g)`` with ``g`` of shape ``(d,)`` when
        ``y_target`` is given.
    """
    Y_block = np.atleast_2d(np.asarray(Y_block, dtype=np.complex128))
    lam_row = np.asarray(lam_row, dtype=float)
    d, n = Y_block.shape
    if lam_row.shape != (n,):
        raise DimensionMismatch("weight row length must equal the frame count")
    if d > n:
        raise DimensionMismatch("block has more rows than frames")
    weighted = Y_block * lam_row
    G = weighted @ Y_block.conj().T / (2 * n)
    if y_target is None:
        return G
    y_target = np.asarray(y_target, dtype=np.complex128).reshape(n)
    g = weighted @ y_target.conj() / (2 * n)
    return G, g


def build_covariance(X, lam_row):
    """``V = X diag(lam_row) X^H / 2n`` for one observation ``(m, n)``."""
    return weighted_gram(X, lam_row)


def build_covariances(X, lam):
    """All weighted covariances for all bins.

    Args:
        X: ``(K, m, n)`` observations.
        lam: ``(m, n)`` weights.

    Returns:
        ``(K, m, m, m)`` array ``V[k, i] = X[k] diag(lam[i]) X[k]^H / 2n``.
    """
    K, m, n = X.shape
    XH = np.swapaxes(X, -1, -2).conj()
    V = np.empty((K, lam.shape[0], m, m), dtype=np.complex128)
    for i in range(lam.shape[0]):
        V[:, i] = (X * (lam[i] / (2 * n))) @ XH
    return V


def log_abs_det(W):
    """``log |det W|`` for a matrix or stack (``-inf`` when singular)."""
    _, logabs = np.linalg.slogdet(W)
    return logabs


def surrogate_value(W, V):
    """Surrogate ``sum_i w_i^H V_i w_i - log |det W|^2``.

    Args:
        W: ``(m, m)`` or a stack ``(K, m, m)``.
        V: ``(m, m, m)`` or ``(K, m, m, m)`` with ``V[..., i, :, :] = V_i``.

    Returns:
        Float (single bin) or ``(K,)`` array.

    Raises:
        SingularMatrix: some ``W`` is singular.
    """
    W = np.asarray(W)
    V = np.asarray(V)
    # w_i^H V_i w_i with w_i^H = W[i, :]
    quad = np.einsum("...ia,...iab,...ib->...", W, V, W.conj()).real
    logdet = log_abs_det(W)
    if np.any(~np.isfinite(logdet)):
        raise SingularMatrix("separation matrix is singular")
    return quad - 2.0 * logdet


def total_cost(Y, W, model, norms=None):
    """Negative log-likelihood ``(1/n) sum_ij phi(||y_ij||) - sum_k log |det W_k|^2``.

    The normalization constant of the source model is dropped.

    Args:
        Y: ``(K, m, n)`` separated signals.
        W: ``(K, m, m)`` separation matrices.
        model: :class:`ContrastModel`.
        norms: Precomputed :func:`frame_norms` of ``Y``.

    Raises:
        SingularMatrix: some ``W_k`` is singular.
    """
    n = np.shape(Y)[-1]
    r = frame_norms(Y) if norms is None else norms
    logdet = log_abs_det(W)
    if np.any(~np.isfinite(logdet)):
        raise SingularMatrix("separation matrix is singular")
    return float(np.sum(model.phi(r)) / n - 2.0 * np.sum(logdet))
