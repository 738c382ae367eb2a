"""Iterative projection: closed-form updates of one or two rows of ``W``."""

import numpy as np

from .core import build_covariances
from .exceptions import NotPositiveDefinite, OddChannelCount, SingularMatrix
from .iss import solve_2x2
from .linalg import check_pd_2x2, inv_2x2

__all__ = ["ip1_row_update", "ip1_pass", "ip2_pair_update", "ip2_pass"]


def _solve(A, B):
    try:
        return np.linalg.solve(A, B)
    except np.linalg.LinAlgError as err:
        raise SingularMatrix(str(err)) from err


def ip1_row_update(W, V_l, l):
    """New ``w_l`` minimizing the surrogate over row ``l`` with the other rows fixed.

    ``u = (W V_l)^{-1} e_l``, ``w_l = u / sqrt(u^H V_l u)``. The caller stores
    ``w_l^H`` as row ``l`` of ``W``.

    Args:
        W: ``(m, m)`` or ``(K, m, m)``.
        V_l: matching ``(m, m)`` or ``(K, m, m)`` weighted covariance.
        l: Row index.

    Returns:
        ``w_l`` with shape ``(m,)`` or ``(K, m)``.

    Raises:
        SingularMatrix: ``W V_l`` is singular.
    """
    W = np.asarray(W)
    m = W.shape[-1]
    e = np.zeros(W.shape[:-2] + (m, 1), dtype=np.complex128)
    e[..., l, 0] = 1.0
    u = _solve(W @ V_l, e)[..., 0]
    norm = np.einsum("...a,...ab,...b->...", u.conj(), V_l, u).real
    if np.any(norm <= 0):
        raise NotPositiveDefinite("weighted covariance is not positive definite")
    return u / np.sqrt(norm)[..., None]


def ip1_pass(X, W, lam):
    """Sweep ``l = 0..m-1`` with :func:`ip1_row_update`.

    ``W`` is updated in place; returns ``(W, W @ X)``.
    """
    V = build_covariances(X, lam)
    for l in range(W.shape[-1]):
        W[:, l, :] = ip1_row_update(W, V[:, l], l).conj()
    return W, W @ X


def ip2_pair_update(W, V_p, V_q, p, q):
    """Joint global minimizer of the surrogate over rows ``p`` and ``q``.

    With ``E = [e_p, e_q]`` and ``U_i = (W V_i)^{-1} E``, the optimal row
    ``w_i`` lies in the range of ``U_i``. Writing ``w_i = U_i Gt_i^{-1} r_i``
    with ``Gt_i = U_i^H V_i U_i`` turns the pair problem into the 2x2
    problem of :func:`solve_2x2` with inputs ``(Gt_p^{-1}, Gt_q^{-1})``.

    Args:
        W: ``(m, m)`` or ``(K, m, m)``.
        V_p, V_q: weighted covariances of rows ``p`` and ``q``.
        p, q: Distinct row indices.

    Returns:
        ``(w_p, w_q)``, each ``(m,)`` or ``(K, m)``, phase-aligned with the
        current rows ``p`` and ``q``.

    Raises:
        SingularMatrix: ``W V_i`` is singular.
        NotPositiveDefinite: a reduced Gram matrix fails the PD test.
    """
    if p == q:
        raise ValueError("p and q must differ")
    W = np.asarray(W)
    m = W.shape[-1]
    E = np.zeros(W.shape[:-2] + (m, 2), dtype=np.complex128)
    E[..., p, 0] = 1.0
    E[..., q, 1] = 1.0

    V = np.stack([V_p, V_q], axis=-3)
    U = _solve(W[..., None, :, :] @ V, E[..., None, :, :])
    Gt = np.swapaxes(U, -1, -2).conj() @ V @ U
    Gt = 0.5 * (Gt + np.swapaxes(Gt, -1, -2).conj())
    check_pd_2x2(Gt)
    Gt_inv = inv_2x2(Gt)

    R = solve_2x2(Gt_inv[..., 0, :, :], Gt_inv[..., 1, :, :])
    h = Gt_inv @ R.conj()[..., None]
    w = (U @ h)[..., 0]
    # rows are optimal up to a unit phase; keep the phase of the current rows so fixed points stay fixed
    old = W[..., [p, q], :].conj()
    c = np.einsum("...ia,...ia->...i", old.conj(), w)
    mag = np.abs(c)
    w *= np.where(mag > 0, c.conj() / np.where(mag > 0, mag, 1.0), 1.0)[..., None]
    return w[..., 0, :], w[..., 1, :]


def ip2_pass(X, W, lam):
    """Sweep the disjoint pairs ``(0, 1), (2, 3), ...`` with :func:`ip2_pair_update`.

    ``W`` is updated in place; returns ``(W, W @ X)``.

    Raises:
        OddChannelCount: ``m`` is odd.
    """
    m = W.shape[-1]
    if m % 2:
        raise OddChannelCount(f"IP2 needs an even channel count, got m={m}")
    V = build_covariances(X, lam)
    for p in range(0, m, 2):
        q = p + 1
        w_p, w_q = ip2_pair_update(W, V[:, p], V[:, q], p, q)
        W[:, p, :] = w_p.conj()
        W[:, q, :] = w_q.conj()
    return W, W @ X
