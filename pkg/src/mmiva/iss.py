"""Iterative source steering with blocks of one or two mixing-matrix columns.

One sub-step updates a block of ``d`` rows of ``(W, Y)`` (the "lead" block)
by the multiplicative transform

    T = [[P, 0],
         [Q, I]]

applied as ``W <- T W`` and ``Y <- T Y`` (rows reordered so the lead block
comes first). ``Q`` has a closed form for any ``d``; ``P`` has one for
``d = 1`` (scalar rescale) and ``d = 2`` (2x2 generalized eigenproblem).

Instead of physically rotating the rows of ``(W, Y, lam)`` between
sub-steps, the pass walks over the blocks by index, which is the same
sequence of updates and leaves the row order unchanged.
"""

from typing import NamedTuple

import numpy as np

from .exceptions import IndivisibleBlock, NotPositiveDefinite, NumericalBreakdown
from .linalg import check_pd_2x2, inv_2x2

__all__ = [
    "TwoByTwoSolution",
    "solve_2x2",
    "block_objective",
    "block_rotation",
    "lead_grams",
    "iss_q_step",
    "iss_p_step",
    "iss_pass",
    "iss1_pass",
    "iss2_pass",
]

DEGENERATE_TOL = 1e-12
DISCRIMINANT_TOL = 1e-10


class TwoByTwoSolution(NamedTuple):
    H: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    P: np.ndarray


def _sqnorm(x, y):
    return x.real**2 + x.imag**2 + y.real**2 + y.imag**2


def _quad(a, b, d, x, y):
    # [x, y]^H [[a, b], [b*, d]] [x, y] with a, d real
    return a * (x.real**2 + x.imag**2) + d * (y.real**2 + y.imag**2) + 2.0 * (x.conj() * b * y).real


def solve_2x2(G1, G2, full=False):
    """Global minimizer of ``p_1^H G1 p_1 + p_2^H G2 p_2 - log |det P|^2``.

    ``P = [p_1, p_2]^H``. With ``H = G1^{-1} G2`` and its eigenvalues
    ``theta_1 >= theta_2``, row ``i`` of ``P`` is the eigenvector for
    ``theta_i`` scaled to ``p_i^H G_i p_i = 1``.

    Args:
        G1, G2: Hermitian positive definite ``(2, 2)`` matrices or stacks.
        full: Return a :class:`TwoByTwoSolution` instead of ``P`` alone.

    Raises:
        NotPositiveDefinite: ``G1`` or ``G2`` fails the PD test.
        NumericalBreakdown: the discriminant is significantly negative.
    """
    G1 = np.asarray(G1, dtype=np.complex128)
    G2 = np.asarray(G2, dtype=np.complex128)
    check_pd_2x2(G1)
    check_pd_2x2(G2)
    return _solve_2x2(G1, G2, full)


def _solve_2x2(G1, G2, full=False):
    # H = G1^{-1} G2 through the adjugate of G1
    a1, b1, d1 = G1[..., 0, 0].real, G1[..., 0, 1], G1[..., 1, 1].real
    a2, b2, d2 = G2[..., 0, 0].real, G2[..., 0, 1], G2[..., 1, 1].real
    det1 = a1 * d1 - (b1.real**2 + b1.imag**2)
    h11 = (d1 * a2 - b1 * b2.conj()) / det1
    h12 = (d1 * b2 - b1 * d2) / det1
    h21 = (a1 * b2.conj() - b1.conj() * a2) / det1
    h22 = (a1 * d2 - b1.conj() * b2) / det1
    scale = np.maximum(np.maximum(np.abs(h11), np.abs(h12)), np.maximum(np.abs(h21), np.abs(h22)))

    # eigenvalues of G1^{-1} G2 are real and positive
    tr = h11.real + h22.real
    det = (a2 * d2 - (b2.real**2 + b2.imag**2)) / det1
    disc = tr * tr - 4.0 * det
    if (disc < -DISCRIMINANT_TOL * scale**2).any():
        raise NumericalBreakdown("negative discriminant in the 2x2 eigenproblem")
    theta1 = 0.5 * (tr + np.sqrt(np.maximum(disc, 0.0)))
    theta2 = det / theta1

    # two algebraically equivalent eigenvector formulas; keep the better conditioned pair
    a11, a12 = h22 - theta1, -h21
    a21, a22 = -h12, h11 - theta2
    b11, b12 = -h12, h11 - theta1
    b21, b22 = h22 - theta2, -h21
    norm_a = np.minimum(_sqnorm(a11, a12), _sqnorm(a21, a22))
    norm_b = np.minimum(_sqnorm(b11, b12), _sqnorm(b21, b22))
    use_a = norm_a >= norm_b
    u = np.empty(G1.shape, dtype=np.complex128)
    u[..., 0, 0] = np.where(use_a, a11, b11)
    u[..., 0, 1] = np.where(use_a, a12, b12)
    u[..., 1, 0] = np.where(use_a, a21, b21)
    u[..., 1, 1] = np.where(use_a, a22, b22)

    # H close to c I: every vector is an eigenvector
    degenerate = np.maximum(norm_a, norm_b) < (DEGENERATE_TOL * scale) ** 2
    if degenerate.any():
        u[degenerate] = np.eye(2)

    # row i of P is p_i^H = u_i^H / sqrt(u_i^H G_i u_i)
    P = u.conj()
    P[..., 0, :] /= np.sqrt(_quad(a1, b1, d1, u[..., 0, 0], u[..., 0, 1]))[..., None]
    P[..., 1, :] /= np.sqrt(_quad(a2, b2, d2, u[..., 1, 0], u[..., 1, 1]))[..., None]

    if full:
        H = np.stack([np.stack([h11, h12], -1), np.stack([h21, h22], -1)], -2)
        return TwoByTwoSolution(H=H, theta=np.stack([theta1, theta2], axis=-1), u=u, P=P)
    return P


def block_objective(P, G):
    """``sum_i p_i^H G_i p_i - log |det P|^2`` for ``P = [p_1, ..., p_d]^H``.

    Args:
        P: ``(..., d, d)``.
        G: ``(..., d, d, d)`` with ``G[..., i, :, :] = G_i``.
    """
    quad = np.einsum("...ia,...iab,...ib->...", P, G, P.conj()).real
    return quad - 2.0 * np.linalg.slogdet(P)[1]


def block_rotation(m, d, power=1):
    """Row permutation of the block rotation matrix raised to ``power``.

    ``M[block_rotation(m, d, l)]`` moves block ``l`` (0-based) to the top,
    keeping the cyclic order of the remaining blocks.
    """
    if d < 1 or m % d:
        raise IndivisibleBlock(f"block size {d} does not divide m={m}")
    return np.roll(np.arange(m), -power * d)


def lead_grams(Y, lam, lead, rows):
    """Weighted Gram matrices of the lead block for the given rows.

    Returns ``G[k, r] = Y[k, lead] diag(lam[rows[r]]) Y[k, lead]^H / 2n``,
    shape ``(K, len(rows), d, d)``.
    """
    K, _, n = Y.shape
    Yl = Y[:, lead, :]
    d = Yl.shape[1]
    outer = (Yl[:, :, None, :] * Yl[:, None, :, :].conj()).reshape(K, d * d, n)
    G = outer @ (lam[rows].T / (2 * n))
    return G.reshape(K, d, d, len(rows)).transpose(0, 3, 1, 2)


def _as_index(lead, d=None):
    lead = np.atleast_1d(np.asarray(lead, dtype=int))
    if d is not None and lead.size != d:
        raise IndivisibleBlock(f"lead block has {lead.size} rows, expected {d}")
    return lead


def iss_q_step(Y, W, lam, lead):
    """Closed-form update of the non-lead rows (the ``Q`` part of ``T``).

    For every row ``i`` outside ``lead``: ``q_i = -G_i^{-1} g_i`` and
    ``Y_i <- Y_i + q_i^H Y_lead``; ``W`` rows are updated identically.
    ``Y`` and ``W`` are modified in place.

    Args:
        Y: ``(K, m, n)`` separated signals.
        W: ``(K, m, m)`` separation matrices, or ``None`` to skip.
        lam: ``(m, n)`` weights.
        lead: Indices of the ``d`` lead rows.

    Returns:
        ``Q`` of shape ``(K, m - d, d)`` (rows ordered like the non-lead rows).

    Raises:
        NotPositiveDefinite: a ``G_i`` is not positive definite.
    """
    K, m, n = Y.shape
    lead = _as_index(lead)
    d = lead.size
    rest = np.setdiff1d(np.arange(m), lead)
    if rest.size == 0:
        return np.zeros((K, 0, d), dtype=np.complex128)
    Yl = Y[:, lead, :]
    G = lead_grams(Y, lam, lead, rest)
    # g[k, r, a] = sum_j lam[i, j] Yl[k, a, j] conj(Y[k, i, j]) / 2n with i = rest[r]
    B = Y[:, rest, :].conj() * (lam[rest] / (2 * n))
    g = B @ np.swapaxes(Yl, -1, -2)

    if d == 1:
        G = G[..., 0, 0].real
        if np.any(G <= 0):
            raise NotPositiveDefinite("weighted source power vanished")
        q = -g / G[..., None]
    elif d == 2:
        check_pd_2x2(G)
        q = -(inv_2x2(G) @ g[..., None])[..., 0]
    else:
        q = -np.linalg.solve(G, g[..., None])[..., 0]

    qh = q.conj()
    Y[:, rest, :] += qh @ Yl
    if W is not None:
        W[:, rest, :] += qh @ W[:, lead, :]
    return qh


def iss_p_step(Y, W, lam, lead):
    """Closed-form update of the lead rows (the ``P`` part of ``T``).

    ``d = 1``: ``p = G^{-1/2}``; ``d = 2``: ``P`` from :func:`solve_2x2`.
    ``Y`` and ``W`` are modified in place.

    Returns:
        ``P`` of shape ``(K, d, d)``.
    """
    lead = _as_index(lead)
    d = lead.size
    G = lead_grams(Y, lam, lead, lead)
    if d == 1:
        g = G[:, 0, 0, 0].real
        if np.any(g <= 0):
            raise NotPositiveDefinite("weighted source power vanished")
        P = (1.0 / np.sqrt(g))[:, None, None].astype(np.complex128)
    elif d == 2:
        P = solve_2x2(G[:, 0], G[:, 1])
    else:
        raise IndivisibleBlock("closed-form P update exists only for d in {1, 2}")
    Y[:, lead, :] = P @ Y[:, lead, :]
    if W is not None:
        W[:, lead, :] = P @ W[:, lead, :]
    return P


def _default_blocks(m, d):
    if d not in (1, 2):
        raise IndivisibleBlock(f"block size must be 1 or 2, got {d}")
    if m % d:
        raise IndivisibleBlock(f"block size {d} does not divide m={m}")
    return [tuple(range(l * d, (l + 1) * d)) for l in range(m // d)]


def _rest_parts(lead, m):
    # non-lead rows as basic slices when the lead block is contiguous (views, no gathers)
    if np.all(np.diff(lead) == 1):
        lo, hi = int(lead[0]), int(lead[-1]) + 1
        return slice(lo, hi), [p for p in (slice(0, lo), slice(hi, m)) if p.stop > p.start]
    rest = np.setdiff1d(np.arange(m), lead)
    return lead, [rest] if rest.size else []


def _substep(Y, W, lam_t, lam_s, lead):
    # Fused Q step + P step sharing one set of Gram matrices.
    K, m, n = Y.shape
    d = lead.size
    rows, parts = _rest_parts(lead, m)
    Yl = Y[:, rows, :].copy()
    Wl = W[:, rows, :].copy() if W is not None else None
    YlH = np.swapaxes(Yl, -1, -2).conj()
    outer = (Yl[:, :, None, :] * Yl[:, None, :, :].conj()).reshape(K, d * d, n)
    G = (outer @ lam_t).reshape(K, d, d, m).transpose(0, 3, 1, 2)
    if d == 1:
        G = G[..., 0, 0].real
        if not (G > 0).all():
            raise NotPositiveDefinite("weighted source power vanished")
    else:
        check_pd_2x2(G)

    Q = []
    for part in parts:
        # g_i = Yl diag(lam_i) y_i^H / 2n, stored conjugated as rows
        gh = (Y[:, part] * lam_s[part]) @ YlH
        if d == 1:
            qh = -gh / G[:, part, None]
        else:
            qh = -(gh[..., None, :] @ np.swapaxes(inv_2x2(G[:, part]), -1, -2).conj())[..., 0, :]
        Y[:, part] += qh @ Yl
        if W is not None:
            W[:, part] += qh @ Wl
        Q.append(qh)
    Q = np.concatenate(Q, axis=1) if Q else np.zeros((K, 0, d), dtype=np.complex128)

    if d == 1:
        P = (1.0 / np.sqrt(G[:, lead[0]]))[:, None, None].astype(np.complex128)
        Y[:, rows] = P * Yl
        if W is not None:
            W[:, rows] = P * Wl
    else:
        P = _solve_2x2(G[:, lead[0]], G[:, lead[1]])
        Y[:, rows] = P @ Yl
        if W is not None:
            W[:, rows] = P @ Wl
    return P, Q


def iss_pass(Y, W, lam, d, blocks=None, on_substep=None):
    """One inner pass of ISS_d: every block of ``d`` rows is updated once.

    Each sub-step is :func:`iss_q_step` followed by :func:`iss_p_step` on the
    same lead block, computed with a single set of Gram matrices.

    Args:
        Y: ``(K, m, n)``; updated in place.
        W: ``(K, m, m)`` or ``None``; updated in place.
        lam: ``(m, n)`` weights (not modified).
        d: Block size, 1 or 2.
        blocks: Optional sequence of row-index tuples giving the sweep order.
            Default: ``(0..d-1), (d..2d-1), ...``.
        on_substep: Optional ``callable(l, lead, P, Q)`` called after each
            sub-step; ``Q`` is ``(K, m - d, d)`` in non-lead row order.

    Returns:
        ``(Y, W)``.

    Raises:
        IndivisibleBlock: ``d`` not in ``{1, 2}`` or ``d`` does not divide ``m``.
        NotPositiveDefinite: a weighted Gram matrix is not positive definite.
    """
    K, m, n = Y.shape
    default = _default_blocks(m, d)
    if blocks is None:
        blocks = default
    lam_t = (lam.T / (2 * n)).astype(np.complex128)
    lam_s = lam / (2 * n)
    for l, lead in enumerate(blocks):
        lead = _as_index(lead, d)
        P, Q = _substep(Y, W, lam_t, lam_s, lead)
        if on_substep is not None:
            on_substep(l, lead, P, Q)
    return Y, W


def iss1_pass(Y, W, lam):
    return iss_pass(Y, W, lam, 1)


def iss2_pass(Y, W, lam):
    return iss_pass(Y, W, lam, 2)
