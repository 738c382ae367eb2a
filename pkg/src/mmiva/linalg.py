"""Dense kernels for small complex Hermitian (positive definite) matrices.

Every public function accepts either a single ``(m, m)`` matrix or a stack
``(..., m, m)``; stacks are processed element-wise.
"""

import numpy as np

from .exceptions import ConvergenceFailure, DimensionMismatch, NotPositiveDefinite

HERMITIAN_TOL = 1e-10
PD_EPS = 1e-12
JACOBI_SWEEPS = 100
JACOBI_TOL = 1e-13
# off-diagonal entries below this fraction of ||C|| are treated as zero
JACOBI_SKIP = 1e-4 * np.finfo(float).eps

__all__ = [
    "hermitian_part",
    "is_hermitian",
    "check_hermitian_pd",
    "check_pd_2x2",
    "inv_2x2",
    "herm_inv",
    "eig_hermitian",
    "herm_inv_sqrt",
]


def _as_square(M):
    M = np.asarray(M)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise DimensionMismatch(f"expected square matrices, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M.astype(np.complex128, copy=False)


def hermitian_part(M):
    """Return ``(M + M^H) / 2``."""
    return 0.5 * (M + np.swapaxes(M, -1, -2).conj())


def is_hermitian(M, tol=HERMITIAN_TOL):
    M = np.asarray(M)
    scale = np.max(np.abs(M), axis=(-2, -1))
    err = np.max(np.abs(M - np.swapaxes(M, -1, -2).conj()), axis=(-2, -1))
    return bool(np.all(err <= tol * scale))


def check_hermitian_pd(M, tol=HERMITIAN_TOL, eps=PD_EPS):
    """Validate that ``M`` is Hermitian positive definite.

    Positive definiteness is tested as ``lambda_min > eps * lambda_max``.
    Returns the exactly-Hermitian part of ``M``.

    Raises:
        DimensionMismatch: ``M`` is not square.
        NotPositiveDefinite: ``M`` is not Hermitian or fails the eigenvalue test.
    """
    M = _as_square(M)
    if not is_hermitian(M, tol):
        raise NotPositiveDefinite("matrix is not Hermitian")
    M = hermitian_part(M)
    lam = np.linalg.eigvalsh(M)
    if np.any(lam[..., 0] <= eps * lam[..., -1]) or np.any(lam[..., -1] <= 0):
        raise NotPositiveDefinite(
            f"smallest eigenvalue {np.min(lam[..., 0]):.3e} fails the PD test"
        )
    return M


def check_pd_2x2(G):
    """Fast positive definiteness test for stacks of Hermitian 2x2 matrices."""
    a = G[..., 0, 0].real
    c = G[..., 1, 1].real
    b = G[..., 0, 1]
    tr = a + c
    det = a * c - (b.real**2 + b.imag**2)
    # lmin > eps * lmax  <=>  det > eps * lmax**2 (approximately, with lmax <= tr)
    if not np.logical_and(tr > 0, det > PD_EPS * tr * tr).all():
        raise NotPositiveDefinite("2x2 block Gram matrix is not positive definite")


def inv_2x2(M):
    """Inverse of a stack of 2x2 matrices via the adjugate formula.

    No validation; callers in the solver hot path guarantee nonsingularity.
    """
    a, b = M[..., 0, 0], M[..., 0, 1]
    c, d = M[..., 1, 0], M[..., 1, 1]
    det = a * d - b * c
    out = np.empty(M.shape, dtype=np.result_type(M, np.complex128))
    out[..., 0, 0] = d / det
    out[..., 0, 1] = -b / det
    out[..., 1, 0] = -c / det
    out[..., 1, 1] = a / det
    return out


def herm_inv(G):
    """Inverse of a Hermitian positive definite matrix (or stack).

    Raises:
        DimensionMismatch: ``G`` is not square.
        NotPositiveDefinite: ``G`` fails the PD test.
    """
    G = check_hermitian_pd(G)
    if G.shape[-1] == 2:
        return hermitian_part(inv_2x2(G))
    L = np.linalg.cholesky(G)
    eye = np.broadcast_to(np.eye(G.shape[-1], dtype=G.dtype), G.shape)
    Linv = np.linalg.solve(L, eye)
    return np.swapaxes(Linv, -1, -2).conj() @ Linv


def eig_hermitian(C, max_sweeps=JACOBI_SWEEPS, tol=JACOBI_TOL):
    """Eigendecomposition of Hermitian matrices by cyclic complex Jacobi rotations.

    Args:
        C: Hermitian matrix or stack, shape ``(..., m, m)``.
        max_sweeps: Budget of full cyclic sweeps.
        tol: Convergence threshold on the off-diagonal Frobenius norm,
            relative to the Frobenius norm of ``C``.

    Returns:
        ``(eigenvalues, U)`` with eigenvalues real and sorted in descending
        order along the last axis and ``U`` unitary, so that
        ``C = U @ diag(eigenvalues) @ U^H``.

    Raises:
        ConvergenceFailure: off-diagonal mass still above threshold after
            ``max_sweeps`` sweeps.
    """
    C = _as_square(C)
    if not is_hermitian(C):
        raise NotPositiveDefinite("matrix is not Hermitian")
    single = C.ndim == 2
    A = hermitian_part(C).reshape(-1, C.shape[-1], C.shape[-1]).copy()
    B, m, _ = A.shape
    U = np.tile(np.eye(m, dtype=np.complex128), (B, 1, 1))
    scale = np.linalg.norm(A, axis=(-2, -1))
    offdiag = ~np.eye(m, dtype=bool)

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(A[:, offdiag]) ** 2, axis=-1))
        if np.all(off <= tol * scale):
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[:, p, q]
                mag = np.abs(apq)
                # skipping negligible entries also keeps denormals out of the divisions below
                active = mag > JACOBI_SKIP * scale
                safe = np.where(active, mag, 1.0)
                phase = np.where(active, apq / safe, 1.0)
                tau = (A[:, q, q].real - A[:, p, p].real) / (2.0 * safe)
                t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # J = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                jpp, jpq = c, s
                jqp, jqq = -s * phase.conj(), c * phase.conj()

                colp, colq = A[:, :, p].copy(), A[:, :, q].copy()
                A[:, :, p] = colp * jpp[:, None] + colq * jqp[:, None]
                A[:, :, q] = colp * jpq[:, None] + colq * jqq[:, None]
                rowp, rowq = A[:, p, :].copy(), A[:, q, :].copy()
                A[:, p, :] = rowp * np.conj(jpp)[:, None] + rowq * np.conj(jqp)[:, None]
                A[:, q, :] = rowp * np.conj(jpq)[:, None] + rowq * np.conj(jqq)[:, None]
                A[:, p, q] = 0.0
                A[:, q, p] = 0.0
                A[:, p, p] = A[:, p, p].real
                A[:, q, q] = A[:, q, q].real

                up, uq = U[:, :, p].copy(), U[:, :, q].copy()
                U[:, :, p] = up * jpp[:, None] + uq * jqp[:, None]
                U[:, :, q] = up * jpq[:, None] + uq * jqq[:, None]
    else:
        off = np.sqrt(np.sum(np.abs(A[:, offdiag]) ** 2, axis=-1))
        if np.any(off > tol * scale):
            raise ConvergenceFailure(f"Jacobi did not converge in {max_sweeps} sweeps")

    lam = np.real(np.diagonal(A, axis1=-2, axis2=-1))
    order = np.argsort(-lam, axis=-1, kind="stable")
    lam = np.take_along_axis(lam, order, axis=-1)
    U = np.take_along_axis(U, order[:, None, :], axis=-1)

    if single:
        return lam[0], U[0]
    return lam.reshape(C.shape[:-1]), U.reshape(C.shape)


def herm_inv_sqrt(C):
    """Hermitian inverse square root ``C^{-1/2}`` of a PD matrix (or stack).

    Raises:
        NotPositiveDefinite: ``C`` fails the PD test.
    """
    C = _as_square(C)
    if C.shape[-1] == 1:
        c = C[..., 0, 0]
        if np.any(np.abs(c.imag) > HERMITIAN_TOL * np.abs(c)) or np.any(c.real <= 0):
            raise NotPositiveDefinite("scalar is not positive")
        return (1.0 / np.sqrt(c.real))[..., None, None].astype(np.complex128)
    lam, U = eig_hermitian(C)
    if np.any(lam[..., -1] <= PD_EPS * lam[..., 0]) or np.any(lam[..., 0] <= 0):
        raise NotPositiveDefinite("matrix fails the PD test")
    scaled = U * (1.0 / np.sqrt(lam))[..., None, :]
    return hermitian_part(scaled @ np.swapaxes(U, -1, -2).conj())
