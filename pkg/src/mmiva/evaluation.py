"""Scale fixing and separation quality metrics."""

import itertools
import warnings
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import SeparatorState
from .exceptions import LengthMismatch, ShapeMismatch, SingularMatrix, ZeroReference
from .signals import StftConfig, TimeSignal, istft

__all__ = [
    "mdp_rescale",
    "sdr_si",
    "sdr_matrix",
    "best_permutation",
    "DeltaSdr",
    "initial_sdr",
    "evaluate_delta_sdr",
    "EXHAUSTIVE_MAX_M",
]

RESIDUAL_FLOOR = 1e-30
EXHAUSTIVE_MAX_M = 6


def mdp_rescale(state, ref=0):
    """Minimum distortion principle: scale each source to its image at channel ``ref``.

    With ``A = W^{-1}`` per bin, row ``i`` of ``Y`` and ``W`` is multiplied
    by ``A[ref, i]``, so ``Y = W X`` still holds and the rescaled sources sum
    to ``X[ref]``.

    Returns:
        New :class:`SeparatorState`.

    Raises:
        SingularMatrix: some ``W`` is singular.
    """
    W = state.W
    try:
        A = np.linalg.inv(W)
    except np.linalg.LinAlgError as err:
        raise SingularMatrix(str(err)) from err
    if not np.all(np.isfinite(A)):
        raise SingularMatrix("separation matrix is singular")
    scale = A[:, ref, :]
    if np.any(np.all(scale == 0, axis=0)):
        warnings.warn("some sources have zero image at the reference channel", RuntimeWarning, stacklevel=2)
    info = dict(state.info)
    info["mdp_ref"] = ref
    return SeparatorState(state.X, W * scale[..., None], state.Y * scale[..., None], state.iteration, info)


def _as_vector(x):
    return np.asarray(x.samples if isinstance(x, TimeSignal) else x, dtype=float)


def sdr_si(estimate, reference):
    """Scale-invariant SDR ``10 log10(||a s||^2 / ||e - a s||^2)`` with ``a = e.s / ||s||^2``.

    Returns ``inf`` when the residual energy is below ``1e-30`` of the target
    energy and ``-inf`` when the projection vanishes.

    Raises:
        LengthMismatch: lengths differ.
        ZeroReference: the reference is all zero.
    """
    e = _as_vector(estimate)
    s = _as_vector(reference)
    if e.shape != s.shape:
        raise LengthMismatch(f"estimate {e.shape} and reference {s.shape} differ")
    ss = float(s @ s)
    if ss == 0.0:
        raise ZeroReference("reference signal is all zero")
    alpha = float(e @ s) / ss
    target = alpha * s
    t_energy = float(target @ target)
    if t_energy == 0.0:
        return -np.inf
    resid = e - target
    r_energy = float(resid @ resid)
    if r_energy < RESIDUAL_FLOOR * t_energy:
        return np.inf
    return float(10.0 * np.log10(t_energy / r_energy))


def sdr_matrix(estimates, references):
    """Pairwise SI-SDR, entry ``[i, j]`` scores estimate ``i`` against reference ``j``."""
    E = _as_vector(estimates)
    R = _as_vector(references)
    if E.ndim != 2 or R.ndim != 2 or E.shape[0] != R.shape[0]:
        raise ShapeMismatch(f"need equal numbers of estimates and references, got {E.shape}, {R.shape}")
    if E.shape[1] != R.shape[1]:
        raise LengthMismatch(f"estimates {E.shape} and references {R.shape} differ in length")
    rr = np.einsum("jt,jt->j", R, R)
    if np.any(rr == 0):
        raise ZeroReference("a reference signal is all zero")
    ee = np.einsum("it,it->i", E, E)
    cross = E @ R.T
    target = cross**2 / rr
    resid = ee[:, None] - target
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(target / np.where(resid > 0, resid, 1.0))
    out[target == 0] = -np.inf
    # the energy identity loses precision near perfect separation: recompute those pairs directly
    for i, j in zip(*np.nonzero((resid <= 1e-6 * ee[:, None]) & (target > 0))):
        out[i, j] = sdr_si(E[i], R[j])
    return out


def best_permutation(scores):
    """Assignment maximizing the total score; ``perm[j]`` is the estimate for reference ``j``.

    Exhaustive search up to ``EXHAUSTIVE_MAX_M`` sources, Hungarian
    assignment beyond. Infinite scores are clipped for the search only.
    """
    S = np.clip(np.asarray(scores, dtype=float), -1e6, 1e6)
    S = np.nan_to_num(S, nan=-1e6)
    m = S.shape[0]
    if m <= EXHAUSTIVE_MAX_M:
        best, best_val = None, -np.inf
        cols = np.arange(m)
        for perm in itertools.permutations(range(m)):
            val = S[list(perm), cols].sum()
            if val > best_val:
                best, best_val = perm, val
        return np.array(best)
    rows, cols = linear_sum_assignment(S, maximize=True)
    perm = np.empty(m, dtype=int)
    perm[cols] = rows
    return perm


class DeltaSdr(NamedTuple):
    """Per-reference scores after permutation alignment."""

    delta: np.ndarray
    sdr: np.ndarray
    sdr_initial: np.ndarray
    perm: np.ndarray


def initial_sdr(mixture, references):
    """SI-SDR of the unprocessed mixture channel against each reference."""
    x = _as_vector(mixture)
    R = _as_vector(references)
    return np.array([sdr_si(x, r) for r in R])


def evaluate_delta_sdr(state, references, mixture, cfg=StftConfig(), rescale=True, sdr_initial=None):
    """SDR improvement of each separated source over the unprocessed mixture.

    Args:
        state: :class:`SeparatorState` with ``Y`` of shape ``(K, m, n)``.
        references: Per-source images at the reference channel, ``(m, T)``.
        mixture: The reference channel of the mixture, ``(T,)``.
        cfg: STFT geometry used to produce ``state.X``.
        rescale: Apply :func:`mdp_rescale` (channel 0) first.
        sdr_initial: Precomputed :func:`initial_sdr`, to save time in loops.

    Returns:
        :class:`DeltaSdr`; ``delta[j]`` scores the estimate assigned to reference ``j``.
    """
    R = _as_vector(references)
    if rescale:
        try:
            scale = np.linalg.inv(state.W)[:, 0, :]
        except np.linalg.LinAlgError as err:
            raise SingularMatrix(str(err)) from err
    Y = state.Y * scale[..., None] if rescale else state.Y
    est = istft(np.swapaxes(Y, 0, 1), cfg, R.shape[-1])
    scores = sdr_matrix(est, R)
    perm = best_permutation(scores)
    sdr = scores[perm, np.arange(R.shape[0])]
    if sdr_initial is None:
        sdr_initial = initial_sdr(mixture, R)
    return DeltaSdr(sdr - sdr_initial, sdr, np.asarray(sdr_initial), perm)
