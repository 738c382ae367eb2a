"""Synthetic sources, FIR convolutive mixing and STFT analysis/synthesis."""

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .contrast import LAPLACE
from .exceptions import ConfigError, DimensionMismatch, ShapeMismatch, SignalTooShort, SingularMatrix

__all__ = [
    "DEFAULT_SAMPLE_RATE",
    "TimeSignal",
    "StftConfig",
    "stft",
    "istft",
    "spectrogram_stack",
    "sample_sources",
    "sample_modulated_sources",
    "MixingScenario",
    "mix_convolutive",
    "source_images",
]

DEFAULT_SAMPLE_RATE = 16000


@dataclass
class TimeSignal:
    """Real samples with a sample rate.

    ``samples`` is ``(T,)`` for a mono signal or ``(c, T)`` for ``c`` channels.
    """

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim not in (1, 2):
            raise ShapeMismatch(f"samples must be (T,) or (c, T), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.samples = x

    @property
    def channels(self):
        return 1 if self.samples.ndim == 1 else self.samples.shape[0]

    def __len__(self):
        return self.samples.shape[-1]

    def channel(self, c):
        if self.samples.ndim == 1:
            if c != 0:
                raise IndexError(c)
            return self
        return TimeSignal(self.samples[c], self.sample_rate)


def _samples(x):
    return x.samples if isinstance(x, TimeSignal) else np.asarray(x, dtype=float)


@dataclass(frozen=True)
class StftConfig:
    """Frame geometry of the STFT.

    Args:
        frame_size: DFT length and window length. Default: 4096.
        hop: Frame advance. Must divide ``frame_size`` and not exceed half of it.
        window: Only ``"hann"`` (periodic Hann) is supported.
    """

    frame_size: int = 4096
    hop: int = 1024
    window: str = "hann"

    def __post_init__(self):
        if self.frame_size < 2 or self.hop < 1:
            raise ConfigError("frame_size and hop must be positive")
        if self.frame_size % self.hop or self.hop > self.frame_size // 2:
            raise ConfigError(
                f"hop {self.hop} must divide frame_size {self.frame_size} and be at most half of it"
            )
        if self.window != "hann":
            raise ConfigError(f"unsupported window {self.window!r}")

    @property
    def bins(self):
        return self.frame_size // 2 + 1

    def analysis_window(self):
        N = self.frame_size
        return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(N) / N)

    def synthesis_window(self):
        """Dual window: the overlapped product of analysis and synthesis sums to one."""
        w = self.analysis_window()
        overlap = (w**2).reshape(-1, self.hop).sum(axis=0)
        return w / np.tile(overlap, self.frame_size // self.hop)

    def n_frames(self, length):
        return -(-(length + self.frame_size - self.hop) // self.hop)

    def to_dict(self):
        return {"frame_size": self.frame_size, "hop": self.hop, "window": self.window}


def stft(x, cfg=StftConfig()):
    """One-sided STFT of a real signal.

    The signal is zero-padded by ``frame_size - hop`` samples in front and
    to a whole number of frames at the back, so every input sample is
    covered by the full set of overlapping frames.

    Args:
        x: :class:`TimeSignal` or array ``(..., T)``.
        cfg: :class:`StftConfig`.

    Returns:
        Complex array ``(..., K, n)`` with ``K = frame_size // 2 + 1``.

    Raises:
        SignalTooShort: ``T < frame_size``.
    """
    x = _samples(x)
    N, H = cfg.frame_size, cfg.hop
    T = x.shape[-1]
    if T < N:
        raise SignalTooShort(f"signal has {T} samples, fewer than the frame size {N}")
    n = cfg.n_frames(T)
    total = (n - 1) * H + N
    pad = [(0, 0)] * (x.ndim - 1) + [(N - H, total - (N - H) - T)]
    xp = np.pad(x, pad)
    frames = np.lib.stride_tricks.sliding_window_view(xp, N, axis=-1)[..., ::H, :]
    spec = scipy.fft.rfft(frames * cfg.analysis_window(), axis=-1)
    return np.swapaxes(spec, -1, -2)


def istft(S, cfg=StftConfig(), length=None):
    """Weighted overlap-add inverse of :func:`stft`.

    Args:
        S: ``(..., K, n)`` one-sided spectrogram.
        cfg: The :class:`StftConfig` used for analysis.
        length: Number of output samples. Default: everything the frames cover
            after removing the front padding.

    Returns:
        Real array ``(..., length)``.

    Raises:
        ShapeMismatch: ``K`` does not match ``cfg`` or ``length`` exceeds the
            frame coverage.
    """
    S = np.asarray(S)
    N, H = cfg.frame_size, cfg.hop
    if S.ndim < 2 or S.shape[-2] != cfg.bins:
        raise ShapeMismatch(f"spectrogram has shape {S.shape}, expected {cfg.bins} bins")
    n = S.shape[-1]
    frames = scipy.fft.irfft(np.swapaxes(S, -1, -2), n=N, axis=-1)
    frames *= cfg.synthesis_window()
    total = (n - 1) * H + N
    lead = S.shape[:-2]
    # overlap-add by hop-sized chunks: frame j, chunk c lands at chunk j + c
    chunks = frames.reshape(lead + (n, N // H, H))
    out = np.zeros(lead + (n + N // H - 1, H))
    for c in range(N // H):
        out[..., c : c + n, :] += chunks[..., :, c, :]
    out = out.reshape(lead + (total,))[..., N - H :]
    if length is None:
        return out
    if length > out.shape[-1]:
        raise ShapeMismatch(f"requested {length} samples but frames cover {out.shape[-1]}")
    return out[..., :length]


def spectrogram_stack(x, cfg=StftConfig()):
    """STFT of ``m`` channels arranged as IVA observations ``(K, m, n)``."""
    S = stft(x, cfg)
    if S.ndim != 3:
        raise ShapeMismatch("expected a multichannel signal")
    return np.ascontiguousarray(np.swapaxes(S, 0, 1))


def _ggd(rng, shape, beta):
    mag = rng.gamma(1.0 / beta, size=shape) ** (1.0 / beta)
    return np.where(rng.random(shape) < 0.5, -mag, mag)


def _unit_power(s):
    power = np.mean(s**2, axis=-1, keepdims=True)
    return s / np.sqrt(np.where(power > 0, power, 1.0))


def sample_sources(m, length, model=LAPLACE, seed=0, sample_rate=DEFAULT_SAMPLE_RATE):
    """i.i.d. symmetric generalized Gaussian sources with unit empirical power.

    Magnitudes are ``G**(1/beta)`` with ``G ~ Gamma(1/beta)``; signs are
    uniform.

    Args:
        m: Number of sources.
        length: Samples per source.
        model: :class:`ContrastModel` supplying ``beta``.
        seed: RNG seed.

    Returns:
        :class:`TimeSignal` with samples ``(m, length)``.
    """
    if length <= 0 or m <= 0:
        raise ValueError("m and length must be positive")
    rng = np.random.default_rng(seed)
    return TimeSignal(_unit_power(_ggd(rng, (m, length), model.beta)), sample_rate)


def sample_modulated_sources(
    m, length, model=LAPLACE, seed=0, segment=4096, sample_rate=DEFAULT_SAMPLE_RATE
):
    """Sources with a piecewise-constant random envelope.

    Each ``segment``-sample block of an i.i.d. generalized Gaussian carrier
    is scaled by an independent generalized Gaussian magnitude. The envelope
    makes the per-frame energy vary across frames, the property IVA relies
    on, which a stationary i.i.d. process loses after a long-frame STFT.

    Returns:
        :class:`TimeSignal` with samples ``(m, length)`` and unit empirical power.
    """
    if length <= 0 or m <= 0 or segment <= 0:
        raise ValueError("m, length and segment must be positive")
    rng = np.random.default_rng(seed)
    carrier = _ggd(rng, (m, length), model.beta)
    n_seg = -(-length // segment)
    env = np.abs(_ggd(rng, (m, n_seg), model.beta))
    env = np.repeat(env, segment, axis=-1)[:, :length]
    return TimeSignal(_unit_power(carrier * env), sample_rate)


@dataclass
class MixingScenario:
    """FIR mixing system: ``taps[c, s]`` filters source ``s`` into channel ``c``."""

    taps: np.ndarray
    seed: int = 0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.ndim == 2:
            taps = taps[..., None]
        if taps.ndim != 3 or taps.shape[0] != taps.shape[1] or taps.shape[2] < 1:
            raise ShapeMismatch(f"taps must have shape (m, m, L), got {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise ValueError("taps must be finite")
        self.taps = taps
        dc = taps.sum(axis=-1)
        if np.linalg.cond(dc) > 1e12:
            raise SingularMatrix("matrix of filter DC gains is singular")

    @property
    def m(self):
        return self.taps.shape[0]

    @property
    def n_taps(self):
        return self.taps.shape[2]

    @classmethod
    def random(cls, m, n_taps=8, seed=0, decay=2.0, sample_rate=DEFAULT_SAMPLE_RATE):
        """Random decaying FIR filters with a unit direct path on the diagonal.

        Tap ``l`` has standard deviation ``exp(-l / decay)``.
        """
        rng = np.random.default_rng(seed)
        envelope = np.exp(-np.arange(n_taps) / decay)
        taps = rng.normal(size=(m, m, n_taps)) * envelope
        taps[np.arange(m), np.arange(m), 0] = 1.0
        return cls(taps, seed, sample_rate)

    @classmethod
    def identity(cls, m, sample_rate=DEFAULT_SAMPLE_RATE):
        return cls(np.eye(m)[..., None], 0, sample_rate)

    def frequency_response(self, n_fft):
        """DFT of every filter, ``(n_fft // 2 + 1, m, m)``."""
        return np.moveaxis(np.fft.rfft(self.taps, n=n_fft, axis=-1), -1, 0)

    def to_dict(self):
        return {
            "m": self.m,
            "n_taps": self.n_taps,
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "taps": self.taps.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(np.array(d["taps"], dtype=float), int(d.get("seed", 0)), int(d.get("sample_rate", DEFAULT_SAMPLE_RATE)))
        except (KeyError, TypeError) as err:
            raise ConfigError(f"malformed scenario: {err}") from err

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            try:
                return cls.from_dict(json.load(f))
            except json.JSONDecodeError as err:
                raise ConfigError(f"{path}: {err}") from err


def _convolve_same(h, s):
    return np.convolve(s, h)[: s.shape[-1]]


def mix_convolutive(sources, scenario):
    """``x_c = sum_s taps[c, s] * source_s``, truncated to the source length.

    Args:
        sources: :class:`TimeSignal` or array ``(m, T)``.
        scenario: :class:`MixingScenario` with matching ``m``.

    Returns:
        :class:`TimeSignal` ``(m, T)``.

    Raises:
        ShapeMismatch: source count differs from the scenario.
    """
    S = _samples(sources)
    sr = sources.sample_rate if isinstance(sources, TimeSignal) else scenario.sample_rate
    if S.ndim != 2 or S.shape[0] != scenario.m:
        raise ShapeMismatch(f"expected {scenario.m} sources, got shape {S.shape}")
    X = np.zeros_like(S)
    for c in range(scenario.m):
        for s in range(scenario.m):
            X[c] += _convolve_same(scenario.taps[c, s], S[s])
    return TimeSignal(X, sr)


def source_images(sources, scenario, mic=0):
    """Contribution of each source at channel ``mic`` alone, ``(m, T)``."""
    S = _samples(sources)
    sr = sources.sample_rate if isinstance(sources, TimeSignal) else scenario.sample_rate
    if S.ndim != 2 or S.shape[0] != scenario.m:
        raise ShapeMismatch(f"expected {scenario.m} sources, got shape {S.shape}")
    if not 0 <= mic < scenario.m:
        raise DimensionMismatch(f"mic index {mic} out of range")
    return TimeSignal(np.stack([_convolve_same(scenario.taps[mic, s], S[s]) for s in range(scenario.m)]), sr)
