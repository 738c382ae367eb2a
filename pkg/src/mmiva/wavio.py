"""WAV file I/O for PCM 16-bit and IEEE float-32 data."""

import struct
import warnings

import numpy as np
from scipy.io import wavfile

from .exceptions import CorruptHeader, IoFailure, UnsupportedFormat
from .signals import TimeSignal

__all__ = ["read_wav", "write_wav"]

_PCM16_SCALE = 32768.0


def read_wav(path):
    """Read a PCM16 or float-32 WAV file.

    PCM16 samples are mapped to ``[-1, 1)`` by dividing by ``2**15``.

    Returns:
        :class:`TimeSignal`; samples ``(T,)`` for mono, ``(c, T)`` otherwise.

    Raises:
        IoFailure: the file cannot be opened.
        CorruptHeader: malformed or truncated RIFF structure.
        UnsupportedFormat: sample format other than PCM16 / float-32.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except OSError as err:
        raise IoFailure(f"{path}: {err}") from err
    except wavfile.WavFileWarning as err:
        raise CorruptHeader(f"{path}: {err}") from err
    except (ValueError, struct.error, EOFError) as err:
        msg = str(err)
        if "Unknown wave file format" in msg or "Unsupported" in msg:
            raise UnsupportedFormat(f"{path}: {msg}") from err
        raise CorruptHeader(f"{path}: {msg}") from err

    if data.dtype == np.int16:
        samples = data.astype(float) / _PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(float)
    else:
        raise UnsupportedFormat(f"{path}: sample type {data.dtype} is not PCM16 or float-32")
    if samples.ndim == 2:
        samples = samples.T
    return TimeSignal(samples, int(rate))


def write_wav(path, signal, fmt="float32"):
    """Write a :class:`TimeSignal` as PCM16 (``fmt="pcm16"``) or float-32.

    PCM16 samples are rounded to the nearest step of ``2**-15`` and clipped
    to the representable range.

    Raises:
        UnsupportedFormat: unknown ``fmt``.
        IoFailure: the file cannot be written.
    """
    x = signal.samples
    if x.ndim == 2:
        x = x.T
    if fmt == "float32":
        data = np.ascontiguousarray(x, dtype=np.float32)
    elif fmt == "pcm16":
        data = np.clip(np.round(x * _PCM16_SCALE), -32768, 32767).astype(np.int16)
    else:
        raise UnsupportedFormat(f"unknown sample format {fmt!r}; use 'float32' or 'pcm16'")
    try:
        wavfile.write(path, int(signal.sample_rate), data)
    except OSError as err:
        raise IoFailure(f"{path}: {err}") from err
