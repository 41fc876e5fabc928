"""WAV ingest, preemphasis and framing.

Reads RIFF/WAVE files (8-bit unsigned PCM, 16-bit signed PCM, 32-bit IEEE
float, any channel count) into normalized mono clips and cuts them into
windowed analysis frames.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    ClipTooShort,
    EmptyAudio,
    InvalidLength,
    MalformedHeader,
    UnsupportedEncoding,
    UsageError,
)

DEFAULT_SAMPLE_RATE = 16000

_FORMAT_PCM = 0x0001
_FORMAT_FLOAT = 0x0003
_FORMAT_EXTENSIBLE = 0xFFFE


class Window(str, enum.Enum):
    HAMMING = "hamming"
    RECTANGULAR = "rectangular"


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE
    label: Optional[str] = None

    def __post_init__(self):
        samples = _readonly(np.ravel(self.samples))
        if self.sample_rate_hz <= 0:
            raise UsageError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if samples.size and (np.max(np.abs(samples)) > 1.0 or not np.all(np.isfinite(samples))):
            raise UsageError("samples must lie in [-1, 1]")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class FramingConfig:
    """Framing parameters.

    The defaults follow the analysis block used throughout: 512-point
    Hamming frames at 16 kHz. ``hop`` and ``preemphasis`` are front-end
    choices with the usual speech-processing defaults.
    """

    frame_len: int = 512
    hop: int = 256
    window: Window = Window.HAMMING
    preemphasis: float = 0.97

    def __post_init__(self):
        object.__setattr__(self, "window", Window(self.window))
        if self.frame_len < 2:
            raise UsageError(f"frame_len must be >= 2, got {self.frame_len}")
        if not 0 < self.hop <= self.frame_len:
            raise UsageError(f"hop must satisfy 0 < hop <= frame_len, got {self.hop}")
        if not 0.0 <= self.preemphasis < 1.0:
            raise UsageError(f"preemphasis must lie in [0, 1), got {self.preemphasis}")


@dataclass(frozen=True)
class WindowedFrame:
    values: np.ndarray = field(repr=False)
    start_index: int

    def __len__(self):
        return self.values.size


# ---------------------------------------------------------------------------
# WAV reading / writing


def _parse_chunks(data):
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeader("not a RIFF/WAVE file")
    chunks = {}
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        chunks.setdefault(cid, body)
        # chunks are word aligned
        pos += 8 + size + (size & 1)
    return chunks


def load_wav(path) -> AudioClip:
    """Read a WAV file into a mono :class:`AudioClip`.

    Integer PCM is scaled by its maximum code (``2**(bits-1)``), float data
    is clipped to [-1, 1], and multichannel frames are averaged. The sample
    rate is taken from the header; nothing is resampled.
    """
    data = Path(path).read_bytes()
    chunks = _parse_chunks(data)
    fmt = chunks.get(b"fmt ")
    if fmt is None or len(fmt) < 16:
        raise MalformedHeader("missing or truncated fmt chunk")
    if b"data" not in chunks:
        raise MalformedHeader("missing data chunk")
    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == _FORMAT_EXTENSIBLE:
        if len(fmt) < 26:
            raise MalformedHeader("truncated WAVE_FORMAT_EXTENSIBLE header")
        (tag,) = struct.unpack_from("<H", fmt, 24)
    if channels < 1 or rate < 1:
        raise MalformedHeader(f"invalid header: channels={channels} rate={rate}")

    if tag == _FORMAT_PCM and bits == 8:
        raw = np.frombuffer(chunks[b"data"], dtype=np.uint8)
        width = 1
    elif tag == _FORMAT_PCM and bits == 16:
        width = 2
    elif tag == _FORMAT_FLOAT and bits == 32:
        width = 4
    else:
        raise UnsupportedEncoding(f"unsupported encoding: format tag {tag:#06x}, {bits} bits")

    body = chunks[b"data"]
    n_frames = len(body) // (width * channels)
    if n_frames == 0:
        raise EmptyAudio(f"{path}: no samples")
    body = body[: n_frames * width * channels]

    if width == 1:
        x = (raw[: n_frames * channels].astype(np.float64) - 128.0) / 128.0
    elif width == 2:
        x = np.frombuffer(body, dtype="<i2").astype(np.float64) / 32768.0
    else:
        x = np.frombuffer(body, dtype="<f4").astype(np.float64)
        x = np.clip(np.nan_to_num(x), -1.0, 1.0)

    x = x.reshape(n_frames, channels).mean(axis=1)
    return AudioClip(x, int(rate))


def pcm16_bytes(samples, sample_rate_hz):
    """Encode samples as a complete 16-bit mono PCM WAV byte string."""
    codes = np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32768.0), -32768, 32767)
    payload = codes.astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, _FORMAT_PCM, 1, sample_rate_hz, 2 * sample_rate_hz, 2, 16,
        b"data", len(payload),
    )
    return header + payload


def write_wav(path, clip: AudioClip):
    Path(path).write_bytes(pcm16_bytes(clip.samples, clip.sample_rate_hz))


# ---------------------------------------------------------------------------
# Windowing and framing


def hamming_window(length):
    """Symmetric Hamming window ``0.54 - 0.46 cos(2 pi n / (length - 1))``."""
    if length < 2:
        raise InvalidLength(f"window length must be >= 2, got {length}")
    n = np.arange(length)
    w = 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))
    # mirror the first half so symmetry is exact rather than up to rounding
    w[length - length // 2 :] = w[: length // 2][::-1]
    return w


def make_window(kind, length):
    if Window(kind) is Window.RECTANGULAR:
        return np.ones(length)
    return hamming_window(length)


def preemphasize(x, coeff):
    """y[n] = x[n] - coeff * x[n-1], with y[0] = x[0]."""
    x = np.asarray(x, dtype=np.float64)
    y = x.copy()
    if coeff:
        y[1:] -= coeff * x[:-1]
    return y


def frame_count(n_samples, frame_len, hop):
    if n_samples < frame_len:
        return 0
    return (n_samples - frame_len) // hop + 1


def frame_signal(clip: AudioClip, cfg: FramingConfig = FramingConfig()):
    """Cut a clip into preemphasized, windowed frames.

    Frames start at 0, hop, 2*hop, ... as long as a full frame fits; the
    trailing partial frame is dropped.

    Returns
    -------
    list of WindowedFrame
    """
    n = len(clip)
    count = frame_count(n, cfg.frame_len, cfg.hop)
    if count == 0:
        raise ClipTooShort(f"clip has {n} samples, need at least {cfg.frame_len}")
    y = preemphasize(clip.samples, cfg.preemphasis)
    w = make_window(cfg.window, cfg.frame_len)
    starts = np.arange(count) * cfg.hop
    idx = starts[:, None] + np.arange(cfg.frame_len)[None, :]
    mat = y[idx] * w[None, :]
    mat.setflags(write=False)
    return [WindowedFrame(mat[i], int(s)) for i, s in enumerate(starts)]
