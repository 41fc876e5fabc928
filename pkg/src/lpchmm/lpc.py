"""Autocorrelation-method LPC analysis.

Sign convention used everywhere in this package: the inverse filter is
``A(z) = 1 - sum_k a_k z^-k`` so the predictor reads
``x_hat[n] = sum_k a_k x[n-k]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import (
    DegenerateModel,
    LagTooLarge,
    NoUsableFrames,
    NumericalBreakdown,
    UsageError,
    ZeroEnergy,
)
from .signal_io import AudioClip, FramingConfig, WindowedFrame, frame_signal


class GridMode(str, enum.Enum):
    HALF_BIN = "half-bin"
    BIN_START = "bin-start"


@dataclass(frozen=True)
class LpcConfig:
    order: int = 18
    cepstrum_len: int = 18
    spectrum_grid_len: int = 512
    grid_mode: GridMode = GridMode.HALF_BIN

    def __post_init__(self):
        object.__setattr__(self, "grid_mode", GridMode(self.grid_mode))
        if self.order < 1:
            raise UsageError(f"order must be >= 1, got {self.order}")
        if self.cepstrum_len < 1:
            raise UsageError(f"cepstrum_len must be >= 1, got {self.cepstrum_len}")
        if self.spectrum_grid_len < 2:
            raise UsageError(f"spectrum_grid_len must be >= 2, got {self.spectrum_grid_len}")

    def check_frame_len(self, frame_len):
        if self.order >= frame_len:
            raise UsageError(f"order {self.order} must be smaller than frame_len {frame_len}")


@dataclass(frozen=True)
class LpcModel:
    coeffs: np.ndarray
    gain: float
    reflection: np.ndarray
    error_energy: float

    @property
    def order(self):
        return self.coeffs.size

    def inverse_filter(self):
        """Polynomial coefficients of A(z) in powers of z^-1, leading 1."""
        return np.concatenate(([1.0], -np.asarray(self.coeffs, dtype=np.float64)))


def autocorrelate(frame, max_lag):
    """Biased autocorrelation ``r[tau] = sum_n x[n] x[n + tau]`` for lags 0..max_lag."""
    x = np.asarray(frame.values if isinstance(frame, WindowedFrame) else frame, dtype=np.float64)
    n = x.size
    if max_lag < 0 or max_lag >= n:
        raise LagTooLarge(f"max_lag {max_lag} must satisfy 0 <= max_lag < {n}")
    return np.array([np.dot(x[: n - k], x[k:]) for k in range(max_lag + 1)])


def levinson_durbin(r, order) -> LpcModel:
    """Solve the Toeplitz normal equations by the Levinson-Durbin recursion.

    Parameters
    ----------
    r : array_like
        Autocorrelation sequence, at least ``order + 1`` long.
    order : int
        Predictor order p.

    Returns
    -------
    LpcModel
        Predictor coefficients a_1..a_p, reflection coefficients k_1..k_p,
        final prediction-error energy E_p and gain sqrt(E_p).
    """
    r = np.asarray(r, dtype=np.float64)
    if order < 1 or r.size < order + 1:
        raise UsageError(f"need at least order+1={order + 1} lags, got {r.size}")
    if not r[0] > 0.0:
        raise ZeroEnergy("zero-energy frame (r[0] <= 0)")

    a = np.zeros(order)
    k = np.zeros(order)
    err = r[0]
    for i in range(order):
        acc = r[i + 1] - np.dot(a[:i], r[i:0:-1])
        ki = acc / err
        k[i] = ki
        prev = a[:i].copy()
        a[:i] = prev - ki * prev[::-1]
        a[i] = ki
        err = err * (1.0 - ki * ki)
        if not err > 0.0:
            raise NumericalBreakdown(
                f"prediction error energy {err:.3e} <= 0 at order {i + 1}; "
                "autocorrelation is not positive definite"
            )
    return LpcModel(coeffs=a, gain=float(np.sqrt(err)), reflection=k, error_energy=float(err))


def lpc_to_cepstrum(model: LpcModel, q_len):
    """Cepstrum c_1..c_Q of the all-pole model 1/A(z).

    The gain term c_0 is not returned.
    """
    if q_len < 1:
        raise UsageError(f"q_len must be >= 1, got {q_len}")
    a = np.asarray(model.coeffs, dtype=np.float64)
    p = a.size
    c = np.zeros(q_len + 1)
    for n in range(1, q_len + 1):
        acc = a[n - 1] if n <= p else 0.0
        for k in range(max(1, n - p), n):
            acc += (k / n) * c[k] * a[n - k - 1]
        c[n] = acc
    return c[1:]


@dataclass(frozen=True)
class SpectrumSection:
    """Magnitude response of an LPC model on a frequency grid."""

    frequencies_hz: np.ndarray
    magnitude_db: np.ndarray
    degenerate: bool = False

    def __iter__(self):
        return iter(zip(self.frequencies_hz.tolist(), self.magnitude_db.tolist()))

    def __len__(self):
        return self.frequencies_hz.size

    def peak_frequency(self):
        return float(self.frequencies_hz[int(np.argmax(self.magnitude_db))])


def spectrum_grid(sample_rate_hz, grid_len, mode=GridMode.HALF_BIN):
    """Frequencies of the spectrum-section grid.

    ``half-bin`` gives ``(m + 0.5) * fs / N`` and ``bin-start`` gives
    ``m * fs / N``, for ``m = 0 .. N/2 - 1``. At 16 kHz with N = 512 the
    half-bin grid starts at 15.625 Hz and ends at 7984.375 Hz.
    """
    if grid_len < 2:
        raise UsageError(f"grid_len must be >= 2, got {grid_len}")
    m = np.arange(grid_len // 2, dtype=np.float64)
    if GridMode(mode) is GridMode.HALF_BIN:
        m = m + 0.5
    return m * sample_rate_hz / grid_len


def lpc_spectrum_db(model: LpcModel, sample_rate_hz, grid_len, mode=GridMode.HALF_BIN, strict=False):
    """Evaluate ``20 log10(G / |A(e^jw)|)`` on the spectrum-section grid.

    A zero-gain model yields ``-inf`` at every bin and ``degenerate=True``,
    or raises :class:`DegenerateModel` when ``strict`` is set.
    """
    freqs = spectrum_grid(sample_rate_hz, grid_len, mode)
    if not model.gain > 0.0:
        if strict:
            raise DegenerateModel("model gain is zero")
        return SpectrumSection(freqs, np.full(freqs.size, -np.inf), degenerate=True)
    omega = 2.0 * np.pi * freqs / sample_rate_hz
    k = np.arange(1, model.order + 1)
    resp = 1.0 - np.exp(-1j * np.outer(omega, k)) @ np.asarray(model.coeffs, dtype=np.float64)
    mag = 20.0 * np.log10(model.gain / np.abs(resp))
    return SpectrumSection(freqs, mag)


@dataclass(frozen=True)
class ClipAnalysis:
    """Per-frame results for one clip, restricted to usable frames."""

    cepstra: np.ndarray
    models: List[LpcModel] = field(repr=False)
    frame_starts: np.ndarray
    frame_indices: np.ndarray
    skipped: int
    total_frames: int

    def __len__(self):
        return self.cepstra.shape[0]


def analyze_clip(clip: AudioClip, framing: FramingConfig = FramingConfig(),
                 lpc: LpcConfig = LpcConfig()) -> ClipAnalysis:
    """Frame a clip and compute one LPC model and cepstral vector per frame.

    Frames whose autocorrelation is degenerate (zero energy, or a
    non-positive-definite recursion) are skipped and counted.
    """
    lpc.check_frame_len(framing.frame_len)
    frames = frame_signal(clip, framing)
    models, ceps, starts, indices = [], [], [], []
    for i, frame in enumerate(frames):
        r = autocorrelate(frame, lpc.order)
        try:
            model = levinson_durbin(r, lpc.order)
        except (ZeroEnergy, NumericalBreakdown):
            continue
        models.append(model)
        ceps.append(lpc_to_cepstrum(model, lpc.cepstrum_len))
        starts.append(frame.start_index)
        indices.append(i)
    if not models:
        raise NoUsableFrames()
    cepstra = np.vstack(ceps)
    cepstra.setflags(write=False)
    return ClipAnalysis(
        cepstra=cepstra,
        models=models,
        frame_starts=np.asarray(starts, dtype=np.int64),
        frame_indices=np.asarray(indices, dtype=np.int64),
        skipped=len(frames) - len(models),
        total_frames=len(frames),
    )
