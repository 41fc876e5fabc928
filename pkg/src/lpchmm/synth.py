"""Synthetic vowel-like corpus for desk-scale recognition experiments.

Each utterance is a pulse train shaped by a two-pole glottal low-pass and
a cascade of second-order formant resonators, with a short raised-cosine
onset and offset. Classes differ in their formant targets; every
utterance jitters the formants and draws its fundamental so that the
first formant falls on a harmonic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from scipy.signal import lfilter

from .signal_io import AudioClip, pcm16_bytes

# formant targets (Hz) and bandwidths (Hz); the three approximants differ mostly in F2/F3
CLASS_FORMANTS: Dict[str, Tuple[Tuple[float, ...], Tuple[float, ...]]] = {
    "zha": ((500.0, 1300.0, 1700.0, 3300.0), (60.0, 90.0, 110.0, 200.0)),
    "la": ((360.0, 1100.0, 2700.0, 3700.0), (60.0, 90.0, 140.0, 200.0)),
    "lla": ((430.0, 1600.0, 2250.0, 3400.0), (60.0, 90.0, 120.0, 200.0)),
}

GLOTTAL_POLE = 0.92
F0_RANGE = (100.0, 220.0)
FORMANT_JITTER = 0.03
F0_JITTER = 0.01
NOISE_LEVEL = 0.002
PEAK_LEVEL = 0.5
RAMP_S = 0.02


@dataclass(frozen=True)
class Utterance:
    name: str
    label: str
    f0_hz: float
    formants_hz: Tuple[float, ...]
    bandwidths_hz: Tuple[float, ...]
    clip: AudioClip


def resonator(freq_hz, bandwidth_hz, sample_rate_hz):
    """Denominator of a unit-DC-gain two-pole resonator."""
    r = np.exp(-np.pi * bandwidth_hz / sample_rate_hz)
    theta = 2.0 * np.pi * freq_hz / sample_rate_hz
    return np.array([1.0, -2.0 * r * np.cos(theta), r * r])


def synthesize(f0_hz, formants_hz, bandwidths_hz, duration_s=0.5, sample_rate_hz=16000, rng=None):
    """Render one utterance as a float array peaking at ``PEAK_LEVEL``."""
    rng = np.random.default_rng(rng)
    n = int(round(duration_s * sample_rate_hz))
    # independent cycle-to-cycle period jitter
    excitation = np.zeros(n)
    pos = rng.uniform(0.0, sample_rate_hz / f0_hz)
    while pos < n:
        excitation[int(pos)] = 1.0
        pos += sample_rate_hz / (f0_hz * (1.0 + F0_JITTER * rng.standard_normal()))
    excitation += NOISE_LEVEL * rng.standard_normal(n)

    y = lfilter([1.0], [1.0, -2 * GLOTTAL_POLE, GLOTTAL_POLE**2], excitation)
    for f, b in zip(formants_hz, bandwidths_hz):
        den = resonator(f, b, sample_rate_hz)
        y = lfilter([den.sum()], den, y)

    ramp = int(RAMP_S * sample_rate_hz)
    env = np.ones(n)
    if 0 < ramp and 2 * ramp < n:
        half = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = half
        env[-ramp:] = half[::-1]
    y *= env
    return PEAK_LEVEL * y / np.max(np.abs(y))


def pick_f0(f1_hz, rng, f0_range=None):
    """Draw F0 = F1 / k for a random harmonic number k keeping F0 in range.

    With F1 on a harmonic, the harmonic-sampled spectral envelope peaks at
    the designed formant instead of at a neighbouring partial.
    """
    lo, hi = f0_range or F0_RANGE
    ks = [k for k in range(1, int(f1_hz // lo) + 1) if lo <= f1_hz / k <= hi]
    if not ks:
        return float(rng.uniform(lo, hi))
    return float(f1_hz / ks[rng.integers(len(ks))])


def synth_corpus(seed=0, per_class=20, duration_s=0.5, sample_rate_hz=16000,
                 classes=CLASS_FORMANTS) -> List[Utterance]:
    """Generate ``per_class`` utterances for every class, deterministically from ``seed``."""
    out = []
    for ci, (label, (formants, bandwidths)) in enumerate(classes.items()):
        for u in range(per_class):
            rng = np.random.default_rng([seed, ci, u])
            jittered = tuple(float(f * (1.0 + FORMANT_JITTER * rng.uniform(-1, 1))) for f in formants)
            f0 = pick_f0(jittered[0], rng)
            x = synthesize(f0, jittered, bandwidths, duration_s, sample_rate_hz, rng)
            # quantize exactly as the written file will be
            x = np.clip(np.round(x * 32768.0), -32768, 32767) / 32768.0
            out.append(Utterance(f"{label}_{u:02d}", label, float(f0), jittered, tuple(bandwidths),
                                 AudioClip(x, sample_rate_hz, label)))
    return out


def write_corpus(directory, utterances: List[Utterance]):
    """Write ``<name>.wav`` files plus ``manifest.csv`` (``path,label``, relative paths)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for utt in utterances:
        fname = f"{utt.name}.wav"
        (directory / fname).write_bytes(pcm16_bytes(utt.clip.samples, utt.clip.sample_rate_hz))
        rows.append((fname, utt.label))
    manifest = directory / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "label"])
        w.writerows(rows)
    return manifest
