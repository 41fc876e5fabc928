"""Per-class discrete HMM recognizer over vector-quantized LPC cepstra.

Training pools the cepstra of every class into one shared codebook, then
fits one HMM per class with Baum-Welch. Classification scores the
quantized utterance against every class model and picks the largest
log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .errors import (
    EmptyClass,
    EmptyEvaluationSet,
    InsufficientClasses,
    LpcHmmError,
    UnknownLabel,
    UsageError,
)
from .hmm import HmmModel, baum_welch, forward, segmental_initial_model
from .lpc import LpcConfig, analyze_clip
from .quantizer import Codebook, quantize, train_codebook
from .signal_io import AudioClip, FramingConfig


@dataclass(frozen=True)
class TrainingSummary:
    label: str
    n_sequences: int
    iterations: int
    log_likelihood: float


@dataclass(frozen=True)
class ClassifierBank:
    classes: Tuple[str, ...]
    models: Tuple[HmmModel, ...]
    codebook: Codebook
    framing: FramingConfig = field(default_factory=FramingConfig)
    lpc: LpcConfig = field(default_factory=LpcConfig)
    training: Tuple[TrainingSummary, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "training", tuple(self.training))
        if len(self.classes) < 2:
            raise InsufficientClasses()
        if len(set(self.classes)) != len(self.classes):
            raise UsageError("class labels must be unique")
        if len(self.models) != len(self.classes):
            raise UsageError(f"{len(self.classes)} classes but {len(self.models)} models")
        for label, m in zip(self.classes, self.models):
            if m.n_symbols != self.codebook.size:
                raise UsageError(
                    f"model {label!r} has {m.n_symbols} symbols, codebook has {self.codebook.size}")
        if self.codebook.dim != self.lpc.cepstrum_len:
            raise UsageError("codebook dimension does not match the cepstrum length")

    def model_for(self, label):
        return self.models[self.classes.index(label)]


@dataclass(frozen=True)
class ClassificationResult:
    predicted: str
    classes: Tuple[str, ...]
    log_likelihoods: np.ndarray
    n_frames: int
    margin: float

    @property
    def per_frame_log_likelihoods(self):
        """Raw scores divided by the frame count, for inspection only."""
        return self.log_likelihoods / self.n_frames

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.classes, self.log_likelihoods.tolist()))


@dataclass(frozen=True)
class EvaluationReport:
    classes: Tuple[str, ...]
    confusion: np.ndarray
    results: Tuple[ClassificationResult, ...] = field(repr=False, default=())

    @property
    def total(self):
        return int(self.confusion.sum())

    @property
    def accuracy(self):
        return float(np.trace(self.confusion) / self.confusion.sum())


def _unpack(item, index):
    if len(item) == 3:
        clip, label, name = item
    else:
        (clip, label), name = item, f"clip #{index}"
    return clip, label, name


def symbols_for(framing, lpc, codebook, clip: AudioClip):
    return quantize(analyze_clip(clip, framing, lpc).cepstra, codebook)


def train_bank(labeled_clips: Sequence, config: RunConfig = RunConfig(), seed: Optional[int] = None) -> ClassifierBank:
    """Train one HMM per class over a shared codebook.

    Parameters
    ----------
    labeled_clips : sequence of (AudioClip, label) or (AudioClip, label, name)
        ``name`` identifies the clip in error messages.
    config : RunConfig
        Front end, codebook size, HMM topology and training settings.
    seed : int, optional
        Overrides ``config.seed``. Equal inputs and seed give identical banks.
    """
    seed = config.seed if seed is None else seed
    items = [_unpack(item, i) for i, item in enumerate(labeled_clips)]
    classes = tuple(dict.fromkeys(label for _, label, _ in items))
    if len(classes) < 2:
        raise InsufficientClasses()

    cepstra = {label: [] for label in classes}
    for clip, label, name in items:
        try:
            cepstra[label].append(analyze_clip(clip, config.framing, config.lpc).cepstra)
        except LpcHmmError as exc:
            raise type(exc)(f"{name}: {exc}") from exc
    for label in classes:
        if not cepstra[label]:
            raise EmptyClass(f"class {label!r} has no usable clips")

    pooled = np.vstack([c for label in classes for c in cepstra[label]])
    codebook = train_codebook(pooled, config.codebook_size, seed=seed)

    mask = config.transition_mask
    models, summaries = [], []
    for i, label in enumerate(classes):
        seqs = [quantize(c, codebook) for c in cepstra[label]]
        start = segmental_initial_model(config.n_states, codebook.size, seqs, mask, seed=[seed, i])
        model, trace = baum_welch(start, seqs, config.max_iters, config.tol, mask=mask)
        models.append(model)
        summaries.append(TrainingSummary(label, len(seqs), len(trace) - 1, float(trace[-1])))

    return ClassifierBank(classes, tuple(models), codebook, config.framing, config.lpc, tuple(summaries))


def decide(log_likelihoods):
    """Index of the best score (first on ties) and its margin over the runner-up."""
    ll = np.asarray(log_likelihoods, dtype=np.float64)
    best = int(np.argmax(ll))
    return best, float(ll[best] - np.delete(ll, best).max())


def score_symbols(bank: ClassifierBank, symbols) -> ClassificationResult:
    ll = np.array([forward(m, symbols).log_likelihood for m in bank.models])
    best, margin = decide(ll)
    return ClassificationResult(
        predicted=bank.classes[best],
        classes=bank.classes,
        log_likelihoods=ll,
        n_frames=int(np.size(symbols)),
        margin=margin,
    )


def classify(bank: ClassifierBank, clip: AudioClip) -> ClassificationResult:
    """Label ``clip`` with the class whose model gives the highest log-likelihood.

    Ties go to the earliest class in ``bank.classes``.
    """
    return score_symbols(bank, symbols_for(bank.framing, bank.lpc, bank.codebook, clip))


def evaluate(bank: ClassifierBank, labeled_clips: Sequence) -> EvaluationReport:
    """Confusion matrix (rows truth, columns prediction) over labeled clips."""
    items = [_unpack(item, i) for i, item in enumerate(labeled_clips)]
    if not items:
        raise EmptyEvaluationSet("nothing to evaluate")
    index = {label: i for i, label in enumerate(bank.classes)}
    confusion = np.zeros((len(bank.classes),) * 2, dtype=np.int64)
    results = []
    for clip, label, name in items:
        if label not in index:
            raise UnknownLabel(f"{name}: label {label!r} is not one of {list(bank.classes)}")
        try:
            res = classify(bank, clip)
        except LpcHmmError as exc:
            raise type(exc)(f"{name}: {exc}") from exc
        confusion[index[label], index[res.predicted]] += 1
        results.append(res)
    return EvaluationReport(bank.classes, confusion, tuple(results))
