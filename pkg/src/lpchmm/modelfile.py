"""Text persistence for trained classifier banks.

The file is a JSON document (see ``docs/model-format.md``). Numbers are
written with Python's shortest round-trip float repr, so loading and
saving again reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .errors import ModelFormatError, UsageError
from .hmm import HmmModel
from .lpc import LpcConfig
from .quantizer import Codebook
from .recognizer import ClassifierBank, TrainingSummary
from .signal_io import FramingConfig

FORMAT_NAME = "lpchmm-bank"
FORMAT_VERSION = 1

# collapse arrays of bare numbers onto one line
_FLAT_ARRAY = re.compile(r"\[\s*([-+0-9.eE,\s]+?)\s*\]")


def _to_doc(bank: ClassifierBank):
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "classes": list(bank.classes),
        "front_end": {
            "frame_len": bank.framing.frame_len,
            "hop": bank.framing.hop,
            "window": bank.framing.window.value,
            "preemphasis": bank.framing.preemphasis,
            "order": bank.lpc.order,
            "cepstrum_len": bank.lpc.cepstrum_len,
            "spectrum_grid_len": bank.lpc.spectrum_grid_len,
            "grid_mode": bank.lpc.grid_mode.value,
        },
        "codebook": {
            "size": bank.codebook.size,
            "dim": bank.codebook.dim,
            "centroids": bank.codebook.centroids.tolist(),
        },
        "models": [
            {
                "label": label,
                "n_states": m.n_states,
                "n_symbols": m.n_symbols,
                "pi": m.pi.tolist(),
                "trans": m.trans.tolist(),
                "emit": m.emit.tolist(),
            }
            for label, m in zip(bank.classes, bank.models)
        ],
        "training": [
            {
                "label": s.label,
                "n_sequences": s.n_sequences,
                "iterations": s.iterations,
                "log_likelihood": s.log_likelihood,
            }
            for s in bank.training
        ],
    }


def dumps_bank(bank: ClassifierBank) -> str:
    text = json.dumps(_to_doc(bank), indent=2, allow_nan=False)
    text = _FLAT_ARRAY.sub(lambda m: "[" + re.sub(r",\s+", ", ", m.group(1)) + "]", text)
    return text + "\n"


def loads_bank(text: str) -> ClassifierBank:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"not an {FORMAT_NAME} document")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model file version {doc.get('version')!r}")
    try:
        fe = doc["front_end"]
        framing = FramingConfig(fe["frame_len"], fe["hop"], fe["window"], fe["preemphasis"])
        lpc = LpcConfig(fe["order"], fe["cepstrum_len"], fe["spectrum_grid_len"], fe["grid_mode"])
        cb = doc["codebook"]
        codebook = Codebook(np.array(cb["centroids"], dtype=np.float64).reshape(cb["size"], cb["dim"]))
        models = []
        for entry, label in zip(doc["models"], doc["classes"]):
            if entry["label"] != label:
                raise ModelFormatError(f"model order does not match classes at {label!r}")
            models.append(HmmModel(entry["pi"], entry["trans"], entry["emit"]))
        training = tuple(
            TrainingSummary(t["label"], t["n_sequences"], t["iterations"], t["log_likelihood"])
            for t in doc.get("training", [])
        )
        return ClassifierBank(tuple(doc["classes"]), tuple(models), codebook, framing, lpc, training)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, UsageError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc


def save_bank(bank: ClassifierBank, path):
    Path(path).write_text(dumps_bank(bank), encoding="utf-8")


def load_bank(path) -> ClassifierBank:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFormatError(f"cannot read model {path}: {exc}") from exc
    return loads_bank(text)
