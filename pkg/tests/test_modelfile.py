import json

import numpy as np
import pytest

from lpchmm.errors import ModelFormatError
from lpchmm.modelfile import FORMAT_NAME, dumps_bank, load_bank, loads_bank, save_bank
from lpchmm.recognizer import classify


def test_byte_identical_round_trip(small_bank, tmp_path):
    p = tmp_path / "bank.json"
    save_bank(small_bank, p)
    text = p.read_text()
    again = loads_bank(text)
    assert dumps_bank(again) == text
    assert again.codebook.centroids.tobytes() == small_bank.codebook.centroids.tobytes()
    assert all(a == b for a, b in zip(again.models, small_bank.models))
    assert again.training == small_bank.training
    assert again.framing == small_bank.framing and again.lpc == small_bank.lpc


def test_loaded_bank_classifies_identically(small_bank, small_corpus, tmp_path):
    p = tmp_path / "bank.json"
    save_bank(small_bank, p)
    loaded = load_bank(p)
    for u in small_corpus[::5]:
        a, b = classify(small_bank, u.clip), classify(loaded, u.clip)
        assert a.predicted == b.predicted
        assert np.array_equal(a.log_likelihoods, b.log_likelihoods)


def test_layout(small_bank):
    doc = json.loads(dumps_bank(small_bank))
    assert doc["format"] == FORMAT_NAME and doc["version"] == 1
    assert list(doc) == ["format", "version", "classes", "front_end", "codebook", "models", "training"]
    assert doc["front_end"]["grid_mode"] == "half-bin"
    text = dumps_bank(small_bank)
    # each number row is on one line
    assert '"pi": [' in text and text.endswith("\n")


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(format="other"),
    lambda d: d.update(version=2),
    lambda d: d.pop("codebook"),
    lambda d: d["models"][0].update(label="nope"),
    lambda d: d["models"][0]["trans"][0].__setitem__(0, 5.0),
    lambda d: d["front_end"].update(hop=0),
])
def test_rejects_bad_documents(small_bank, mutate):
    doc = json.loads(dumps_bank(small_bank))
    mutate(doc)
    with pytest.raises(ModelFormatError):
        loads_bank(json.dumps(doc))


def test_not_json():
    with pytest.raises(ModelFormatError):
        loads_bank("{nope")


def test_missing_file(tmp_path):
    with pytest.raises(ModelFormatError):
        load_bank(tmp_path / "missing.json")
