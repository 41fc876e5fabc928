import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest
from scipy.signal import lfilter

from lpchmm.cli import main, read_manifest
from lpchmm.errors import DataError
from lpchmm.signal_io import AudioClip, write_wav
from lpchmm.synth import synth_corpus

FAST = ["--codebook-size", "16", "--max-iters", "30"]


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], stdout=out)
    return code, out.getvalue()


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    assert run("synth", d, "--per-class", 5, "--duration", 0.3, "--seed", 0)[0] == 0
    return d


@pytest.fixture(scope="module")
def model_path(corpus_dir, tmp_path_factory):
    p = tmp_path_factory.mktemp("model") / "bank.json"
    code, _ = run("train", corpus_dir / "manifest.csv", p, *FAST)
    assert code == 0
    return p


@pytest.fixture
def silence(tmp_path):
    p = tmp_path / "silence.wav"
    write_wav(p, AudioClip(np.zeros(16000)))
    return p


class TestSynth:
    def test_default_counts(self, tmp_path):
        code, out = run("synth", tmp_path / "c")
        assert code == 0
        assert len(list((tmp_path / "c").glob("*.wav"))) == 60
        entries = read_manifest(tmp_path / "c" / "manifest.csv")
        assert len(entries) == 60
        assert sorted({label for _, label in entries}) == ["la", "lla", "zha"]
        assert "wrote 60 files" in out

    def test_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            run("synth", tmp_path / name, "--per-class", 2, "--seed", 3)
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        run("synth", tmp_path / "a", "--per-class", 1, "--seed", 1)
        run("synth", tmp_path / "b", "--per-class", 1, "--seed", 2)
        assert (tmp_path / "a" / "la_00.wav").read_bytes() != (tmp_path / "b" / "la_00.wav").read_bytes()

    @pytest.mark.parametrize("utt", range(0, 15, 2))
    def test_first_formant_peak(self, corpus_dir, utt):
        u = synth_corpus(seed=0, per_class=5, duration_s=0.3)[utt]
        code, out = run("analyze", corpus_dir / f"{u.name}.wav")
        assert code == 0
        table = np.array(rows(out)[1:], dtype=float)
        low = table[table[:, 0] < 800]
        assert abs(low[np.argmax(low[:, 1]), 0] - u.formants_hz[0]) <= 31.25


class TestAnalyze:
    def test_first_frequency_and_shape(self, corpus_dir):
        code, out = run("analyze", corpus_dir / "zha_00.wav")
        r = rows(out)
        assert code == 0
        assert r[0] == ["frequency_hz", "magnitude_db"]
        assert r[1][0] == "15.625000"
        assert r[-1][0] == "7984.375000"
        assert len(r) == 257

    def test_ar2_peak(self, tmp_path):
        # pulse-train excitation makes every frame's estimate peak at the pole
        theta = 2 * np.pi * 1000 / 16000
        pulses = np.zeros(16000)
        pulses[::160] = 1.0
        y = lfilter([1.0], [1.0, -2 * 0.98 * np.cos(theta), 0.98**2], pulses)
        p = tmp_path / "ar2.wav"
        write_wav(p, AudioClip(0.5 * y / np.abs(y).max()))
        table = np.array(rows(run("analyze", p)[1])[1:], dtype=float)
        assert abs(table[np.argmax(table[:, 1]), 0] - 1000.0) <= 31.25

    def test_silence(self, silence, capsys):
        code, _ = run("analyze", silence)
        assert code == 2
        assert "no usable frames" in capsys.readouterr().err

    def test_all_frames_and_features(self, corpus_dir, tmp_path):
        spec, feats = tmp_path / "s.csv", tmp_path / "f.csv"
        code, out = run("analyze", corpus_dir / "la_01.wav", "--all-frames", "-o", spec, "--features-out", feats)
        assert code == 0 and out == ""
        s = rows(spec.read_text())
        assert s[0] == ["frame_index", "frequency_hz", "magnitude_db"]
        assert len(s) == 1 + 17 * 256
        f = rows(feats.read_text())
        assert f[0] == ["frame_index"] + [f"c{i}" for i in range(1, 19)]
        assert [r[0] for r in f[1:]] == [str(i) for i in range(17)]

    def test_bin_start_grid(self, corpus_dir):
        out = run("analyze", corpus_dir / "la_01.wav", "--grid-mode", "bin-start", "--grid-len", 1024)[1]
        r = rows(out)
        assert r[1][0] == "0.000000" and r[2][0] == "15.625000" and len(r) == 513

    def test_missing_file(self, tmp_path, capsys):
        assert run("analyze", tmp_path / "nope.wav")[0] == 2

    def test_malformed(self, tmp_path):
        p = tmp_path / "bad.wav"
        p.write_bytes(b"RIFFxxxx")
        assert run("analyze", p)[0] == 2

    def test_usage_errors(self, corpus_dir):
        with pytest.raises(SystemExit) as exc:
            main(["analyze"])
        assert exc.value.code == 1
        assert run("analyze", corpus_dir / "la_01.wav", "--order", 0)[0] == 1
        assert run("analyze", corpus_dir / "la_01.wav", "--hop", 0)[0] == 1

    def test_config_file(self, corpus_dir, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"order": 10, "cepstrum_len": 12}))
        feats = tmp_path / "f.csv"
        assert run("analyze", corpus_dir / "la_01.wav", "--config", cfg, "--features-out", feats)[0] == 0
        assert len(rows(feats.read_text())[0]) == 13
        cfg.write_text(json.dumps({"nonsense": 1}))
        assert run("analyze", corpus_dir / "la_01.wav", "--config", cfg)[0] == 1


class TestTrain:
    def test_summary_and_round_trip(self, model_path, corpus_dir, tmp_path):
        code, out = run("train", corpus_dir / "manifest.csv", tmp_path / "m.json", *FAST)
        r = rows(out)
        assert r[0] == ["label", "n_sequences", "iterations", "log_likelihood"]
        assert [x[0] for x in r[1:]] == ["zha", "la", "lla"]
        assert (tmp_path / "m.json").read_bytes() == model_path.read_bytes()

    def test_seed_determinism(self, corpus_dir, tmp_path):
        for name in ("a.json", "b.json"):
            assert run("train", corpus_dir / "manifest.csv", tmp_path / name, "--seed", 7, *FAST)[0] == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_one_class(self, corpus_dir, tmp_path, capsys):
        m = tmp_path / "one.csv"
        m.write_text("path,label\n" + "".join(f"{corpus_dir}/la_0{i}.wav,la\n" for i in range(3)))
        code, _ = run("train", m, tmp_path / "x.json", *FAST)
        assert code == 2
        assert "need at least 2 classes" in capsys.readouterr().err

    def test_bad_manifest(self, tmp_path, capsys):
        m = tmp_path / "m.csv"
        m.write_text("file,class\na.wav,la\n")
        assert run("train", m, tmp_path / "x.json")[0] == 2
        m.write_text("path,label\na.wav\n")
        assert run("train", m, tmp_path / "x.json")[0] == 2
        assert "m.csv:2" in capsys.readouterr().err

    def test_missing_audio_named(self, corpus_dir, tmp_path, capsys):
        m = tmp_path / "m.csv"
        m.write_text(f"path,label\n{corpus_dir}/la_00.wav,la\n{tmp_path}/ghost.wav,zha\n")
        assert run("train", m, tmp_path / "x.json")[0] == 2
        assert "ghost.wav" in capsys.readouterr().err

    def test_read_manifest_relative(self, tmp_path):
        (tmp_path / "sub").mkdir()
        m = tmp_path / "sub" / "m.csv"
        m.write_text("path,label\nx.wav,a\n\n/abs/y.wav,b\n")
        assert read_manifest(m) == [(tmp_path / "sub" / "x.wav", "a"), (Path("/abs/y.wav"), "b")]
        m.write_text("")
        with pytest.raises(DataError):
            read_manifest(m)


class TestClassify:
    def test_resubstitution(self, model_path, corpus_dir):
        files = [corpus_dir / "zha_00.wav", corpus_dir / "la_02.wav", corpus_dir / "lla_04.wav"]
        code, out = run("classify", model_path, *files)
        r = rows(out)
        assert code == 0
        assert r[0] == ["path", "predicted", "margin", "ll_zha", "ll_la", "ll_lla"]
        assert [x[1] for x in r[1:]] == ["zha", "la", "lla"]
        assert all(float(x[2]) > 0 for x in r[1:])

    def test_per_frame(self, model_path, corpus_dir):
        r = rows(run("classify", model_path, corpus_dir / "la_00.wav", "--per-frame")[1])
        assert r[0][-1] == "ll_per_frame_lla"
        assert float(r[1][4]) / 17 == pytest.approx(float(r[1][7]), abs=1e-5)

    def test_tie(self, model_path, corpus_dir, tmp_path):
        doc = json.loads(model_path.read_text())
        doc["models"][1] = dict(doc["models"][0], label="la")
        doc["models"][2] = dict(doc["models"][0], label="lla")
        tied = tmp_path / "tied.json"
        tied.write_text(json.dumps(doc))
        r = rows(run("classify", tied, corpus_dir / "lla_00.wav")[1])
        assert r[1][1] == "zha" and r[1][2] == "0.000000"

    def test_silence_continues(self, model_path, corpus_dir, silence, capsys):
        code, out = run("classify", model_path, silence, corpus_dir / "la_00.wav")
        assert code == 0
        assert len(rows(out)) == 2
        err = capsys.readouterr().err
        assert "silence.wav: error: no usable frames" in err

    def test_all_fail(self, model_path, silence):
        assert run("classify", model_path, silence)[0] == 2

    def test_bad_model(self, tmp_path, silence):
        p = tmp_path / "m.json"
        p.write_text("{}")
        assert run("classify", p, silence)[0] == 2


class TestEval:
    def test_report(self, model_path, corpus_dir):
        code, out = run("eval", model_path, corpus_dir / "manifest.csv")
        assert code == 0
        human, machine = out.split("\n\n")
        assert "accuracy: 1.000000 (15/15)" in human
        r = rows(machine)
        assert r[0] == ["truth", "zha", "la", "lla"]
        assert r[1:4] == [["zha", "5", "0", "0"], ["la", "0", "5", "0"], ["lla", "0", "0", "5"]]
        assert r[4] == ["accuracy", "1.000000"]

    def test_csv_out(self, model_path, corpus_dir, tmp_path):
        code, out = run("eval", model_path, corpus_dir / "manifest.csv", "--csv-out", tmp_path / "c.csv")
        assert code == 0 and "truth," not in out
        assert rows((tmp_path / "c.csv").read_text())[0][0] == "truth"

    def test_empty_manifest(self, model_path, tmp_path, capsys):
        m = tmp_path / "empty.csv"
        m.write_text("path,label\n")
        assert run("eval", model_path, m)[0] == 2
        assert "no files" in capsys.readouterr().err

    def test_unknown_label(self, model_path, corpus_dir, tmp_path):
        m = tmp_path / "m.csv"
        m.write_text(f"path,label\n{corpus_dir}/la_00.wav,xx\n")
        assert run("eval", model_path, m)[0] == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("lpchmm ")
