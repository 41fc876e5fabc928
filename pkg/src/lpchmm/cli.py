"""Command line interface.

Subcommands: ``analyze``, ``train``, ``classify``, ``eval``, ``synth``.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric or training
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import TOPOLOGIES, RunConfig, load_config
from .errors import DataError, EmptyEvaluationSet, LpcHmmError, UsageError
from .lpc import GridMode, analyze_clip, lpc_spectrum_db
from .modelfile import load_bank, save_bank
from .recognizer import classify, evaluate, train_bank
from .signal_io import DEFAULT_SAMPLE_RATE, Window, load_wav
from .synth import synth_corpus, write_corpus

log = logging.getLogger("lpchmm")

# CLI flag -> (config key, type)
OVERRIDES = {
    "frame_len": int,
    "hop": int,
    "window": str,
    "preemphasis": float,
    "order": int,
    "cepstrum_len": int,
    "grid_len": int,
    "grid_mode": str,
    "codebook_size": int,
    "states": int,
    "topology": str,
    "max_iters": int,
    "tol": float,
}
_CONFIG_KEY = {"grid_len": "spectrum_grid_len", "states": "n_states"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common_flags():
    p = _Parser(add_help=False)
    s = argparse.SUPPRESS
    g = p.add_argument_group("configuration")
    g.add_argument("--config", metavar="FILE", default=s, help="JSON config file of flat keys")
    g.add_argument("--seed", type=int, default=s)
    g.add_argument("--frame-len", type=int, default=s, help="samples per frame (512)")
    g.add_argument("--hop", type=int, default=s, help="samples between frame starts (256)")
    g.add_argument("--window", choices=[w.value for w in Window], default=s)
    g.add_argument("--preemphasis", type=float, default=s, help="coefficient in [0, 1) (0.97)")
    g.add_argument("--order", type=int, default=s, help="LPC predictor order (18)")
    g.add_argument("--cepstrum-len", type=int, default=s, help="cepstral coefficients per frame (18)")
    g.add_argument("--grid-len", type=int, default=s, help="spectrum grid length N (512)")
    g.add_argument("--grid-mode", choices=[m.value for m in GridMode], default=s)
    g.add_argument("--codebook-size", type=int, default=s, help="VQ codebook size (64)")
    g.add_argument("--states", type=int, default=s, help="HMM states per class (3)")
    g.add_argument("--topology", choices=TOPOLOGIES, default=s)
    g.add_argument("--max-iters", type=int, default=s, help="Baum-Welch iteration cap (100)")
    g.add_argument("--tol", type=float, default=s, help="Baum-Welch stopping improvement (1e-4)")
    return p


def build_config(args) -> RunConfig:
    ns = vars(args)
    base = load_config(ns["config"]) if "config" in ns else RunConfig()
    values = {_CONFIG_KEY.get(k, k): ns[k] for k in OVERRIDES if k in ns}
    if "seed" in ns:
        values["seed"] = ns["seed"]
    return RunConfig.from_flat(values, base=base)


# ---------------------------------------------------------------------------
# manifests


def read_manifest(path):
    """Parse a ``path,label`` CSV; relative paths resolve against the manifest's directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["path", "label"]:
        raise DataError(f"{path}: manifest must start with the header 'path,label'")
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2 or not row[0].strip() or not row[1].strip():
            raise DataError(f"{path}:{lineno}: expected 'path,label', got {row!r}")
        wav = Path(row[0].strip())
        if not wav.is_absolute():
            wav = path.parent / wav
        entries.append((wav, row[1].strip()))
    return entries


def _load_entries(entries):
    out = []
    for wav, label in entries:
        try:
            clip = load_wav(wav)
        except OSError as exc:
            raise DataError(f"{wav}: {exc.strerror or exc}") from exc
        except LpcHmmError as exc:
            raise type(exc)(f"{wav}: {exc}") from exc
        _check_rate(wav, clip)
        out.append((clip, label, str(wav)))
    return out


def _check_rate(path, clip):
    if clip.sample_rate_hz != DEFAULT_SAMPLE_RATE:
        log.warning("%s: sample rate %d Hz (expected %d); analysing without resampling",
                    path, clip.sample_rate_hz, DEFAULT_SAMPLE_RATE)


def _open_out(target, stdout):
    if target is None or target == "-":
        return stdout, False
    return open(target, "w", newline="", encoding="utf-8"), True


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(args, stdout):
    cfg = build_config(args)
    try:
        clip = load_wav(args.input)
    except OSError as exc:
        raise DataError(f"{args.input}: {exc.strerror or exc}") from exc
    _check_rate(args.input, clip)
    try:
        an = analyze_clip(clip, cfg.framing, cfg.lpc)
    except LpcHmmError as exc:
        raise type(exc)(f"{args.input}: {exc}") from exc

    if args.all_frames:
        selected = list(range(len(an)))
    else:
        centres = an.frame_starts + cfg.framing.frame_len / 2.0
        selected = [int(np.argmin(np.abs(centres - len(clip) / 2.0)))]

    out, close = _open_out(args.spectrum_out, stdout)
    try:
        out.write("frame_index,frequency_hz,magnitude_db\n" if args.all_frames else "frequency_hz,magnitude_db\n")
        for k in selected:
            sec = lpc_spectrum_db(an.models[k], clip.sample_rate_hz, cfg.lpc.spectrum_grid_len, cfg.lpc.grid_mode)
            prefix = f"{an.frame_indices[k]}," if args.all_frames else ""
            for f, db in sec:
                out.write(f"{prefix}{f:.6f},{db:.6f}\n")
    finally:
        if close:
            out.close()

    if args.features_out is not None:
        out, close = _open_out(args.features_out, stdout)
        try:
            q = cfg.lpc.cepstrum_len
            out.write("frame_index," + ",".join(f"c{i}" for i in range(1, q + 1)) + "\n")
            for idx, row in zip(an.frame_indices, an.cepstra):
                out.write(f"{idx}," + ",".join(f"{v:.6f}" for v in row) + "\n")
        finally:
            if close:
                out.close()
    if an.skipped:
        log.info("%s: skipped %d of %d frames with no usable energy", args.input, an.skipped, an.total_frames)
    return 0


def cmd_train(args, stdout):
    cfg = build_config(args)
    items = _load_entries(read_manifest(args.manifest))
    bank = train_bank(items, cfg)
    save_bank(bank, args.model)
    stdout.write("label,n_sequences,iterations,log_likelihood\n")
    for s in bank.training:
        stdout.write(f"{s.label},{s.n_sequences},{s.iterations},{s.log_likelihood:.6f}\n")
    return 0


def cmd_classify(args, stdout):
    bank = load_bank(args.model)
    header = ["path", "predicted", "margin"] + [f"ll_{c}" for c in bank.classes]
    if args.per_frame:
        header += [f"ll_per_frame_{c}" for c in bank.classes]
    stdout.write(",".join(header) + "\n")
    ok = 0
    for path in args.inputs:
        try:
            clip = load_wav(path)
            _check_rate(path, clip)
            res = classify(bank, clip)
        except (LpcHmmError, OSError) as exc:
            msg = exc.strerror if isinstance(exc, OSError) and exc.strerror else str(exc)
            sys.stderr.write(f"{path}: error: {msg}\n")
            continue
        fields = [str(path), res.predicted, f"{res.margin:.6f}"]
        fields += [f"{v:.6f}" for v in res.log_likelihoods]
        if args.per_frame:
            fields += [f"{v:.6f}" for v in res.per_frame_log_likelihoods]
        stdout.write(",".join(fields) + "\n")
        ok += 1
    return 0 if ok or not args.inputs else 2


def format_confusion(classes, confusion):
    width = max(8, max(len(c) for c in classes) + 2)
    lines = ["truth \\ predicted".ljust(width + 10) + "".join(c.rjust(width) for c in classes)]
    for label, row in zip(classes, confusion):
        lines.append(label.ljust(width + 10) + "".join(str(v).rjust(width) for v in row))
    return "\n".join(lines)


def cmd_eval(args, stdout):
    bank = load_bank(args.model)
    entries = read_manifest(args.manifest)
    if not entries:
        raise EmptyEvaluationSet(f"{args.manifest}: manifest lists no files")
    report = evaluate(bank, _load_entries(entries))
    correct = int(np.trace(report.confusion))
    stdout.write(format_confusion(report.classes, report.confusion) + "\n")
    stdout.write(f"accuracy: {report.accuracy:.6f} ({correct}/{report.total})\n")

    out, close = _open_out(args.csv_out, stdout)
    try:
        if not close:
            out.write("\n")
        out.write("truth," + ",".join(report.classes) + "\n")
        for label, row in zip(report.classes, report.confusion):
            out.write(label + "," + ",".join(str(v) for v in row) + "\n")
        out.write(f"accuracy,{report.accuracy:.6f}\n")
    finally:
        if close:
            out.close()
    return 0


def cmd_synth(args, stdout):
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = load_config(args.config).seed if hasattr(args, "config") else 0
    if args.per_class < 1 or not args.duration > 0:
        raise UsageError("--per-class must be >= 1 and --duration > 0")
    corpus = synth_corpus(seed=seed, per_class=args.per_class, duration_s=args.duration)
    try:
        manifest = write_corpus(args.output, corpus)
    except OSError as exc:
        raise DataError(f"{args.output}: {exc.strerror or exc}") from exc
    stdout.write(f"wrote {len(corpus)} files and {manifest}\n")
    return 0


def build_parser():
    common = _common_flags()
    parser = _Parser(prog="lpchmm", parents=[common],
                     description="LPC-cepstrum front end and discrete HMM phoneme recognizer.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("analyze", parents=[common], help="LPC spectrum section and cepstral features of a WAV file")
    p.add_argument("input")
    p.add_argument("--all-frames", action="store_true", help="emit the spectrum of every usable frame")
    p.add_argument("-o", "--spectrum-out", metavar="PATH", help="spectrum CSV destination (stdout)")
    p.add_argument("--features-out", metavar="PATH", help="also write the cepstral feature CSV ('-' for stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", parents=[common], help="train a classifier bank from a manifest")
    p.add_argument("manifest")
    p.add_argument("model", help="output model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", parents=[common], help="classify WAV files with a trained bank")
    p.add_argument("model")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--per-frame", action="store_true", help="append frame-normalized log-likelihoods")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", parents=[common], help="confusion matrix and accuracy over a manifest")
    p.add_argument("model")
    p.add_argument("manifest")
    p.add_argument("--csv-out", metavar="PATH", help="write the confusion CSV here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", parents=[common], help="generate the synthetic three-class corpus")
    p.add_argument("output", help="output directory")
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--duration", type=float, default=0.5, help="seconds per utterance")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return args.func(args, stdout)
    except LpcHmmError as exc:
        sys.stderr.write(f"lpchmm {args.command}: error: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"lpchmm {args.command}: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
