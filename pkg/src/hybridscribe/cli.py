"""``hybridscribe`` command-line tool.

Exit codes: 0 success, 2 bad flags or configuration, 3 missing or malformed
data (files, manifests, archives, mismatched dimensions), 4 numerical failure
(diverged training, failed gradient check).
"""
import argparse
import os
import sys

from . import LOWEST_PITCH, N_PITCHES, __version__
from .acoustic import ACOUSTIC_KINDS, AcousticTrainConfig
from .acoustic import TrainingDivergedError as AcousticDiverged
from .dataset import ManifestError, load_notes, load_spectrogram
from .evaluation import (DEFAULT_ONSET_TOLERANCE_MS, aggregate, format_table, frame_metrics,
                         note_onset_metrics)
from .gradcheck import GRAD_MODELS, run_grad_checks
from .lm import LmTrainConfig
from .lm import TrainingDivergedError as LmDiverged
from .midi import MidiParseError
from .numeric import DimensionError
from .persistence import AcousticBundle, ArchiveError, LmBundle, load_model, save_model
from .pipeline import (POST_KINDS, TEST_HOP_MS, TRAIN_HOP_MS, PitchRange, acoustic_posteriors,
                       load_rolls, load_tracks, manifest_splits, postprocess, roll_notes,
                       train_acoustic_bundle, train_lm_bundle)
from .rolls import notes_to_roll
from .synth import SynthConfig, write_dataset
from .textio import (TextFormatError, format_notes, format_roll, parse_notes, parse_roll,
                     read_text, write_text)
from .wavio import WavError, read_wav

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
GRAD_TOLERANCE = 1e-4


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


class NumericError(Exception):
    pass


def _sizes(text):
    try:
        sizes = tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("layer sizes must be positive")
    return sizes


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _nonneg_float(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return v


def _add_pitch_flags(p):
    p.add_argument("--lowest-pitch", type=int, default=LOWEST_PITCH,
                   help="MIDI number of the first modelled pitch (default 21)")
    p.add_argument("--n-pitches", type=int, default=N_PITCHES,
                   help="number of consecutive modelled pitches (default 88)")


def _pitches(args):
    try:
        return PitchRange(args.lowest_pitch, args.n_pitches)
    except ValueError as exc:
        raise ConfigError(str(exc))


def _write_trace(path, header, rows):
    lines = ["\t".join(header)] + ["\t".join(str(v) if isinstance(v, (int, str)) else repr(float(v))
                                             for v in row) for row in rows]
    write_text(path, "\n".join(lines) + "\n")


def _splits(args):
    s = manifest_splits(args.manifest, args.split_seed)
    if not s["train"]:
        raise DataError("manifest has no training records")
    return s


# -- commands --------------------------------------------------------------------------

def cmd_synth_data(args):
    try:
        cfg = SynthConfig(n_train=args.n_train, n_valid=args.n_valid, n_test=args.n_test,
                          seconds=args.seconds, min_voices=args.min_voices,
                          max_voices=args.max_voices, lowest_pitch=args.lowest_pitch,
                          noise=args.noise, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc))
    path = write_dataset(args.out, cfg)
    print(f"wrote {cfg.n_train + cfg.n_valid + cfg.n_test} tracks, manifest {path}")


def cmd_train_acoustic(args):
    pitches = _pitches(args)
    cfg = AcousticTrainConfig(lr=args.lr, momentum=args.momentum, epochs=args.epochs,
                              patience=args.patience, seed=args.seed)
    s = _splits(args)
    train = load_tracks(s["train"], args.hop_ms, pitches, args.max_seconds)
    valid = load_tracks(s["valid"], args.hop_ms, pitches, args.max_seconds)
    bundle, trace = train_acoustic_bundle(train, valid, args.acoustic, cfg, args.dnn_hidden,
                                          args.rnn_hidden, pitches.lowest)
    bundle.metadata["hop_ms"] = args.hop_ms
    save_model(bundle, args.out)
    _write_trace(args.loss_log or args.out + ".loss.tsv",
                 ("stage", "epoch", "train_loss", "valid_loss"), trace)
    print(f"trained {args.acoustic} for {len(trace)} epochs, archive {args.out}")


def cmd_train_lm(args):
    pitches = _pitches(args)
    cfg = LmTrainConfig(lr=args.lr, momentum=args.momentum, epochs=args.epochs,
                        patience=args.patience, seq_len=args.seq_len, seed=args.seed)
    s = _splits(args)
    train = load_rolls(s["train"], args.hop_ms, pitches, args.max_seconds)
    valid = load_rolls(s["valid"], args.hop_ms, pitches, args.max_seconds)
    bundle, trace = train_lm_bundle(train, valid, args.lm, cfg, args.hidden, args.nade_hidden,
                                    pitches.lowest)
    bundle.metadata["hop_ms"] = args.hop_ms
    save_model(bundle, args.out)
    _write_trace(args.loss_log or args.out + ".loss.tsv", ("epoch", "train_nll", "valid_nll"),
                 trace)
    print(f"trained {args.lm} language model for {len(trace)} epochs, archive {args.out}")


def _load_bundle(path, cls, role):
    obj = load_model(path)
    if not isinstance(obj, cls):
        raise DataError(f"{path} is not a{'n' if role[0] in 'aeiou' else ''} {role} archive")
    return obj


def _audio_inputs(args):
    if args.audio:
        return [(os.path.splitext(os.path.basename(a))[0], a) for a in args.audio]
    if args.manifest:
        return [(r.name, r.audio_path) for r in manifest_splits(args.manifest, args.split_seed)[args.split]]
    raise ConfigError("give --audio files or a --manifest")


def cmd_transcribe(args):
    acoustic = _load_bundle(args.acoustic_model, AcousticBundle, "acoustic model")
    lm = None
    if args.post in ("hmm", "hybrid"):
        if not args.lm_model:
            raise ConfigError(f"--post {args.post} needs --lm-model")
        lm = _load_bundle(args.lm_model, LmBundle, "language model")
        if (lm.metadata.get("lowest_pitch"), lm.lm.n_pitches) != (
                acoustic.metadata.get("lowest_pitch"), acoustic.model.n_outputs):
            raise DataError("acoustic and language model archives cover different pitch ranges")
    low = acoustic.metadata.get("lowest_pitch", LOWEST_PITCH)
    inputs = _audio_inputs(args)
    os.makedirs(args.out_dir, exist_ok=True)
    for name, path in inputs:
        spec, _ = load_spectrogram(path, args.hop_ms, max_seconds=args.max_seconds)
        post = acoustic_posteriors(acoustic, spec.frames)
        roll = postprocess(post, args.post, args.hop_ms, low, acoustic, lm, args.beam_width,
                           args.median_window)
        pruned, raw = roll_notes(roll, args.min_duration_ms)
        base = os.path.join(args.out_dir, name)
        write_text(base + ".roll", format_roll(roll))
        write_text(base + ".notes", format_notes(pruned))
        write_text(base + ".raw.notes", format_notes(raw))
    print(f"transcribed {len(inputs)} tracks into {args.out_dir}")


def _parse_pred(spec):
    label, _, directory = spec.partition("=")
    acoustic, _, post = label.partition(":")
    if not directory or not acoustic or not post:
        raise ConfigError(f"--pred expects ACOUSTIC:POST=DIR, got {spec!r}")
    return acoustic, post, directory


def evaluate_directory(directory, truth_records, tolerance_ms, max_seconds):
    """Pooled ``(frame, note_pruned, note_unpruned)`` results for one prediction directory."""
    missing = [r.name for r in truth_records
               if not os.path.exists(os.path.join(directory, r.name + ".roll"))]
    if missing:
        raise DataError(f"{directory}: no predictions for tracks {', '.join(missing)}")
    frame, note, raw = [], [], []
    for rec in truth_records:
        base = os.path.join(directory, rec.name)
        roll = parse_roll(read_text(base + ".roll"))
        hi = roll.lowest_pitch + roll.n_pitches
        truth = [n for n in load_notes(rec.midi_path, max_seconds)
                 if roll.lowest_pitch <= n.pitch < hi]
        clip = read_wav(rec.audio_path)
        duration = clip.duration if max_seconds is None else min(clip.duration, max_seconds)
        truth_roll = notes_to_roll(truth, roll.hop_ms, duration, roll.lowest_pitch, roll.n_pitches)
        frame.append(frame_metrics(roll, truth_roll))
        note.append(note_onset_metrics(parse_notes(read_text(base + ".notes")), truth, tolerance_ms))
        raw.append(note_onset_metrics(parse_notes(read_text(base + ".raw.notes")), truth,
                                      tolerance_ms))
    return aggregate(frame), aggregate(note), aggregate(raw)


def cmd_evaluate(args):
    preds = [_parse_pred(p) for p in args.pred]
    records = manifest_splits(args.manifest, args.split_seed)[args.split]
    if not records:
        raise DataError(f"manifest has no {args.split} records")
    pruned, unpruned = {}, {}
    for acoustic, post, directory in preds:
        f, n, r = evaluate_directory(directory, records, args.tolerance_ms, args.max_seconds)
        pruned[(acoustic, post)] = (f.f_measure, n.f_measure)
        unpruned[(acoustic, post)] = (f.f_measure, r.f_measure)
    acoustic_kinds = [a for a in ACOUSTIC_KINDS if any(k[0] == a for k in pruned)]
    acoustic_kinds += sorted({k[0] for k in pruned} - set(acoustic_kinds))
    post_kinds = [p for p in POST_KINDS if any(k[1] == p for k in pruned)]
    post_kinds += sorted({k[1] for k in pruned} - set(post_kinds))
    text = (format_table(pruned, acoustic_kinds, post_kinds,
                         f"F-measure (%), notes pruned below {args.min_duration_label} ms")
            + "\n"
            + format_table(unpruned, acoustic_kinds, post_kinds, "F-measure (%), notes unpruned"))
    if args.out:
        write_text(args.out, text)
    sys.stdout.write(text)


def cmd_grad_check(args):
    models = GRAD_MODELS if args.model == "all" else (args.model,)
    errors = run_grad_checks(models, args.instances, args.seed)
    worst = max(errors.values())
    for name, err in errors.items():
        print(f"{name:8s} max relative error {err:.3e}")
    print(f"overall  max relative error {worst:.3e} "
          f"({'ok' if worst < GRAD_TOLERANCE else 'FAILED'}, tolerance {GRAD_TOLERANCE:g})")
    if not worst < GRAD_TOLERANCE:
        raise NumericError("gradient check failed")


# -- parser ----------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="hybridscribe",
                                 description="Polyphonic piano transcription with a hybrid "
                                             "acoustic / language-model decoder.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="write a seeded synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=30)
    p.add_argument("--n-valid", type=int, default=5)
    p.add_argument("--n-test", type=int, default=10)
    p.add_argument("--seconds", type=_positive(float), default=6.0)
    p.add_argument("--min-voices", type=int, default=1)
    p.add_argument("--max-voices", type=int, default=3)
    p.add_argument("--lowest-pitch", type=int, default=60)
    p.add_argument("--noise", type=_nonneg_float, default=SynthConfig.noise)
    p.set_defaults(func=cmd_synth_data)

    def training_flags(p, lr, hop):
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", required=True, help="archive path")
        p.add_argument("--loss-log", help="per-epoch loss file (default: OUT.loss.tsv)")
        p.add_argument("--hop-ms", type=_positive(float), default=hop)
        p.add_argument("--lr", type=_nonneg_float, default=lr)
        p.add_argument("--momentum", type=_nonneg_float, default=0.9)
        p.add_argument("--epochs", type=_positive(int), default=200)
        p.add_argument("--patience", type=_positive(int), default=10)
        p.add_argument("--max-seconds", type=_positive(float), default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--split-seed", type=int, default=0,
                       help="seed for partitioning unlabeled manifests")
        _add_pitch_flags(p)

    p = sub.add_parser("train-acoustic", help="train a frame-level acoustic model")
    training_flags(p, AcousticTrainConfig.lr, TRAIN_HOP_MS)
    p.add_argument("--acoustic", choices=ACOUSTIC_KINDS, default="dnn")
    p.add_argument("--dnn-hidden", type=_sizes, default=(100, 100, 100))
    p.add_argument("--rnn-hidden", type=_sizes, default=(250, 250))
    p.set_defaults(func=cmd_train_acoustic)

    p = sub.add_parser("train-lm", help="train a music language model on ground-truth rolls")
    training_flags(p, LmTrainConfig.lr, TEST_HOP_MS)
    p.add_argument("--lm", choices=("nade", "rnn"), default="nade")
    p.add_argument("--hidden", type=_positive(int), default=100)
    p.add_argument("--nade-hidden", type=_positive(int), default=150)
    p.add_argument("--seq-len", type=_positive(int), default=200)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("transcribe", help="write roll and note files for audio tracks")
    p.add_argument("--acoustic-model", required=True)
    p.add_argument("--lm-model")
    p.add_argument("--audio", nargs="+")
    p.add_argument("--manifest")
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--post", choices=POST_KINDS, default="hybrid")
    p.add_argument("--beam-width", type=_positive(int), default=100)
    p.add_argument("--hop-ms", type=_positive(float), default=TEST_HOP_MS)
    p.add_argument("--min-duration-ms", type=_nonneg_float, default=70.0)
    p.add_argument("--median-window", type=_positive(int), default=5)
    p.add_argument("--max-seconds", type=_positive(float), default=30.0)
    p.set_defaults(func=cmd_transcribe)

    p = sub.add_parser("evaluate", help="score prediction directories against ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred", action="append", required=True, metavar="ACOUSTIC:POST=DIR")
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--tolerance-ms", type=_positive(float), default=DEFAULT_ONSET_TOLERANCE_MS)
    p.add_argument("--min-duration-label", default="70",
                   help="pruning threshold quoted in the table title")
    p.add_argument("--max-seconds", type=_positive(float), default=30.0)
    p.add_argument("--out", help="also write the table to this file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grad-check", help="compare analytic and finite-difference gradients")
    p.add_argument("--model", choices=GRAD_MODELS + ("all",), default="all")
    p.add_argument("--instances", type=_positive(int), default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grad_check)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "median_window", 1) % 2 == 0:
            raise ConfigError("--median-window must be odd")
        args.func(args)
    except ConfigError as exc:
        print(f"hybridscribe: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ManifestError, ArchiveError, WavError, MidiParseError, TextFormatError,
            DimensionError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"hybridscribe: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, AcousticDiverged, LmDiverged, FloatingPointError) as exc:
        print(f"hybridscribe: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
