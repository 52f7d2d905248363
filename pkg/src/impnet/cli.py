"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 data/shape/config error, 3 check failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, experiments, features, gradcheck, synth
from .errors import ConfigError, ImpNetError
from .model import PRESETS, NetworkConfig, build, load_config, load_network, preset, \
    save_network, with_seed
from .tensor import Shape
from .train import TrainRecipe, accuracy, confusion_matrix, thread_count, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def git_blob_sha1(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _write_json_atomic(path: Path, obj) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)


def resolve_config(spec: str, size: str = "desk") -> tuple[NetworkConfig, bytes]:
    """A preset name or a config file; returns the config and its text as bytes."""
    if spec in PRESETS:
        cfg = preset(spec, size)
        return cfg, cfg.to_text().encode()
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"{spec}: neither a preset ({', '.join(PRESETS)}) nor a config file")
    return load_config(path), path.read_bytes()


def _check_input(cfg_shape: Shape, split: synth.Split, what: str) -> None:
    got = split.X.shape[1:]
    if len(split) and got != cfg_shape.as_tuple():
        raise ConfigError(f"{what}: data tensors are {'x'.join(map(str, got))}, "
                          f"network expects {cfg_shape}")


def stratified_holdout(split: synth.Split, fraction: float, seed: int) -> tuple[synth.Split, synth.Split]:
    """Hold out ``fraction`` of every class (at least one sample when the class has two)."""
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(99,))))
    held = []
    for c in np.unique(split.y):
        idx = np.flatnonzero(split.y == c)
        n = int(round(fraction * len(idx)))
        if n == 0 and len(idx) > 1:
            n = 1
        held.extend(gen.permutation(idx)[:n].tolist())
    mask = np.zeros(len(split), dtype=bool)
    mask[held] = True
    return split.subset(np.flatnonzero(~mask)), split.subset(np.flatnonzero(mask))


# -- commands -------------------------------------------------------------------------

def cmd_features(args) -> int:
    ids = features.extract_directory(args.wav_dir, args.out, args.sample_rate, args.mean_norm)
    print(f"wrote {len(ids)} utterances to {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = synth.parse_synth_spec(Path(args.spec).read_text()) if args.spec else synth.SynthSpec()
    if args.seed is not None:
        spec.seed = args.seed
    data = synth.make_dataset(spec)
    synth.save_dataset(args.out, spec, data)
    print(" ".join(f"{k}={len(v)}" for k, v in data.items()), f"-> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    started = _now()
    cfg, cfg_bytes = resolve_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    cfg = with_seed(cfg, seed)
    if args.init == "fan-in":
        cfg = experiments.fan_in_init(cfg)
    train_set = synth.load_split(args.data, "train")
    if synth.has_split(args.data, "val"):
        val_set = synth.load_split(args.data, "val")
    else:
        train_set, val_set = stratified_holdout(train_set, 0.1, seed)
    _check_input(cfg.input_shape, train_set, "train")
    _check_input(cfg.input_shape, val_set, "val")
    net = build(cfg)
    recipe = TrainRecipe(learning_rate=args.lr, batch_size=args.batch, epochs=args.epochs,
                         seed=seed, threads=thread_count())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_bytes(cfg_bytes)
    with open(out / "epochs.csv", "w", newline="") as fh:
        fh.write(f"# lr={args.lr!r} batch={args.batch} epochs={args.epochs} seed={seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_cost", "lr", "decision"])

        def on_epoch(rec):
            w.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_cost),
                        repr(rec.learning_rate), rec.decision])
            fh.flush()
            print(f"epoch {rec.epoch}: train {rec.train_loss:.5f} val {rec.val_cost:.5f} "
                  f"lr {rec.learning_rate:g} {rec.decision}")

        result = train(net, train_set, val_set, recipe, on_epoch)
    save_network(net, out / "model", result.state)
    metrics = {"train_acc": accuracy(net, train_set), "val_acc": accuracy(net, val_set),
               "best_val_cost": result.gate.best_validation_cost,
               "final_lr": result.state.learning_rate,
               "accepted_epochs": sum(r.decision == "accept" for r in result.history)}
    metrics = {k: (v if not (isinstance(v, float) and not math.isfinite(v)) else None)
               for k, v in metrics.items()}
    _write_json_atomic(out / "manifest.json", {
        "config": args.config, "data": str(args.data), "seed": seed,
        "config_sha1": git_blob_sha1(cfg_bytes), "started": started, "finished": _now(),
        "metrics": metrics})
    print(f"train acc {metrics['train_acc']:.4f} val acc {metrics['val_acc']:.4f} -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    net = load_network(args.model)
    split = synth.load_split(args.data, args.split)
    _check_input(net.config.input_shape, split, args.split)
    n_classes = net.config.n_classes
    if len(split) and split.y.max() >= n_classes:
        raise ConfigError(f"label {int(split.y.max())} outside the model's {n_classes} classes")
    acc = accuracy(net, split)
    cm = confusion_matrix(net, split, n_classes)
    out = Path(args.out) if args.out else Path(args.model) / f"confusion_{args.split}.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true"] + [f"pred{c}" for c in range(n_classes)])
        for c in range(n_classes):
            w.writerow([c] + cm[c].tolist())
    print(f"accuracy {acc:.4f} ({int(np.trace(cm))}/{len(split)}); confusion -> {out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg, _ = resolve_config(args.config, args.size)
    res = gradcheck.gradcheck_config(cfg, args.trials, args.eps, args.tol, args.inject_bug)
    if args.trials == 0:
        print("warning: 0 trials, nothing checked (vacuous pass)")
        return EXIT_OK
    print(f"checked {res.checked} of {res.trials} trials ({res.skipped} kink-adjacent skipped); "
          f"worst rel err {res.worst_rel_err:.3g} at {res.worst_at or '-'}")
    for f in res.failures:
        print("FAIL", f)
    return EXIT_OK if res.passed else EXIT_CHECK


def cmd_compare(args) -> int:
    spec = synth.parse_synth_spec(Path(args.spec).read_text()) if args.spec else None

    def show(row):
        print(f"seed {row.seed} {row.variant}: train {row.train_acc:.4f} "
              f"shifted test {row.test_acc_shifted:.4f}", flush=True)

    rows, summary = experiments.run_compare(args.experiment, range(args.seeds), spec,
                                            thread_count(), show)
    experiments.write_compare(args.out, rows, summary)
    med = summary["median_test_acc_shifted"]
    print("median shifted-test accuracy: " + ", ".join(f"{k} {v:.4f}" for k, v in med.items()))
    return EXIT_OK


def cmd_analyze(args) -> int:
    net = load_network(args.model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    coherence = invariance = None
    try:
        coherence = analysis.group_coherence(net)
        spec = synth.load_spec(args.data)
        invariance = analysis.shift_invariance(net, analysis.clean_samples(spec.classes),
                                               args.max_shift)
    except ConfigError as exc:
        print(f"coherence/invariance skipped: {exc}", file=sys.stderr)
    if coherence is not None:
        print(f"group coherence: within {coherence.within:.4f} across {coherence.across:.4f} "
              f"gap {coherence.gap:.4f}")
    if invariance is not None:
        with open(out / "invariance.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["shift", "pre", "post", "ratio"])
            for row in zip(invariance.shifts, invariance.pre, invariance.post, invariance.ratio):
                w.writerow([row[0]] + [repr(v) for v in row[1:]])
        print("invariance ratio by shift: " +
              ", ".join(f"{s}: {r:.4f}" for s, r in zip(invariance.shifts, invariance.ratio)))
    analysis.write_report(out / "report.jsonl", analysis.report_records(coherence, invariance))
    written = analysis.export_filters(net, 1, out)
    print(f"exported {len(written) - 1} layer-1 filters to {out}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------

def _count(minimum: int):
    def parse(text: str) -> int:
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if v < minimum:
            raise argparse.ArgumentTypeError(f"must be >= {minimum}, got {v}")
        return v
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="impnet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("features", help="log-mel features for a directory of WAV files")
    s.add_argument("--wav-dir", required=True)
    s.add_argument("--out", required=True, help="feature archive path (.impf); CSV goes alongside")
    s.add_argument("--sample-rate", type=int, default=16000, choices=features.SAMPLE_RATES)
    s.add_argument("--mean-norm", action="store_true")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("synth", help="write a synthetic shifted-pattern dataset")
    s.add_argument("--spec", help="key = value synthesis parameters (defaults if omitted)")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train with the accept/reject epoch gate")
    s.add_argument("--config", required=True, help=f"config file or preset ({', '.join(PRESETS)})")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=_count(0), default=50)
    s.add_argument("--batch", type=_count(1), default=512)
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--init", choices=("config", "fan-in"), default="config",
                   help="weight stddevs from the config, or sqrt(2/fan_in) where not overridden")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="frame accuracy and confusion matrix")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--split", default="test")
    s.add_argument("--out", help="confusion CSV path (default: inside the model directory)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", help="finite-difference gradient check")
    s.add_argument("--config", required=True)
    s.add_argument("--size", choices=("tiny", "desk"), default="tiny",
                   help="preset size when --config names a preset")
    s.add_argument("--trials", type=_count(0), default=20)
    s.add_argument("--eps", type=float, default=1e-5)
    s.add_argument("--tol", type=float, default=1e-5)
    s.add_argument("--inject-bug", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("compare", help="matched-budget variant comparison over seeds")
    s.add_argument("--experiment", required=True, choices=tuple(experiments.EXPERIMENTS))
    s.add_argument("--out", required=True)
    s.add_argument("--seeds", type=_count(1), default=5)
    s.add_argument("--spec", help="synthesis parameters (defaults if omitted)")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("analyze", help="filter coherence, shift invariance and filter images")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True, help="synthetic dataset directory (for its spec)")
    s.add_argument("--out", required=True)
    s.add_argument("--max-shift", type=int, default=2)
    s.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ImpNetError, ValueError, OSError) as exc:
        print(f"impnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FloatingPointError as exc:
        print(f"impnet {args.command}: aborted: {exc}", file=sys.stderr)
        return EXIT_DATA
