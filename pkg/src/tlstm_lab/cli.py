"""Command-line entry point: simulate, train, evaluate, compare, gradcheck.

One root seed drives every stage; per-stage streams are derived by labeled
hashing, so each command is bit-reproducible under a fixed (seed, config)
pair.  Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
failure (non-finite training or a failed gradient check).
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import load_experiment_config
from .metrics import report_to_csv, report_to_markdown
from .simulator import DIGITS, generate_dataset, load_dataset
from .trainer import (
    MODEL_KINDS,
    Model,
    NonFiniteError,
    evaluate_model,
    gradcheck,
    train,
)

LABEL_NAMES = [str(d) for d in DIGITS]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


class CliValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise CliValidationError(message)


def _write_text(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


def _ensure_outdir(path):
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _loss_log_csv(log, config_hash):
    lines = [f"# config_hash={config_hash}", "epoch,split,mean_loss"]
    lines += [f"{epoch},{split},{loss!r}" for epoch, split, loss in log]
    return "\n".join(lines) + "\n"


def _model_to_checkpoint(model, labels, config, config_hash):
    dims = {
        "hidden": config.hidden if model.cell is not None else 0,
        "labels": labels,
        "features": config.features,
        "encoder_hidden": config.encoder_hidden if model.encoder is not None else 0,
    }
    return Checkpoint(
        model=model.kind,
        dims=dims,
        delta_max=model.delta_max,
        threshold=model.threshold,
        config_hash=config_hash,
        encoder=model.encoder,
        cell=model.cell,
        head_w=model.head_w,
        head_b=model.head_b,
    )


def _checkpoint_to_model(ckpt):
    return Model(
        kind=ckpt.model,
        encoder=ckpt.encoder,
        cell=ckpt.cell,
        head_w=ckpt.head_w,
        head_b=ckpt.head_b,
        delta_max=ckpt.delta_max,
        threshold=ckpt.threshold,
    )


def _check_dataset_compat(dataset, ckpt):
    labels = len(dataset[0].steps[0].labels)
    if labels != ckpt.dims["labels"]:
        raise CliValidationError(
            f"dataset has {labels} labels, checkpoint expects {ckpt.dims['labels']}"
        )
    has_features = dataset[0].steps[0].features is not None
    if has_features:
        d = len(dataset[0].steps[0].features)
        if d != ckpt.dims["features"]:
            raise CliValidationError(
                f"dataset features have dim {d}, checkpoint expects {ckpt.dims['features']}"
            )
    elif ckpt.encoder is None:
        raise CliValidationError("dataset stores pixels but checkpoint has no encoder")


def cmd_simulate(args):
    cfg = load_experiment_config(args.config)
    sim = cfg.simulator_config()
    out = _ensure_outdir(args.out)
    train_path = out / "train.jsonl"
    test_path = out / "test.jsonl"
    generate_dataset(sim, args.seed, args.n_train, train_path, split="train")
    generate_dataset(sim, args.seed, args.n_test, test_path, split="test")
    manifest = {
        "schema": 1,
        "seed": args.seed,
        "config_hash": cfg.config_hash(),
        "config": cfg.as_dict(),
        "n_train": args.n_train,
        "n_test": args.n_test,
        "train_path": train_path.name,
        "test_path": test_path.name,
    }
    _write_text(out / "manifest.json", json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    print(f"wrote {train_path} ({args.n_train} sequences), {test_path} ({args.n_test})")
    return EXIT_OK


def cmd_train(args):
    cfg = load_experiment_config(args.config)
    tc = cfg.train_config(args.cell)
    dataset = load_dataset(args.data)
    if not dataset:
        raise CliValidationError(f"dataset {args.data} is empty")
    out = _ensure_outdir(args.out)
    t0 = time.time()
    model, log = train(dataset, tc, args.seed, log_every=args.log_every)
    labels = len(dataset[0].steps[0].labels)
    ckpt_path = out / "checkpoint.json"
    save_checkpoint(ckpt_path, _model_to_checkpoint(model, labels, tc, cfg.config_hash()))
    _write_text(out / "loss_log.csv", _loss_log_csv(log, cfg.config_hash()))
    print(
        f"trained {args.cell} on {len(dataset)} sequences in {time.time() - t0:.1f}s; "
        f"final mean loss {log[-1][2]:.4f}; checkpoint at {ckpt_path}"
    )
    return EXIT_OK


def cmd_evaluate(args):
    ckpt = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    if not dataset:
        raise CliValidationError(f"dataset {args.data} is empty")
    _check_dataset_compat(dataset, ckpt)
    model = _checkpoint_to_model(ckpt)
    report, _, _ = evaluate_model(model, dataset)
    out = _ensure_outdir(args.out)
    _write_text(out / "metrics.csv", report_to_csv(report, LABEL_NAMES, ckpt.config_hash))
    md = report_to_markdown(report, LABEL_NAMES, ckpt.model)
    _write_text(out / "metrics.md", md + f"\n\nconfig_hash: {ckpt.config_hash}\n")
    print(md)
    return EXIT_OK


def cmd_compare(args):
    cfg = load_experiment_config(args.config)
    sim = cfg.simulator_config()
    seeds = tuple(int(s) for s in args.seeds.split(",")) if args.seeds else cfg["compare.seeds"]
    if not seeds:
        raise CliValidationError("need at least one seed")
    n_train = args.n_train if args.n_train is not None else cfg["compare.n_train"]
    n_test = args.n_test if args.n_test is not None else cfg["compare.n_test"]
    out = _ensure_outdir(args.out)
    config_hash = cfg.config_hash()

    reports = {kind: {} for kind in MODEL_KINDS}
    for seed in seeds:
        data_dir = _ensure_outdir(out / f"data_seed{seed}")
        train_path = data_dir / "train.jsonl"
        test_path = data_dir / "test.jsonl"
        print(f"[seed {seed}] simulating {n_train}+{n_test} sequences ...")
        generate_dataset(sim, seed, n_train, train_path, split="train")
        generate_dataset(sim, seed, n_test, test_path, split="test")
        train_set = load_dataset(train_path)
        test_set = load_dataset(test_path)
        labels = len(train_set[0].steps[0].labels)
        for kind in MODEL_KINDS:
            tc = cfg.train_config(kind)
            print(f"[seed {seed}] training {kind} ({tc.epochs} epochs) ...")
            t0 = time.time()
            model, log = train(train_set, tc, seed, log_every=args.log_every)
            elapsed = time.time() - t0
            ckpt_path = out / f"checkpoint_{kind}_seed{seed}.json"
            save_checkpoint(ckpt_path, _model_to_checkpoint(model, labels, tc, config_hash))
            _write_text(
                out / f"loss_log_{kind}_seed{seed}.csv", _loss_log_csv(log, config_hash)
            )
            report, _, _ = evaluate_model(model, test_set)
            reports[kind][seed] = report
            _write_text(
                out / f"metrics_{kind}_seed{seed}.csv",
                report_to_csv(report, LABEL_NAMES, config_hash),
            )
            print(
                f"[seed {seed}] {kind}: avg F {report.macro['F-measure'][0]:.4f} "
                f"({elapsed:.0f}s train)"
            )

    summary = {"schema": 1, "config_hash": config_hash, "seeds": list(seeds), "models": {}}
    blocks = []
    for kind in MODEL_KINDS:
        per_seed = reports[kind]

        def seed_mean(attr):
            # column-wise mean over seeds, skipping undefined entries
            stacked = np.stack([getattr(per_seed[s], attr) for s in seeds])
            defined = np.isfinite(stacked)
            counts = defined.sum(axis=0)
            out = np.full(stacked.shape[1], np.nan)
            np.divide(
                np.where(defined, stacked, 0.0).sum(axis=0), counts,
                out=out, where=counts > 0,
            )
            return out

        mean_ppv = seed_mean("ppv")
        mean_npv = seed_mean("npv")
        mean_f = seed_mean("f_measure")
        avg_f_per_seed = {str(s): per_seed[s].macro["F-measure"][0] for s in seeds}
        mean_avg_f = float(np.mean([per_seed[s].macro["F-measure"][0] for s in seeds]))
        summary["models"][kind] = {
            "avg_f_per_seed": avg_f_per_seed,
            "mean_avg_f": mean_avg_f,
            "mean_avg_ppv": float(np.mean([per_seed[s].macro["PPV"][0] for s in seeds])),
            "mean_avg_npv": float(np.mean([per_seed[s].macro["NPV"][0] for s in seeds])),
        }
        header = [f"**{kind}**"] + LABEL_NAMES + ["avg."]
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for row_name, row_vals, row_avg in (
            ("PPV", mean_ppv, summary["models"][kind]["mean_avg_ppv"]),
            ("NPV", mean_npv, summary["models"][kind]["mean_avg_npv"]),
            ("F-measure", mean_f, mean_avg_f),
        ):
            cells = [row_name] + [
                ("NA" if not np.isfinite(v) else f"{v:.4f}") for v in row_vals
            ] + [f"{row_avg:.4f}"]
            lines.append("| " + " | ".join(cells) + " |")
        blocks.append("\n".join(lines))

    table = "\n\n".join(blocks)
    _write_text(
        out / "compare.md",
        f"Benchmark over seeds {list(seeds)} (means across seeds)\n\n{table}\n\n"
        f"config_hash: {config_hash}\n",
    )
    _write_text(out / "summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(table)
    return EXIT_OK


def cmd_gradcheck(args):
    report = gradcheck(seed=args.seed)
    for line in report.lines():
        print(line)
    print(f"max relative error {report.max_error:.3e} (threshold {report.threshold:.0e})")
    if not report.passed:
        print("gradient check FAILED")
        return EXIT_NUMERICAL
    print("gradient check passed")
    return EXIT_OK


def build_parser():
    parser = _Parser(
        prog="tlstm-lab",
        description=(
            "Simulate event-driven digit sequences, train time-modulated LSTM models, "
            "and reproduce the packaged classification benchmark."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate train/test JSONL datasets")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--n-train", type=int, required=True, help="training sequences")
    p.add_argument("--n-test", type=int, required=True, help="test sequences")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train one model on a dataset")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--data", required=True, help="JSONL dataset path")
    p.add_argument("--cell", required=True, choices=MODEL_KINDS, help="model kind")
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--log-every", type=int, default=0, help="print loss every N epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="JSONL dataset path")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "compare", help="full benchmark: simulate, train all models, evaluate"
    )
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seeds", help="comma-separated seeds (default from config)")
    p.add_argument("--n-train", type=int, help="override compare.n_train")
    p.add_argument("--n-test", type=int, help="override compare.n_test")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--log-every", type=int, default=0, help="print loss every N epochs")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NonFiniteError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
