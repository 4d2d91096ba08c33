"""Command-line driver for the full pipeline.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
inconsistent inputs), 3 runtime error (including a failed gradient check).
Every stochastic subcommand takes --seed and is bit-reproducible under it.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

GRADCHECK_THRESHOLD = 1e-4


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we use 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="signvec", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--out", required=True, help="dataset directory to create")
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--samples", type=int, default=5, help="samples per class")
    p.add_argument("--min-frames", type=int, default=40)
    p.add_argument("--max-frames", type=int, default=70)
    p.add_argument("--handshapes", type=int, default=6)
    p.add_argument("--control-points", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.25, help="coordinate noise sigma")
    p.add_argument("--warp", type=float, default=0.31, help="temporal warp amplitude")
    p.add_argument("--fps", type=float, default=25.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a model on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--config", default="small", help="preset name or config JSON path")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="history output format")

    p = sub.add_parser("embed", help="embed one poseseq document")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True, help="poseseq JSON file")
    p.add_argument("--out", help="write the embedding JSON here instead of stdout")

    p = sub.add_parser("index", help="build a support set from a dictionary")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True,
                   help="dictionary dir (<label>.json) or dataset dir (<label>/*.json)")
    p.add_argument("--out", required=True, help="support-set file to write")
    p.add_argument("--similarity", choices=("scaled_dot", "dot", "cosine", "neg_euclidean"),
                   default="scaled_dot")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--exemplar", choices=("first", "random"), default="first",
                   help="per-class pick when --data is a dataset directory")
    p.add_argument("--seed", type=int, default=0, help="seed for --exemplar random")

    p = sub.add_parser("query", help="rank support labels for a query document")
    p.add_argument("--support", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")

    p = sub.add_parser("eval", help="closed-set recognition metrics on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--ks", default="1,5,10", help="comma-separated recall cutoffs")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("perturb", help="support-set resampling protocol")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", type=int, default=100, help="number of resamplings")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--similarity", choices=("scaled_dot", "dot", "cosine", "neg_euclidean"),
                   default="cosine")
    p.add_argument("--out", help="write per-seed rows CSV here")
    p.add_argument("--summary-out", help="write the mean/std summary CSV here")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("scale", help="dictionary-size scaling protocol")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--sizes", default="100,300,1000,2000",
                   help="strictly increasing dictionary sizes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--similarity", choices=("scaled_dot", "dot", "cosine", "neg_euclidean"),
                   default="cosine")
    p.add_argument("--out", help="write per-size rows CSV here")
    p.add_argument("--summary-out", help="write the summary CSV here")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("ablate", help="build, briefly train, and gradient-check ablations")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default="small")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("gradcheck", help="finite-difference check of model gradients")
    p.add_argument("--config", default="tiny")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=3)
    p.add_argument("--samples-per-param", type=int, default=4)

    p = sub.add_parser("serve", help="run the HTTP query service")
    p.add_argument("--model", required=True)
    p.add_argument("--support", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--wal", help="write-ahead log for vocabulary additions")

    return parser


def _resolve_config(spec: str, *, num_classes: int | None = None,
                    sequence_len: int | None = None):
    from .model import ModelConfig, preset, _PRESETS

    if spec in _PRESETS:
        return preset(spec, num_classes=num_classes, sequence_len=sequence_len)
    path = Path(spec)
    if not path.exists():
        raise FileNotFoundError(f"config {spec!r} is neither a preset nor a file")
    cfg = ModelConfig.from_json_dict(json.loads(path.read_text(encoding="utf-8")))
    if num_classes is not None:
        cfg = replace(cfg, num_classes=num_classes)
    if sequence_len is not None:
        cfg = replace(cfg, sequence_len=sequence_len)
    cfg.validate()
    return cfg


def _print_or_write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_synth(args) -> int:
    from .datasets import SynthConfig, save_dataset, synth_generate

    cfg = SynthConfig(
        num_classes=args.classes,
        samples_per_class=args.samples,
        min_frames=args.min_frames,
        max_frames=args.max_frames,
        handshape_prototypes=args.handshapes,
        control_points=args.control_points,
        noise_scale=args.noise,
        warp_amplitude=args.warp,
        fps=args.fps,
        seed=args.seed,
    )
    samples = synth_generate(cfg)
    save_dataset(samples, args.out)
    print(f"wrote {len(samples)} samples ({args.classes} classes) to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    from .datasets import classes_of, label_indices, load_dataset
    from .model import TrainConfig, build_model, save_model, train

    samples = load_dataset(args.data)
    labels = classes_of(samples)
    config = _resolve_config(args.config, num_classes=len(labels))
    model = build_model(config, seed=args.seed)
    _, indexed = label_indices(samples)
    tcfg = TrainConfig(batch_size=args.batch_size, learning_rate=args.lr,
                       epochs=args.epochs, seed=args.seed, patience=args.patience,
                       val_fraction=args.val_fraction)
    model, history = train(model, indexed, tcfg)
    save_model(model, args.out)
    if args.format == "json":
        print(json.dumps({"history": history, "model": str(args.out),
                          "classes": labels}, indent=2))
    else:
        print("epoch,loss,train_accuracy,val_accuracy")
        for h in history:
            val = "" if h["val_accuracy"] is None else repr(h["val_accuracy"])
            print(f"{h['epoch']},{h['loss']!r},{h['train_accuracy']!r},{val}")
    return EXIT_OK


def _cmd_embed(args) -> int:
    from .keypoints import parse_poseseq
    from .model import embed, load_model

    model = load_model(args.model)
    seq = parse_poseseq(Path(args.input).read_bytes())
    vector = embed(model, seq)
    text = json.dumps([float(v) for v in vector]) + "\n"
    _print_or_write(text, args.out)
    return EXIT_OK


def _load_dictionary_entries(data_dir: str, exemplar: str, seed: int):
    from .datasets import by_class, load_dataset, load_dictionary

    root = Path(data_dir)
    if root.is_dir() and any(p.is_dir() for p in root.iterdir()):
        samples = load_dataset(root)
        rng = np.random.default_rng(seed)
        entries = []
        for label, seqs in sorted(by_class(samples).items()):
            pick = 0 if exemplar == "first" else int(rng.integers(len(seqs)))
            entries.append((label, seqs[pick]))
        return entries
    return load_dictionary(root)


def _cmd_index(args) -> int:
    from .model import load_model
    from .retrieval import build_support_set, save_support

    model = load_model(args.model)
    entries = _load_dictionary_entries(args.data, args.exemplar, args.seed)
    support = build_support_set(model, entries, similarity=args.similarity,
                                temperature=args.temperature)
    save_support(support, args.out)
    print(f"indexed {len(support)} entries (dim {support.dim}) into {args.out}")
    return EXIT_OK


def _cmd_query(args) -> int:
    from .keypoints import parse_poseseq
    from .model import load_model
    from .retrieval import load_support, query_support

    support = load_support(args.support)
    model = load_model(args.model)
    seq = parse_poseseq(Path(args.input).read_bytes())
    result = query_support(support, model, seq, args.k, args.temperature)
    if args.format == "json":
        print(json.dumps({"results": [
            {"label": label, "probability": probability, "rank": rank}
            for label, probability, rank in result.entries
        ]}))
    elif args.format == "csv":
        print("rank,label,probability")
        for label, probability, rank in result.entries:
            print(f"{rank},{label},{probability!r}")
    else:
        for label, probability, rank in result.entries:
            print(f"{rank}\t{label}\t{probability!r}")
    return EXIT_OK


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise ValueError(f"{what} must be comma-separated integers, got {text!r}") from None


def _cmd_eval(args) -> int:
    from .datasets import classes_of, label_indices, load_dataset
    from .model import evaluate_islr, load_model

    model = load_model(args.model)
    samples = load_dataset(args.data)
    labels = classes_of(samples)
    if len(labels) != model.config.num_classes:
        raise ValueError(
            f"dataset has {len(labels)} classes but the model was trained for "
            f"{model.config.num_classes}")
    _, indexed = label_indices(samples)
    metrics = evaluate_islr(model, indexed, ks=_parse_int_list(args.ks, "--ks"))
    if args.format == "json":
        print(json.dumps(metrics, indent=2))
    else:
        print(",".join(metrics))
        print(",".join(repr(v) for v in metrics.values()))
    return EXIT_OK


def _report_outputs(report, args) -> None:
    if args.out:
        Path(args.out).write_text(report.rows_csv(), encoding="utf-8")
    if args.summary_out:
        Path(args.summary_out).write_text(report.summary_csv(), encoding="utf-8")
    if args.format == "json":
        print(json.dumps({"rows": report.rows, "summary": report.summary}, indent=2))
    else:
        sys.stdout.write(report.summary_csv())


def _cmd_perturb(args) -> int:
    from .datasets import load_dataset
    from .experiments import run_perturbation
    from .model import load_model

    model = load_model(args.model)
    samples = load_dataset(args.data)
    report = run_perturbation(samples, model, n_seeds=args.seeds, seed=args.seed,
                              similarity=args.similarity)
    _report_outputs(report, args)
    return EXIT_OK


def _cmd_scale(args) -> int:
    from .datasets import load_dataset
    from .experiments import run_scaling
    from .model import load_model

    model = load_model(args.model)
    samples = load_dataset(args.data)
    report = run_scaling(samples, model, _parse_int_list(args.sizes, "--sizes"),
                         seed=args.seed, similarity=args.similarity)
    _report_outputs(report, args)
    return EXIT_OK


def _gradcheck_error(model, seed: int, batch: int, samples_per_param: int) -> float:
    from .model import gradient_check

    return gradient_check(model, seed=seed, batch=batch,
                          samples_per_param=samples_per_param)


def _cmd_ablate(args) -> int:
    from .datasets import classes_of, label_indices, load_dataset
    from .model import TrainConfig, build_model, train

    samples = load_dataset(args.data)
    labels = classes_of(samples)
    _, indexed = label_indices(samples)
    variants = [
        ("baseline", {}),
        ("no_input_conv", {"no_input_conv": True}),
        ("no_frame_embedding", {"no_frame_embedding": True}),
        ("no_intermediate_conv", {"no_intermediate_conv": True}),
    ]
    rows = []
    for name, flags in variants:
        config = replace(_resolve_config(args.config, num_classes=len(labels)), **flags)
        model = build_model(config, seed=args.seed)
        tcfg = TrainConfig(epochs=args.epochs, seed=args.seed, patience=0, val_fraction=0.0)
        model, history = train(model, indexed, tcfg)
        error = _gradcheck_error(model, args.seed, batch=2, samples_per_param=2)
        rows.append({
            "variant": name,
            "final_loss": history[-1]["loss"],
            "train_accuracy": history[-1]["train_accuracy"],
            "gradcheck_error": error,
            "gradcheck_pass": bool(error < GRADCHECK_THRESHOLD),
        })
    if args.format == "json":
        print(json.dumps(rows, indent=2))
    else:
        print("variant,final_loss,train_accuracy,gradcheck_error,gradcheck_pass")
        for r in rows:
            print(f"{r['variant']},{r['final_loss']!r},{r['train_accuracy']!r},"
                  f"{r['gradcheck_error']!r},{r['gradcheck_pass']}")
    if not all(r["gradcheck_pass"] for r in rows):
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    from .model import build_model

    config = _resolve_config(args.config)
    model = build_model(config, seed=args.seed)
    error = _gradcheck_error(model, args.seed, args.batch, args.samples_per_param)
    passed = error < GRADCHECK_THRESHOLD
    print(f"max relative gradient error: {error:.3e} "
          f"({'PASS' if passed else 'FAIL'} at {GRADCHECK_THRESHOLD})")
    return EXIT_OK if passed else EXIT_RUNTIME


def _cmd_serve(args) -> int:
    from .service import serve

    serve(args.model, args.support, host=args.host, port=args.port, wal_path=args.wal)
    return EXIT_OK


_HANDLERS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "embed": _cmd_embed,
    "index": _cmd_index,
    "query": _cmd_query,
    "eval": _cmd_eval,
    "perturb": _cmd_perturb,
    "scale": _cmd_scale,
    "ablate": _cmd_ablate,
    "gradcheck": _cmd_gradcheck,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # usage error (1) or --help (0)
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    from .keypoints import NormalizationError, PoseseqError
    from .model import ConfigError, ModelFormatError
    from .nncore import WeightFormatError
    from .datasets import SynthConfigError
    from .experiments import ProtocolError
    from .retrieval import (
        DuplicateLabelError,
        EmbeddingFailure,
        FingerprintMismatchError,
        SupportFormatError,
    )
    from .service import ServiceStartupError

    data_errors = (
        PoseseqError, NormalizationError, ConfigError, ModelFormatError,
        WeightFormatError, SynthConfigError, ProtocolError, DuplicateLabelError,
        EmbeddingFailure, FingerprintMismatchError, SupportFormatError,
        ServiceStartupError, FileNotFoundError, NotADirectoryError, ValueError,
    )
    try:
        return _HANDLERS[args.command](args)
    except data_errors as e:
        print(f"signvec {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as e:  # unexpected: runtime failure
        print(f"signvec {args.command}: unexpected error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
