"""Command-line entry point exposing the whole pipeline as subcommands.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
failure (divergence or non-finite values). Every subcommand is
deterministic under --seed, and --json outputs keep a stable schema.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from floraclass.errors import (
    DataError,
    FloraclassError,
    NumericalError,
    ShapeError,
    UsageError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser() -> _Parser:
    p = _Parser(prog="floraclass", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("prep", help="crop, resize and optionally augment a directory of images")
    sp.add_argument("--in", dest="in_dir", required=True)
    sp.add_argument("--out", dest="out_dir", required=True)
    sp.add_argument("--side", type=int, default=224)
    sp.add_argument("--augment", type=int, default=0, metavar="N")
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("synth", help="generate a synthetic shape-classification dataset")
    sp.add_argument("--classes", type=int, default=3)
    sp.add_argument("--per-class", type=int, default=100)
    sp.add_argument("--side", type=int, default=16)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--out", dest="out_dir", required=True)

    sp = sub.add_parser("audit", help="check per-class minimum image counts")
    sp.add_argument("--dataset", required=True, help="directory holding labels.csv")
    sp.add_argument("--min", type=int, default=100)
    sp.add_argument("--strict", action="store_true")

    sp = sub.add_parser("sweep", help="staged model selection with k-fold validation")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--stages", help="JSON file overriding the default candidate grids")
    sp.add_argument("--out", default="report.json")
    sp.add_argument("--model-out", default="model.fmdl")
    sp.add_argument("--splits-out", default=None, help="default: <out dir>/splits.json")
    sp.add_argument("--loss-csv", default=None)
    sp.add_argument("--test-fraction", type=float, default=0.1)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--epochs", type=int, default=15)
    sp.add_argument("--final-epochs", type=int, default=40)
    sp.add_argument("--batch-size", type=int, default=16)
    sp.add_argument("--side", type=int, default=16)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--base-optimizer", default="Adagrad")
    sp.add_argument("--base-lr", type=float, default=0.01)
    sp.add_argument("--augment", action="store_true")
    sp.add_argument("--cartesian", action="store_true")

    sp = sub.add_parser("train", help="train one configuration on a whole dataset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", default="model.fmdl")
    sp.add_argument("--loss-csv", default=None)
    sp.add_argument("--optimizer", default="Adagrad")
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--dense", type=int, default=None)
    sp.add_argument("--epochs", type=int, default=15)
    sp.add_argument("--batch-size", type=int, default=16)
    sp.add_argument("--side", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--augment", action="store_true")

    sp = sub.add_parser("eval", help="Top-1 (and Top-k) accuracy of a model file")
    sp.add_argument("--model", required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--split", default=None, help="splits.json written by sweep")
    sp.add_argument("--part", default="test", choices=("train", "test"))
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("ensemble", help="merge member model files into one ensemble file")
    sp.add_argument("--members", nargs="+", required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("quantize", help="re-encode model weights at reduced precision")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--mode", choices=("f16", "i8"), default="f16")

    # serve flags fall back to FLORACLASS_* environment variables
    env = os.environ
    sp = sub.add_parser("serve", help="run the classification HTTP service")
    sp.add_argument("--model", default=env.get("FLORACLASS_MODEL"),
                    required="FLORACLASS_MODEL" not in env)
    sp.add_argument("--species", default=env.get("FLORACLASS_SPECIES"),
                    required="FLORACLASS_SPECIES" not in env)
    sp.add_argument("--port", type=int, default=int(env.get("FLORACLASS_PORT", 8000)))
    sp.add_argument("--host", default=env.get("FLORACLASS_HOST", "127.0.0.1"))
    sp.add_argument("--feedback-log",
                    default=env.get("FLORACLASS_FEEDBACK_LOG", "feedback.jsonl"))
    sp.add_argument("--work-dir", default=env.get("FLORACLASS_WORK_DIR", "service-data"))
    sp.add_argument("--static", default=env.get("FLORACLASS_STATIC"))
    return p


def _load_dataset_dir(root: str) -> tuple:
    from floraclass.dataset import load_labels

    root_path = Path(root)
    labels = root_path / "labels.csv"
    if not labels.exists():
        raise DataError(f"{root}: no labels.csv found")
    return load_labels(labels, image_root=root_path), root_path


def _tensorize(ds, root, side):
    from floraclass.dataset import load_tensors

    return load_tensors(ds, root, side)


def _write_loss_csv(path: str, curve: list[float]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(curve):
            fh.write(f"{i},{loss}\n")


def cmd_prep(args) -> int:
    from floraclass.imageprep import prep_directory

    written = prep_directory(
        args.in_dir, args.out_dir, side=args.side,
        augment_copies=args.augment, seed=args.seed,
    )
    print(f"wrote {len(written)} images to {args.out_dir}")
    return 0


def cmd_synth(args) -> int:
    from floraclass.dataset import synth_dataset

    ds = synth_dataset(
        args.classes, args.per_class, args.side, args.seed, args.out_dir
    )
    print(
        f"generated {len(ds)} images over {len(ds.class_names)} classes "
        f"({', '.join(ds.class_names)}) in {args.out_dir}"
    )
    return 0


def cmd_audit(args) -> int:
    from floraclass.dataset import audit_min_count

    ds, _ = _load_dataset_dir(args.dataset)
    report = audit_min_count(ds, min_count=args.min, strict=args.strict)
    if report.ok:
        print(f"all {len(report.counts)} classes have >= {args.min} images")
    else:
        for name, count in report.below.items():
            print(f"below minimum: {name} has {count} < {args.min}")
    return 0


def _train_config(args, optimizer_kind, lr, dense, seed):
    from floraclass.optim import OptimizerConfig
    from floraclass.selection import TrainConfig

    return TrainConfig(
        optimizer=OptimizerConfig(optimizer_kind, learning_rate=lr),
        extra_dense=dense,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=seed,
        augment=args.augment,
        input_side=args.side,
    )


def cmd_sweep(args) -> int:
    from floraclass.dataset import split_train_test
    from floraclass.modelstore import save
    from floraclass.selection import StagePlan, final_train, run_sweep

    ds, root = _load_dataset_dir(args.dataset)
    train_ds, test_ds = split_train_test(ds, args.test_fraction, seed=args.seed)
    items = _tensorize(train_ds, root, args.side)

    stages = StagePlan()
    if args.stages:
        with open(args.stages, encoding="utf-8") as fh:
            raw = json.load(fh)
        stages = StagePlan(
            dense_variants=tuple(raw.get("dense_variants", stages.dense_variants)),
            optimizer_kinds=tuple(raw.get("optimizer_kinds", stages.optimizer_kinds)),
            learning_rates=tuple(raw.get("learning_rates", stages.learning_rates)),
        )

    base = _train_config(args, args.base_optimizer, args.base_lr, None, args.seed)
    report, winner = run_sweep(
        items, len(ds.class_names), base, stages=stages, k=args.k,
        cartesian=args.cartesian,
    )
    for stage in report.stages:
        print(f"stage {stage.name}: winner {stage.winner_label}")
        for cand in stage.candidates:
            flag = " (diverged)" if cand.diverged else ""
            print(f"  {cand.label}: mean {cand.mean:.4f} +- {cand.std:.4f}{flag}")

    spec, weights, curve = final_train(
        winner, items, len(ds.class_names), epochs=args.final_epochs
    )
    save(spec, weights, ds.class_names, args.model_out)
    print(f"final model ({args.final_epochs} epochs) -> {args.model_out}")

    splits_out = args.splits_out or str(Path(args.out).parent / "splits.json")
    with open(splits_out, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "train": [ref for ref, _ in train_ds.items],
                "test": [ref for ref, _ in test_ds.items],
            },
            fh,
        )
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=1)
    print(f"report -> {args.out}; splits -> {splits_out}")
    if args.loss_csv:
        _write_loss_csv(args.loss_csv, curve)
        print(f"final training loss curve -> {args.loss_csv}")
    return 0


def cmd_train(args) -> int:
    from floraclass.modelstore import save
    from floraclass.selection import train

    ds, root = _load_dataset_dir(args.dataset)
    items = _tensorize(ds, root, args.side)
    config = _train_config(args, args.optimizer, args.lr, args.dense, args.seed)
    spec, weights, curve = train(config, items, len(ds.class_names))
    save(spec, weights, ds.class_names, args.out)
    print(
        f"trained {spec.name} for {config.epochs} epochs: "
        f"loss {curve[0]:.4f} -> {curve[-1]:.4f}; model -> {args.out}"
    )
    if args.loss_csv:
        _write_loss_csv(args.loss_csv, curve)
    return 0


def _filter_split(ds, split_path: str, part: str):
    from floraclass.dataset import LabeledDataset

    with open(split_path, encoding="utf-8") as fh:
        splits = json.load(fh)
    if part not in splits:
        raise DataError(f"{split_path} has no {part!r} part")
    wanted = set(splits[part])
    items = [it for it in ds.items if it[0] in wanted]
    if not items:
        raise DataError(f"no dataset items match the {part!r} split")
    return LabeledDataset(items=items, class_names=list(ds.class_names))


def cmd_eval(args) -> int:
    import numpy as np

    from floraclass.ensemble import ensemble_predict
    from floraclass.modelstore import load_ensemble

    ens = load_ensemble(args.model)
    ds, root = _load_dataset_dir(args.dataset)
    if args.split:
        ds = _filter_split(ds, args.split, args.part)
    if list(ds.class_names) != list(ens.class_names):
        raise DataError(
            f"model classes {ens.class_names!r} do not match dataset classes "
            f"{ds.class_names!r}"
        )
    items = _tensorize(ds, root, ens.input_side)
    hits = 0
    topk_hits = 0
    for x, y in items:
        p = ensemble_predict(ens, x)
        order = np.argsort(-p, kind="stable")
        hits += int(order[0] == y)
        if args.k:
            topk_hits += int(y in order[: args.k])
    top1 = hits / len(items)
    out = {
        "model": ens.name,
        "items": len(items),
        "top1": top1,
        "topk": (
            {"k": args.k, "accuracy": topk_hits / len(items)} if args.k else None
        ),
    }
    if args.json:
        print(json.dumps(out))
    else:
        print(f"{ens.name}: Top-1 {top1:.4f} on {len(items)} items")
        if args.k:
            print(f"{ens.name}: Top-{args.k} {out['topk']['accuracy']:.4f}")
    return 0


def cmd_ensemble(args) -> int:
    from floraclass.ensemble import EnsembleModel
    from floraclass.modelstore import load_models, save_ensemble

    members = []
    for path in args.members:
        pairs, class_names = load_models(path)
        members.extend((spec, weights, class_names) for spec, weights in pairs)
    ens = EnsembleModel.from_members(members)
    save_ensemble(ens, args.out)
    print(f"ensemble of {len(ens.members)} members -> {args.out}")
    return 0


def cmd_quantize(args) -> int:
    from floraclass.ensemble import EnsembleModel
    from floraclass.modelstore import (
        load_models,
        payload_size_bytes,
        quantize_f16,
        quantize_i8,
        save_ensemble,
    )

    pairs, class_names = load_models(args.model)
    fn = quantize_f16 if args.mode == "f16" else quantize_i8
    quantized = [(spec, fn(weights), class_names) for spec, weights in pairs]
    save_ensemble(EnsembleModel.from_members(quantized), args.out)
    before = payload_size_bytes(args.model)
    after = payload_size_bytes(args.out)
    print(
        f"quantized {args.model} -> {args.out} ({args.mode}); "
        f"payload {before} -> {after} bytes (x{after / before:.3f})"
    )
    return 0


def cmd_serve(args) -> int:
    from floraclass.service import build_app, serve

    app = build_app(
        args.model, args.species, args.feedback_log, args.work_dir, args.static
    )
    print(f"serving on http://{args.host}:{args.port}")
    serve(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "prep": cmd_prep,
    "synth": cmd_synth,
    "audit": cmd_audit,
    "sweep": cmd_sweep,
    "train": cmd_train,
    "eval": cmd_eval,
    "ensemble": cmd_ensemble,
    "quantize": cmd_quantize,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FloraclassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
