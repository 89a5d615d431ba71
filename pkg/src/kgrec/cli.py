"""Command-line entry point: ``kgrec {synth,preprocess,train,eval,sweep,explain}``.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, apply_overrides, parse_config
from .evaluate import lr_sweep
from .exceptions import DataError, KGRecError
from .explain import extract_paths, render_explanation
from .estimator import KGAttentionRecommender
from .pipeline import Prepared, load_prepared, prepare, prepare_files, save_prepared, write_atomic
from .ingest import parse_interactions, parse_triples
from .synth import generate_planted

log = logging.getLogger("kgrec")

CHECKPOINT_FILE = "model.kgr"
LOSSES_FILE = "losses.csv"
DEFAULT_SWEEP_LRS = "0.004,0.003,0.002,0.001"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _kv(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def _lrs(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad learning-rate list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty learning-rate list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kgrec", description="Knowledge-graph recommender with attention-based explanations.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a planted-structure dataset")
    s.add_argument("--users", type=int, default=200)
    s.add_argument("--items", type=int, default=300)
    s.add_argument("--attrs", type=int, default=20)
    s.add_argument("--attrs-per-item", type=int, default=1)
    s.add_argument("--positives-per-user", type=int, default=10)
    s.add_argument("--noise", type=float, default=0.3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("preprocess", help="filter, prune and split raw files")
    s.add_argument("--interactions", type=Path, required=True)
    s.add_argument("--triples", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--min-rating", type=float, default=4.0)
    s.add_argument("--min-count", type=int, default=5)
    s.add_argument("--test-fraction", type=float, default=0.2)
    s.add_argument("--seed", type=int, default=42)

    for name, help_ in (("train", "train a model"), ("sweep", "learning-rate sensitivity table")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", type=Path, required=True)
        s.add_argument("--out", type=Path)
        s.add_argument("--data", type=Path, help="prepared data directory (overrides config)")
        s.add_argument("--epochs", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--set", type=_kv, action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key")
        if name == "train":
            s.add_argument("--learning-rate", type=float)
        else:
            s.add_argument("--lrs", type=_lrs, default=_lrs(DEFAULT_SWEEP_LRS))
            s.add_argument("--k", type=int, default=10)

    s = sub.add_parser("eval", help="top-K metrics of a checkpoint on a prepared directory")
    s.add_argument("--checkpoint", type=Path, required=True)
    s.add_argument("--data", type=Path, required=True)
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--out", type=Path, help="output directory (default: checkpoint's directory)")

    s = sub.add_parser("explain", help="attention paths from a user to an item")
    s.add_argument("--checkpoint", type=Path, required=True)
    s.add_argument("--data", type=Path, required=True)
    s.add_argument("--user", required=True)
    s.add_argument("--item", required=True)
    s.add_argument("--max-paths", type=int, default=5)
    s.add_argument("--beam", type=int, default=32)
    s.add_argument("--csv", action="store_true", help="emit rank,path,score CSV")
    return p


def _run_config(args) -> RunConfig:
    overrides = dict(args.set)
    for flag, key in (("epochs", "epochs"), ("seed", "seed"), ("learning_rate", "learning_rate")):
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = str(val)
    if args.data is not None:
        overrides["data"] = str(args.data)
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    cfg = parse_config(args.config)
    apply_overrides(cfg, overrides)
    cfg.check_paths()
    if cfg.out_dir is None:
        raise DataError("no output directory: set out_dir in the config or pass --out")
    return cfg


def _load_data(cfg: RunConfig) -> Prepared:
    if cfg.data is not None:
        return load_prepared(cfg.data)
    return prepare_files(
        cfg.interactions,
        cfg.triples,
        min_rating=cfg.min_rating,
        min_count=cfg.min_count,
        test_fraction=cfg.model.test_fraction,
        seed=cfg.model.seed,
    )


def cmd_synth(args):
    inter, triples = generate_planted(
        args.users, args.items, args.attrs, args.attrs_per_item, args.noise, args.seed,
        positives_per_user=args.positives_per_user,
    )
    write_atomic(args.out / "interactions.tsv", inter)
    write_atomic(args.out / "triples.tsv", triples)
    log.info("wrote %s", args.out)


def cmd_preprocess(args):
    prep = prepare(
        parse_interactions(args.interactions),
        parse_triples(args.triples),
        min_rating=args.min_rating,
        min_count=args.min_count,
        test_fraction=args.test_fraction,
        seed=args.seed,
    )
    save_prepared(prep, args.out)
    m = prep.idmaps
    print(
        f"users={m.num_users} items={m.num_items} aux={m.num_aux} relations={m.num_relations} "
        f"train={len(prep.dataset.train_positives)} test={len(prep.dataset.test_positives)}"
    )


def cmd_train(args):
    cfg = _run_config(args)
    prep = _load_data(cfg)
    graph = prep.graph()
    est = KGAttentionRecommender.from_config(cfg.model).fit(prep.dataset, graph)
    out = cfg.out_dir
    save_checkpoint(est.params_, cfg.model, out / CHECKPOINT_FILE, prep.idmaps)
    write_atomic(out / LOSSES_FILE, est.loss_curve_.to_csv())
    curve = est.loss_curve_
    if len(curve):
        print(f"epochs={len(curve)} train_loss={curve.train_loss[-1]:.6f} val_loss={curve.validation_loss[-1]:.6f}")
    print(f"checkpoint: {out / CHECKPOINT_FILE}")


def _fitted_from_checkpoint(checkpoint: Path, data: Path):
    if not checkpoint.is_file():
        raise DataError(f"checkpoint {checkpoint} not found")
    prep = load_prepared(data)
    graph = prep.graph()
    params, config = load_checkpoint(checkpoint, idmaps=prep.idmaps, num_nodes=graph.num_nodes)
    est = KGAttentionRecommender.from_config(config).load(params, graph, prep.dataset)
    return est, prep


def cmd_eval(args):
    est, prep = _fitted_from_checkpoint(args.checkpoint, args.data)
    report = est.evaluate(prep.dataset, args.k)
    out = args.out or args.checkpoint.parent
    write_atomic(out / "metrics.csv", report.to_csv())
    write_atomic(out / "metrics.txt", report.to_table())
    sys.stdout.write(report.to_table())


def cmd_sweep(args):
    cfg = _run_config(args)
    prep = _load_data(cfg)
    table = lr_sweep(prep.dataset, prep.graph(), cfg.model, args.lrs, args.k)
    write_atomic(cfg.out_dir / "sweep.csv", table.to_csv())
    sys.stdout.write(table.to_table())


def cmd_explain(args):
    est, prep = _fitted_from_checkpoint(args.checkpoint, args.data)
    m = prep.idmaps
    if args.user not in m.user_index:
        raise DataError(f"unknown user key {args.user!r}")
    if args.item not in m.item_index:
        raise DataError(f"unknown item key {args.item!r}")
    if args.beam < args.max_paths:
        raise UsageError("--beam must be >= --max-paths")
    paths = est.explain(m.user_index[args.user], m.item_index[args.item], args.max_paths, args.beam)
    if args.csv:
        from .explain import paths_to_csv

        sys.stdout.write(paths_to_csv(paths, m, est.view_))
    else:
        sys.stdout.write(render_explanation(paths, m, est.view_))


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "explain": cmd_explain,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"kgrec: error: {exc}", file=sys.stderr)
        return 1
    except (KGRecError, ValueError, OSError) as exc:
        print(f"kgrec: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
