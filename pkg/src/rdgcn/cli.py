"""Command-line entry point: ``rdgcn <command> ...``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path


from . import __version__
from .conllu import LABELS, load_dataset, read_conllu, write_dataset
from .errors import InputError, RdgcnError
from .graph import TypeVocab, build_views, views_to_json
from .importance import VARIANTS, DistanceFnConfig, emit_curve, write_curve_csv
from .metrics import eval_report
from .oracles import grad_check, oracle_dist
from .synthetic import generate_corpus, synthetic_splits
from .training import (MODES, EncodedSet, TokenVocab, TrainConfig, Trainer, load_checkpoint, predict,
                       resume, save_checkpoint, write_metrics_json, write_trace_csv)

GRAD_TOL = 1e-4
DEFAULT_SEED = 42


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("RDGCN_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"RDGCN_SEED={env!r} is not an integer") from None
    return DEFAULT_SEED


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, command, config, inputs, outputs, seed) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": seed,
        "hashes": {str(p): _sha256(p) for p in list(inputs) + list(outputs) if Path(p).is_file()},
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _file_manifest(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def cmd_build_graph(args) -> int:
    trees = read_conllu(args.conllu)
    vocab = TypeVocab.build(read_conllu(args.vocab_from) if args.vocab_from else trees)
    with open(args.out, "w", encoding="utf-8") as fh:
        for tree in trees:
            fh.write(views_to_json(build_views(tree, vocab, args.T), vocab) + "\n")
    write_manifest(_file_manifest(args.out), "build-graph", {"T": args.T},
                   [args.conllu] + ([args.vocab_from] if args.vocab_from else []), [args.out], None)
    return 0


def cmd_curve(args) -> int:
    try:
        cfg = DistanceFnConfig(T=args.T, K=args.K, variant=args.variant)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    write_curve_csv(emit_curve(cfg), args.out)
    write_manifest(_file_manifest(args.out), "curve", {"variant": args.variant, "K": args.K, "T": args.T},
                   [], [args.out], None)
    return 0


def _config_from_args(args, seed) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs, batch_size=args.batch, lr=args.lr, D=args.D, D_in=args.D_in, L=args.L, T=args.T,
        dropout_in=args.dropout_in, dropout_out=args.dropout_out, K0=args.K0, S=args.S, R=args.R,
        interval=args.interval, seed=seed, val_frac=args.val_frac, reward_on_test=args.reward_on_test,
        mode=args.mode, row_norm=args.row_norm,
    )


def _load_splits(args, seed):
    if args.synthetic:
        return synthetic_splits(seed, args.n_train, args.n_test), []
    if not args.dataset:
        raise InputError("either --dataset or --synthetic is required")
    train = load_dataset(args.dataset, args.conllu)
    test = load_dataset(args.test, args.test_conllu) if args.test else None
    inputs = [p for p in (args.dataset, args.conllu, args.test, args.test_conllu) if p]
    return (train, test), inputs


def cmd_train(args) -> int:
    seed = _seed(args)
    config = _config_from_args(args, seed)
    (train, test), inputs = _load_splits(args, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.resume:
        trainer = resume(args.resume, train, test)
        trainer.config.epochs = trainer.epoch + args.epochs
        inputs.append(args.resume)
    else:
        trainer = Trainer.create(train, config, test)
    trainer.fit()
    ckpt, metrics, trace = out / "checkpoint.npz", out / "metrics.json", out / "bandit_trace.csv"
    save_checkpoint(trainer, ckpt)
    write_trace_csv(trainer.trace, trace)
    write_metrics_json(trainer.metrics(trace.name), metrics)
    write_manifest(out / "manifest.json", "train", trainer.config.to_dict(), inputs, [ckpt, metrics, trace], seed)
    final = trainer.history[-1]["eval"]
    print(f"accuracy={final['accuracy']:.4f} macro_f1={final['macro_f1']:.4f} K={trainer.bandit.K:g} "
          f"frozen={trainer.bandit.frozen}")
    return 0


def cmd_evaluate(args) -> int:
    meta, params, _ = load_checkpoint(args.checkpoint)
    config = TrainConfig.from_dict(meta["config"])
    examples = load_dataset(args.dataset, args.conllu)
    tokens = TokenVocab(meta["token_vocab"])
    types = TypeVocab.from_dict(meta["type_vocab"])
    data = EncodedSet.build(examples, tokens, types, config.T)
    data.refresh(config, meta["bandit"]["K"], 0)
    report = eval_report(data.labels, predict(data, params, config.model_config(), 0), len(LABELS))
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        write_manifest(_file_manifest(args.out), "evaluate", config.to_dict(),
                       [args.checkpoint, args.dataset], [args.out], config.seed)
    else:
        sys.stdout.write(text)
    return 0


def cmd_grad_check(args) -> int:
    seed = _seed(args)
    errors = grad_check(seed=seed, n_sent=args.sentences, max_n=args.N, d=args.D, n_layers=args.L,
                        row_norm=args.row_norm, inject_fault=args.inject_fault)
    worst = max(errors.values())
    lines = [f"{name}\t{err:.3e}" for name, err in errors.items()]
    lines.append(f"max\t{worst:.3e}\t{'PASS' if worst < GRAD_TOL else 'FAIL'} (tol {GRAD_TOL:g})")
    print("\n".join(lines))
    return 0 if worst < GRAD_TOL else 2


def cmd_oracle_dist(args) -> int:
    seed = _seed(args)
    report = oracle_dist(args.max_n, args.trials, seed, inject_fault=args.inject_fault)
    print("\n".join(report.lines()))
    return 0 if report.mismatches == 0 else 2


def cmd_synth(args) -> int:
    seed = _seed(args)
    write_dataset(generate_corpus(args.n, seed), args.out)
    write_manifest(_file_manifest(args.out), "synth", {"n": args.n}, [], [args.out], seed)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdgcn", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="dump distance/type/topology views per sentence as JSON lines")
    p.add_argument("conllu")
    p.add_argument("--out", required=True)
    p.add_argument("--T", type=int, default=10)
    p.add_argument("--vocab-from", help="CoNLL-U file to build the type vocabulary from (default: input)")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("curve", help="sample a distance-importance function to CSV")
    p.add_argument("--variant", choices=VARIANTS, default="combined")
    p.add_argument("--K", type=float, default=0.1)
    p.add_argument("--T", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("train", help="train the classifier; writes checkpoint, metrics, bandit trace")
    p.add_argument("--dataset")
    p.add_argument("--conllu")
    p.add_argument("--test")
    p.add_argument("--test-conllu")
    p.add_argument("--synthetic", action="store_true", help="use the built-in synthetic corpus")
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resume", help="checkpoint to continue from; --epochs then counts extra epochs")
    d = TrainConfig()
    p.add_argument("--T", type=int, default=d.T)
    p.add_argument("--K0", type=float, default=d.K0)
    p.add_argument("--S", type=float, default=d.S)
    p.add_argument("--R", type=int, default=d.R)
    p.add_argument("--interval", type=int, default=d.interval)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--batch", type=int, default=d.batch_size)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--D", type=int, default=d.D)
    p.add_argument("--D-in", type=int, default=d.D_in)
    p.add_argument("--L", type=int, default=d.L)
    p.add_argument("--dropout-in", type=float, default=d.dropout_in)
    p.add_argument("--dropout-out", type=float, default=d.dropout_out)
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--reward-on-test", action="store_true")
    p.add_argument("--val-frac", type=float, default=d.val_frac)
    p.add_argument("--row-norm", action="store_true")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--conllu")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grad-check", help="compare analytic gradients with finite differences")
    p.add_argument("--seed", type=int)
    p.add_argument("--sentences", type=int, default=2)
    p.add_argument("--N", type=int, default=6)
    p.add_argument("--D", type=int, default=8)
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--row-norm", action="store_true")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("oracle-dist", help="cross-check BFS distances against Floyd-Warshall")
    p.add_argument("--max-n", type=int, default=12)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_oracle_dist)

    p = sub.add_parser("synth", help="write a synthetic JSONL dataset")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"rdgcn-error: input: {exc}", file=sys.stderr)
        return 1
    except (RdgcnError, ArithmeticError, RuntimeError) as exc:
        print(f"rdgcn-error: internal: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
