"""Command-line entry point: generate / train / eval / gradcheck / recipe / report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..datagen import save_dataset
from ..numerics import SeededRng, grad_check
from .config import ConfigError, load_config
from .checkpoint import load_checkpoint
from .data import build_instances
from .evaluate import evaluate_instances, evaluation_report
from .recipes import RECIPES, run_recipe
from .reporting import render_report
from .train import DivergenceError, train


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="YAML config file")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config override, repeatable (e.g. optim.lr=3e-4)")
    p.add_argument("--seed", type=int, default=None, help="override the run seed")
    p.add_argument("--profile", default=None, help="config profile (full | desk)")


def _config_from(args) -> "RunConfig":
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return load_config(path=args.config, overrides=overrides, profile=args.profile)


def _cmd_generate(args) -> int:
    cfg = _config_from(args)
    rng = SeededRng(cfg.seed).derive(1 if args.split == "train" else 5)
    instances = build_instances(cfg.data, rng, split=args.split)
    save_dataset(instances, args.out)
    print(f"wrote {len(instances)} instances to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _config_from(args)

    def progress(event: dict) -> None:
        if event.get("event") == "epoch":
            parts = [f"epoch {event['epoch']}",
                     f"train_loss {event['train_loss']:.4f}"]
            if "val_loss" in event:
                parts.append(f"val_loss {event['val_loss']:.4f}")
            for key in sorted(event):
                if key.startswith("val_") and key != "val_loss":
                    parts.append(f"{key} {event[key]:.2f}")
            print("  ".join(parts))

    result = train(cfg, args.out, resume=args.resume, log_fn=progress)
    print(f"done: {result.epochs_run} epochs"
          f"{' (early stop)' if result.stopped_early else ''}, "
          f"best val loss {result.best_val_loss:.4f} at epoch {result.best_epoch}; "
          f"checkpoints in {result.out_dir}")
    return 0


def _cmd_eval(args) -> int:
    model, _, cfg, meta = load_checkpoint(args.ckpt)
    if args.data is not None:
        from ..datagen import load_dataset
        instances = load_dataset(args.data)
    else:
        for pair in args.override:
            if pair.split("=", 1)[0].strip().startswith("data."):
                cfg = load_config(base=cfg, overrides=[pair])
        instances = build_instances(cfg.data, SeededRng(cfg.seed).derive(5), split="eval")
    summary = evaluate_instances(model, instances)
    out = Path(args.out)
    report = evaluation_report(model, instances, config_hash=meta.get("config_hash", ""))
    report.save_jsonl(out / "eval_report.jsonl")
    report.save_csv(out / "eval_report.csv")
    for key in sorted(summary):
        value = summary[key]
        print(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
    print(f"report written to {out / 'eval_report.csv'}")
    return 0


def _cmd_gradcheck(args) -> int:
    import numpy as np

    from ..decoder import batch_loss, teacher_forced_nll
    from ..encoder import encode_set
    from ..numerics import Tensor
    from .builder import build_model

    overrides = ["precision=double", f"optim.pair_cap={args.pair_cap}"]
    cfg = load_config(path=args.config, profile=args.profile or "desk",
                      overrides=overrides + list(args.override)
                      + ([f"seed={args.seed}"] if args.seed is not None else []))
    rng = SeededRng(cfg.seed)
    n = args.n_elements
    elements = rng.derive(10).uniform(-1.0, 1.0, (n, args.d_input))
    target = rng.derive(11).permutation(n).tolist()
    model = build_model(cfg, d_input=args.d_input, init_rng=rng.derive(2))

    def loss_fn():
        enc = encode_set(Tensor(np.asarray(elements)), model.enc_w, model.enc_cfg)
        nll, ls = teacher_forced_nll(enc, target, model.dec_w, model.dec_cfg)
        return batch_loss([nll], [ls], cfg.optim.lambda_pair, cfg.optim.subtract_pair_term)

    report = grad_check(loss_fn, model.store, eps=args.eps, tol=args.tol,
                        max_coords_per_param=args.max_coords, rng=rng.derive(12))
    print(report.summary())
    return 0 if report.passed else 1


def _cmd_recipe(args) -> int:
    seeds = [int(s) for s in args.seeds.split(",") if s != ""]
    if not seeds:
        raise ConfigError(f"--seeds must list at least one integer, got {args.seeds!r}")
    result = run_recipe(args.name, args.out, seeds=seeds, overrides=args.override,
                        keep_runs=args.keep_runs)
    for row in result["rows"]:
        print("  ".join(str(c) for c in row))
    print(f"table written to {result['csv']} ({result['elapsed_s']:.1f}s)")
    return 0


def _cmd_report(args) -> int:
    outputs = render_report(args.input, args.out)
    for path in outputs:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="set2seq",
        description="Set-to-sequence model: data generation, training, evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a dataset file")
    _add_config_flags(p)
    p.add_argument("--split", choices=("train", "eval"), default="train")
    p.add_argument("--out", type=Path, required=True, help="output dataset path (.jsonl)")
    p.set_defaults(fn=_cmd_generate)

    p = sub.add_parser("train", help="train a model")
    _add_config_flags(p)
    p.add_argument("--out", type=Path, required=True, help="run directory")
    p.add_argument("--resume", type=Path, default=None, help="checkpoint to resume from")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--data", type=Path, default=None,
                   help="dataset file; omitted -> generate the config's eval split")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="data.* overrides for the generated eval split")
    p.add_argument("--out", type=Path, required=True, help="report directory")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    _add_config_flags(p)
    p.add_argument("--n-elements", type=int, default=4)
    p.add_argument("--d-input", type=int, default=3)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-coords", type=int, default=8)
    p.add_argument("--pair-cap", type=int, default=6)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("recipe", help="run a canned experiment")
    p.add_argument("name", choices=RECIPES)
    p.add_argument("--seeds", default="0,1,2", help="comma-separated run seeds")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--keep-runs", action="store_true",
                   help="keep per-seed run directories under <out>/work")
    p.set_defaults(fn=_cmd_recipe)

    p = sub.add_parser("report", help="render CSV tables and figures from a log")
    p.add_argument("--input", type=Path, required=True,
                   help="train_log.jsonl, eval_report.jsonl, or recipe runs file")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(fn=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
