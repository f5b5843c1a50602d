"""Command-line entry point: ``wsdfm <command> ...``.

Every command prints a one-line JSON summary on stdout and logs to stderr.
Exit codes: 0 success, 2 usage or validation error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import net
from .core import (Dataset, InvalidArgument, NumericalFailure, ParseError, RngStream,
                   RunConfig, ValidationError, WSDFMError, atomic_write_text,
                   load_dataset, save_dataset, two_moons_dataset)
from .coupling import CouplingSpec, build_coupling, load_pairs, save_pairs
from .drafts import TIERS, DraftModel, sample_draft, uniform_noise
from .evaluate import metrics_line, skl, write_metrics
from .path import ClockSaturated
from .plot import scatter_svg
from .sample import generate
from .train import finetune, save_loss_curve, train, train_vanilla

log = logging.getLogger("wsdfm")

EXIT_USAGE = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


def load_config(args) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        data = RunConfig.load(args.config).to_dict()
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        data[key.strip()] = json.loads(value) if value.strip()[:1] in "[{\"" else value
    for key in ("seed", "iterations", "batch_size", "learning_rate", "t0", "n_eval", "vocab"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "n", None) is not None and args.command == "gen-data":
        data["n_data"] = args.n
    return RunConfig.from_dict(data)


def emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def cmd_gen_data(args):
    cfg = load_config(args)
    data = two_moons_dataset(cfg.n_data, cfg.noise_std, cfg.grid, RngStream(cfg.seed, "gen-data"))
    save_dataset(args.out, data)
    emit({"command": "gen-data", "out": str(args.out), "n": len(data), "seed": cfg.seed,
          "noise_std": cfg.noise_std, "vocab": cfg.vocab})


def cmd_make_drafts(args):
    cfg = load_config(args)
    model = DraftModel.tier(args.tier) if args.tier else DraftModel("corrupted_data", args.p_noise)
    data = load_dataset(args.data, cfg.vocab)
    n = args.n if args.n is not None else len(data)
    drafts = sample_draft(model, data, n, RngStream(cfg.seed, "make-drafts"))
    save_dataset(args.out, drafts)
    emit({"command": "make-drafts", "out": str(args.out), "n": len(drafts),
          "p_noise": model.p_noise, "seed": cfg.seed})


def cmd_build_pairs(args):
    cfg = load_config(args)
    data = load_dataset(args.data, cfg.vocab)
    drafts = load_dataset(args.drafts, cfg.vocab)
    kind = args.kind or ("knn_injected" if args.k_inject else "knn")
    spec = CouplingSpec(kind, args.k, args.k_inject)
    pairs = build_coupling(drafts, data, spec, RngStream(cfg.seed, "build-pairs"))
    save_pairs(args.out, pairs)
    emit({"command": "build-pairs", "out": str(args.out), "n_pairs": len(pairs),
          "k": args.k, "k_inject": args.k_inject, "kind": kind, "seed": cfg.seed})


def cmd_train(args):
    cfg = load_config(args)
    if (args.pairs is None) == (args.data is None):
        raise UsageError("give exactly one of --pairs (warm start) or --data (vanilla)")
    ckpt_dir = Path(args.out_ckpt).parent / (Path(args.out_ckpt).stem + "_ckpts")
    if args.init_ckpt:
        if args.pairs is None:
            raise UsageError("--init-ckpt finetunes on --pairs")
        base = net.load_checkpoint(args.init_ckpt)
        result = finetune(base, cfg, load_pairs(args.pairs, cfg.vocab), checkpoint_dir=ckpt_dir)
        mode = "finetune"
    elif args.pairs is not None:
        result = train(cfg, load_pairs(args.pairs, cfg.vocab), checkpoint_dir=ckpt_dir)
        mode = "warm"
    else:
        result = train_vanilla(cfg, load_dataset(args.data, cfg.vocab), checkpoint_dir=ckpt_dir)
        mode = "vanilla"
    net.save_checkpoint(args.out_ckpt, result.params, config=cfg.to_dict(), mode=mode)
    loss_path = args.loss_out or str(Path(args.out_ckpt).with_suffix(".loss.csv"))
    save_loss_curve(loss_path, result.losses)
    emit({"command": "train", "mode": mode, "out_ckpt": str(args.out_ckpt),
          "iterations": cfg.iterations, "seed": cfg.seed, "loss_curve": loss_path,
          "first_loss": float(result.losses[0]) if len(result.losses) else None,
          "last_loss": float(result.losses[-1]) if len(result.losses) else None})


def cmd_sample(args):
    params = net.load_checkpoint(args.ckpt)
    seed = args.seed if args.seed is not None else int(params.meta.get("seed", 0))
    if args.drafts:
        init = load_dataset(args.drafts, params.dims.vocab)
    elif args.t0 == 0.0:
        init = uniform_noise(params.spec, args.n, RngStream(seed, "sample-noise"))
    else:
        raise UsageError("--drafts is required when t0 > 0")
    n = args.n if args.n is not None else len(init)
    out = generate(params, init, args.t0, args.h, n, RngStream(seed, "sample"))
    save_dataset(args.out, out.samples)
    sidecar = {"t0": args.t0, "h": args.h, "nfe": out.nfe, "n": n,
               "wall_seconds": out.wall_seconds, "seed": seed, "checkpoint": str(args.ckpt)}
    atomic_write_text(str(args.out) + ".json", json.dumps(sidecar, sort_keys=True) + "\n")
    emit({"command": "sample", "out": str(args.out), **sidecar})


def cmd_eval(args):
    samples = load_dataset(args.samples, args.vocab or 128)
    data = load_dataset(args.data, args.vocab or 128)
    value = skl(samples, data, args.eps)
    side = {}
    sidecar = Path(str(args.samples) + ".json")
    if sidecar.exists():
        side = json.loads(sidecar.read_text())
    run_id = args.run_id or Path(args.samples).stem
    line = metrics_line(run_id, float(side.get("t0", 0.0)), int(side.get("nfe", 0)), value,
                        float(side.get("wall_seconds", 0.0)), args.eps, len(samples),
                        int(side.get("seed", 0)))
    if args.out:
        write_metrics(args.out, [line])
    emit({"command": "eval", "skl": value, "eps": args.eps, "n_eval": len(samples),
          "run_id": run_id})


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def cmd_sweep(args):
    from .experiment import format_sweep, sweep

    cfg = load_config(args)
    grid = _float_list(args.t0_grid)
    if not grid:
        raise UsageError("empty t0 grid")
    tiers = [t.strip() for t in args.draft_tiers.split(",") if t.strip()]
    for t in tiers:
        if t not in TIERS:
            raise UsageError(f"unknown tier {t!r}; choose from {sorted(TIERS)}")
    baseline, reports = sweep(cfg, tiers, grid)
    atomic_write_text(args.out_report, format_sweep(baseline, reports))
    emit({"command": "sweep", "out_report": str(args.out_report), "baseline_skl": baseline[0],
          "selected": {tier: rep.selected for tier, rep in reports}})


def cmd_reproduce(args):
    from .experiment import reproduce_table1

    cfg = load_config(args)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [0, 1, 2]
    summary = reproduce_table1(cfg, args.out_dir, seeds)
    emit({"command": "reproduce-table1", "out_dir": str(args.out_dir),
          "checks": summary["checks"],
          "table": [{k: r[k] for k in ("tier", "t0", "skl", "nfe", "qualifies")}
                    for r in summary["table"]]})


def cmd_plot(args):
    panels = []
    for path in args.data:
        panels.append((Path(path).stem, load_dataset(path, args.vocab)))
    svg = scatter_svg(panels, args.max_points)
    atomic_write_text(args.out, svg)
    emit({"command": "plot", "out": str(args.out), "panels": len(panels)})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsdfm", description="Warm-start discrete flow matching")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        if seed:
            p.add_argument("--seed", type=int)
        return p

    p = common(sub.add_parser("gen-data", help="write a two-moons dataset CSV"))
    p.add_argument("--n", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = common(sub.add_parser("make-drafts", help="corrupt data into draft samples"))
    p.add_argument("--data", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--p-noise", type=float)
    g.add_argument("--tier", choices=sorted(TIERS))
    p.add_argument("--n", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_drafts)

    p = common(sub.add_parser("build-pairs", help="nearest-neighbour coupling"))
    p.add_argument("--drafts", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--k-inject", type=int, default=5)
    p.add_argument("--kind", choices=["independent", "knn", "knn_injected"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_pairs)

    p = common(sub.add_parser("train", help="train (or finetune) a posterior network"))
    p.add_argument("--pairs")
    p.add_argument("--data")
    p.add_argument("--init-ckpt", help="finetune from this checkpoint")
    p.add_argument("--iterations", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--out-ckpt", required=True)
    p.add_argument("--loss-out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="generate samples from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--drafts")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="symmetric KL between samples and data")
    p.add_argument("--samples", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--vocab", type=int, default=128)
    p.add_argument("--run-id")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("sweep", help="t0 sweep per draft tier"))
    p.add_argument("--draft-tiers", required=True)
    p.add_argument("--t0-grid", required=True)
    p.add_argument("--out-report", required=True)
    p.set_defaults(func=cmd_sweep)

    p = common(sub.add_parser("reproduce-table1", help="full two-moons reproduction"))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seeds", help="comma-separated seeds (default 0,1,2)")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("plot", help="SVG scatter panels")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vocab", type=int, default=128)
    p.add_argument("--max-points", type=int, default=5000)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, InvalidArgument, ValidationError, ParseError, ClockSaturated,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, WSDFMError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
