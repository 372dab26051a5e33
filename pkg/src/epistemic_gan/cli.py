"""Command-line driver: ``egan {train,eval,sample,ablate,bench,belief-demo}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import secrets
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .belief import belief_from_mass, flu_cold_allergy
from .data import DATASET_NAMES, DataError
from .networks import MODES

OUT_ENV = "EGAN_OUT"
DEFAULT_OUT_ROOT = "runs"

SCHEMAS = f"""\
output files (CSV, header row first, floats written with full precision):
  losses.csv       {", ".join(harness.LOSS_COLUMNS)}
                   d_total = d_adversarial + d_lambda * d_constraint_penalty
                   g_total = g_adversarial + g_beta * g_variance_term + g_gamma * g_width_term
  metrics.csv      {", ".join(harness.METRIC_COLUMNS)}
  samples.csv      x0, x1, ... (one generated sample per row, dataset coordinates)
  uncertainty.csv  sample, region, lo, hi, width
  ablation.csv     '# median ...' comment line, then the grid; cell = "FD (Vendi) [ok/total seeds]"
  ablation_long.csv
                   one row per cell with median_fd, median_vendi, median_modes_covered, errors

the default output root is ${OUT_ENV} (or ./{DEFAULT_OUT_ROOT} when unset)
"""

# TrainConfig fields exposed as flags; the flag name is the config key with '-' for '_'
_CONFIG_FLAGS = {
    "dataset": str,
    "mode": str,
    "lam": float,
    "beta": float,
    "gamma": float,
    "epochs": int,
    "steps_per_epoch": int,
    "batch_size": int,
    "lr": float,
    "beta1": float,
    "beta2": float,
    "seed": int,
    "eval_every": int,
    "sample_count": int,
    "log_every": int,
    "latent_dim": int,
    "regions": int,
    "d_hidden": int,
    "g_hidden": int,
    "alpha_init": float,
}


class UsageError(Exception):
    pass


def _dataset_name(value: str) -> str:
    if value in DATASET_NAMES or value.endswith(".csv"):
        return value
    raise argparse.ArgumentTypeError(f"unknown dataset {value!r} (choose from {', '.join(DATASET_NAMES)} or a .csv path)")


def _positive_int(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {n}")
    return n


def _add_config_flags(p: argparse.ArgumentParser, skip: tuple[str, ...] = ()):
    g = p.add_argument_group("config overrides (take precedence over --config)")
    g.add_argument("--config", type=Path, help="TOML config file with TrainConfig keys")
    for name, typ in _CONFIG_FLAGS.items():
        if name in skip:
            continue
        flag = "--lambda" if name == "lam" else "--" + name.replace("_", "-")
        kw = {"dest": name, "default": None}
        if name == "mode":
            kw["choices"] = MODES
        elif name == "dataset":
            kw["type"] = _dataset_name
        elif name in ("d_hidden", "g_hidden"):
            kw["type"] = int
            kw["nargs"] = "+"
        else:
            kw["type"] = typ
        g.add_argument(flag, **kw)
    g.add_argument("--no-plots", dest="plots", action="store_false", default=None, help="skip SVG output")


def _config(args) -> harness.TrainConfig:
    file_keys: set[str] = set()
    if args.config:
        try:
            raw = harness.read_config_dict(args.config)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}") from None
        file_keys = set(raw)
        base = harness.TrainConfig.from_dict(raw)
    else:
        base = harness.TrainConfig()
    overrides = {}
    for name in (*_CONFIG_FLAGS, "plots"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    if "seed" not in overrides and "seed" not in file_keys:
        overrides["seed"] = secrets.randbits(31)
        print(f"seed: {overrides['seed']} (generated)")
    return replace(base, **overrides)


def _out_dir(args, default_name: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT_ROOT)) / default_name


# --- subcommands -----------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, f"{Path(cfg.dataset).stem}-{cfg.mode}-seed{cfg.seed}")
    res = harness.train(cfg, out)
    print(f"run directory: {res.out_dir}")
    print("seconds per epoch: " + ", ".join(f"{s:.2f}" for s in res.seconds_per_epoch))
    if res.metrics is not None:
        print(res.metrics.render())
    return 0


def cmd_eval(args) -> int:
    gan_meta = harness.checkpoint_meta(args.checkpoint)
    dataset = args.dataset or gan_meta.get("dataset")
    if not dataset:
        raise UsageError("checkpoint does not record its dataset; pass --dataset")
    seed = _seed(args)
    report = harness.evaluate(args.checkpoint, dataset, args.n, seed)
    print(report.render())
    return 0


def cmd_sample(args) -> int:
    seed = _seed(args)
    out = _out_dir(args, f"samples-{Path(args.checkpoint).stem}-seed{seed}")
    written = harness.sample_checkpoint(
        args.checkpoint, args.n, seed, out, with_uncertainty=args.with_uncertainty,
        dataset=args.dataset, plots=not args.no_plots,
    )
    for kind, path in written.items():
        print(f"{kind}: {path}")
    return 0


def cmd_ablate(args) -> int:
    base = _config(args)
    seeds = [base.seed + k for k in range(args.seeds)]
    table = harness.ablate(base, harness.GRIDS[args.grid], seeds, args.out, workers=args.workers)
    print(table.csv_path.read_text(), end="")
    print(f"wrote {table.csv_path} and {table.long_csv_path}")
    failed = [c.label for c in table.cells if not any(r["ok"] for r in table.results[c.label])]
    if failed:
        print(f"failed cells: {', '.join(failed)}", file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, f"bench-{Path(cfg.dataset).stem}-seed{cfg.seed}")
    timings = harness.bench(cfg, out, epochs=args.epochs)
    print("mode,mean_seconds_per_epoch,epochs")
    for mode, secs in timings.items():
        print(f"{mode},{sum(secs) / len(secs):.4f},{len(secs)}")
    std, epi = (sum(timings[m]) / len(timings[m]) for m in ("standard", "epistemic"))
    print(f"overhead: {epi / std:.3f}x")
    return 0


def cmd_belief_demo(args) -> int:
    frame, m = flu_cold_allergy()
    bel = belief_from_mass(m)
    print(f"frame: {{{', '.join(frame.labels)}}}")
    print("mass function:")
    for mask, v in m.focal_elements().items():
        print(f"  m({frame.describe(mask)}) = {v:g}")
    print("belief of every subset:")
    for mask in range(1, frame.n_subsets):
        print(f"  Bel({frame.describe(mask)}) = {bel[mask]:.6g}")
    fc = frame.subset(["flu", "cold"])
    parts = [(mask, v) for mask, v in m.focal_elements().items() if mask & ~fc == 0]
    terms = " + ".join(f"m({frame.describe(mask)})" for mask, _ in parts)
    values = " + ".join(f"{v:g}" for _, v in parts)
    print(f"Bel({frame.describe(fc)}) = {terms} = {values} = {bel[fc]:g}")
    return 0


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbits(31)
    print(f"seed: {seed} (generated)")
    return seed


# --- parser ----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="egan", description="Evidential GAN toolkit.", epilog=SCHEMAS,
                                     formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("train", help="train one model", epilog=SCHEMAS, formatter_class=fmt)
    p.add_argument("--out", type=Path, help=f"run directory (default ${OUT_ENV}/<dataset>-<mode>-seed<seed>)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint", epilog=SCHEMAS, formatter_class=fmt)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--dataset", type=_dataset_name, help="defaults to the dataset recorded in the checkpoint")
    p.add_argument("-n", type=_positive_int, default=5000, help="generated samples (>= 2)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sample", help="draw samples (and width maps) from a checkpoint", epilog=SCHEMAS,
                       formatter_class=fmt)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("-n", type=_positive_int, required=True)
    p.add_argument("--with-uncertainty", action="store_true", help="also write per-region intervals")
    p.add_argument("--dataset", type=_dataset_name, help="defaults to the dataset recorded in the checkpoint")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("ablate", help="run an ablation grid", epilog=SCHEMAS, formatter_class=fmt)
    p.add_argument("--grid", choices=sorted(harness.GRIDS), required=True)
    p.add_argument("--seeds", type=_positive_int, default=1, help="number of seeds, counting up from --seed")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--workers", type=_positive_int, help="parallel cells (default: CPU count)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="per-epoch time, standard vs epistemic", epilog=SCHEMAS, formatter_class=fmt)
    p.add_argument("--out", type=Path)
    _add_config_flags(p, skip=("mode", "epochs"))
    p.add_argument("--epochs", type=_positive_int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("belief-demo", help="the flu/cold/allergy belief computation")
    p.set_defaults(func=cmd_belief_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (OSError, ValueError, DataError, KeyError, RuntimeError) as exc:
        print(f"egan: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
