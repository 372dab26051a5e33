"""Training loop, evaluation, ablation grids and the overhead benchmark."""

from __future__ import annotations

import csv
import json
import logging
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import plotting
from .data import Dataset, get_dataset, iterate_batches, write_csv
from .losses import (
    LossReport,
    LossWeights,
    discriminator_loss,
    generator_loss,
    standard_discriminator_loss,
    standard_generator_loss,
)
from .metrics import (
    MetricsReport,
    fit_gaussian,
    frechet_distance,
    median_bandwidth,
    mode_coverage,
    random_projection,
    vendi_score,
)
from .networks import GAN, MODES, NetConfig

log = logging.getLogger(__name__)

PROJECTION_SEED = 20240601
IDENTITY_MAX_DIM = 16
MIXTURE_STEPS_PER_EPOCH = 4000
UNCERTAINTY_SAMPLES = 16

BETA_GAMMA_AXIS = (0.0, 0.5, 1.0, 2.0)
LAMBDA_AXIS = (0.0, 0.5, 1.0, 2.0)
ARCH_CONFIGS = (
    ("Standard GAN", "standard"),
    ("Evidential Discriminator Only", "evid_d_only"),
    ("Evidential Generator Only", "evid_g_only"),
    ("Full Epistemic GAN", "epistemic"),
)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    dataset: str = "ring8"
    mode: str = "epistemic"
    lam: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    epochs: int = 5
    steps_per_epoch: int = 0  # 0: derived from the dataset
    batch_size: int = 128
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    eval_every: int = 0  # 0: end of each epoch; N > 0: every N steps; < 0: never
    sample_count: int = 5000
    log_every: int = 50
    latent_dim: int = 32
    regions: int = 16
    d_hidden: tuple[int, ...] = (128, 128)
    g_hidden: tuple[int, ...] = (128,)
    alpha_init: float = 1.0
    plots: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        for name in ("epochs", "batch_size", "sample_count", "log_every", "latent_dim", "regions"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.steps_per_epoch < 0:
            raise ValueError("steps_per_epoch must be >= 0")
        self.d_hidden = tuple(int(h) for h in self.d_hidden)
        self.g_hidden = tuple(int(h) for h in self.g_hidden)
        LossWeights(self.lam, self.beta, self.gamma)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lam, self.beta, self.gamma)

    def net_config(self, data_dim: int) -> NetConfig:
        return NetConfig(
            data_dim=data_dim,
            latent_dim=self.latent_dim,
            d_hidden=self.d_hidden,
            g_hidden=self.g_hidden,
            regions=self.regions,
            mode=self.mode,
            alpha_init=self.alpha_init,
        )

    # config files use "lambda", which is a Python keyword
    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["d_hidden"] = list(self.d_hidden)
        d["g_hidden"] = list(self.g_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return cls(**d)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: TrainConfig, path) -> Path:
    path = Path(path)
    lines = [f"{k} = {_toml_value(v)}" for k, v in cfg.to_dict().items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_config_dict(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_config(path) -> TrainConfig:
    return TrainConfig.from_dict(read_config_dict(path))


@dataclass
class RunResult:
    metrics: MetricsReport | None
    out_dir: Path
    loss_csv: Path
    metrics_csv: Path
    samples_csv: Path
    checkpoint: Path
    seconds_per_epoch: list[float]
    seed: int
    extra: dict = field(default_factory=dict)


# --- evaluation --------------------------------------------------------------------------------


def generate_samples(gan: GAN, n: int, rng: np.random.Generator, batch: int = 1000):
    """``n`` generator outputs (normalized space) and, for evidential generators, their interval widths."""
    outs, widths = [], []
    latent_rng, dir_rng = rng.spawn(2)
    with ad.no_grad():
        for start in range(0, n, batch):
            k = min(batch, n - start)
            z = latent_rng.standard_normal((k, gan.cfg.latent_dim))
            x, _, intervals = gan.G.generate(z, dir_rng)
            outs.append(x.data)
            if intervals is not None:
                widths.append(intervals)
    return np.concatenate(outs), widths


def feature_map(dataset: Dataset):
    if dataset.dim <= IDENTITY_MAX_DIM:
        return None, None, "identity"
    return random_projection(dataset.dim, PROJECTION_SEED), PROJECTION_SEED, f"random projection to 16-d"


def evaluate_samples(samples: np.ndarray, dataset: Dataset, rng: np.random.Generator) -> MetricsReport:
    """Score raw-coordinate ``samples`` against an equal-size real reference sample.

    The RBF bandwidth for both Vendi scores is the median pairwise distance of
    the real reference features, so generated and reference scores share one kernel.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = len(samples)
    if n < 2:
        raise ValueError("need at least 2 samples to evaluate")
    if samples.shape[1] != dataset.dim:
        raise ValueError(f"sample dim {samples.shape[1]} != dataset dim {dataset.dim}")
    real = dataset.sample_raw(n, rng)
    embed, proj_seed, space = feature_map(dataset)
    f_real = embed(real) if embed else real
    f_gen = embed(samples) if embed else samples
    fd = frechet_distance(fit_gaussian(f_real), fit_gaussian(f_gen))
    h = median_bandwidth(f_real)
    modes = hq = None
    if dataset.mixture is not None:
        modes, hq = mode_coverage(samples, dataset.mixture)
    return MetricsReport(
        fid=fd,
        vendi=vendi_score(f_gen, h),
        modes_covered=modes,
        high_quality_fraction=hq,
        reference_vendi=vendi_score(f_real, h),
        n=n,
        bandwidth=h,
        projection_seed=proj_seed,
        feature_space=space,
    )


def evaluate_gan(gan: GAN, dataset: Dataset, sample_count: int, seed: int) -> tuple[MetricsReport, np.ndarray, list]:
    gen_rng, real_rng = np.random.default_rng(seed).spawn(2)
    x, intervals = generate_samples(gan, sample_count, gen_rng)
    raw = dataset.denormalize(x)
    return evaluate_samples(raw, dataset, real_rng), raw, intervals


def constraint_violation(gan: GAN, dataset: Dataset, n: int = 1024, seed: int = 0) -> float:
    """Mean max(0, b_real + b_fake - 1) over a held-out batch, half real and half generated."""
    if n < 2:
        raise ValueError("n must be >= 2")
    gen_rng, real_rng = np.random.default_rng(seed).spawn(2)
    fake, _ = generate_samples(gan, n // 2, gen_rng)
    real = dataset.normalize(dataset.sample_raw(n - n // 2, real_rng))
    with ad.no_grad():
        beliefs = gan.D(np.concatenate([real, fake]))
    return float(beliefs.violation().mean())


def checkpoint_meta(checkpoint) -> dict:
    return ad.load_arrays(checkpoint)[1]


def evaluate(checkpoint, dataset: str | Dataset, sample_count: int = 5000, seed: int = 0) -> MetricsReport:
    """Load a checkpoint and score ``sample_count`` generations against real data."""
    if sample_count < 2:
        raise ValueError("sample_count must be >= 2")
    gan, _ = GAN.load(checkpoint)
    ds = get_dataset(dataset) if isinstance(dataset, str) else dataset
    if gan.cfg.data_dim != ds.dim:
        raise ValueError(f"checkpoint generates {gan.cfg.data_dim}-d data but dataset {ds.name} is {ds.dim}-d")
    return evaluate_gan(gan, ds, sample_count, seed)[0]


# --- training ------------------------------------------------------------------------------------

LOSS_COLUMNS = [
    "step",
    "epoch",
    "d_total",
    "d_adversarial",
    "d_constraint_penalty",
    "d_variance_term",
    "d_width_term",
    "d_lambda",
    "g_total",
    "g_adversarial",
    "g_constraint_penalty",
    "g_variance_term",
    "g_width_term",
    "g_beta",
    "g_gamma",
    "g_sampled_width",
    "violation_real",
    "violation_fake",
]
METRIC_COLUMNS = [
    "step",
    "fid",
    "vendi",
    "reference_vendi",
    "modes_covered",
    "high_quality_fraction",
    "n",
    "bandwidth",
    "projection_seed",
    "feature_space",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


class _CsvLog:
    def __init__(self, path: Path, columns: list[str]):
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh)
        self.columns = columns
        self.writer.writerow(columns)

    def write(self, row: dict):
        self.writer.writerow([_fmt(row.get(c)) for c in self.columns])

    def close(self):
        self.fh.close()


def _steps_per_epoch(cfg: TrainConfig, ds: Dataset) -> int:
    if cfg.steps_per_epoch:
        return cfg.steps_per_epoch
    if ds.points is not None:
        return max(1, len(ds.points) // cfg.batch_size)
    return MIXTURE_STEPS_PER_EPOCH


def _train_step(gan: GAN, opt_d, opt_g, x_real, cfg: TrainConfig, latent_rng, dir_rng):
    """One discriminator update on a detached fake batch, then one generator
    update backpropagating through that same batch."""
    B = len(x_real)
    evidential_loss = cfg.mode != "standard"

    z = latent_rng.standard_normal((B, cfg.latent_dim))
    fake, fld, intervals = gan.G.generate(z, dir_rng)
    real_b = gan.D(x_real)
    fake_b = gan.D(fake.data)
    if evidential_loss:
        d_rep = discriminator_loss(real_b, fake_b, cfg.weights)
    else:
        d_rep = standard_discriminator_loss(real_b, fake_b)
    ad.backward(d_rep.tensor)
    opt_d.step()

    with ad.frozen(gan.D.parameters()):
        fake_b2 = gan.D(fake)
        if evidential_loss:
            g_rep = generator_loss(fake_b2, fld, intervals, cfg.weights)
        else:
            g_rep = standard_generator_loss(fake_b2)
        ad.backward(g_rep.tensor)
    opt_g.step()
    return d_rep, g_rep, real_b, fake_b


def _loss_row(step: int, epoch: int, d: LossReport, g: LossReport, real_b, fake_b) -> dict:
    return {
        "step": step,
        "epoch": epoch,
        "d_total": d.total,
        "d_adversarial": d.adversarial,
        "d_constraint_penalty": d.constraint_penalty,
        "d_variance_term": d.variance_term,
        "d_width_term": d.width_term,
        "d_lambda": d.weights.lam,
        "g_total": g.total,
        "g_adversarial": g.adversarial,
        "g_constraint_penalty": g.constraint_penalty,
        "g_variance_term": g.variance_term,
        "g_width_term": g.width_term,
        "g_beta": g.weights.beta,
        "g_gamma": g.weights.gamma,
        "g_sampled_width": g.sampled_width,
        "violation_real": float(real_b.violation().mean()),
        "violation_fake": float(fake_b.violation().mean()),
    }


def train(cfg: TrainConfig, out_dir) -> RunResult:
    """Alternate one discriminator and one generator Adam step per batch.

    All randomness derives from ``cfg.seed``. Writes ``config.toml``,
    ``losses.csv``, ``metrics.csv``, ``samples.csv``, ``uncertainty.csv`` (for
    evidential generators), ``checkpoint.egan`` (+ ``.bin``), ``run.json`` (wall
    clock) and ``plots/*.svg`` under ``out_dir``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.toml")

    ds = get_dataset(cfg.dataset)
    init_ss, data_ss, latent_ss, dir_ss, eval_ss = np.random.SeedSequence(cfg.seed).spawn(5)
    gan = GAN(cfg.net_config(ds.dim), int(init_ss.generate_state(1)[0]))
    optim = ad.OptimConfig(cfg.lr, cfg.beta1, cfg.beta2)
    opt_d = ad.Adam(gan.D.parameters(), optim)
    opt_g = ad.Adam(gan.G.parameters(), optim)
    data_rng = np.random.default_rng(data_ss)
    latent_rng = np.random.default_rng(latent_ss)
    dir_rng = np.random.default_rng(dir_ss)
    eval_seed = int(eval_ss.generate_state(1)[0])

    steps = _steps_per_epoch(cfg, ds)
    losses = _CsvLog(out / "losses.csv", LOSS_COLUMNS)
    metrics_log = _CsvLog(out / "metrics.csv", METRIC_COLUMNS)
    seconds: list[float] = []
    report = None
    step = 0

    def run_eval():
        rep, raw, intervals = evaluate_gan(gan, ds, cfg.sample_count, eval_seed)
        metrics_log.write({"step": step, **rep.to_row()})
        return rep, raw, intervals

    try:
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            eval_time = 0.0
            for x_real in iterate_batches(ds, cfg.batch_size, data_rng, epoch_size=steps * cfg.batch_size):
                d_rep, g_rep, real_b, fake_b = _train_step(gan, opt_d, opt_g, x_real, cfg, latent_rng, dir_rng)
                step += 1
                if not (d_rep.is_finite() and g_rep.is_finite()):
                    raise TrainingDiverged(
                        f"non-finite loss at step {step} (epoch {epoch}): "
                        f"L_D={d_rep.total!r}, L_G={g_rep.total!r}"
                    )
                if step % cfg.log_every == 0:
                    losses.write(_loss_row(step, epoch, d_rep, g_rep, real_b, fake_b))
                if cfg.eval_every > 0 and step % cfg.eval_every == 0:
                    te = time.perf_counter()
                    report = run_eval()[0]
                    eval_time += time.perf_counter() - te
            seconds.append(time.perf_counter() - t0 - eval_time)
            log.info("epoch %d: %.2fs", epoch, seconds[-1])
            if cfg.eval_every == 0 and epoch < cfg.epochs - 1:
                report = run_eval()[0]
        raw = intervals = None
        if cfg.eval_every >= 0:
            report, raw, intervals = run_eval()
    finally:
        losses.close()
        metrics_log.close()

    ckpt = gan.save(out / "checkpoint.egan", {"dataset": cfg.dataset, "seed": cfg.seed, "step": step})
    samples_csv = out / "samples.csv"
    if raw is not None:
        write_csv(samples_csv, raw)
        if intervals:
            write_uncertainty_csv(out / "uncertainty.csv", intervals[0], UNCERTAINTY_SAMPLES)
        if cfg.plots:
            _plot_run(out, ds, raw, intervals, cfg, eval_seed)
    (out / "run.json").write_text(
        json.dumps({"seconds_per_epoch": seconds, "steps": step, "seed": cfg.seed}, indent=1) + "\n"
    )
    return RunResult(report, out, out / "losses.csv", out / "metrics.csv", samples_csv, ckpt, seconds, cfg.seed)


def write_uncertainty_csv(path, intervals, limit: int | None = None) -> Path:
    """Rows of (sample, region, lo, hi, width) from one IntervalMap or a list of batches."""
    path = Path(path)
    batches = intervals if isinstance(intervals, (list, tuple)) else [intervals]
    i = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "region", "lo", "hi", "width"])
        for iv in batches:
            for k in range(len(iv.lo)):
                if limit is not None and i >= limit:
                    return path
                for r in range(iv.regions):
                    w.writerow([i, r, repr(float(iv.lo[k, r])), repr(float(iv.hi[k, r])), repr(float(iv.width[k, r]))])
                i += 1
    return path


def _plot_run(out: Path, ds: Dataset, raw: np.ndarray, intervals, cfg: TrainConfig, seed: int):
    plots = out / "plots"
    title = f"{cfg.mode} on {ds.name} (seed {cfg.seed})"
    if ds.dim == 2:
        real = ds.sample_raw(len(raw), np.random.default_rng(seed))
        modes = ds.mixture.means if ds.mixture is not None else None
        plotting.scatter_samples(real, raw, plots / "samples.svg", title, modes)
    elif ds.dim == 256:
        plotting.image_grid(raw[:64], plots / "samples.svg", title=title)
    if intervals:
        plotting.uncertainty_strips(intervals[0].width[:UNCERTAINTY_SAMPLES], plots / "uncertainty.svg")


def sample_checkpoint(checkpoint, n: int, seed: int, out_dir, with_uncertainty: bool = False,
                      dataset: str | None = None, plots: bool = True) -> dict[str, Path]:
    """Draw ``n`` generations from a checkpoint into ``samples.csv`` (raw coordinates).

    With ``with_uncertainty`` the per-region intervals of every sample go to
    ``uncertainty.csv`` and a width heat-strip to ``plots/uncertainty.svg``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    gan, meta = GAN.load(checkpoint)
    ds = get_dataset(dataset or meta.get("dataset", ""))
    if gan.cfg.data_dim != ds.dim:
        raise ValueError(f"checkpoint generates {gan.cfg.data_dim}-d data but dataset {ds.name} is {ds.dim}-d")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x, intervals = generate_samples(gan, n, np.random.default_rng(seed))
    raw = ds.denormalize(x)
    written = {"samples": write_csv(out / "samples.csv", raw)}
    if with_uncertainty:
        if not intervals:
            raise ValueError(f"mode {gan.cfg.mode!r} has no evidential generator, so no width maps")
        written["uncertainty"] = write_uncertainty_csv(out / "uncertainty.csv", intervals)
        if plots:
            widths = np.concatenate([iv.width for iv in intervals])[:UNCERTAINTY_SAMPLES]
            written["uncertainty_plot"] = plotting.uncertainty_strips(widths, out / "plots" / "uncertainty.svg")
    if plots:
        if ds.dim == 2:
            real = ds.sample_raw(n, np.random.default_rng(seed))
            modes = ds.mixture.means if ds.mixture is not None else None
            written["plot"] = plotting.scatter_samples(real, raw, out / "plots" / "samples.svg", modes=modes)
        elif ds.dim == 256:
            written["plot"] = plotting.image_grid(raw[:64], out / "plots" / "samples.svg")
    return written


# --- ablation --------------------------------------------------------------------------------------


@dataclass
class Cell:
    label: str
    overrides: dict
    row: str
    col: str


def grid_cells(grid: dict) -> tuple[str, list[Cell]]:
    """Expand ``{"beta": [...], "gamma": [...]}``, ``{"lambda": [...]}`` or ``{"mode": [...]}``."""
    keys = set(grid)
    if keys == {"beta", "gamma"}:
        cells = [
            Cell(f"beta={b:g},gamma={g:g}", {"beta": float(b), "gamma": float(g)}, f"{g:g}", f"{b:g}")
            for g in grid["gamma"]
            for b in grid["beta"]
        ]
        return "beta-gamma", cells
    if keys == {"lambda"}:
        return "lambda", [Cell(f"lambda={v:g}", {"lam": float(v)}, "Score", f"{v:g}") for v in grid["lambda"]]
    if keys == {"mode"}:
        names = dict((m, n) for n, m in ARCH_CONFIGS)
        return "arch", [Cell(names.get(m, m), {"mode": m}, names.get(m, m), "FD (Vendi)") for m in grid["mode"]]
    raise ValueError(f"unsupported grid keys {sorted(keys)}")


GRIDS = {
    "beta-gamma": {"beta": list(BETA_GAMMA_AXIS), "gamma": list(BETA_GAMMA_AXIS)},
    "lambda": {"lambda": list(LAMBDA_AXIS)},
    "arch": {"mode": [m for _, m in ARCH_CONFIGS]},
}


def _slug(label: str) -> str:
    return "".join(c if c.isalnum() or c in "=.-" else "_" for c in label)


def _run_cell(args):
    cfg, out_dir = args
    try:
        res = train(cfg, out_dir)
        m = res.metrics
        return {"ok": True, "fid": m.fid, "vendi": m.vendi, "modes": m.modes_covered}
    except Exception as exc:  # a failed cell must not sink the grid
        log.warning("cell %s failed: %s", out_dir, exc)
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


@dataclass
class AblationTable:
    kind: str
    cells: list[Cell]
    results: dict[str, list[dict]]
    csv_path: Path
    long_csv_path: Path

    def median(self, label: str, key: str):
        vals = [r[key] for r in self.results[label] if r["ok"] and r.get(key) is not None]
        return statistics.median(vals) if vals else None


def ablate(base: TrainConfig, grid: dict, seeds: list[int], out_dir, workers: int | None = None) -> AblationTable:
    """Train every grid cell for every seed and tabulate median FD and Vendi.

    Emits ``ablation.csv`` laid out like the corresponding ablation table and
    ``ablation_long.csv`` with one row per cell.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    kind, cells = grid_cells(grid)
    if not cells:
        raise ValueError("empty grid")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for cell in cells:
        for s in seeds:
            cfg = replace(base, seed=int(s), **cell.overrides)
            jobs.append((cfg, out / "cells" / _slug(cell.label) / f"seed-{s}"))
    workers = workers or os.cpu_count() or 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, jobs))
    else:
        outcomes = [_run_cell(j) for j in jobs]

    results = {c.label: [] for c in cells}
    for (cfg, _), res, cell in zip(jobs, outcomes, [c for c in cells for _ in seeds]):
        results[cell.label].append({**res, "seed": cfg.seed})
    table = AblationTable(kind, cells, results, out / "ablation.csv", out / "ablation_long.csv")
    _write_ablation(table, len(seeds))
    return table


def _cell_text(table: AblationTable, cell: Cell, n_seeds: int) -> str:
    ok = sum(r["ok"] for r in table.results[cell.label])
    fd, vendi = table.median(cell.label, "fid"), table.median(cell.label, "vendi")
    if fd is None:
        return f"FAILED [{ok}/{n_seeds} seeds]"
    return f"{fd:.4f} ({vendi:.3f}) [{ok}/{n_seeds} seeds]"


def _write_ablation(table: AblationTable, n_seeds: int):
    rows = list(dict.fromkeys(c.row for c in table.cells))
    cols = list(dict.fromkeys(c.col for c in table.cells))
    corner = {"beta-gamma": "gamma\\beta", "lambda": "lambda", "arch": "Configuration"}[table.kind]
    with open(table.csv_path, "w", newline="") as fh:
        fh.write(f"# median over {n_seeds} seed(s); cell = FD (Vendi) [successful seeds]\n")
        w = csv.writer(fh)
        w.writerow([corner, *cols])
        for r in rows:
            line = [r]
            for c in cols:
                cell = next((x for x in table.cells if x.row == r and x.col == c), None)
                line.append(_cell_text(table, cell, n_seeds) if cell else "")
            w.writerow(line)
    with open(table.long_csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell", *sorted({k for c in table.cells for k in c.overrides}), "seeds_ok", "seeds_total",
                    "median_fd", "median_vendi", "median_modes_covered", "errors"])
        keys = sorted({k for c in table.cells for k in c.overrides})
        for c in table.cells:
            res = table.results[c.label]
            errors = "; ".join(r["error"] for r in res if not r["ok"])
            w.writerow([c.label, *[c.overrides.get(k, "") for k in keys], sum(r["ok"] for r in res), n_seeds,
                        _fmt(table.median(c.label, "fid")), _fmt(table.median(c.label, "vendi")),
                        _fmt(table.median(c.label, "modes")), errors])


# --- overhead benchmark -------------------------------------------------------------------------


def bench(base: TrainConfig, out_dir, epochs: int = 3) -> dict[str, list[float]]:
    """Per-epoch training seconds for the standard and the epistemic model on one config."""
    timings = {}
    for mode in ("standard", "epistemic"):
        cfg = replace(base, mode=mode, epochs=epochs, eval_every=-1, plots=False)
        timings[mode] = train(cfg, Path(out_dir) / mode).seconds_per_epoch
    return timings
