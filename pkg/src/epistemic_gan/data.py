"""Synthetic benchmark distributions and CSV datasets."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

MIXTURE_EPOCH_SIZE = 4000 * 128
SHAPES16_DEFAULT_N = 20000
SHAPE_CLASSES = ("hbar", "vbar", "rect", "disc")


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianMixtureSpec:
    means: np.ndarray
    sigma: float
    weights: np.ndarray

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        weights = np.asarray(self.weights, dtype=np.float64)
        if self.sigma <= 0:
            raise DataError("sigma must be positive")
        if weights.shape != (len(means),):
            raise DataError("one weight per component required")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise DataError("weights must lie on the simplex")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights)

    @property
    def n_modes(self) -> int:
        return len(self.means)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """``n`` draws and their component labels."""
        labels = rng.choice(self.n_modes, size=n, p=self.weights)
        x = self.means[labels] + self.sigma * rng.standard_normal((n, self.dim))
        return x, labels


def ring8(radius: float = 2.0, sigma: float = 0.05) -> GaussianMixtureSpec:
    angles = 2 * np.pi * np.arange(8) / 8
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return GaussianMixtureSpec(means, sigma, np.full(8, 1 / 8))


def grid25(sigma: float = 0.05) -> GaussianMixtureSpec:
    ticks = np.linspace(-4.0, 4.0, 5)
    means = np.array([(x, y) for x in ticks for y in ticks])
    return GaussianMixtureSpec(means, sigma, np.full(25, 1 / 25))


@dataclass
class Dataset:
    """A named data source plus the isotropic affine map into [-1, 1]^dim.

    Exactly one of ``points`` (in-memory, raw coordinates) and ``mixture``
    (infinite sampler) is set.
    """

    name: str
    dim: int
    center: np.ndarray
    scale: float
    points: np.ndarray | None = None
    mixture: GaussianMixtureSpec | None = None
    labels: np.ndarray | None = field(default=None, repr=False)
    epoch_size: int = MIXTURE_EPOCH_SIZE

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return np.clip((np.asarray(x, dtype=np.float64) - self.center) / self.scale, -1.0, 1.0)

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.scale + self.center

    @property
    def size(self) -> int:
        return len(self.points) if self.points is not None else self.epoch_size

    def sample_raw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` real samples in raw coordinates (without replacement when in memory)."""
        if self.mixture is not None:
            return self.mixture.sample(n, rng)[0]
        replace = n > len(self.points)
        return self.points[rng.choice(len(self.points), size=n, replace=replace)]


def mixture_dataset(name: str, spec: GaussianMixtureSpec) -> Dataset:
    scale = float(np.abs(spec.means).max() + 8 * spec.sigma)
    return Dataset(name, spec.dim, np.zeros(spec.dim), scale, mixture=spec)


def _shape_image(kind: str, rng: np.random.Generator, size: int = 16) -> np.ndarray:
    img = -np.ones((size, size))
    yy, xx = np.mgrid[0:size, 0:size]
    if kind == "hbar":
        h = rng.integers(2, 5)
        top = rng.integers(0, size - h + 1)
        left = rng.integers(0, 5)
        right = rng.integers(size - 4, size + 1)
        img[top : top + h, left:right] = 1.0
    elif kind == "vbar":
        w = rng.integers(2, 5)
        left = rng.integers(0, size - w + 1)
        top = rng.integers(0, 5)
        bottom = rng.integers(size - 4, size + 1)
        img[top:bottom, left : left + w] = 1.0
    elif kind == "rect":
        h, w = rng.integers(5, 11, size=2)
        top = rng.integers(0, size - h + 1)
        left = rng.integers(0, size - w + 1)
        img[top : top + h, left : left + w] = 1.0
    else:
        r = rng.uniform(2.5, 5.0)
        cy, cx = rng.uniform(r, size - r, size=2)
        img[(yy + 0.5 - cy) ** 2 + (xx + 0.5 - cx) ** 2 <= r * r] = 1.0
    return img


def shapes16(n: int = SHAPES16_DEFAULT_N, seed: int = 0) -> Dataset:
    """Procedural 16x16 images of bars, rectangles and discs, flattened to 256 values in [-1, 1]."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, len(SHAPE_CLASSES), size=n)
    images = np.stack([_shape_image(SHAPE_CLASSES[k], rng).ravel() for k in labels])
    return Dataset("shapes16", 256, np.zeros(256), 1.0, points=images, labels=labels)


# --- CSV ---------------------------------------------------------------------------------


def write_csv(path: str | Path, points: np.ndarray) -> Path:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(points.shape[1])])
        for row in points:
            w.writerow([repr(float(v)) for v in row])
    return path


def load_csv(path: str | Path, name: str | None = None) -> Dataset:
    """Read a header row plus one sample per line; the header fixes ``dim``."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        dim = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} values, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    pts = np.array(rows)
    if not np.all(np.isfinite(pts)):
        raise DataError(f"{path}: non-finite values")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = (lo + hi) / 2
    scale = float(np.max((hi - lo) / 2)) or 1.0
    return Dataset(name or path.stem, dim, center, scale, points=pts)


def iterate_batches(
    dataset: Dataset, batch_size: int, rng: np.random.Generator, epoch_size: int | None = None
) -> Iterator[np.ndarray]:
    """One epoch of normalized batches; the short final batch is dropped.

    In-memory datasets are reshuffled each call. Mixture datasets draw fresh
    samples, ``epoch_size`` of them (default ``dataset.epoch_size``).
    """
    if batch_size < 1:
        raise DataError("batch_size must be positive")
    if dataset.points is not None:
        order = rng.permutation(len(dataset.points))
        for k in range(len(order) // batch_size):
            yield dataset.normalize(dataset.points[order[k * batch_size : (k + 1) * batch_size]])
    else:
        for _ in range((epoch_size or dataset.epoch_size) // batch_size):
            yield dataset.normalize(dataset.mixture.sample(batch_size, rng)[0])


MIXTURES = {"ring8": ring8, "grid25": grid25}
DATASET_NAMES = ("ring8", "grid25", "shapes16")


def get_dataset(name: str, seed: int = 0) -> Dataset:
    """Look up a registered dataset by name, or load ``name`` as a CSV path."""
    if name in MIXTURES:
        return mixture_dataset(name, MIXTURES[name]())
    if name == "shapes16":
        return shapes16(seed=seed)
    if name.endswith(".csv"):
        return load_csv(name)
    raise DataError(f"unknown dataset {name!r}; expected one of {', '.join(DATASET_NAMES)} or a .csv path")
