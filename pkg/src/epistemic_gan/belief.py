"""Dempster-Shafer calculus on finite frames and on closed intervals of [0, 1].

Subsets of a frame with ``size`` atoms are addressed by integer bitmasks in
``[0, 2**size)``; bit ``i`` set means atom ``i`` belongs to the subset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

MAX_FRAME_SIZE = 20
MASS_TOL = 1e-9


class BeliefError(ValueError):
    """Raised for inputs that violate mass/belief function axioms."""


@dataclass(frozen=True)
class Frame:
    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if not 1 <= self.size <= MAX_FRAME_SIZE:
            raise BeliefError(f"frame size must be in [1, {MAX_FRAME_SIZE}], got {self.size}")
        if self.labels is not None and len(self.labels) != self.size:
            raise BeliefError("one label per atom required")

    @property
    def n_subsets(self) -> int:
        return 1 << self.size

    @property
    def full(self) -> int:
        return self.n_subsets - 1

    def subset(self, atoms: Sequence[str | int]) -> int:
        """Bitmask for a collection of atom labels or indices."""
        mask = 0
        for a in atoms:
            idx = self.labels.index(a) if isinstance(a, str) else int(a)
            if not 0 <= idx < self.size:
                raise BeliefError(f"atom index {idx} outside frame")
            mask |= 1 << idx
        return mask

    def describe(self, mask: int) -> str:
        names = self.labels or tuple(str(i) for i in range(self.size))
        return "{" + ", ".join(names[i] for i in range(self.size) if mask >> i & 1) + "}"


def _popcount(masks: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(masks)
    m = masks.copy()
    while np.any(m):
        counts += m & 1
        m >>= 1
    return counts


@dataclass(frozen=True)
class MassFunction:
    """Normalized mass assignment, stored densely over all ``2**size`` subsets."""

    frame: Frame
    masses: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=np.float64)
        if m.shape != (self.frame.n_subsets,):
            raise BeliefError(f"expected {self.frame.n_subsets} masses, got shape {m.shape}")
        if np.any(m < 0):
            raise BeliefError("masses must be nonnegative")
        if m[0] != 0:
            raise BeliefError("mass on the empty set must be 0")
        if abs(m.sum() - 1.0) > MASS_TOL:
            raise BeliefError(f"masses sum to {m.sum()!r}, not 1")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @classmethod
    def from_dict(cls, frame: Frame, assignment: Mapping[int, float]) -> "MassFunction":
        m = np.zeros(frame.n_subsets)
        for mask, v in assignment.items():
            m[mask] += v
        return cls(frame, m)

    def __getitem__(self, mask: int) -> float:
        return float(self.masses[mask])

    def focal_elements(self) -> dict[int, float]:
        return {int(a): float(v) for a, v in enumerate(self.masses) if v > 0}


@dataclass(frozen=True)
class BeliefFunction:
    frame: Frame
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.frame.n_subsets,):
            raise BeliefError(f"expected {self.frame.n_subsets} values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, mask: int) -> float:
        return float(self.values[mask])


def _zeta(values: np.ndarray, size: int) -> np.ndarray:
    # Subset-sum (zeta) transform, one atom at a time.
    out = values.astype(np.float64, copy=True)
    idx = np.arange(out.size)
    for i in range(size):
        has = (idx >> i & 1).astype(bool)
        out[has] += out[idx[has] ^ (1 << i)]
    return out


def _moebius(values: np.ndarray, size: int) -> np.ndarray:
    out = values.astype(np.float64, copy=True)
    idx = np.arange(out.size)
    for i in range(size):
        has = (idx >> i & 1).astype(bool)
        out[has] -= out[idx[has] ^ (1 << i)]
    return out


def belief_from_mass(m: MassFunction) -> BeliefFunction:
    """Bel(A) = sum of m(B) over all B contained in A."""
    bel = _zeta(m.masses, m.frame.size)
    return BeliefFunction(m.frame, np.clip(bel, 0.0, 1.0))


def mass_from_belief(bel: BeliefFunction) -> MassFunction:
    """Recover the mass function by Moebius inversion.

    Recovered masses in ``[-1e-9, 0)`` are treated as rounding noise: they are
    clamped to zero and the result renormalized. Anything more negative means
    ``bel`` was not a belief function and raises :class:`BeliefError`.
    """
    m = _moebius(bel.values, bel.frame.size)
    worst = m.min()
    if worst < -MASS_TOL:
        bad = int(np.argmin(m))
        raise BeliefError(
            f"not a belief function: recovered m({bel.frame.describe(bad)}) = {worst:.3g}"
        )
    m[0] = 0.0
    m = np.clip(m, 0.0, None)
    total = m.sum()
    if total <= 0:
        raise BeliefError("belief function carries no mass")
    return MassFunction(bel.frame, m / total)


def belief_bruteforce(m: MassFunction) -> np.ndarray:
    """Reference O(4**n) double loop over subset pairs."""
    n = m.frame.n_subsets
    out = np.zeros(n)
    for a in range(n):
        for b in range(n):
            if b & a == b:
                out[a] += m.masses[b]
    return out


def random_mass(frame: Frame, rng: np.random.Generator, n_focal: int | None = None) -> MassFunction:
    """Random mass function with ``n_focal`` nonempty focal elements."""
    n = frame.n_subsets - 1
    k = n if n_focal is None else min(n_focal, n)
    focal = rng.choice(np.arange(1, frame.n_subsets), size=k, replace=False)
    w = rng.dirichlet(np.ones(k))
    m = np.zeros(frame.n_subsets)
    m[focal] = w
    m /= m.sum()
    return MassFunction(frame, m)


def cardinality(masks: np.ndarray) -> np.ndarray:
    return _popcount(np.asarray(masks, dtype=np.int64))


# --- continuous belief on intervals -------------------------------------------------


@dataclass(frozen=True)
class BorelInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise BeliefError(f"interval lower end {self.lo} exceeds upper end {self.hi}")


@dataclass(frozen=True)
class ContinuousMassDensity:
    """Mass density m(a, b) on focal intervals [a, b] of [0, 1], sampled on a grid.

    ``density[i, j]`` is the value at ``a = grid[i]``, ``b = grid[j]`` with
    ``grid = linspace(0, 1, grid_resolution + 1)``. Entries with ``a > b`` are zero.
    """

    grid_resolution: int
    density: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.grid_resolution + 1
        d = np.asarray(self.density, dtype=np.float64)
        if d.shape != (n, n):
            raise BeliefError(f"density must be {n}x{n}, got {d.shape}")
        if np.any(d < 0):
            raise BeliefError("density must be nonnegative")
        d = np.triu(d)
        d.setflags(write=False)
        object.__setattr__(self, "density", d)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_resolution + 1)

    @classmethod
    def from_function(cls, fn, grid_resolution: int = 256, normalize: bool = True):
        """Tabulate ``fn(a, b)`` on the grid; optionally rescale to unit mass."""
        g = np.linspace(0.0, 1.0, grid_resolution + 1)
        a, b = np.meshgrid(g, g, indexing="ij")
        d = np.where(a <= b, fn(a, b), 0.0)
        out = cls(grid_resolution, d)
        if normalize:
            total = continuous_belief(out, BorelInterval(0.0, 1.0))
            out = cls(grid_resolution, d / total)
        return out

    @classmethod
    def uniform(cls, grid_resolution: int = 256) -> "ContinuousMassDensity":
        return cls.from_function(lambda a, b: np.full_like(a, 2.0), grid_resolution, normalize=False)


def _triangle_weights(nodes: np.ndarray) -> np.ndarray:
    """Trapezoid weights on the tensor grid ``nodes x nodes`` restricted to a <= b.

    Cells above the diagonal are full rectangles (1/4 of the area per vertex);
    diagonal cells are half-squares integrated with the 3-vertex rule (1/3 of
    the area per vertex).
    """
    h = np.diff(nodes)
    k = len(nodes)
    cell = np.triu(np.outer(h, h), k=1) / 4.0
    w = np.zeros((k, k))
    w[:-1, :-1] += cell
    w[:-1, 1:] += cell
    w[1:, :-1] += cell
    w[1:, 1:] += cell
    tri = h * h / 6.0
    idx = np.arange(k - 1)
    w[idx, idx] += tri
    w[idx, idx + 1] += tri
    w[idx + 1, idx + 1] += tri
    return w


def continuous_belief(density: ContinuousMassDensity, query: BorelInterval) -> float:
    """Belief of ``query``: mass of all focal intervals [a, b] inside it.

    Integrates the density over ``query.lo <= a <= b <= query.hi`` with
    trapezoidal quadrature. The nodes are the grid points strictly inside the
    query plus its two endpoints; off-grid density values are bilinear
    interpolations of the grid (mirrored across the diagonal so that cells
    straddling it are not pulled towards zero).
    """
    if query.lo < 0.0 or query.hi > 1.0:
        raise BeliefError("query must lie within [0, 1]")
    if query.hi - query.lo <= 0.0:
        return 0.0
    g = density.grid
    inner = g[(g > query.lo) & (g < query.hi)]
    nodes = np.concatenate(([query.lo], inner, [query.hi]))
    d = density.density
    full = d + d.T - np.diag(np.diag(d))
    sub = RegularGridInterpolator((g, g), full)(np.stack(np.meshgrid(nodes, nodes, indexing="ij"), axis=-1))
    return float(np.sum(sub * _triangle_weights(nodes)))


def flu_cold_allergy() -> tuple[Frame, MassFunction]:
    """The three-disease diagnosis example: m({f})=.5, m({a})=.2, m({f,c})=.3."""
    frame = Frame(3, ("flu", "cold", "allergy"))
    m = MassFunction.from_dict(
        frame,
        {
            frame.subset(["flu"]): 0.5,
            frame.subset(["allergy"]): 0.2,
            frame.subset(["flu", "cold"]): 0.3,
        },
    )
    return frame, m
