"""MLP discriminator with a belief-pair head and the two-stage Dirichlet generator.

The four modes wire the networks as follows:

============  ======================  =============================
mode          discriminator head      generator
============  ======================  =============================
standard      one sigmoid (p, 1 - p)  plain MLP
epistemic     two sigmoids            Dirichlet mass + interval decoder
evid_d_only   two sigmoids            plain MLP
evid_g_only   one sigmoid (p, 1 - p)  Dirichlet mass + interval decoder
============  ======================  =============================

The plain generator has the same shape as the Dirichlet one, with a
deterministic ``regions``-wide tanh activation where the Dirichlet stage would
sit, so the two differ only in the evidential machinery.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .dirichlet import sample_dirichlet

MODES = ("standard", "epistemic", "evid_d_only", "evid_g_only")
ALPHA_FLOOR = 1e-3


@dataclass
class NetConfig:
    data_dim: int
    latent_dim: int = 32
    d_hidden: tuple[int, ...] = (128, 128)
    g_hidden: tuple[int, ...] = (128,)
    regions: int = 16
    mode: str = "epistemic"
    alpha_init: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if min(self.data_dim, self.latent_dim, self.regions) < 1:
            raise ValueError("data_dim, latent_dim and regions must be positive")
        self.d_hidden = tuple(int(h) for h in self.d_hidden)
        self.g_hidden = tuple(int(h) for h in self.g_hidden)

    @property
    def evidential_discriminator(self) -> bool:
        return self.mode in ("epistemic", "evid_d_only")

    @property
    def evidential_generator(self) -> bool:
        return self.mode in ("epistemic", "evid_g_only")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["d_hidden"] = list(self.d_hidden)
        d["g_hidden"] = list(self.g_hidden)
        return d


class Linear:
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, name: str):
        bound = np.sqrt(6.0 / (n_in + n_out))
        self.W = ad.parameter(rng.uniform(-bound, bound, size=(n_in, n_out)), name=f"{name}.W")
        self.b = ad.parameter(np.zeros(n_out), name=f"{name}.b")

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.W + self.b

    def parameters(self) -> list[Tensor]:
        return [self.W, self.b]


class MLP:
    """Stack of linear layers; ``act`` between layers, nothing after the last."""

    def __init__(self, sizes, rng: np.random.Generator, name: str, act=ad.leaky_relu):
        self.layers = [
            Linear(a, b, rng, f"{name}.{i}") for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]
        self.act = act

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = self.act(x)
        return x

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]


# --- value types ---------------------------------------------------------------------


@dataclass
class BeliefPair:
    """Batched discriminator beliefs; both tensors have shape (batch,)."""

    b_real: Tensor
    b_fake: Tensor

    def violation(self) -> np.ndarray:
        return np.maximum(0.0, self.b_real.data + self.b_fake.data - 1.0)

    def ignorance(self) -> np.ndarray:
        return np.maximum(0.0, 1.0 - self.b_real.data - self.b_fake.data)


@dataclass
class DirichletField:
    alphas: Tensor  # (batch, regions, 3)

    @property
    def regions(self) -> int:
        return self.alphas.shape[1]

    def mean(self) -> Tensor:
        a0 = ad.sum_(self.alphas, axis=-1, keepdims=True)
        return self.alphas / a0


@dataclass
class MassSample:
    m: np.ndarray  # (batch, regions, 3), rows on the simplex


@dataclass
class IntervalMap:
    """Per-region intervals [m1, m1 + m3]; arrays are (batch, regions)."""

    lo: np.ndarray
    hi: np.ndarray
    width: np.ndarray
    features: Tensor | None = field(default=None, repr=False)  # (batch, 2 * regions): rescaled lo || hi

    @property
    def regions(self) -> int:
        return self.lo.shape[-1]


def intervals_from_masses(m: np.ndarray) -> IntervalMap:
    """Map simplex points (m1, m2, m3) to [m1, m1 + m3]; the width is m3."""
    m = np.asarray(m, dtype=np.float64)
    lo = m[..., 0].copy()
    width = m[..., 2].copy()
    return IntervalMap(lo, np.minimum(lo + width, 1.0), width)


def alpha_head(raw: Tensor, regions: int) -> Tensor:
    """softplus(raw) + floor, reshaped to (batch, regions, 3), as one graph node."""
    B = raw.shape[0]
    alphas = ad.softplus_np(raw.data).reshape(B, regions, 3) + ALPHA_FLOOR

    def bw(g):
        raw._accumulate(g.reshape(raw.shape) * ad.stable_sigmoid(raw.data))

    return ad.custom_op(alphas, (raw,), bw)


def endpoint_features(intervals: IntervalMap) -> np.ndarray:
    """lo || hi rescaled from [0, 1] to [-1, 1]."""
    return 2.0 * np.concatenate([intervals.lo, intervals.hi], axis=-1) - 1.0


def interval_features(alphas: Tensor, intervals: IntervalMap) -> Tensor:
    """Decoder input (rescaled lo || hi) with a straight-through gradient.

    Forward: the sampled interval endpoints. Backward: as if lo = p1 and
    hi = p1 + p3 for the Dirichlet mean p = alpha / alpha0.
    """
    a = alphas.data
    a0 = a.sum(axis=-1, keepdims=True)
    p = a / a0
    out = endpoint_features(intervals)
    R = a.shape[1]

    def bw(g):
        g_lo, g_hi = 2.0 * g[:, :R], 2.0 * g[:, R:]
        g_p = np.zeros_like(a)
        g_p[..., 0] = g_lo + g_hi
        g_p[..., 2] = g_hi
        # d p_k / d a_j = (delta_kj - p_k) / a0
        alphas._accumulate((g_p - (g_p * p).sum(axis=-1, keepdims=True)) / a0)

    return ad.custom_op(out, (alphas,), bw)


# --- networks ------------------------------------------------------------------------


class Discriminator:
    def __init__(self, cfg: NetConfig, rng: np.random.Generator):
        self.two_heads = cfg.evidential_discriminator
        sizes = (cfg.data_dim, *cfg.d_hidden, 2 if self.two_heads else 1)
        self.net = MLP(sizes, rng, "D")

    def __call__(self, x: Tensor) -> BeliefPair:
        return self.discriminate(x)

    def discriminate(self, x) -> BeliefPair:
        logits = self.net(ad.as_tensor(x))
        if self.two_heads:
            b = ad.sigmoid(logits)
            return BeliefPair(b[:, 0], b[:, 1])
        p = ad.sigmoid(logits[:, 0])
        return BeliefPair(p, 1.0 - p)

    def parameters(self) -> list[Tensor]:
        return self.net.parameters()


class Generator:
    """Plain or evidential generator, chosen by ``cfg.mode``."""

    def __init__(self, cfg: NetConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.evidential = cfg.evidential_generator
        R = cfg.regions
        head = 3 * R if self.evidential else R
        self.encoder = MLP((cfg.latent_dim, *cfg.g_hidden, head), rng, "G.enc", act=ad.relu)
        dec_in = 2 * R if self.evidential else R
        self.decoder = MLP((dec_in, *cfg.g_hidden, cfg.data_dim), rng, "G.dec", act=ad.relu)
        if self.evidential:
            # softplus(b) + floor == alpha_init at zero pre-activation
            self.encoder.layers[-1].b.data[:] = np.log(np.expm1(cfg.alpha_init - ALPHA_FLOOR))

    def predict_mass(self, z) -> DirichletField:
        if not self.evidential:
            raise RuntimeError(f"mode {self.cfg.mode!r} has no mass prediction stage")
        return DirichletField(alpha_head(self.encoder(ad.as_tensor(z)), self.cfg.regions))

    def sample_intervals(
        self, fld: DirichletField, rng: np.random.Generator
    ) -> tuple[MassSample, IntervalMap]:
        """Draw one mass vector per region and turn it into an interval.

        The forward value is the Dirichlet draw; the backward pass treats it as
        the analytic mean alpha / alpha0 (straight-through).
        """
        m = sample_dirichlet(fld.alphas.data, rng)
        intervals = intervals_from_masses(m)
        intervals.features = interval_features(fld.alphas, intervals)
        return MassSample(m), intervals

    def construct(self, intervals: IntervalMap) -> Tensor:
        feats = intervals.features
        if feats is None:
            feats = Tensor(endpoint_features(intervals))
        return ad.tanh(self.decoder(feats))

    def generate(self, z, rng: np.random.Generator):
        """Return ``(sample, field, intervals)``; the last two are None for plain generators."""
        z = ad.as_tensor(z)
        if not self.evidential:
            h = ad.tanh(self.encoder(z))
            return ad.tanh(self.decoder(h)), None, None
        fld = self.predict_mass(z)
        _, intervals = self.sample_intervals(fld, rng)
        return self.construct(intervals), fld, intervals

    __call__ = generate

    def parameters(self) -> list[Tensor]:
        return self.encoder.parameters() + self.decoder.parameters()


class GAN:
    """Discriminator/generator pair sharing one :class:`NetConfig`."""

    def __init__(self, cfg: NetConfig, seed: int):
        self.cfg = cfg
        d_seed, g_seed = np.random.SeedSequence(seed).spawn(2)
        self.D = Discriminator(cfg, np.random.default_rng(d_seed))
        self.G = Generator(cfg, np.random.default_rng(g_seed))

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        for p in self.D.parameters() + self.G.parameters():
            yield p.name, p

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for name, p in self.named_parameters():
            if name not in state:
                raise KeyError(f"checkpoint lacks parameter {name}")
            if state[name].shape != p.shape:
                raise ValueError(f"{name}: checkpoint shape {state[name].shape} != {p.shape}")
            p.data[...] = state[name]

    def save(self, path, extra_meta: dict | None = None):
        meta = {"net": self.cfg.to_dict(), **(extra_meta or {})}
        return ad.save_arrays(path, self.state_dict(), meta)

    @classmethod
    def load(cls, path) -> tuple["GAN", dict]:
        arrays, meta = ad.load_arrays(path)
        cfg = NetConfig(**meta["net"])
        gan = cls(cfg, seed=0)
        gan.load_state_dict(arrays)
        return gan, meta
