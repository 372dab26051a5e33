"""Evidential adversarial objectives and the non-saturating GAN baseline.

Every loss returns a :class:`LossReport` holding the differentiable total plus
its unweighted parts as floats, so ``total == adversarial + lambda *
constraint_penalty + beta * variance_term + gamma * width_term``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .networks import BeliefPair, DirichletField, IntervalMap

EPS = 1e-6


@dataclass(frozen=True)
class LossWeights:
    lam: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if min(self.lam, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be nonnegative")


NO_WEIGHTS = LossWeights(0.0, 0.0, 0.0)


@dataclass
class LossReport:
    total: float
    adversarial: float
    constraint_penalty: float = 0.0
    variance_term: float = 0.0
    width_term: float = 0.0
    sampled_width: float = float("nan")
    weights: LossWeights = field(default_factory=LossWeights)
    tensor: Tensor | None = field(default=None, repr=False)

    def weighted_sum(self) -> float:
        w = self.weights
        return (
            self.adversarial
            + w.lam * self.constraint_penalty
            + w.beta * self.variance_term
            + w.gamma * self.width_term
        )

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.total))


def _check_batch(*pairs: BeliefPair):
    for p in pairs:
        if p.b_real.data.size == 0:
            raise ValueError("empty batch")


def _clamped_log(b: Tensor) -> Tensor:
    """log(clip(b, EPS, 1 - EPS)) as one node; zero gradient where clipped."""
    v = np.clip(b.data, EPS, 1.0 - EPS)
    inside = (b.data > EPS) & (b.data < 1.0 - EPS)
    return ad.custom_op(np.log(v), (b,), lambda g: b._accumulate(np.where(inside, g / v, 0.0)))


def _clamped_log1m(b: Tensor) -> Tensor:
    """log(1 - clip(b, EPS, 1 - EPS)) as one node."""
    v = np.clip(b.data, EPS, 1.0 - EPS)
    inside = (b.data > EPS) & (b.data < 1.0 - EPS)
    return ad.custom_op(np.log1p(-v), (b,), lambda g: b._accumulate(np.where(inside, -g / (1.0 - v), 0.0)))


def hinge_violation(p: BeliefPair) -> Tensor:
    """Per-sample max(0, b_real + b_fake - 1)."""
    return ad.max_with_scalar(p.b_real + p.b_fake - 1.0, 0.0)


def mean_dirichlet_variance(fld: DirichletField) -> Tensor:
    """Mean over batch and regions of tr Cov[Dir(alpha)].

    Per region, sum_k a_k (a0 - a_k) / (a0^2 (a0 + 1)) = (1 - sum_k p_k^2) / (a0 + 1)
    with p = alpha / alpha0. Evaluated as a single graph node.
    """
    a = fld.alphas.data
    a0 = a.sum(axis=-1, keepdims=True)
    p = a / a0
    S = (p * p).sum(axis=-1, keepdims=True)
    q = 1.0 / (a0 + 1.0)
    count = a.shape[0] * a.shape[1]
    value = float(((1.0 - S) * q).sum()) / count

    def bw(g):
        # d/da_j [(1 - S) q] = -2 q (p_j - S) / a0 - (1 - S) q^2
        grad = -2.0 * q * (p - S) / a0 - (1.0 - S) * q * q
        fld.alphas._accumulate(g * grad / count)

    return ad.custom_op(value, (fld.alphas,), bw)


def mean_expected_width(fld: DirichletField) -> Tensor:
    """Mean over batch and regions of E[m3] = a3 / a0."""
    a = fld.alphas.data
    a0 = a.sum(axis=-1, keepdims=True)
    p3 = a[..., 2:3] / a0
    count = a.shape[0] * a.shape[1]

    def bw(g):
        grad = -p3 / a0 * np.ones_like(a)
        grad[..., 2:3] += 1.0 / a0
        fld.alphas._accumulate(g * grad / count)

    return ad.custom_op(float(p3.sum()) / count, (fld.alphas,), bw)


def _report(adv, penalty, var, width, w: LossWeights, sampled_width=float("nan")) -> LossReport:
    total = adv
    parts = {}
    for key, term, weight in (
        ("constraint_penalty", penalty, w.lam),
        ("variance_term", var, w.beta),
        ("width_term", width, w.gamma),
    ):
        if term is None:
            parts[key] = 0.0
            continue
        parts[key] = term.item()
        total = total + weight * term
    return LossReport(
        total=total.item(),
        adversarial=adv.item(),
        sampled_width=sampled_width,
        weights=w,
        tensor=total,
        **parts,
    )


def discriminator_loss(real: BeliefPair, fake: BeliefPair, w: LossWeights = LossWeights()) -> LossReport:
    """Evidential discriminator objective.

    -E_real[log b_r + log(1 - b_f)] - E_fake[log b_f + log(1 - b_r)]
    + lambda * (E_real[hinge] + E_fake[hinge])
    """
    _check_batch(real, fake)
    adv = -(
        ad.mean(_clamped_log(real.b_real) + _clamped_log1m(real.b_fake))
        + ad.mean(_clamped_log(fake.b_fake) + _clamped_log1m(fake.b_real))
    )
    penalty = ad.mean(hinge_violation(real)) + ad.mean(hinge_violation(fake))
    return _report(adv, penalty, None, None, w)


def generator_loss(
    fake: BeliefPair,
    fld: DirichletField | None = None,
    intervals: IntervalMap | None = None,
    w: LossWeights = LossWeights(),
) -> LossReport:
    """Evidential generator objective.

    -E_z[log b_r(G(z)) + log(1 - b_f(G(z)))] + beta * E[Var Dir(alpha)] + gamma * E[a3 / a0]

    The regularizers are skipped (reported as 0) when ``fld`` is None, i.e.
    for generators without a mass prediction stage.
    """
    _check_batch(fake)
    adv = -ad.mean(_clamped_log(fake.b_real) + _clamped_log1m(fake.b_fake))
    if fld is None:
        return _report(adv, None, None, None, w)
    var = mean_dirichlet_variance(fld)
    width = mean_expected_width(fld)
    sampled = float(np.mean(intervals.width)) if intervals is not None else float("nan")
    return _report(adv, None, var, width, w, sampled_width=sampled)


def standard_discriminator_loss(real: BeliefPair, fake: BeliefPair) -> LossReport:
    """Non-saturating BCE: -E_real[log p] - E_fake[log(1 - p)] with p = b_real."""
    _check_batch(real, fake)
    adv = -(ad.mean(_clamped_log(real.b_real)) + ad.mean(_clamped_log1m(fake.b_real)))
    return _report(adv, None, None, None, NO_WEIGHTS)


def standard_generator_loss(fake: BeliefPair) -> LossReport:
    """Non-saturating generator loss -E_fake[log p]."""
    _check_batch(fake)
    return _report(-ad.mean(_clamped_log(fake.b_real)), None, None, None, NO_WEIGHTS)


def standard_gan_losses(real: BeliefPair, fake: BeliefPair) -> tuple[LossReport, LossReport]:
    return standard_discriminator_loss(real, fake), standard_generator_loss(fake)
