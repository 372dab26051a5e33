"""Gamma and Dirichlet sampling with closed-form Dirichlet moments.

Uniform and normal variates come from ``numpy.random.Generator`` (PCG64 by
default). Gamma variates use the Marsaglia-Tsang method: propose
``d (1 + c x)^3`` with ``x`` standard normal, ``d = a - 1/3``,
``c = 1 / sqrt(9 d)``, accept with the cheap squeeze ``u < 1 - 0.0331 x^4`` or
the exact log test. Shapes below 1 are boosted: ``G(a) = G(a + 1) * U^(1/a)``.

Dirichlet rows normalize three Gamma draws. Tiny shapes can underflow every
draw in a row to zero; such rows are redone in log space.
"""

from __future__ import annotations

import numpy as np


def _mt_proposals(d: np.ndarray, c: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Marsaglia-Tsang draws (as d * v) for shapes a = d + 1/3 >= 1."""
    out = np.empty_like(d)
    pending = None  # None: every entry still pending
    while True:
        dp = d if pending is None else d[pending]
        cp = c if pending is None else c[pending]
        n = dp.size
        x = rng.standard_normal(n)
        u = rng.random(n)
        v = 1.0 + cp * x
        v = v * v * v
        x2 = x * x
        ok = v > 0
        accept = ok & (u < 1.0 - 0.0331 * x2 * x2)
        hard = np.flatnonzero(ok & ~accept)
        if hard.size:
            vh = v[hard]
            dh = dp[hard]
            accept[hard] = np.log(u[hard]) < 0.5 * x2[hard] + dh * (1.0 - vh + np.log(vh))
        if pending is None:
            out[accept] = (dp * v)[accept]
            pending = np.flatnonzero(~accept)
        else:
            out[pending[accept]] = dp[accept] * v[accept]
            pending = pending[~accept]
        if pending.size == 0:
            return out


def _boosted(shape: np.ndarray):
    a = np.asarray(shape, dtype=np.float64)
    if np.any(a <= 0):
        raise ValueError("gamma shape must be positive")
    flat = a.ravel()
    small = np.flatnonzero(flat < 1.0)
    boosted = flat.copy()
    boosted[small] += 1.0
    d = boosted - 1.0 / 3.0
    return a.shape, flat, small, d, 1.0 / np.sqrt(9.0 * d)


def gamma_variates(shape, rng: np.random.Generator) -> np.ndarray:
    """Independent Gamma(shape, 1) draws, elementwise over ``shape``."""
    out_shape, flat, small, d, c = _boosted(shape)
    g = _mt_proposals(d, c, rng)
    if small.size:
        # exp(log u / a) rather than u ** (1 / a): much faster once results go subnormal
        g[small] *= np.exp(np.log(rng.random(small.size)) / flat[small])
    return g.reshape(out_shape)


def log_gamma_variates(shape, rng: np.random.Generator) -> np.ndarray:
    """Logs of Gamma(shape, 1) draws; never underflows for tiny shapes."""
    out_shape, flat, small, d, c = _boosted(shape)
    logg = np.log(_mt_proposals(d, c, rng))
    if small.size:
        logg[small] += np.log(rng.random(small.size)) / flat[small]
    return logg.reshape(out_shape)


def sample_dirichlet(alpha, rng: np.random.Generator) -> np.ndarray:
    """One Dirichlet draw per row of ``alpha`` (last axis = categories)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    g = gamma_variates(alpha, rng)
    total = g.sum(axis=-1, keepdims=True)
    dead = total[..., 0] <= 0.0
    if np.any(dead):
        logg = log_gamma_variates(alpha[dead], rng)
        logg -= logg.max(axis=-1, keepdims=True)
        g[dead] = np.exp(logg)
        total = g.sum(axis=-1, keepdims=True)
    return g / total


def dirichlet_mean(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=np.float64)
    return alpha / alpha.sum(axis=-1, keepdims=True)


def dirichlet_component_variance(alpha) -> np.ndarray:
    """Per-component variance a_k (a0 - a_k) / (a0^2 (a0 + 1))."""
    alpha = np.asarray(alpha, dtype=np.float64)
    a0 = alpha.sum(axis=-1, keepdims=True)
    return alpha * (a0 - alpha) / (a0 * a0 * (a0 + 1.0))


def dirichlet_total_variance(alpha) -> np.ndarray:
    """Trace of the Dirichlet covariance: sum of the component variances."""
    return dirichlet_component_variance(alpha).sum(axis=-1)
