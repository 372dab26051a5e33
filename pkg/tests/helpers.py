"""Finite-difference oracle shared by the gradient tests."""

import numpy as np

from epistemic_gan import autodiff as ad

FD_STEP = 1e-4
REL_TOL = 1e-4
ABS_TOL = 1e-6


def numeric_grads(fn, arrays, h=FD_STEP):
    """Central differences of the scalar ``fn(*tensors)`` w.r.t. every entry."""
    grads = []
    for k, base in enumerate(arrays):
        g = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            vals = []
            for sign in (1.0, -1.0):
                shifted = [a.copy() for a in arrays]
                shifted[k][idx] += sign * h
                with ad.no_grad():
                    vals.append(fn(*[ad.Tensor(a) for a in shifted]).item())
            g[idx] = (vals[0] - vals[1]) / (2 * h)
        grads.append(g)
    return grads


def analytic_grads(fn, arrays):
    ts = [ad.Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = fn(*ts)
    ad.backward(out)
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in ts]


def assert_grads_match(fn, arrays, rel=REL_TOL, abs_=ABS_TOL):
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    for got, want in zip(analytic_grads(fn, arrays), numeric_grads(fn, arrays)):
        err = np.abs(got - want)
        scale = np.maximum(np.abs(got), np.abs(want))
        ok = (err <= abs_) | (err <= rel * scale)
        assert ok.all(), f"gradient mismatch:\nanalytic {got[~ok]}\nnumeric  {want[~ok]}"
