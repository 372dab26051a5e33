import math

import numpy as np
import pytest
from helpers import assert_grads_match

from epistemic_gan import autodiff as ad
from epistemic_gan.dirichlet import dirichlet_total_variance
from epistemic_gan.losses import (
    EPS,
    NO_WEIGHTS,
    LossWeights,
    discriminator_loss,
    generator_loss,
    hinge_violation,
    mean_dirichlet_variance,
    mean_expected_width,
    standard_discriminator_loss,
    standard_gan_losses,
    standard_generator_loss,
)
from epistemic_gan.networks import GAN, BeliefPair, DirichletField, NetConfig


def beliefs(rng, n=6, lo=0.05, hi=0.95):
    return rng.uniform(lo, hi, n), rng.uniform(lo, hi, n)


def pair(a, b):
    return BeliefPair(a, b)


def away_from_kink(br, bf, gap=0.02):
    s = br + bf - 1.0
    bf = np.where(np.abs(s) < gap, bf + np.sign(s + 1e-12) * 2 * gap, bf)
    return br, bf


# --- finite differences, one term at a time -------------------------------------------------


def test_discriminator_adversarial_gradient():
    rng = np.random.default_rng(0)
    for _ in range(20):
        arrays = [*beliefs(rng), *beliefs(rng)]
        assert_grads_match(
            lambda rr, rf, fr, ff: discriminator_loss(pair(rr, rf), pair(fr, ff), NO_WEIGHTS).tensor, arrays
        )


def test_generator_adversarial_gradient():
    rng = np.random.default_rng(1)
    for _ in range(20):
        assert_grads_match(lambda r, f: generator_loss(pair(r, f), w=NO_WEIGHTS).tensor, list(beliefs(rng)))


def test_lambda_hinge_gradient():
    rng = np.random.default_rng(2)
    for _ in range(20):
        rr, rf = away_from_kink(*beliefs(rng, lo=0.2, hi=0.8))
        fr, ff = away_from_kink(*beliefs(rng, lo=0.2, hi=0.8))

        def penalty(rr, rf, fr, ff):
            return ad.mean(hinge_violation(pair(rr, rf))) + ad.mean(hinge_violation(pair(fr, ff)))

        assert_grads_match(penalty, [rr, rf, fr, ff])
        # and inside the full loss, with lambda = 1
        assert_grads_match(
            lambda a, b, c, d: discriminator_loss(pair(a, b), pair(c, d), LossWeights(1.0, 0, 0)).tensor,
            [rr, rf, fr, ff],
        )


def test_beta_variance_gradient():
    rng = np.random.default_rng(3)
    for scale in (0.05, 1.0, 20.0):
        alphas = rng.uniform(0.5, 2.0, size=(4, 3, 3)) * scale
        assert_grads_match(lambda a: mean_dirichlet_variance(DirichletField(a)), [alphas])


def test_gamma_width_gradient():
    rng = np.random.default_rng(4)
    for scale in (0.05, 1.0, 20.0):
        alphas = rng.uniform(0.5, 2.0, size=(4, 3, 3)) * scale
        assert_grads_match(lambda a: mean_expected_width(DirichletField(a)), [alphas])


def test_full_generator_loss_gradient():
    rng = np.random.default_rng(5)
    alphas = rng.uniform(0.3, 4.0, size=(6, 2, 3))
    r, f = beliefs(rng)
    w = LossWeights(1.0, 0.7, 1.3)
    assert_grads_match(lambda a, r, f: generator_loss(pair(r, f), DirichletField(a), None, w).tensor, [alphas, r, f])


def test_discriminator_loss_through_network_parameters():
    gan = GAN(NetConfig(data_dim=2, latent_dim=4, d_hidden=(5,), g_hidden=(5,), regions=2), seed=0)
    rng = np.random.default_rng(6)
    x_real, x_fake = rng.uniform(-1, 1, (8, 2)), rng.uniform(-1, 1, (8, 2))

    def loss():
        return discriminator_loss(gan.D(x_real), gan.D(x_fake), LossWeights(1.0, 0, 0)).tensor

    ad.backward(loss())
    h = 1e-4
    for p in gan.D.parameters():
        numeric = np.zeros_like(p.data)
        for idx in np.ndindex(p.shape):
            keep = p.data[idx]
            with ad.no_grad():
                p.data[idx] = keep + h
                up = loss().item()
                p.data[idx] = keep - h
                down = loss().item()
            p.data[idx] = keep
            numeric[idx] = (up - down) / (2 * h)
        np.testing.assert_allclose(p.grad, numeric, rtol=1e-4, atol=1e-6, err_msg=p.name)


# --- fused ops versus composed ops ----------------------------------------------------------------


def composed_variance(a):
    a0 = ad.sum_(a, axis=-1, keepdims=True)
    per = a * (a0 - a) / (ad.square(a0) * (a0 + 1.0))
    return ad.mean(ad.sum_(per, axis=-1))


def composed_width(a):
    a0 = ad.sum_(a, axis=-1)
    return ad.mean(a[:, :, 2] / a0)


@pytest.mark.parametrize("fused, composed", [(mean_dirichlet_variance, composed_variance),
                                             (mean_expected_width, composed_width)])
def test_fused_regularizers_match_composed_graph(fused, composed):
    rng = np.random.default_rng(7)
    alphas = rng.uniform(1e-3, 30.0, size=(16, 5, 3))
    t1 = ad.Tensor(alphas, requires_grad=True)
    t2 = ad.Tensor(alphas, requires_grad=True)
    v1, v2 = fused(DirichletField(t1)), composed(t2)
    assert v1.item() == pytest.approx(v2.item(), rel=1e-12)
    ad.backward(v1)
    ad.backward(v2)
    np.testing.assert_allclose(t1.grad, t2.grad, rtol=1e-9, atol=1e-15)


# --- scalar oracles --------------------------------------------------------------------------------


def test_variance_example_values():
    # 3 * (10 * 20) / (900 * 31)
    sharp = mean_dirichlet_variance(DirichletField(ad.Tensor(np.full((1, 1, 3), 10.0)))).item()
    assert sharp == pytest.approx(0.021505376344086, rel=1e-12)
    flat = mean_dirichlet_variance(DirichletField(ad.Tensor(np.ones((1, 1, 3))))).item()
    assert flat > sharp


def test_loss_values_match_scalar_recomputation():
    rng = np.random.default_rng(8)
    rr, rf = beliefs(rng)
    fr, ff = beliefs(rng)
    alphas = rng.uniform(0.2, 5.0, size=(6, 4, 3))
    w = LossWeights(0.5, 2.0, 1.5)

    adv_d = -(np.mean(np.log(rr) + np.log(1 - rf)) + np.mean(np.log(ff) + np.log(1 - fr)))
    pen = np.mean(np.maximum(0, rr + rf - 1)) + np.mean(np.maximum(0, fr + ff - 1))
    d = discriminator_loss(pair(ad.Tensor(rr), ad.Tensor(rf)), pair(ad.Tensor(fr), ad.Tensor(ff)), w)
    assert d.adversarial == pytest.approx(adv_d, rel=1e-12)
    assert d.constraint_penalty == pytest.approx(pen, rel=1e-12, abs=1e-15)
    assert d.total == pytest.approx(adv_d + 0.5 * pen, rel=1e-12)

    var = np.mean(dirichlet_total_variance(alphas))
    width = np.mean(alphas[..., 2] / alphas.sum(-1))
    adv_g = -np.mean(np.log(fr) + np.log(1 - ff))
    g = generator_loss(pair(ad.Tensor(fr), ad.Tensor(ff)), DirichletField(ad.Tensor(alphas)), None, w)
    assert g.adversarial == pytest.approx(adv_g, rel=1e-12)
    assert g.variance_term == pytest.approx(var, rel=1e-12)
    assert g.width_term == pytest.approx(width, rel=1e-12)
    assert g.total == pytest.approx(adv_g + 2.0 * var + 1.5 * width, rel=1e-12)
    assert g.weighted_sum() == pytest.approx(g.total, abs=1e-12)
    assert d.weighted_sum() == pytest.approx(d.total, abs=1e-12)


def test_standard_losses_scalar_oracle():
    p_real, p_fake = np.array([0.9, 0.6]), np.array([0.2, 0.4])
    real = pair(ad.Tensor(p_real), 1.0 - ad.Tensor(p_real))
    fake = pair(ad.Tensor(p_fake), 1.0 - ad.Tensor(p_fake))
    d, g = standard_gan_losses(real, fake)
    assert d.total == pytest.approx(-(np.mean(np.log(p_real)) + np.mean(np.log(1 - p_fake))), rel=1e-14)
    assert g.total == pytest.approx(-np.mean(np.log(p_fake)), rel=1e-14)


# --- reduction to the standard GAN ------------------------------------------------------------------


def test_zero_weights_recover_twice_standard_losses():
    rng = np.random.default_rng(9)
    for _ in range(50):
        pr = ad.Tensor(rng.uniform(0.01, 0.99, 32), requires_grad=True)
        pf = ad.Tensor(rng.uniform(0.01, 0.99, 32), requires_grad=True)
        real, fake = pair(pr, 1.0 - pr), pair(pf, 1.0 - pf)
        d_evid, d_std = discriminator_loss(real, fake, NO_WEIGHTS), standard_discriminator_loss(real, fake)
        g_evid, g_std = generator_loss(fake, w=NO_WEIGHTS), standard_generator_loss(fake)
        assert abs(d_evid.total - 2.0 * d_std.total) <= 1e-9
        assert abs(g_evid.total - 2.0 * g_std.total) <= 1e-9


def test_zero_weights_reduction_holds_with_dirichlet_field():
    rng = np.random.default_rng(10)
    pf = rng.uniform(0.01, 0.99, 16)
    fake = pair(ad.Tensor(pf), 1.0 - ad.Tensor(pf))
    fld = DirichletField(ad.Tensor(rng.uniform(0.1, 3.0, (16, 4, 3))))
    g = generator_loss(fake, fld, None, NO_WEIGHTS)
    assert abs(g.total - 2.0 * standard_generator_loss(fake).total) <= 1e-9


# --- sign checks and edge cases -------------------------------------------------------------------


def test_increasing_beta_never_decreases_generator_loss():
    rng = np.random.default_rng(11)
    fake = pair(ad.Tensor(rng.uniform(0.1, 0.9, 8)), ad.Tensor(rng.uniform(0.1, 0.9, 8)))
    fld = DirichletField(ad.Tensor(rng.uniform(0.1, 3.0, (8, 4, 3))))
    totals = [generator_loss(fake, fld, None, LossWeights(1.0, b, 1.0)).total for b in (0, 0.5, 1, 2, 10)]
    assert all(b >= a for a, b in zip(totals, totals[1:]))


def test_increasing_gamma_strictly_increases_generator_loss():
    rng = np.random.default_rng(12)
    fake = pair(ad.Tensor(rng.uniform(0.1, 0.9, 8)), ad.Tensor(rng.uniform(0.1, 0.9, 8)))
    fld = DirichletField(ad.Tensor(rng.uniform(0.1, 3.0, (8, 4, 3))))
    totals = [generator_loss(fake, fld, None, LossWeights(1.0, 1.0, g)).total for g in (0, 0.5, 1, 2)]
    assert all(b > a for a, b in zip(totals, totals[1:]))


def test_saturated_beliefs_stay_finite():
    ones, zeros = ad.Tensor(np.ones(4)), ad.Tensor(np.zeros(4))
    d = discriminator_loss(pair(zeros, ones), pair(ones, zeros))
    assert d.is_finite()
    assert d.adversarial == pytest.approx(-4 * math.log(EPS), rel=1e-9)
    assert generator_loss(pair(zeros, ones)).is_finite()


def test_regularizers_reported_zero_without_field():
    fake = pair(ad.Tensor([0.5]), ad.Tensor([0.5]))
    g = generator_loss(fake, None, None, LossWeights(1, 5, 5))
    assert (g.variance_term, g.width_term, g.constraint_penalty) == (0.0, 0.0, 0.0)
    assert math.isnan(g.sampled_width)


def test_weight_validation_and_empty_batch():
    with pytest.raises(ValueError):
        LossWeights(-1.0, 0, 0)
    with pytest.raises(ValueError):
        generator_loss(pair(ad.Tensor(np.zeros(0)), ad.Tensor(np.zeros(0))))
