import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from latent_translation.errors import NonFiniteInputError
from latent_translation.losses import (
    LossBreakdown,
    feature_l1_loss,
    feature_matching_loss,
    image_translation_objective,
    kl_unit_gaussian,
    lsgan_discriminator_loss,
    lsgan_generator_loss,
    reconstruction_loss,
    translation_objective,
    vaegan_objective,
)
from latent_translation.nets import build_model, default_archs

ARCHS = default_archs(base_channels=4, latent_channels=4)

small_tensors = st.integers(2, 5).flatmap(
    lambda n: st.lists(
        st.floats(-2, 2, allow_nan=False, width=32), min_size=n * n, max_size=n * n
    ).map(lambda v: torch.tensor(v, dtype=torch.float32).reshape(1, 1, int(len(v) ** 0.5), -1))
)


def _rand(shape, seed=0):
    return torch.rand(shape, generator=torch.Generator().manual_seed(seed)) * 2 - 1


# --- kl ---------------------------------------------------------------------


def test_kl_zero_mean():
    assert kl_unit_gaussian(torch.zeros(3, 4, 2, 2)).item() == 0.0


def test_kl_two_unit_elements():
    mu = torch.zeros(1, 2, 2, 2)
    mu[0, 0, 0, 0] = 1.0
    mu[0, 1, 1, 1] = 1.0
    assert kl_unit_gaussian(mu).item() == pytest.approx(1.0)


def test_kl_batch_mean():
    mu = torch.ones(4, 2, 1, 1)  # per-sample 0.5*2 = 1.0
    assert kl_unit_gaussian(mu).item() == pytest.approx(1.0)


def test_kl_rejects_non_finite():
    mu = torch.full((1, 1, 1, 1), float("nan"))
    with pytest.raises(NonFiniteInputError):
        kl_unit_gaussian(mu)


def test_kl_monte_carlo_oracle_quick():
    # E_q[log q - log p] estimated by sampling z ~ N(mu, I)
    gen = torch.Generator().manual_seed(42)
    mu = torch.randn(1, 4, 2, 2, generator=gen)
    n = 200_000
    eps = torch.randn((n,) + tuple(mu.shape[1:]), generator=gen)
    z = mu[0] + eps
    log_q_minus_log_p = 0.5 * (z**2).sum(dim=(1, 2, 3)) - 0.5 * (eps**2).sum(dim=(1, 2, 3))
    mc = log_q_minus_log_p.mean().item()
    closed = kl_unit_gaussian(mu).item()
    assert abs(mc - closed) / closed < 0.02


# --- reconstruction ---------------------------------------------------------


def test_recon_identical_zero():
    x = _rand((2, 3, 8, 8))
    assert reconstruction_loss(x, x).item() == 0.0


def test_recon_constant_offset():
    x = _rand((2, 3, 8, 8))
    assert reconstruction_loss(x, x + 0.5).item() == pytest.approx(0.5, rel=1e-6)


@given(seed=st.integers(0, 1000))
def test_recon_symmetric(seed):
    x, y = _rand((1, 2, 4, 4), seed), _rand((1, 2, 4, 4), seed + 1)
    assert reconstruction_loss(x, y).item() == pytest.approx(reconstruction_loss(y, x).item())


def test_recon_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        reconstruction_loss(torch.zeros(1, 3, 8, 8), torch.zeros(1, 3, 8, 16))


# --- lsgan ------------------------------------------------------------------


def test_lsgan_d_perfect():
    real = [torch.ones(1, 1, 4, 4)]
    fake = [torch.zeros(1, 1, 4, 4)]
    assert lsgan_discriminator_loss(real, fake).item() == 0.0


def test_lsgan_d_half():
    s = [torch.full((1, 1, 4, 4), 0.5)]
    assert lsgan_discriminator_loss(s, s).item() == pytest.approx(0.5)


def test_lsgan_d_worst_case():
    real = [torch.zeros(1, 1, 2, 2)]
    fake = [torch.ones(1, 1, 2, 2)]
    assert lsgan_discriminator_loss(real, fake).item() == pytest.approx(2.0)


def test_lsgan_g_examples():
    assert lsgan_generator_loss([torch.ones(1, 1, 3, 3)]).item() == 0.0
    assert lsgan_generator_loss([torch.zeros(1, 1, 3, 3)]).item() == pytest.approx(1.0)
    assert lsgan_generator_loss([torch.full((1, 1, 3, 3), 0.5)]).item() == pytest.approx(0.25)


def test_lsgan_multi_scale_mean():
    real = [torch.ones(1, 1, 4, 4), torch.zeros(1, 1, 2, 2)]
    fake = [torch.zeros(1, 1, 4, 4), torch.zeros(1, 1, 2, 2)]
    # scale 1 contributes 0, scale 2 contributes (0-1)^2 = 1 -> mean 0.5
    assert lsgan_discriminator_loss(real, fake).item() == pytest.approx(0.5)


# --- feature matching / feature l1 ------------------------------------------


def test_fm_identical_zero():
    feats = [_rand((1, 4, 4, 4), seed=i) for i in range(3)]
    assert feature_matching_loss(feats, [f.clone() for f in feats]).item() == 0.0


def test_fm_single_tap_offset():
    feats = [_rand((1, 4, 4, 4), seed=i) for i in range(3)]
    bumped = [feats[0] + 1.0, feats[1].clone(), feats[2].clone()]
    assert feature_matching_loss(feats, bumped).item() == pytest.approx(1.0, rel=1e-6)


def test_fm_additive_over_taps():
    feats = [_rand((1, 4, 4, 4), seed=i) for i in range(3)]
    bumped = [feats[0] + 1.0, feats[1] + 1.0, feats[2].clone()]
    assert feature_matching_loss(feats, bumped).item() == pytest.approx(2.0, rel=1e-6)


def test_fm_rejects_structure_mismatch():
    with pytest.raises(ValueError):
        feature_matching_loss([torch.zeros(1, 2, 2, 2)], [])
    with pytest.raises(ValueError):
        feature_matching_loss([torch.zeros(1, 2, 2, 2)], [torch.zeros(1, 2, 4, 4)])


def test_feat_l1_examples():
    z = _rand((2, 4, 2, 2))
    assert feature_l1_loss(z, z.clone()).item() == 0.0
    assert feature_l1_loss(z, z + 0.5).item() == pytest.approx(0.5, rel=1e-6)


@given(seed=st.integers(0, 500))
def test_feat_l1_triangle_inequality(seed):
    a, b, c = (_rand((1, 2, 2, 2), seed + i) for i in range(3))
    ab = feature_l1_loss(a, b).item()
    bc = feature_l1_loss(b, c).item()
    ac = feature_l1_loss(a, c).item()
    assert ac <= ab + bc + 1e-6


# --- composite objectives ---------------------------------------------------


@pytest.fixture(scope="module")
def vaegan_nets():
    e = build_model(ARCHS["encoder"], 1)
    g = build_model(ARCHS["decoder"], 2)
    d = build_model(ARCHS["image_discriminator"], 3)
    return e, g, d


def test_vaegan_objective_weighted_sum(vaegan_nets):
    e, g, d = vaegan_nets
    x = _rand((2, 3, 16, 16), seed=5)
    bd = vaegan_objective(x, e, g, d, noise_seed=9, lambda_fm=10.0)
    t = bd.term_floats()
    expected = t["kl"] + t["recon"] + t["gan_g"] + 10.0 * (t["fm_gan"] + t["fm_perc"])
    assert float(bd.total_g) == pytest.approx(expected, rel=1e-6)
    assert float(bd.total_d) == pytest.approx(t["gan_d"], rel=1e-6)
    assert bd.weights["lambda_fm"] == 10.0


def test_vaegan_objective_weighted_sum_arithmetic():
    # frozen arithmetic example: kl/recon/gan_g/fm -> 0.2+0.1+0.25+10*0.3
    terms = {"kl": 0.2, "recon": 0.1, "gan_g": 0.25, "fm": 0.3}
    total = terms["kl"] + terms["recon"] + terms["gan_g"] + 10.0 * terms["fm"]
    assert total == pytest.approx(3.55)


def test_vaegan_objective_deterministic_given_seed(vaegan_nets):
    e, g, d = vaegan_nets
    x = _rand((2, 3, 16, 16), seed=5)
    a = vaegan_objective(x, e, g, d, noise_seed=4)
    b = vaegan_objective(x, e, g, d, noise_seed=4)
    assert float(a.total_g) == float(b.total_g)


@pytest.fixture(scope="module")
def translation_nets():
    e1 = build_model(ARCHS["encoder"], 11)
    e2 = build_model(ARCHS["encoder"], 12)
    g2 = build_model(ARCHS["decoder"], 13)
    t = build_model(ARCHS["translator"], 14)
    d_img = build_model(ARCHS["image_discriminator"], 15)
    d_lat = build_model(ARCHS["translation_discriminator"], 16)
    return e1, e2, g2, t, d_img, d_lat


def test_translation_objective_full(translation_nets):
    e1, e2, g2, t, d_img, _ = translation_nets
    p1, p2 = _rand((2, 3, 16, 16), 21), _rand((2, 3, 16, 16), 22)
    bd = translation_objective(p1, p2, e1, e2, g2, t, d_img, mode="full")
    f = bd.term_floats()
    expected = f["adv"] + 60.0 * f["feat_l1"] + 10.0 * (f["fm_gan"] + f["fm_perc"])
    assert float(bd.total_g) == pytest.approx(expected, rel=1e-6)
    assert bd.weights == {"lambda_f": 60.0, "lambda_fm": 10.0}


def test_translation_objective_arithmetic_example():
    # full-mode weighted sum: adv 0.5 + 60*0.1 + 10*0.2 = 8.5
    assert 0.5 + 60.0 * 0.1 + 10.0 * 0.2 == pytest.approx(8.5)


def test_translation_objective_l1_only(translation_nets):
    e1, e2, g2, t, _, _ = translation_nets
    p1, p2 = _rand((2, 3, 16, 16), 21), _rand((2, 3, 16, 16), 22)
    bd = translation_objective(p1, p2, e1, e2, g2, t, None, mode="l1_only")
    assert bd.total_d is None
    assert set(bd.terms) == {"feat_l1"}
    assert float(bd.total_g) == pytest.approx(60.0 * float(bd.terms["feat_l1"]), rel=1e-6)


def test_translation_objective_l1_only_identity_translator(translation_nets):
    # with the identity-initialized translator, feat term == feature_l1(E1(p1), E2(p2))
    from latent_translation.nets import encode

    e1, e2, g2, t, _, _ = translation_nets
    p1, p2 = _rand((2, 3, 16, 16), 31), _rand((2, 3, 16, 16), 32)
    bd = translation_objective(p1, p2, e1, e2, g2, t, None, mode="l1_only")
    direct = feature_l1_loss(encode(e1, p1), encode(e2, p2))
    assert float(bd.terms["feat_l1"]) == pytest.approx(float(direct))


def test_translation_objective_feat_adv(translation_nets):
    e1, e2, g2, t, _, d_lat = translation_nets
    p1, p2 = _rand((2, 3, 16, 16), 41), _rand((2, 3, 16, 16), 42)
    bd = translation_objective(p1, p2, e1, e2, g2, t, d_lat, mode="feat_adv")
    f = bd.term_floats()
    assert float(bd.total_g) == pytest.approx(f["adv"] + 60.0 * f["feat_l1"], rel=1e-6)
    assert "fm_gan" not in f


def test_translation_objective_rejects_unknown_mode(translation_nets):
    e1, e2, g2, t, d_img, _ = translation_nets
    p = _rand((1, 3, 16, 16))
    with pytest.raises(ValueError):
        translation_objective(p, p, e1, e2, g2, t, d_img, mode="bogus")
    with pytest.raises(ValueError):
        translation_objective(p, p, e1, e2, g2, t, None, mode="full")


def test_image_translation_objective_consistency(vaegan_nets):
    e, g, d = vaegan_nets
    p1, p2 = _rand((2, 3, 16, 16), 51), _rand((2, 3, 16, 16), 52)
    bd = image_translation_objective(p1, p2, e, g, d, lambda_fm=10.0)
    f = bd.term_floats()
    expected = f["gan_g"] + f["recon"] + 10.0 * (f["fm_gan"] + f["fm_perc"])
    assert float(bd.total_g) == pytest.approx(expected, rel=1e-6)


def test_losses_non_negative(vaegan_nets):
    e, g, d = vaegan_nets
    for seed in range(5):
        x = _rand((2, 3, 16, 16), seed)
        bd = vaegan_objective(x, e, g, d, noise_seed=seed)
        for name, v in bd.term_floats().items():
            assert v >= 0.0, name
