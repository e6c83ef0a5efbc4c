"""
Tests for src.lddgan.gan — adaptive group norm, generator, discriminator.

Acceptance criteria verified:
  * AdaGN closed forms (constant input → 0, shift passthrough) and per-group statistics
  * G keeps the latent shape, is deterministic, and responds to z
  * D emits one logit per pair; duplicate batches give a zero minibatch-std channel
  * Gradient suite: full G forward + adversarial loss and D w.r.t. x_prev pass
    finite-difference checks at float64, rel. error < 1e-4
  * Over ten seeds each: kl_penalty, rec_loss, AdaGN, R1, AE encode / decode,
    and the generator loss w.r.t. every generator parameter
"""
from __future__ import annotations

import pytest
import torch
import torch.nn as nn
from structlog.testing import capture_logs

from src.lddgan._errors import ConfigError, ShapeError
from src.lddgan.autoencoder import Autoencoder, decode, encode, kl_penalty
from src.lddgan.config import AutoencoderConfig, DiscriminatorConfig, GeneratorConfig
from src.lddgan.core import RngStream, gradient_check, seeded
from src.lddgan.diffusion import build_schedule, posterior_sample
from src.lddgan.gan import (
    AdaptiveGroupNorm,
    GridDiscriminator,
    GridGenerator,
    VectorDiscriminator,
    VectorGenerator,
    adaptive_group_norm,
    build_discriminator,
    build_generator,
    discriminator_forward,
    generator_forward,
    minibatch_std,
)
from src.lddgan.objectives import d_loss, g_adv_loss, g_total_loss, r1_penalty, rec_loss

GRID_G = GeneratorConfig(
    mode="grid",
    in_channels=4,
    base_channels=8,
    channel_multipliers=[1, 2],
    num_res_blocks=1,
    z_dim=4,
    z_mapping_layers=1,
    z_embed_dim=16,
    time_embed_dim=8,
)
GRID_D = DiscriminatorConfig(mode="grid", in_channels=4, channels=[8, 16], time_embed_dim=8)
VEC_G = GeneratorConfig(
    mode="vector",
    data_dim=2,
    z_dim=4,
    z_mapping_layers=1,
    z_embed_dim=16,
    time_embed_dim=8,
    hidden_dim=16,
    num_layers=2,
)
VEC_D = DiscriminatorConfig(
    mode="vector", data_dim=2, time_embed_dim=8, hidden_dim=16, num_layers=2
)


def _build(factory, cfg, seed: int = 0):
    with seeded(RngStream(seed)):
        return factory(cfg)


def _zero_head(z_dim: int, channels: int, shift: float = 0.0) -> nn.Linear:
    head = nn.Linear(z_dim, 2 * channels)
    nn.init.zeros_(head.weight)
    with torch.no_grad():
        head.bias.zero_()
        head.bias[channels:] = shift
    return head


# ─────────────────────────── adaptive group norm ────────────────────────────


class TestAdaptiveGroupNorm:
    def test_constant_input_gives_zero(self):
        h = torch.full((2, 8, 4, 4), 3.0)
        out = adaptive_group_norm(h, torch.randn(2, 5), _zero_head(5, 8), groups=8)
        assert torch.equal(out, torch.zeros_like(out))

    def test_shift_passthrough(self):
        h = torch.randn(2, 8, 4, 4)
        plain = adaptive_group_norm(h, torch.randn(2, 5), _zero_head(5, 8), groups=4)
        shifted = adaptive_group_norm(h, torch.randn(2, 5), _zero_head(5, 8, 1.5), groups=4)
        assert torch.allclose(shifted, plain + 1.5, atol=1e-6)

    def test_group_statistics(self, float64):
        h = torch.randn(4, 16, 5, 5) * 3.0 + 2.0
        out = adaptive_group_norm(h, torch.randn(4, 5), _zero_head(5, 16), groups=8)
        grouped = out.reshape(4, 8, -1)
        assert float(grouped.mean(dim=2).abs().max()) < 1e-5
        assert float((grouped.var(dim=2, unbiased=False) - 1).abs().max()) < 1e-3

    def test_indivisible_channels(self):
        with pytest.raises(ConfigError):
            AdaptiveGroupNorm(12, 4)
        with pytest.raises(ConfigError):
            adaptive_group_norm(torch.randn(1, 6, 2, 2), torch.randn(1, 3), _zero_head(3, 6), 4)

    def test_module_applies_to_vectors(self):
        norm = AdaptiveGroupNorm(16, 4)
        assert norm(torch.randn(3, 16), torch.randn(3, 4)).shape == (3, 16)


# ─────────────────────────── generator ──────────────────────────────────────


class TestGenerator:
    def test_grid_shape_contract(self):
        g = _build(GridGenerator, GRID_G)
        x = torch.randn(2, 4, 16, 16)
        assert generator_forward(x, torch.randn(2, 4), 3, g).shape == x.shape

    def test_vector_shape_contract(self):
        g = _build(VectorGenerator, VEC_G)
        x = torch.randn(5, 2)
        assert g(x, torch.randn(5, 4), torch.tensor([1, 2, 3, 4, 1])).shape == (5, 2)

    def test_deterministic(self):
        g = _build(GridGenerator, GRID_G)
        x, z = torch.randn(2, 4, 8, 8), torch.randn(2, 4)
        assert torch.equal(g(x, z, 2), g(x, z, 2))

    def test_responds_to_z(self):
        g = _build(GridGenerator, GRID_G)
        x = torch.randn(2, 4, 8, 8)
        a, b = g(x, torch.randn(2, 4), 2), g(x, torch.randn(2, 4), 2)
        assert float((a - b).norm()) > 0

    def test_same_seed_same_init(self):
        a, b = _build(VectorGenerator, VEC_G, 3), _build(VectorGenerator, VEC_G, 3)
        assert all(torch.equal(p, q) for p, q in zip(a.parameters(), b.parameters()))

    def test_shape_errors(self):
        g = _build(GridGenerator, GRID_G)
        with pytest.raises(ShapeError):
            g(torch.randn(2, 4, 8, 8), torch.randn(3, 4), 1)
        with pytest.raises(ShapeError):
            g(torch.randn(2, 4, 5, 5), torch.randn(2, 4), 1)
        with pytest.raises(ShapeError):
            g(torch.randn(2, 3, 8, 8), torch.randn(2, 4), 1)

    def test_attention_request_is_logged(self):
        cfg = GRID_G.model_copy(update={"attention_resolutions": [8]})
        with capture_logs() as logs:
            GridGenerator(cfg)
        assert any(e["event"] == "generator.attention_ignored" for e in logs)

    def test_build_dispatches_on_mode(self):
        assert isinstance(build_generator(VEC_G), VectorGenerator)
        assert isinstance(build_generator(GRID_G), GridGenerator)


# ─────────────────────────── discriminator ──────────────────────────────────


class TestDiscriminator:
    def test_one_logit_per_pair(self):
        d = _build(GridDiscriminator, GRID_D)
        x = torch.randn(3, 4, 8, 8)
        assert discriminator_forward(x, x, 2, d).shape == (3,)
        v = _build(VectorDiscriminator, VEC_D)
        assert v(torch.randn(6, 2), torch.randn(6, 2), 1).shape == (6,)

    def test_pair_mismatch(self):
        d = _build(VectorDiscriminator, VEC_D)
        with pytest.raises(ShapeError):
            d(torch.randn(2, 2), torch.randn(3, 2), 1)

    def test_permutation_equivariance(self):
        d = _build(VectorDiscriminator, VEC_D)
        xp, xt = torch.randn(6, 2), torch.randn(6, 2)
        t = torch.tensor([1, 2, 3, 4, 1, 2])
        perm = torch.tensor([5, 3, 1, 0, 2, 4])
        assert torch.allclose(d(xp, xt, t)[perm], d(xp[perm], xt[perm], t[perm]), atol=1e-5)

    def test_build_dispatches_on_mode(self):
        assert isinstance(build_discriminator(VEC_D), VectorDiscriminator)
        assert isinstance(build_discriminator(GRID_D), GridDiscriminator)


class TestMinibatchStd:
    def test_duplicates_give_zero(self):
        h = (torch.arange(48.0) / 4).reshape(1, 3, 4, 4).expand(4, 3, 4, 4).clone()
        out = minibatch_std(h)
        assert out.shape == (4, 4, 4, 4)
        assert torch.equal(out[:, -1], torch.zeros(4, 4, 4))

    def test_spread_gives_positive_value(self):
        out = minibatch_std(torch.randn(8, 16))
        assert out.shape == (8, 17)
        assert float(out[0, -1]) > 0


# ─────────────────────────── gradient suite ─────────────────────────────────


class TestGradients:
    def test_generator_with_adversarial_loss(self, float64):
        g = _build(VectorGenerator, VEC_G)
        d = _build(VectorDiscriminator, VEC_D)
        sched = build_schedule(T=4)
        s = RngStream(1)
        x_t, z = s.gaussian((4, 2), torch.float64), s.gaussian((4, 4), torch.float64)
        noise = s.gaussian((4, 2), torch.float64)
        t = torch.tensor([1, 2, 3, 4])

        def loss(x_t, z):
            fake_prev = posterior_sample(g(x_t, z, t), x_t, t, noise, sched)
            return g_adv_loss(d(fake_prev, x_t, t))

        assert gradient_check(loss, [x_t, z]).max_rel_error < 1e-4

    def test_grid_generator_parameters(self, float64):
        g = _build(GridGenerator, GRID_G)
        x_t, z = torch.randn(2, 4, 4, 4), torch.randn(2, 4)
        weight = g.conv_out.weight.detach().clone()

        def loss(w):
            out = torch.func.functional_call(g, {"conv_out.weight": w}, (x_t, z, 2))
            return (out**2).mean()

        assert gradient_check(loss, [weight], elements=20).passed

    def test_discriminator_wrt_x_prev(self, float64):
        d = _build(GridDiscriminator, GRID_D)
        s = RngStream(2)
        x_prev = s.gaussian((3, 4, 4, 4), torch.float64)
        x_t = s.gaussian((3, 4, 4, 4), torch.float64)
        real = d(x_prev, x_t, 1).detach()

        def loss(xp):
            return d_loss(real, d(xp, x_t, 1))

        assert gradient_check(loss, [x_prev], elements=24).passed


SEEDS = range(10)
GRAD_G = VEC_G.model_copy(update={"hidden_dim": 32, "num_layers": 1})
GRAD_AE = AutoencoderConfig(f=2, latent_channels=4, base_channels=8)


class TestPrimitiveGradients:
    """Each primitive against central differences at float64 over ten seeded inputs."""

    @pytest.mark.parametrize("seed", SEEDS)
    def test_kl_penalty(self, float64, seed):
        s = RngStream(seed)
        mu, logvar = s.gaussian((3, 4, 2, 2)), s.gaussian((3, 4, 2, 2))
        assert gradient_check(kl_penalty, [mu, logvar]).passed

    @pytest.mark.parametrize("seed", SEEDS)
    @pytest.mark.parametrize("norm", ["l1", "l2"])
    def test_rec_loss(self, float64, seed, norm):
        s = RngStream(seed)
        x0, pred = s.gaussian((4, 3)), s.gaussian((4, 3))
        report = gradient_check(lambda a, b: rec_loss(a, b, norm), [x0, pred])
        assert report.passed

    @pytest.mark.parametrize("seed", SEEDS)
    def test_adaptive_group_norm(self, float64, seed):
        s = RngStream(seed)
        with seeded(s.derive("head")):
            head = nn.Linear(5, 16)
        h, z_embed = s.gaussian((2, 8, 3, 3)), s.gaussian((2, 5))

        def fn(h, z_embed):
            out = adaptive_group_norm(h, z_embed, head, groups=4)
            return (out * torch.linspace(-1.0, 1.0, out.numel()).reshape(out.shape)).sum()

        assert gradient_check(fn, [h, z_embed], elements=24, stream=s).passed

    @pytest.mark.parametrize("seed", SEEDS)
    def test_r1_penalty(self, float64, seed):
        s = RngStream(seed)
        x_prev, x_t = s.gaussian((4, 3)), s.gaussian((4, 3))
        weight = s.gaussian((6, 5)) * 0.5
        t = torch.tensor([1, 2, 3, 4])

        def fn(w):
            def disc(a, b, t):
                return torch.tanh(torch.cat([a, b], dim=1) @ w).sum(dim=1) * t

            with torch.enable_grad():
                return r1_penalty(disc, x_prev, x_t, t, gamma=0.5)

        assert gradient_check(fn, [weight]).passed

    @pytest.mark.parametrize("seed", SEEDS)
    def test_autoencoder_encode(self, float64, seed):
        with seeded(RngStream(seed)):
            ae = Autoencoder(GRAD_AE)
        s = RngStream(seed).derive("inputs")
        images = s.gaussian((2, 1, 8, 8)) * 0.5

        def fn(x):
            return (encode(x, ae) ** 2).mean()

        assert gradient_check(fn, [images], elements=16, stream=s).passed

    @pytest.mark.parametrize("seed", SEEDS)
    def test_autoencoder_decode(self, float64, seed):
        with seeded(RngStream(seed)):
            ae = Autoencoder(GRAD_AE)
        s = RngStream(seed).derive("inputs")
        latent = s.gaussian((2, 4, 4, 4))
        target = s.uniform((2, 1, 8, 8)) * 2.0 - 1.0

        def fn(z):
            return ((decode(z, ae, image_size=8) - target) ** 2).mean()

        assert gradient_check(fn, [latent], elements=16, stream=s).passed

    @pytest.mark.parametrize("seed", SEEDS)
    def test_generator_loss_every_parameter(self, float64, seed):
        g = _build(VectorGenerator, GRAD_G, seed)
        d = _build(VectorDiscriminator, VEC_D, seed + 100)
        sched = build_schedule(T=4)
        s = RngStream(seed).derive("inputs")
        x0, x_t = s.gaussian((4, 2)), s.gaussian((4, 2))
        z, noise = s.gaussian((4, 4)), s.gaussian((4, 2))
        t = torch.tensor([1, 2, 3, 4])

        def loss_with(name):
            def fn(w):
                x0_pred = torch.func.functional_call(g, {name: w}, (x_t, z, t))
                fake_prev = posterior_sample(x0_pred, x_t, t, noise, sched)
                g_adv = g_adv_loss(d(fake_prev, x_t, t))
                return g_total_loss(g_adv, rec_loss(x0, x0_pred, "l1"), 0.7)

            return fn

        names = [name for name, _ in g.named_parameters()]
        assert names
        for name, param in g.named_parameters():
            report = gradient_check(
                loss_with(name), [param.detach().clone()], elements=6, stream=s.derive(name)
            )
            assert report.passed, (name, report.max_rel_error)
