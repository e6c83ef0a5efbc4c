"""
Tests for src.lddgan.autoencoder — shapes, KL penalty, training step, checkpoints.

Acceptance criteria verified:
  * encode honours (H/f, W/f, c) for f in {2, 4, 8}; H not divisible by f → config error
  * decode(encode(X)) keeps the shape of X and stays in [-1, 1]; a latent whose
    side is not image_size / f is a shape error
  * KL closed forms; KL disabled → breakdown.kl == 0 exactly
  * Non-finite loss → NonFiniteError plus a diagnostic bundle
  * KL study records AE and GAN-phase columns (Fréchet, precision, recall)
  * (slow) trained toy-image reconstruction MSE < 0.01
  * (slow) no-KL reaches the MSE target in <= the epochs of the KL autoencoder
"""
from __future__ import annotations

import math
from pathlib import Path

import pytest
import torch

from src.lddgan._errors import ConfigError, NonFiniteError, ShapeError
from src.lddgan.autoencoder import (
    AEOptState,
    Autoencoder,
    ae_train_step,
    decode,
    encode,
    encode_dataset,
    encode_with_moments,
    kl_penalty,
    load_ae_checkpoint,
    run_ae_training,
    save_ae_checkpoint,
)
from src.lddgan.autoencoder.model import reconstruction_l1
from src.lddgan.autoencoder.training import DIAGNOSTIC_NAME, fit_latent_scale
from src.lddgan.config import AutoencoderConfig, load_run_config, with_overrides
from src.lddgan.core import RngStream, seeded
from src.lddgan.data import generate_toy_images
from tests.conftest import tiny_grid_config

ROOT = Path(__file__).parent.parent


def _ae(**overrides) -> Autoencoder:
    cfg = AutoencoderConfig(base_channels=8, **overrides)
    with seeded(RngStream(0)):
        return Autoencoder(cfg)


# ─────────────────────────── shapes ─────────────────────────────────────────


class TestShapes:
    @pytest.mark.parametrize(
        "f, channels, expected",
        [(2, 4, (4, 16, 16)), (4, 4, (4, 8, 8)), (8, 3, (3, 4, 4))],
    )
    def test_latent_shape(self, f, channels, expected):
        ae = _ae(f=f, latent_channels=channels)
        z = encode(torch.randn(2, 1, 32, 32), ae)
        assert tuple(z.shape[1:]) == expected
        assert ae.latent_shape(32, 32) == expected

    def test_indivisible_size_is_config_error(self):
        with pytest.raises(ConfigError):
            encode(torch.randn(1, 1, 30, 30), _ae(f=4))

    def test_wrong_channel_count(self):
        with pytest.raises(ShapeError):
            encode(torch.randn(1, 3, 16, 16), _ae())
        with pytest.raises(ShapeError):
            decode(torch.randn(1, 2, 8, 8), _ae())

    def test_decode_checks_spatial_size(self):
        ae = _ae()
        assert decode(torch.randn(1, 4, 8, 8), ae, image_size=16).shape == (1, 1, 16, 16)
        with pytest.raises(ShapeError, match="16x16"):
            decode(torch.randn(1, 4, 6, 6), ae, image_size=16)
        with pytest.raises(ShapeError):
            decode(torch.randn(1, 4, 8, 4), ae, image_size=16)

    def test_roundtrip_shape_and_range(self):
        ae = _ae()
        x = generate_toy_images(4, size=16)
        y = decode(encode(x, ae), ae)
        assert y.shape == x.shape
        assert float(y.abs().max()) <= 1.0

    def test_kl_encoder_emits_moments(self):
        ae = _ae(use_kl_penalty=True)
        x = torch.randn(2, 1, 16, 16)
        out = encode_with_moments(x, ae, RngStream(0))
        assert out.logvar is not None and out.mu.shape == (2, 4, 8, 8)
        assert not torch.equal(out.latent, out.mu)
        assert torch.equal(encode(x, ae), out.mu)


# ─────────────────────────── losses ─────────────────────────────────────────


class TestKlPenalty:
    def test_standard_normal_is_zero(self):
        assert float(kl_penalty(torch.zeros(3), torch.zeros(3))) == 0.0

    def test_unit_mean(self):
        assert float(kl_penalty(torch.ones(3), torch.zeros(3))) == pytest.approx(0.5)

    def test_doubled_variance(self):
        lv = torch.full((2,), math.log(2.0), dtype=torch.float64)
        value = kl_penalty(torch.zeros(2, dtype=torch.float64), lv)
        assert float(value) == pytest.approx(0.5 * (2 - 1 - math.log(2)), abs=1e-12)
        assert float(value) == pytest.approx(0.1534, abs=1e-4)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            kl_penalty(torch.zeros(2), torch.zeros(3))

    def test_perfect_reconstruction_has_zero_l1(self):
        x = torch.randn(2, 1, 4, 4)
        assert float(reconstruction_l1(x, x.clone())) == 0.0


# ─────────────────────────── training step ──────────────────────────────────


class TestTrainStep:
    def test_kl_disabled_is_exactly_zero(self):
        ae = _ae()
        opt = AEOptState.create(ae, ae.cfg)
        _, losses = ae_train_step(generate_toy_images(4, 16), ae, opt, ae.cfg, RngStream(0))
        assert losses.kl == 0.0
        assert math.isfinite(losses.total)

    def test_kl_and_patch_terms(self):
        ae = _ae(use_kl_penalty=True, use_patch_adversarial=True)
        opt = AEOptState.create(ae, ae.cfg)
        opt, losses = ae_train_step(generate_toy_images(4, 16), ae, opt, ae.cfg, RngStream(0))
        assert losses.kl >= 0.0
        assert losses.patch_d > 0.0
        assert opt.patch is not None and opt.patch.step == 1

    def test_step_updates_parameters(self):
        ae = _ae()
        before = ae.encoder.net[0].weight.detach().clone()
        opt = AEOptState.create(ae, ae.cfg)
        ae_train_step(generate_toy_images(4, 16), ae, opt, ae.cfg, RngStream(0))
        assert not torch.equal(before, ae.encoder.net[0].weight)

    def test_loss_decreases(self):
        ae = _ae(lr=1e-3)
        opt = AEOptState.create(ae, ae.cfg)
        images = generate_toy_images(8, 16, seed=3)
        stream = RngStream(0)
        history = []
        for _ in range(60):
            opt, losses = ae_train_step(images, ae, opt, ae.cfg, stream)
            history.append(losses.l1)
        assert sum(history[-10:]) < sum(history[:10])

    def test_non_finite_writes_diagnostic(self, tmp_path):
        ae = _ae()
        opt = AEOptState.create(ae, ae.cfg)
        batch = generate_toy_images(2, 16)
        batch[0, 0, 0, 0] = float("nan")
        with pytest.raises(NonFiniteError):
            ae_train_step(batch, ae, opt, ae.cfg, RngStream(0), diagnostic_dir=tmp_path)
        assert (tmp_path / DIAGNOSTIC_NAME).exists()


# ─────────────────────────── latent scale and checkpoints ───────────────────


class TestScaleAndCheckpoint:
    def test_latent_scale_gives_unit_std(self):
        ae = _ae()
        images = generate_toy_images(16, 16)
        scale = fit_latent_scale(images, ae)
        assert float(ae.latent_scale) == pytest.approx(scale)
        assert float(encode_dataset(images, ae).std()) == pytest.approx(1.0, rel=1e-4)

    def test_checkpoint_roundtrip(self, tmp_path):
        ae = _ae()
        images = generate_toy_images(4, 16)
        fit_latent_scale(images, ae)
        path = save_ae_checkpoint(ae, tmp_path / "ae.lddg")
        loaded = load_ae_checkpoint(path, ae.cfg)
        assert torch.equal(loaded.latent_scale, ae.latent_scale)
        assert torch.equal(encode(images, loaded), encode(images, ae))

    def test_checkpoint_from_other_config(self, tmp_path):
        path = save_ae_checkpoint(_ae(), tmp_path / "ae.lddg")
        with pytest.raises(ShapeError, match="ae\\."):
            load_ae_checkpoint(path, AutoencoderConfig(base_channels=16))


class TestRunAeTraining:
    def test_small_run(self, grid_cfg):
        result = run_ae_training(grid_cfg)
        assert len(result.history) == grid_cfg.autoencoder.num_epochs
        assert result.steps == 2 * math.ceil(8 / grid_cfg.autoencoder.batch_size)
        assert result.latent_scale > 0

    def test_same_seed_same_weights(self, grid_cfg):
        a = run_ae_training(grid_cfg, seed=4).ae
        b = run_ae_training(grid_cfg, seed=4).ae
        for (name, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert torch.equal(pa, pb), name


class TestKlStudy:
    @pytest.fixture
    def study_cfg(self, tmp_path):
        return with_overrides(
            tiny_grid_config(tmp_path / "base"),
            dataset={"count": 72},
            autoencoder={"num_epochs": 1},
        )

    def test_gan_phase_metrics(self, study_cfg, tmp_path):
        from src.lddgan.eval.ablations import KL_ARMS, run_kl_ablation

        out = tmp_path / "ablate"
        runs, summary = run_kl_ablation(study_cfg, out, seeds=(1,), gan_epochs=1)
        metrics = ["epochs_to_target", "final_mse", "frechet", "precision", "recall"]
        assert list(runs.columns) == ["arm", "seed", *metrics]
        assert list(summary.columns) == ["arm", *metrics]
        assert runs["arm"].tolist() == KL_ARMS
        assert (runs["frechet"] >= 0).all()
        assert runs["precision"].between(0, 1).all() and runs["recall"].between(0, 1).all()
        for arm in KL_ARMS:
            assert (out / arm / "seed1" / "checkpoint_final.lddg").is_file()
        assert (out / "kl_ablation.tex").is_file()

    def test_autoencoder_only(self, study_cfg, tmp_path):
        from src.lddgan.eval.ablations import run_kl_ablation

        runs, _ = run_kl_ablation(study_cfg, tmp_path / "ablate", seeds=(1,), train_gan=False)
        assert list(runs.columns) == ["arm", "seed", "epochs_to_target", "final_mse"]
        assert not (tmp_path / "ablate" / "kl").exists()


# ─────────────────────────── end-to-end (slow) ──────────────────────────────


@pytest.mark.slow
class TestAutoencoderTargets:
    def test_toy_reconstruction_target(self):
        cfg = load_run_config(ROOT / "configs" / "toy_images.toml")
        result = run_ae_training(cfg, seed=1)
        assert result.history[-1] < 0.01

    def test_l1_trend_over_2000_steps(self):
        ae = _ae(lr=1e-3)
        opt = AEOptState.create(ae, ae.cfg)
        images = generate_toy_images(8, 16, seed=5)
        stream = RngStream(0)
        history = []
        for _ in range(2000):
            opt, losses = ae_train_step(images, ae, opt, ae.cfg, stream)
            history.append(losses.l1)

        def avg(end: int) -> float:
            return sum(history[end - 50 : end]) / 50

        assert avg(50) > avg(500) > avg(2000)

    def test_kl_ablation_direction(self, tmp_path):
        from src.lddgan.eval.ablations import run_kl_ablation

        cfg = load_run_config(ROOT / "configs" / "toy_images.toml")
        _, summary = run_kl_ablation(cfg, tmp_path, train_gan=False)
        medians = summary.set_index("arm")["epochs_to_target"]
        assert medians["no_kl"] <= medians["kl"]
