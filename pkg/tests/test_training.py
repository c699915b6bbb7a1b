"""Tests for the training objectives and the optimization loop."""

import math

import pandas as pd
import pytest
import torch

from core.config import ConfigurationError
from diffusion.corruption import NoiseLevel
from diffusion.model import ModelConfig, TinyTransformer
from diffusion.training import (
    TrainConfig,
    batch_schedule,
    combined_loss,
    epoch_summary,
    evaluate,
    loss_ar,
    loss_mdm,
    lr_at,
    train,
)


@pytest.fixture
def batch(examples):
    return list(examples[:6])


def fixed_randomness(n: int, k: int = 8):
    return [NoiseLevel(k, 16)] * n, list(range(100, 100 + n))


class TestTrainConfig:
    """Tests for TrainConfig."""

    def test_defaults(self):
        config = TrainConfig()
        assert config.lr_start == 1e-3
        assert config.lr_end == 0.0
        assert config.weight_decay == 0.01
        assert config.pad_to_block and config.block_len == 32
        assert config.K == 16

    def test_effective_lambda(self):
        assert TrainConfig(lam=0.3).effective_lambda == 0.3
        assert TrainConfig(lam=0.3, regime="ar").effective_lambda == 1.0

    @pytest.mark.parametrize("kwargs", [
        {"regime": "gpt"},
        {"epochs": 0},
        {"lr_start": 0.01, "lr_end": 0.02},
        {"lam": -1.0},
        {"weight_decay": -0.1},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            TrainConfig(**kwargs)


class TestSchedule:
    """Tests for lr_at and batch_schedule."""

    def test_cosine_endpoints(self):
        config = TrainConfig(lr_start=0.03, lr_end=0.001)
        assert lr_at(0, 11, config) == pytest.approx(0.03)
        assert lr_at(10, 11, config) == pytest.approx(0.001)
        assert lr_at(5, 11, config) == pytest.approx((0.03 + 0.001) / 2)

    def test_monotone(self):
        config = TrainConfig()
        rates = [lr_at(s, 50, config) for s in range(50)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))

    def test_stream_is_regime_independent(self):
        a = batch_schedule(37, TrainConfig(regime="diffusion", batch_size=5, epochs=3))
        b = batch_schedule(37, TrainConfig(regime="ar", batch_size=5, epochs=3))
        assert a == b

    def test_every_example_once_per_epoch(self):
        schedule = batch_schedule(37, TrainConfig(batch_size=5, epochs=2))
        for epoch in range(2):
            seen = sorted(i for e, idx in schedule if e == epoch for i in idx)
            assert seen == list(range(37))


class TestLosses:
    """Tests for loss_mdm, loss_ar and combined_loss."""

    def test_full_mask_scores_every_action_token(self, tiny_model, vocab, batch):
        levels = [NoiseLevel(16, 16)] * len(batch)
        loss, n = loss_mdm(tiny_model, batch, vocab, levels, list(range(len(batch))))
        assert n == sum(e.pad_to_blocks(32).layout.loss_len for e in batch)
        assert loss.dim() == 0 and math.isfinite(loss.item())

    def test_full_mask_without_fill(self, tiny_model, vocab, batch):
        levels = [NoiseLevel(16, 16)] * len(batch)
        loss, n = loss_mdm(tiny_model, batch, vocab, levels, list(range(len(batch))), pad_to_block=False)
        assert n == sum(e.layout.loss_len for e in batch)
        assert loss.dim() == 0 and math.isfinite(loss.item())

    def test_ar_scores_every_action_token(self, tiny_model, vocab, batch):
        _, n = loss_ar(tiny_model, batch, vocab)
        assert n == sum(e.layout.loss_len for e in batch)

    def test_mdm_deterministic_given_seeds(self, tiny_model, vocab, batch):
        levels, seeds = fixed_randomness(len(batch))
        a, _ = loss_mdm(tiny_model, batch, vocab, levels, seeds)
        b, _ = loss_mdm(tiny_model, batch, vocab, levels, seeds)
        assert a.item() == b.item()

    def test_naive_mask_changes_loss(self, tiny_model, vocab, batch):
        levels, seeds = fixed_randomness(len(batch))
        aware, _ = loss_mdm(tiny_model, batch, vocab, levels, seeds, span_aware=True)
        naive, _ = loss_mdm(tiny_model, batch, vocab, levels, seeds, span_aware=False, block_len=4)
        assert aware.item() != naive.item()

    def test_combined_is_affine_in_lambda(self, tiny_model, vocab, batch):
        levels, seeds = fixed_randomness(len(batch))
        totals = {}
        for lam in (0.0, 0.5, 1.0):
            total, breakdown = combined_loss(tiny_model, batch, vocab, TrainConfig(lam=lam), levels, seeds)
            assert breakdown.l_total == pytest.approx(breakdown.l_mdm + lam * breakdown.l_ar, rel=1e-6)
            assert total.item() == pytest.approx(breakdown.l_total)
            totals[lam] = breakdown.l_total
        assert totals[0.5] == pytest.approx((totals[0.0] + totals[1.0]) / 2, rel=1e-6)

    def test_ar_regime_is_pure_ar(self, tiny_model, vocab, batch):
        levels, seeds = fixed_randomness(len(batch))
        _, breakdown = combined_loss(tiny_model, batch, vocab, TrainConfig(regime="ar"), levels, seeds)
        assert breakdown.l_mdm == 0.0
        assert breakdown.lam == 1.0
        assert breakdown.l_total == pytest.approx(breakdown.l_ar)

    def test_gradients_flow(self, tiny_model, vocab, batch):
        levels, seeds = fixed_randomness(len(batch))
        total, _ = combined_loss(tiny_model, batch, vocab, TrainConfig(), levels, seeds)
        total.backward()
        assert tiny_model.tok_emb.weight.grad is not None
        assert torch.isfinite(tiny_model.tok_emb.weight.grad).all()


class TestTrain:
    """Tests for train, epoch_summary and evaluate."""

    def test_empty_dataset(self, tiny_model_config, vocab):
        with pytest.raises(ConfigurationError):
            train(TrainConfig(epochs=1), [], tiny_model_config, vocab)

    def test_vocab_mismatch(self, vocab, batch):
        config = ModelConfig(vocab_size=vocab.size + 1, d_model=16, n_layers=1, n_heads=2)
        with pytest.raises(ConfigurationError):
            train(TrainConfig(epochs=1), batch, config, vocab)

    def test_examples_longer_than_max_len(self, vocab, batch):
        config = ModelConfig(vocab_size=vocab.size, d_model=16, n_layers=1, n_heads=2, max_len=8)
        with pytest.raises(ConfigurationError):
            train(TrainConfig(epochs=1), batch, config, vocab)

    def test_filled_span_must_fit_max_len(self, vocab, batch):
        longest = max(e.layout.total_len for e in batch)
        config = ModelConfig(vocab_size=vocab.size, d_model=16, n_layers=1, n_heads=2, max_len=longest)
        train(TrainConfig(epochs=1, batch_size=3, regime="ar"), batch, config, vocab)
        with pytest.raises(ConfigurationError):
            train(TrainConfig(epochs=1, batch_size=3, block_len=64), batch, config, vocab)

    def test_loss_log_and_determinism(self, tiny_model_config, vocab, batch):
        config = TrainConfig(epochs=2, batch_size=3)
        first = train(config, batch, tiny_model_config, vocab)
        second = train(config, batch, tiny_model_config, vocab)

        assert first.steps == 4
        assert list(first.loss_log.columns) == ["step", "epoch", "l_mdm", "l_ar", "lambda", "l_total", "n_loss_tokens", "lr"]
        assert first.loss_log["lr"].iloc[0] == pytest.approx(1e-3)
        assert first.loss_log["lr"].iloc[-1] == pytest.approx(0.0, abs=1e-12)
        assert first.stream_hash == second.stream_hash
        pd.testing.assert_frame_equal(first.loss_log, second.loss_log)
        assert len(first.epoch_losses) == 2

    def test_regimes_share_the_stream(self, tiny_model_config, vocab, batch):
        diffusion = train(TrainConfig(epochs=1, batch_size=3), batch, tiny_model_config, vocab)
        ar = train(TrainConfig(epochs=1, batch_size=3, regime="ar"), batch, tiny_model_config, vocab)
        assert diffusion.stream_hash == ar.stream_hash
        assert (ar.loss_log["l_mdm"] == 0.0).all()

    def test_epoch_summary(self):
        log = pd.DataFrame({
            "step": [0, 1, 2, 3],
            "epoch": [0, 0, 1, 1],
            "l_mdm": [2.0, 4.0, 1.0, 1.0],
            "l_ar": [1.0, 1.0, 0.5, 0.5],
            "lambda": [0.5] * 4,
            "l_total": [2.5, 4.5, 1.25, 1.25],
            "n_loss_tokens": [10, 12, 8, 8],
            "lr": [0.03, 0.02, 0.01, 0.0],
        })
        summary = epoch_summary(log)
        assert summary[0].l_mdm == 3.0
        assert summary[0].n_loss_tokens == 22
        assert summary[1].l_total == 1.25

    def test_evaluate(self, tiny_model, vocab, batch):
        scores = evaluate(tiny_model, batch, vocab, batch_size=4)
        assert scores["n_examples"] == len(batch)
        assert scores["l_mdm"] > 0 and scores["l_ar"] > 0
        assert evaluate(tiny_model, batch, vocab, batch_size=4) == scores

    def test_evaluate_empty(self, tiny_model, vocab):
        with pytest.raises(ValueError):
            evaluate(tiny_model, [], vocab)

    @pytest.mark.slow
    def test_loss_decreases(self, vocab, examples):
        model_config = ModelConfig(vocab_size=vocab.size, d_model=32, n_layers=2, n_heads=4, max_len=512)
        result = train(TrainConfig(epochs=6, batch_size=8), examples, model_config, vocab)
        assert result.epoch_losses[-1].l_total < result.epoch_losses[0].l_total


class TestUniformModel:
    """A zero readout gives ln V for both objectives."""

    def test_losses_equal_log_v(self, tiny_model, vocab, batch):
        with torch.no_grad():
            tiny_model.out_proj.weight.zero_()
        levels, seeds = fixed_randomness(len(batch))
        l_mdm, _ = loss_mdm(tiny_model, batch, vocab, levels, seeds)
        l_ar, _ = loss_ar(tiny_model, batch, vocab)
        assert l_mdm.item() == pytest.approx(math.log(vocab.size), rel=1e-5)
        assert l_ar.item() == pytest.approx(math.log(vocab.size), rel=1e-5)

    def test_lambda_zero_is_mdm(self, tiny_model, vocab, batch):
        levels, seeds = fixed_randomness(len(batch))
        _, breakdown = combined_loss(tiny_model, batch, vocab, TrainConfig(lam=0.0), levels, seeds)
        assert breakdown.l_total == pytest.approx(breakdown.l_mdm)
