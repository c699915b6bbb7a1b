"""Tests for noise levels and context-clean corruption."""

import numpy as np
import pytest

from diffusion.corruption import NoiseLevel, apply_plan, corrupt, mask_positions, sample_level
from world.trajectories import SpanLayout, TrainingExample
from world.vocab import MASK


@pytest.fixture
def example(examples) -> TrainingExample:
    return max(examples, key=lambda e: e.layout.total_len)


class TestNoiseLevel:
    """Tests for NoiseLevel and sample_level."""

    def test_rate(self):
        assert NoiseLevel(4, 16).rate == 0.25

    @pytest.mark.parametrize("k,K", [(0, 16), (17, 16), (1, 0)])
    def test_out_of_range(self, k, K):
        with pytest.raises(ValueError):
            NoiseLevel(k, K)

    def test_sample_level_range_and_determinism(self):
        levels = [sample_level(16, seed).k for seed in range(200)]
        assert min(levels) >= 1 and max(levels) <= 16
        assert len(set(levels)) > 8
        assert sample_level(16, 5) == sample_level(16, 5)

    def test_sample_level_is_uniform(self):
        draws = np.array([sample_level(16, seed).k for seed in range(16_000)])
        frequencies = np.bincount(draws, minlength=17)[1:] / draws.size
        assert np.all(np.abs(frequencies - 1 / 16) <= 0.01)

    def test_sample_level_bad_K(self):
        with pytest.raises(ValueError):
            sample_level(0, 1)


class TestCorrupt:
    """Tests for mask_positions and corrupt."""

    def test_context_untouched(self, example):
        for seed in range(20):
            for k in (1, 8, 16):
                tokens, plan = corrupt(example, NoiseLevel(k, 16), seed)
                ctx = example.layout.ctx_len
                assert tokens[:ctx] == example.context
                assert all(p >= ctx for p in plan.masked_positions)

    def test_full_level_masks_whole_span(self, example):
        tokens, plan = corrupt(example, NoiseLevel(16, 16), seed=3)
        assert list(plan.masked_positions) == list(example.layout.I_loss)
        assert tokens[example.layout.ctx_len:] == [MASK] * example.layout.loss_len

    def test_context_clean_off_masks_context(self, example):
        tokens, plan = corrupt(example, NoiseLevel(16, 16), seed=3, context_clean=False)
        assert tokens == [MASK] * example.layout.total_len
        assert not plan.context_clean

    def test_plan_records_exact_positions(self, example):
        tokens, plan = corrupt(example, NoiseLevel(8, 16), seed=11)
        masked = [i for i, t in enumerate(tokens) if t == MASK]
        assert masked == list(plan.masked_positions)
        assert apply_plan(example.tokens, plan) == tokens

    def test_deterministic(self, example):
        assert corrupt(example, NoiseLevel(5, 16), 9) == corrupt(example, NoiseLevel(5, 16), 9)

    def test_empirical_rate(self):
        layout = SpanLayout(ctx_len=10, total_len=4010)
        fractions = [mask_positions(layout, NoiseLevel(4, 16), seed).size / layout.loss_len for seed in range(10)]
        assert abs(float(np.mean(fractions)) - 0.25) < 0.02


class TestMaskingRates:
    """Masked fraction of the action span at every level k of 16."""

    @pytest.fixture(scope="class")
    def rates(self):
        layout = SpanLayout(ctx_len=12, total_len=44)
        out = {}
        for k in range(1, 17):
            counts = [mask_positions(layout, NoiseLevel(k, 16), seed).size for seed in range(10_000)]
            out[k] = float(np.mean(counts)) / layout.loss_len
        return out

    @pytest.mark.parametrize("k", range(1, 17))
    def test_rate_matches_level(self, rates, k):
        assert abs(rates[k] - k / 16) <= 0.02

    def test_rate_increases_with_level(self, rates):
        ordered = [rates[k] for k in range(1, 17)]
        assert all(a < b for a, b in zip(ordered, ordered[1:]))

    def test_context_never_masked(self):
        rng = np.random.default_rng(3)
        for case in range(1000):
            ctx_len = int(rng.integers(0, 40))
            layout = SpanLayout(ctx_len=ctx_len, total_len=ctx_len + int(rng.integers(1, 40)))
            k = int(rng.integers(1, 17))
            positions = mask_positions(layout, NoiseLevel(k, 16), seed=case)
            assert positions.size == 0 or positions.min() >= ctx_len, case
