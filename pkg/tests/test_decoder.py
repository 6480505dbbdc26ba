import numpy as np
import pytest

from conftest import assert_same_float, random_instance, random_lm
from hybridscribe.decoder import (DecoderConfig, all_configs, beam_search, exhaustive_decode,
                                  greedy_decode, hybrid_score_step, score_sequence)
from hybridscribe.lm import MarginalPrior
from hybridscribe.numeric import DimensionError, make_rng


def test_score_step():
    assert hybrid_score_step(-1.0, -2.0, -0.5) == -2.5


def test_config_defaults_and_validation():
    cfg = DecoderConfig()
    assert cfg.beam_width == 100 and cfg.cap == 200
    assert DecoderConfig(1).cap == 32
    assert DecoderConfig(4, expansions_per_parent_cap=3).cap == 3
    with pytest.raises(ValueError):
        DecoderConfig(0)


def test_all_configs_order():
    assert all_configs(2).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


@pytest.mark.parametrize("seed", range(50))
def test_saturated_beam_equals_exhaustive(seed):
    post, lm, prior = random_instance(seed, n=3, T=4)
    ref = exhaustive_decode(post, lm, prior)
    got = beam_search(post, lm, prior, DecoderConfig(4096))
    assert np.array_equal(got.frames, ref.frames)
    assert got.score == pytest.approx(ref.score, abs=1e-9)


def test_exhaustive_is_true_optimum():
    post, lm, prior = random_instance(77, n=2, T=3)
    ref = exhaustive_decode(post, lm, prior)
    Z = all_configs(2)
    scores = [score_sequence(post, lm, prior, Z[list(s)])
              for s in np.ndindex(4, 4, 4)]
    assert ref.score == pytest.approx(max(scores), abs=1e-12)
    assert score_sequence(post, lm, prior, ref.frames) == pytest.approx(ref.score, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_greedy_equals_width_one(backend, seed):
    rng = make_rng(seed)
    n, T = int(rng.integers(2, 7)), int(rng.integers(1, 12))
    post, lm, prior = random_instance(seed + 1000, n=n, T=T)
    a = greedy_decode(post, lm, prior)
    b = beam_search(post, lm, prior, DecoderConfig(1))
    assert np.array_equal(a.frames, b.frames)
    assert_same_float(a.score, b.score)


@pytest.mark.parametrize("seed", range(10))
def test_returned_score_matches_rescoring(seed):
    post, lm, prior = random_instance(seed + 50, n=5, T=8)
    res = beam_search(post, lm, prior, DecoderConfig(10))
    assert res.score == pytest.approx(score_sequence(post, lm, prior, res.frames), abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_wider_beam_finds_at_least_as_good_at_saturation(seed):
    post, lm, prior = random_instance(seed + 200, n=3, T=4)
    best = exhaustive_decode(post, lm, prior).score
    for w in (1, 4, 16, 64):
        assert beam_search(post, lm, prior, DecoderConfig(w)).score <= best + 1e-9


def test_backends_agree_on_decode():
    from hybridscribe import kernels
    if len(kernels.backends()) < 2:
        pytest.skip("compiled backend not built")
    post, lm, prior = random_instance(5, n=6, T=10, kind="nade")
    results = []
    for name, mod in sorted(kernels.backends().items()):
        saved = {k: getattr(kernels, k) for k in kernels.KERNEL_NAMES}
        try:
            for k in kernels.KERNEL_NAMES:
                setattr(kernels, k, getattr(mod, k))
            results.append(beam_search(post, lm, prior, DecoderConfig(8)))
        finally:
            for k, v in saved.items():
                setattr(kernels, k, v)
    assert np.array_equal(results[0].frames, results[1].frames)
    assert results[0].score == pytest.approx(results[1].score, abs=1e-9)


def test_record_audit_trail():
    post, lm, prior = random_instance(3, n=3, T=3)
    record = []
    res = beam_search(post, lm, prior, DecoderConfig(3), record=record)
    assert [r["depth"] for r in record] == [0, 1, 2]
    for r in record:
        kept_scores = [s for _, _, s in r["kept"]]
        gen_scores = sorted((s for _, _, s in r["generated"]), reverse=True)
        assert len(r["kept"]) <= 3
        # the kept set is the top of everything generated
        assert kept_scores == gen_scores[:len(kept_scores)]
    assert record[-1]["kept"][0][2] == res.score


def test_strong_acoustic_evidence_wins():
    """With near-certain posteriors and a weak LM the decode follows the acoustics."""
    rng = make_rng(4)
    lm = random_lm(rng, 4, "nade", std=0.1)
    truth = (rng.random((6, 4)) < 0.5).astype(np.uint8)
    post = np.where(truth > 0, 0.999, 0.001)
    prior = MarginalPrior(np.full(4, 0.5))
    assert np.array_equal(beam_search(post, lm, prior, DecoderConfig(5)).frames, truth)


def test_empty_and_mismatched_inputs():
    post, lm, prior = random_instance(0, n=3, T=2)
    assert beam_search(np.zeros((0, 3)), lm, prior).frames.shape == (0, 3)
    with pytest.raises(DimensionError):
        beam_search(np.zeros((2, 4)), lm, prior)
    with pytest.raises(ValueError):
        exhaustive_decode(np.full((6, 3), 0.5), lm, prior)


def test_decode_is_deterministic():
    post, lm, prior = random_instance(11, n=6, T=12, kind="nade")
    a = beam_search(post, lm, prior, DecoderConfig(20))
    b = beam_search(post, lm, prior, DecoderConfig(20))
    assert np.array_equal(a.frames, b.frames)
    assert_same_float(a.score, b.score)
