import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tgsum.decoder import evaluate, greedy_decode, unigram_f1
from tgsum.errors import EmptyInputError
from tgsum.textkit import EOS

from .helpers import make_model


def rig(model, favourite, value=50.0):
    model.head2.W[...] = 0
    model.head2.b[...] = 0
    model.head2.b[favourite] = value
    return model


def test_always_eos_gives_empty_summary(tiny_model):
    out = greedy_decode(rig(tiny_model, EOS), [4, 5], max_len=10)
    assert out.ids == [] and out.stop_reason == "eos" and len(out.probs) == 1


def test_always_same_token_hits_max_len(tiny_model):
    out = greedy_decode(rig(tiny_model, 4), [4, 5], max_len=6)
    assert out.ids == [4] * 6 and out.stop_reason == "max_len"
    assert all(0 < p <= 1 for p in out.probs)


def test_tie_goes_to_lowest_id(tiny_model):
    rig(tiny_model, 6)
    tiny_model.head2.b[5] = 50.0
    out = greedy_decode(tiny_model, [4], max_len=3)
    assert out.ids == [5, 5, 5]


def test_empty_source_rejected(tiny_model):
    with pytest.raises(EmptyInputError):
        greedy_decode(tiny_model, [])


def test_decode_terminates_for_random_models():
    rng = np.random.default_rng(0)
    for seed in range(200):
        m = make_model(seed=seed, scale=float(rng.uniform(0.05, 4)))
        max_len = int(rng.integers(1, 12))
        out = greedy_decode(m, list(rng.integers(0, 7, size=rng.integers(1, 6))), max_len)
        assert len(out.ids) <= max_len
        assert EOS not in out.ids
        assert (out.stop_reason == "eos") == (len(out.probs) == len(out.ids) + 1)
        assert len(out.attention) == len(out.probs)


def test_unigram_f1_definition():
    assert unigram_f1([], []) == 1.0
    assert unigram_f1([], [4]) == 0.0
    assert unigram_f1([4, 5], [5, 4]) == 1.0
    assert unigram_f1([4, 4, 5], [4, 6]) == pytest.approx(2 * (1 / 3) * (1 / 2) / (1 / 3 + 1 / 2))


@given(st.lists(st.integers(0, 5), max_size=8), st.lists(st.integers(0, 5), max_size=8))
def test_unigram_f1_symmetric_and_exact(a, b):
    assert unigram_f1(a, b) == unigram_f1(b, a)
    assert (unigram_f1(a, b) == 1.0) == (sorted(a) == sorted(b))


def test_evaluate_uniform_predictor(tiny_model):
    rig(tiny_model, 0, 0.0)
    examples = [([4, 5], [5, 6, EOS]), ([6], [4, EOS])]
    report = evaluate(tiny_model, examples, max_len=4)
    assert report.nll_per_token == pytest.approx(math.log(7), abs=1e-12)
    assert abs(report.perplexity - 7) / 7 < 0.01
    assert report.perplexity == math.exp(report.nll_per_token)
    assert report.examples == 2 and report.tokens == 5
    assert 0 <= report.exact_match <= 1 and 0 <= report.unigram_f1 <= 1


def test_evaluate_counts_exact_matches(tiny_model):
    rig(tiny_model, EOS)
    report = evaluate(tiny_model, [([4], [EOS]), ([5], [4, EOS])])
    assert report.exact_match == 0.5 and report.unigram_f1 == 0.5
    with pytest.raises(EmptyInputError):
        evaluate(tiny_model, [])
