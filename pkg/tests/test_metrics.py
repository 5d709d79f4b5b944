import itertools

import numpy as np
import pytest

from speechpace.metrics import (
    EditOps,
    _dp_ops_py,
    cer,
    edit_distance,
    normalize_text,
    pearson,
    wer,
)

from oracles import edit_search_total


class TestEditDistance:
    def test_identical(self):
        assert edit_distance("abc", "abc") == EditOps(0, 0, 0)

    def test_pure_deletion(self):
        ops = edit_distance(["a", "b", "c"], [])
        assert ops == EditOps(insertions=0, deletions=3, substitutions=0)

    def test_pure_insertion(self):
        ops = edit_distance([], ["a", "b"])
        assert ops == EditOps(insertions=2, deletions=0, substitutions=0)

    def test_kitten_sitting(self):
        ops = edit_distance(list("kitten"), list("sitting"))
        assert ops.total == 3
        assert ops.substitutions == 2 and ops.insertions == 1 and ops.deletions == 0

    def test_symmetry_swaps_ins_del(self):
        rng = np.random.default_rng(2)
        syms = "abc"
        for _ in range(300):
            a = "".join(rng.choice(list(syms), rng.integers(0, 8)))
            b = "".join(rng.choice(list(syms), rng.integers(0, 8)))
            fwd, rev = edit_distance(a, b), edit_distance(b, a)
            assert fwd.total == rev.total
            assert fwd.insertions == rev.deletions
            assert fwd.deletions == rev.insertions

    def test_triangle_inequality(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a, b, c = (
                "".join(rng.choice(list("abc"), rng.integers(0, 7))) for _ in range(3)
            )
            ab = edit_distance(a, b).total
            bc = edit_distance(b, c).total
            ac = edit_distance(a, c).total
            assert ac <= ab + bc

    def test_matches_exhaustive_oracle_small(self):
        seqs = [
            "".join(t)
            for n in range(5)
            for t in itertools.product("abc", repeat=n)
        ]
        memo = {}
        for a in seqs:
            for b in seqs:
                ops = edit_distance(a, b)
                assert ops.total == edit_search_total(a, b, memo), (a, b)
                assert ops.insertions - ops.deletions == len(b) - len(a)

    def test_numba_and_pure_paths_agree(self):
        rng = np.random.default_rng(4)
        pool = ["a", "b", "é", "long-token", "c"]
        for _ in range(200):
            a = [pool[i] for i in rng.integers(0, len(pool), rng.integers(0, 7))]
            b = [pool[i] for i in rng.integers(0, len(pool), rng.integers(0, 7))]
            got = edit_distance(a, b)
            total, ins, dele, sub = _dp_ops_py(a, b)
            assert (got.total, got.insertions, got.deletions, got.substitutions) == (
                total,
                ins,
                dele,
                sub,
            )


class TestWer:
    def test_identical(self):
        assert wer("the cat sat", "the cat sat") == 0.0

    def test_one_missing_word(self):
        assert wer("a b c d", "a b d") == pytest.approx(0.25)

    def test_empty_hypothesis(self):
        assert wer("v w x y z", "") == 1.0

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            wer("", "something")

    def test_can_exceed_one(self):
        assert wer("a", "x y z") == 3.0

    def test_token_sequences_accepted(self):
        assert wer(["a", "b"], ["a", "b"]) == 0.0


class TestCer:
    def test_identical(self):
        assert cer("abcd", "abcd") == 0.0

    def test_one_substitution(self):
        assert cer("abcd", "abed") == pytest.approx(0.25)

    def test_insertions_reach_one(self):
        assert cer("ab", "abab") == pytest.approx(1.0)

    def test_normalization(self):
        assert cer("Hello   World", "hello world") == 0.0

    def test_whitespace_only_reference_rejected(self):
        with pytest.raises(ValueError):
            cer("   ", "x")


class TestNormalizeText:
    def test_folds_and_collapses(self):
        assert normalize_text("  A\tB\n C ") == "a b c"

    def test_punctuation_kept(self):
        assert normalize_text("Don't, stop!") == "don't, stop!"


class TestPearson:
    def test_self_correlation(self):
        xs = [1.0, 2.5, 3.0, -1.0]
        assert pearson(xs, xs) == pytest.approx(1.0, abs=1e-12)

    def test_negation(self):
        xs = [1.0, 2.5, 3.0, -1.0]
        assert pearson(xs, [-x for x in xs]) == pytest.approx(-1.0, abs=1e-12)

    def test_exact_linear(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError):
            pearson([1, 1, 1], [1, 2, 3])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            pearson([1, 2], [1, 2, 3])

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            pearson([1.0], [2.0])
