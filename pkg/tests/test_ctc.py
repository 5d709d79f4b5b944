import itertools
import math

import numpy as np
import pytest

from speechpace.ctc import Posteriorgram, ctc_greedy_decode, ctc_nll

from oracles import ctc_brute_nll


def uniform_post(t, alphabet):
    k = len(alphabet) + 1
    lp = np.full((t, k), math.log(1.0 / k))
    return Posteriorgram(lp, list(alphabet), 10.0)


def random_post(rng, t, alphabet):
    k = len(alphabet) + 1
    p = rng.dirichlet(np.ones(k), size=t)
    return Posteriorgram(np.log(p), list(alphabet), 10.0)


def onehotish(rows, alphabet, winner_prob=0.9):
    k = len(alphabet) + 1
    lp = np.full((len(rows), k), math.log((1 - winner_prob) / (k - 1)))
    for t, col in enumerate(rows):
        lp[t, col] = math.log(winner_prob)
    return Posteriorgram(lp, list(alphabet), 10.0)


class TestCtcNll:
    def test_single_frame_single_label(self):
        post = uniform_post(1, ["a", "b"])
        assert ctc_nll(post, ["a"]) == pytest.approx(math.log(3.0), abs=1e-12)

    def test_two_frames_single_label(self):
        # valid paths: aa, a-, -a  ->  3/9
        post = uniform_post(2, ["a", "b"])
        assert ctc_nll(post, ["a"]) == pytest.approx(math.log(3.0), abs=1e-12)

    def test_repeat_needs_blank(self):
        post = uniform_post(1, ["a", "b"])
        assert ctc_nll(post, ["a", "a"]) == math.inf

    def test_too_many_labels(self):
        post = uniform_post(2, ["a", "b"])
        assert ctc_nll(post, ["a", "b", "a"]) == math.inf

    def test_empty_labels_all_blank_path(self):
        rng = np.random.default_rng(0)
        post = random_post(rng, 5, ["a", "b"])
        expect = -float(post.log_probs[:, -1].sum())
        assert ctc_nll(post, []) == pytest.approx(expect, abs=1e-9)

    def test_label_outside_alphabet(self):
        post = uniform_post(2, ["a", "b"])
        with pytest.raises(ValueError, match="not in alphabet"):
            ctc_nll(post, ["z"])

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            t = int(rng.integers(1, 5))
            k = int(rng.integers(1, 4))
            alphabet = list("abc"[:k])
            post = random_post(rng, t, alphabet)
            n_labels = int(rng.integers(0, 4))
            labels = [alphabet[i] for i in rng.integers(0, k, n_labels)]
            got = ctc_nll(post, labels)
            want = ctc_brute_nll(post.log_probs, alphabet, labels)
            if math.isinf(want):
                assert math.isinf(got)
            else:
                assert got == pytest.approx(want, abs=1e-9)

    def test_matches_brute_force_exhaustive_labels(self):
        rng = np.random.default_rng(7)
        alphabet = ["a", "b"]
        post = random_post(rng, 4, alphabet)
        for n in range(0, 3):
            for combo in itertools.product(alphabet, repeat=n):
                got = ctc_nll(post, list(combo))
                want = ctc_brute_nll(post.log_probs, alphabet, list(combo))
                if math.isinf(want):
                    assert math.isinf(got)
                else:
                    assert got == pytest.approx(want, abs=1e-9)

    def test_nll_non_negative(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            alphabet = ["a", "b", "c"]
            post = random_post(rng, int(rng.integers(1, 7)), alphabet)
            labels = [alphabet[i] for i in rng.integers(0, 3, int(rng.integers(0, 3)))]
            assert ctc_nll(post, labels) >= -1e-9

    def test_alphabet_permutation_invariance(self):
        rng = np.random.default_rng(11)
        alphabet = ["a", "b", "c"]
        post = random_post(rng, 5, alphabet)
        labels = ["b", "a", "b"]
        base = ctc_nll(post, labels)
        perm = [2, 0, 1]  # new order: c, a, b
        cols = perm + [3]
        permuted = Posteriorgram(
            post.log_probs[:, cols], [alphabet[i] for i in perm], 10.0
        )
        assert ctc_nll(permuted, labels) == pytest.approx(base, abs=1e-12)


class TestGreedyDecode:
    def test_collapse_rule(self):
        post = onehotish([0, 0, 2, 1], ["a", "b"])
        assert ctc_greedy_decode(post) == "ab"

    def test_all_blank(self):
        post = onehotish([2, 2, 2], ["a", "b"])
        assert ctc_greedy_decode(post) == ""

    def test_blank_separates_repeats(self):
        post = onehotish([0, 2, 0], ["a", "b"])
        assert ctc_greedy_decode(post) == "aa"

    def test_tie_breaks_to_lowest_index(self):
        lp = np.log(np.full((1, 3), 1.0 / 3.0))
        post = Posteriorgram(lp, ["a", "b"], 10.0)
        assert ctc_greedy_decode(post) == "a"


class TestPosteriorgram:
    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            Posteriorgram(np.zeros((0, 3)), ["a", "b"], 10.0)
        with pytest.raises(ValueError):
            Posteriorgram(np.zeros((2, 2)), ["a", "b"], 10.0)

    def test_normalization_check(self):
        good = uniform_post(3, ["a", "b"])
        good.validate_normalized()
        bad = Posteriorgram(np.full((2, 3), -1.0), ["a", "b"], 10.0)
        with pytest.raises(ValueError, match="not normalized"):
            bad.validate_normalized()

    def test_json_round_trip(self):
        post = uniform_post(2, ["a", "b"])
        back = Posteriorgram.from_json(post.to_json())
        np.testing.assert_allclose(back.log_probs, post.log_probs)
        assert back.alphabet == post.alphabet
        assert back.frame_hop_ms == post.frame_hop_ms
