"""Alignment-free sequence probabilities against brute-force enumeration."""

import itertools
import math

import numpy as np
import pytest

from speechground.ctc import (BLANK_TOKEN, Posteriorgram, Vocabulary,
                              bruteforce_distribution, collapse, ctc_backward,
                              ctc_bruteforce, ctc_forward, ctc_loss,
                              ctc_prefix_logprob, format_label_sequence,
                              parse_label_string, read_posteriorgram,
                              read_vocab, write_posteriorgram, write_vocab)
from speechground.errors import DataError, UsageError


def random_posteriorgram(rng, t_total, k):
    """Dirichlet-ish rows: positive, normalized, occasionally peaked."""
    raw = rng.gamma(shape=rng.uniform(0.3, 3.0), scale=1.0, size=(t_total, k))
    raw = np.maximum(raw, 1e-12)
    probs = raw / raw.sum(axis=1, keepdims=True)
    return Posteriorgram(np.log(probs))


def all_sequences(num_labels, max_len):
    for length in range(max_len + 1):
        yield from itertools.product(range(1, num_labels + 1), repeat=length)


class TestCollapse:
    def test_hand_cases(self):
        assert collapse(()) == ()
        assert collapse((0, 0, 0)) == ()
        assert collapse((1, 1, 2)) == (1, 2)
        assert collapse((1, 0, 1)) == (1, 1)
        assert collapse((1, 1, 0, 0, 1)) == (1, 1)
        assert collapse((0, 2, 2, 0, 2)) == (2, 2)

    def test_output_has_no_blanks_and_never_grows(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            path = tuple(rng.integers(0, 4, size=rng.integers(0, 10)))
            out = collapse(path)
            assert 0 not in out
            assert len(out) <= len(path)

    def test_identity_on_repeat_free_label_sequences(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            seq = []
            for sym in rng.integers(1, 4, size=rng.integers(0, 8)):
                if not seq or seq[-1] != sym:
                    seq.append(int(sym))
            assert collapse(tuple(seq)) == tuple(seq)


class TestForward:
    def test_uniform_two_frame_anchor(self):
        # paths aa, a-, -a out of four -> 3/4
        p = Posteriorgram(np.log(np.full((2, 2), 0.5)))
        _, logp = ctc_forward(p, (1,))
        assert abs(logp - math.log(0.75)) < 1e-12
        assert abs(ctc_loss(p, (1,)) - 0.287682) < 5e-7

    def test_empty_target_mass(self):
        p = Posteriorgram(np.log(np.full((3, 2), 0.5)))
        _, logp = ctc_forward(p, ())
        assert abs(logp - math.log(0.125)) < 1e-12

    def test_zero_frames(self):
        p = Posteriorgram(np.zeros((0, 3)))
        assert ctc_forward(p, ())[1] == 0.0
        assert ctc_forward(p, (1,))[1] == -np.inf

    def test_infeasible_targets(self):
        p = Posteriorgram(np.log(np.full((2, 3), 1 / 3)))
        assert ctc_forward(p, (1, 1))[1] == -np.inf  # repeat needs a blank
        assert ctc_forward(p, (1, 2, 1))[1] == -np.inf  # longer than T'

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(100)
        for _ in range(150):
            t_total = int(rng.integers(1, 7))
            k = int(rng.integers(2, 4))
            p = random_posteriorgram(rng, t_total, k)
            length = int(rng.integers(0, 5))
            target = tuple(rng.integers(1, k, size=length))
            _, logp = ctc_forward(p, target)
            brute = ctc_bruteforce(p, target)
            if brute == 0.0:
                assert logp == -np.inf
            else:
                assert abs(logp - math.log(brute)) < 1e-10

    def test_forward_equals_backward(self):
        rng = np.random.default_rng(101)
        for _ in range(150):
            t_total = int(rng.integers(1, 8))
            k = int(rng.integers(2, 5))
            p = random_posteriorgram(rng, t_total, k)
            target = tuple(rng.integers(1, k, size=rng.integers(0, 5)))
            _, f = ctc_forward(p, target)
            _, b = ctc_backward(p, target)
            if f == -np.inf or b == -np.inf:
                assert f == b
            else:
                assert abs(f - b) < 1e-8

    def test_blank_column_is_cumulative_product(self):
        rng = np.random.default_rng(102)
        p = random_posteriorgram(rng, 5, 3)
        table, _ = ctc_forward(p, (1, 2))
        np.testing.assert_allclose(table.forward_blank[:, 0],
                                   np.cumsum(p.log_probs[:, 0]), atol=1e-12)

    def test_rejects_bad_targets(self):
        p = Posteriorgram(np.log(np.full((2, 3), 1 / 3)))
        with pytest.raises(UsageError):
            ctc_forward(p, (0,))
        with pytest.raises(UsageError):
            ctc_forward(p, (3,))


class TestPartition:
    def test_collapse_outputs_form_a_distribution(self):
        rng = np.random.default_rng(200)
        for _ in range(40):
            t_total = int(rng.integers(1, 6))
            k = int(rng.integers(2, 4))
            p = random_posteriorgram(rng, t_total, k)
            total = sum(bruteforce_distribution(p).values())
            assert abs(total - 1.0) < 1e-10

    def test_forward_sums_to_one_over_all_sequences(self):
        rng = np.random.default_rng(201)
        for _ in range(30):
            t_total = int(rng.integers(1, 6))
            k = int(rng.integers(2, 4))
            p = random_posteriorgram(rng, t_total, k)
            total = 0.0
            for seq in all_sequences(k - 1, t_total):
                _, logp = ctc_forward(p, seq)
                if logp > -np.inf:
                    total += math.exp(logp)
            assert abs(total - 1.0) < 1e-8


class TestPrefix:
    def test_uniform_anchor(self):
        p = Posteriorgram(np.log(np.full((2, 2), 0.5)))
        assert abs(ctc_prefix_logprob(p, (1,)) - math.log(0.75)) < 1e-12

    def test_empty_prefix_is_certain(self):
        p = Posteriorgram(np.log(np.full((4, 3), 1 / 3)))
        assert ctc_prefix_logprob(p, ()) == 0.0

    def test_longer_than_frames_impossible(self):
        p = Posteriorgram(np.log(np.full((2, 2), 0.5)))
        assert ctc_prefix_logprob(p, (1, 1, 1)) == -np.inf

    def test_matches_bruteforce_suffix_sum(self):
        rng = np.random.default_rng(300)
        for _ in range(200):
            t_total = int(rng.integers(1, 7))
            k = int(rng.integers(2, 4))
            p = random_posteriorgram(rng, t_total, k)
            dist = bruteforce_distribution(p)
            length = int(rng.integers(1, 4))
            prefix = tuple(rng.integers(1, k, size=length))
            mass = sum(prob for seq, prob in dist.items()
                       if seq[:length] == prefix)
            logp = ctc_prefix_logprob(p, prefix)
            if mass == 0.0:
                assert logp == -np.inf
            else:
                assert abs(logp - math.log(mass)) < 1e-10

    def test_monotone_in_prefix_extension(self):
        rng = np.random.default_rng(301)
        for _ in range(50):
            p = random_posteriorgram(rng, 6, 3)
            seq = tuple(rng.integers(1, 3, size=3))
            scores = [ctc_prefix_logprob(p, seq[:i]) for i in range(4)]
            for a, b in zip(scores, scores[1:]):
                assert b <= a + 1e-12

    def test_prefix_dominates_full_sequence(self):
        rng = np.random.default_rng(302)
        for _ in range(50):
            p = random_posteriorgram(rng, 5, 3)
            seq = tuple(rng.integers(1, 3, size=2))
            full = ctc_forward(p, seq)[1]
            pre = ctc_prefix_logprob(p, seq)
            assert pre >= full - 1e-12


class TestPosteriorgramType:
    def test_rejects_unnormalized_rows(self):
        with pytest.raises(DataError):
            Posteriorgram(np.log(np.array([[0.5, 0.4]])))

    def test_validation_escape_hatch(self):
        p = Posteriorgram(np.log(np.array([[0.5, 0.4]])), validate=False)
        assert p.num_frames == 1

    def test_rejects_nan(self):
        with pytest.raises(DataError):
            Posteriorgram(np.array([[np.nan, 0.0]]))

    def test_scaling_rows_shifts_forward_by_constant(self):
        # positive per-frame scaling must shift every sequence equally
        rng = np.random.default_rng(400)
        p = random_posteriorgram(rng, 4, 3)
        shift = rng.uniform(0.1, 2.0, size=(4, 1))
        scaled = Posteriorgram(p.log_probs + np.log(shift), validate=False)
        base = ctc_forward(p, (1, 2))[1]
        moved = ctc_forward(scaled, (1, 2))[1]
        assert abs((moved - base) - np.log(shift).sum()) < 1e-10


class TestVocabulary:
    def test_token_index_roundtrip(self):
        vocab = Vocabulary(("a", "b", "cat"))
        assert vocab.size == 4
        assert vocab.token(0) == BLANK_TOKEN
        for tok in ("a", "b", "cat"):
            assert vocab.token(vocab.index(tok)) == tok

    def test_unknown_label(self):
        with pytest.raises(DataError):
            Vocabulary(("a",)).index("z")

    def test_rejects_bad_labels(self):
        with pytest.raises(DataError):
            Vocabulary(("a", "a"))
        with pytest.raises(DataError):
            Vocabulary(("a b",))
        with pytest.raises(DataError):
            Vocabulary((BLANK_TOKEN,))

    def test_file_roundtrip(self, tmp_path):
        vocab = Vocabulary(("a", "b", "c"))
        path = str(tmp_path / "v.txt")
        write_vocab(path, vocab)
        assert read_vocab(path).labels == ("a", "b", "c")

    def test_file_must_lead_with_blank(self, tmp_path):
        path = str(tmp_path / "v.txt")
        with open(path, "w") as fh:
            fh.write("a\nb\n")
        with pytest.raises(DataError):
            read_vocab(path)


class TestPosteriorgramIO:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(500)
        p = random_posteriorgram(rng, 6, 4)
        path = str(tmp_path / "p.txt")
        write_posteriorgram(path, p)
        back = read_posteriorgram(path)
        np.testing.assert_allclose(back.log_probs, p.log_probs, atol=1e-15)

    def test_unnormalized_file_rejected(self, tmp_path):
        path = str(tmp_path / "bad.txt")
        with open(path, "w") as fh:
            fh.write("1 2\n-0.5 -0.5\n")
        with pytest.raises(DataError):
            read_posteriorgram(path)

    def test_short_file_rejected(self, tmp_path):
        path = str(tmp_path / "short.txt")
        with open(path, "w") as fh:
            fh.write("2 2\n-0.693147180559945 -0.693147180559945\n")
        with pytest.raises(DataError):
            read_posteriorgram(path)


class TestLabelStrings:
    def test_parse_and_format(self):
        vocab = Vocabulary(("a", "b"))
        seq = parse_label_string("a b a", vocab)
        assert seq == (1, 2, 1)
        assert format_label_sequence(seq, vocab) == "a b a"

    def test_parse_unknown(self):
        with pytest.raises(DataError):
            parse_label_string("a z", Vocabulary(("a",)))
