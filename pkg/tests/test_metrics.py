import math

import pytest

from basts.metrics import (
    EvalReport,
    corpus_bleu,
    evaluate_corpus,
    meteor_lite,
    rouge_l,
    rouge_n,
    sentence_bleu,
)


def words(text):
    return text.split()


class TestSentenceBleu:
    def test_identity_is_one(self):
        assert sentence_bleu(words("a b c d"), words("a b c d")) == 1.0

    def test_unsmoothed_zero_on_missing_fourgram(self):
        score = sentence_bleu(words("a b c d"), words("a b c e"), smoothing=False)
        assert score == 0.0

    def test_smoothed_version_is_positive(self):
        score = sentence_bleu(words("a b c d"), words("a b c e"), smoothing=True)
        assert 0.0 < score < 1.0

    def test_clipping(self):
        # one creditable 'a': P1 = 1/3 exactly
        hyp, ref = words("a a a"), words("a b")
        matches = 1
        p1 = matches / 3
        p2 = (0 + 1) / (2 + 1)  # two hyp bigrams, none matched
        p3 = (0 + 1) / (1 + 1)  # one hyp trigram
        p4 = 1.0  # no 4-grams: smoothed (0+1)/(0+1)
        rho = min(1.0, math.exp(1 - 2 / 3))
        expected = rho * (p1 * p2 * p3 * p4) ** 0.25
        assert abs(sentence_bleu(hyp, ref) - expected) < 1e-12

    def test_short_identity_still_one(self):
        assert sentence_bleu(words("a b"), words("a b")) == 1.0

    def test_empty_hypothesis_scores_zero(self):
        assert sentence_bleu([], words("a b")) == 0.0

    def test_one_iff_equal_at_length_four_plus(self):
        sentences = [
            words("a b c d"), words("a b c d e"), words("a b d c"),
            words("x a b c d"),
        ]
        for h in sentences:
            for r in sentences:
                score = sentence_bleu(h, r)
                assert (score == 1.0) == (h == r), (h, r, score)

    def test_brevity_penalty_applies(self):
        # hyp is a shortened prefix of ref: all precisions 1, rho < 1
        score = sentence_bleu(words("a b c d"), words("a b c d e f"))
        assert abs(score - math.exp(1 - 6 / 4)) < 1e-12


class TestCorpusBleu:
    def test_identity_corpus(self):
        pairs = [(words("a b c d"), words("a b c d"))] * 3
        assert corpus_bleu(pairs) == 1.0

    def test_single_pair_matches_unsmoothed_sentence(self):
        h, r = words("a b c d e"), words("a b c d f")
        assert abs(
            corpus_bleu([(h, r)]) - sentence_bleu(h, r, smoothing=False)
        ) < 1e-12

    def test_hand_pooled_two_pairs(self):
        pairs = [
            (words("a b"), words("a b")),
            (words("b c"), words("b d")),
        ]
        # pooled at n=1: matches 3 of 4; n=2: 1 of 2; lengths equal
        expected = math.sqrt((3 / 4) * (1 / 2))
        assert abs(corpus_bleu(pairs, max_n=2) - expected) < 1e-12

    def test_copies_invariance(self):
        pair = (words("a b c x"), words("a b c y"))
        assert abs(corpus_bleu([pair]) - corpus_bleu([pair] * 5)) < 1e-12

    def test_short_identical_corpus_scores_one(self):
        assert corpus_bleu([(words("a b"), words("a b"))]) == 1.0


class TestRouge:
    def test_rouge1_identity(self):
        assert rouge_n(words("a b c"), words("a b c"), 1) == 1.0

    def test_rouge1_disjoint(self):
        assert rouge_n(words("a b"), words("c d"), 1) == 0.0

    def test_rouge1_hand_case(self):
        f = rouge_n(words("a b c"), words("a b d"), 1)
        assert abs(f - 2.0 / 3.0) < 1e-12

    def test_rouge2_counts_bigrams(self):
        f = rouge_n(words("a b c"), words("a b d"), 2)
        # one shared bigram of two per side -> R = P = 1/2
        assert abs(f - 0.5) < 1e-12

    def test_rouge_l_identity(self):
        assert rouge_l(words("a b c"), words("a b c")) == 1.0

    def test_rouge_l_swap_case(self):
        f = rouge_l(words("a b c"), words("a c b"))
        assert abs(f - 2.0 / 3.0) < 1e-12

    def test_rouge_l_empty_hypothesis(self):
        assert rouge_l([], words("a b")) == 0.0

    def test_rouge_l_one_iff_equal(self):
        cases = [words("a b c"), words("a c b"), words("a b"), words("b a c")]
        for h in cases:
            for r in cases:
                assert (rouge_l(h, r) == 1.0) == (h == r)


class TestMeteorLite:
    def test_identity_close_to_one(self):
        h = words("the quick brown fox jumps over the lazy dog")
        score = meteor_lite(h, h)
        m = len(h)
        assert abs(score - (1.0 - 0.5 / m**3)) < 1e-12

    def test_no_overlap(self):
        assert meteor_lite(words("a b"), words("c d")) == 0.0

    def test_the_cat_case(self):
        h, r = words("the cat"), words("the cat sat")
        p, rec = 1.0, 2.0 / 3.0
        f_mean = 10 * p * rec / (rec + 9 * p)
        assert abs(f_mean - 0.689655172) < 1e-6
        expected = f_mean * (1.0 - 0.5 * (1 / 2) ** 3)
        assert abs(meteor_lite(h, r) - expected) < 1e-12

    def test_fragmentation_costs(self):
        contiguous = meteor_lite(words("a b c d"), words("a b c d"))
        scrambled = meteor_lite(words("a c b d"), words("a b c d"))
        assert scrambled < contiguous

    def test_crossed_alignment_prefers_long_fragment(self):
        # "a x" survives as one chunk, the stray "a" matches separately
        h, r = words("a x a"), words("a a x")
        score = meteor_lite(h, r)
        p = rec = 1.0
        f_mean = 10 * p * rec / (rec + 9 * p)
        assert abs(score - f_mean * (1.0 - 0.5 * (2 / 3) ** 3)) < 1e-12


class TestInvariance:
    def test_vocabulary_relabeling(self):
        mapping = {"a": "alpha", "b": "beta", "c": "gamma", "d": "delta"}
        h, r = words("a b c a"), words("a b d")
        h2 = [mapping[w] for w in h]
        r2 = [mapping[w] for w in r]
        assert sentence_bleu(h, r) == sentence_bleu(h2, r2)
        assert rouge_n(h, r, 1) == rouge_n(h2, r2, 1)
        assert rouge_l(h, r) == rouge_l(h2, r2)
        assert meteor_lite(h, r) == meteor_lite(h2, r2)

    def test_case_folding(self):
        assert sentence_bleu(words("A B c d"), words("a b C D")) == 1.0


class TestEvaluateCorpus:
    def test_identity_everything_scores_one(self):
        pairs = [
            (words("set the flag"), words("set the flag")),
            (words("close the idle connection now"), words("close the idle connection now")),
        ]
        report = evaluate_corpus(pairs)
        assert report.c_bleu == 1.0
        assert report.rouge1_f == 1.0
        assert report.rouge2_f == 1.0
        assert report.rougeL_f == 1.0
        assert report.s_bleu == 1.0
        assert report.meteor > 0.97

    def test_scaled_two_decimals(self):
        report = EvalReport(0.363849, 0.3037, 0.2412, 0.49634, 0.33129, 0.47851)
        scaled = report.scaled()
        assert scaled["s_bleu"] == 36.38
        assert scaled["rouge1_f"] == 49.63

    def test_bounds(self):
        pairs = [(words("a b"), words("c d e")), (words("x y z w"), words("x q z w"))]
        report = evaluate_corpus(pairs)
        for value in vars(report).values():
            assert 0.0 <= value <= 1.0

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            evaluate_corpus([])
