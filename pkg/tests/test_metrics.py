"""Metric battery: frozen reference values plus randomized brute-force checks.

The brute-force reimplementations here deliberately use naive list scans so
they share no code shape with the library versions they check.
"""

import math
import random

import pytest

from shoptalk.corpus import BeliefFrame, Domain
from shoptalk.metrics import (
    MetricsReport,
    TABLE_COLUMNS,
    TurnScores,
    action_metrics,
    attribute_metrics,
    belief_metrics,
    bleu4,
    compose_report,
    micro_f1,
    retrieval_metrics,
    sentence_bleu4,
)

# ---------------------------------------------------------------------------
# naive references
# ---------------------------------------------------------------------------


def naive_clipped(cand, ref, n):
    cn = [tuple(cand[i : i + n]) for i in range(len(cand) - n + 1)]
    rn = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
    used = [False] * len(rn)
    matched = 0
    for g in cn:
        for j, h in enumerate(rn):
            if not used[j] and g == h:
                used[j] = True
                matched += 1
                break
    return matched, len(cn)


def naive_corpus_bleu(pairs):
    match = [0] * 5
    total = [0] * 5
    c_len = r_len = 0
    for cand, ref in pairs:
        cand, ref = cand.split(), ref.split()
        c_len += len(cand)
        r_len += len(ref)
        for n in range(1, 5):
            m, t = naive_clipped(cand, ref, n)
            match[n] += m
            total[n] += t
    if any(total[n] == 0 or match[n] == 0 for n in range(1, 5)):
        return 0.0
    log_p = sum(math.log(match[n] / total[n]) for n in range(1, 5)) / 4
    bp = 1.0 if c_len > r_len else math.exp(1 - r_len / max(1, c_len))
    return bp * math.exp(log_p)


def naive_sentence_bleu(cand, ref):
    cand, ref = cand.split(), ref.split()
    if not cand:
        return 0.0
    log_p = 0.0
    for n in range(1, 5):
        m, t = naive_clipped(cand, ref, n)
        if n >= 2:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_p += math.log(m / t)
    bp = 1.0 if len(cand) > len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * math.exp(log_p / 4)


def random_sentences(rng, n_pairs, vocab=("the", "a", "red", "chair", "sofa", "lamp", "on", "sale")):
    pairs = []
    for _ in range(n_pairs):
        cand = " ".join(rng.choice(vocab) for _ in range(rng.randrange(1, 12)))
        ref = " ".join(rng.choice(vocab) for _ in range(rng.randrange(1, 12)))
        pairs.append((cand, ref))
    return pairs


class TestBleu:
    def test_identity(self):
        assert bleu4(["the cat sat on the mat"], ["the cat sat on the mat"]) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_frozen_corpus_value(self):
        hyps = ["the cat sat on the mat", "a small red chair"]
        refs = ["the cat sat on the mat", "a small blue chair with arms"]
        assert bleu4(hyps, refs) == pytest.approx(0.6240358613403184, abs=1e-12)

    def test_frozen_clipping_case(self):
        assert bleu4(["the the the the the the"], ["the cat is on the mat"]) == 0.0

    def test_frozen_sentence_values(self):
        assert sentence_bleu4("a b c d", "a b c x") == pytest.approx(
            0.6580370064762462, abs=1e-12
        )
        assert sentence_bleu4("a b", "a b") == pytest.approx(1.0, abs=1e-12)
        assert sentence_bleu4("x y z w", "a b c d") == 0.0

    def test_empty_hypothesis(self):
        assert sentence_bleu4("", "a b c") == 0.0

    def test_corpus_matches_naive_on_random_batches(self):
        rng = random.Random(11)
        for _ in range(100):
            pairs = random_sentences(rng, rng.randrange(1, 6))
            hyps = [c for c, _ in pairs]
            refs = [r for _, r in pairs]
            expect = naive_corpus_bleu(pairs)
            assert bleu4(hyps, refs) == pytest.approx(expect, abs=1e-12)

    def test_sentence_matches_naive_on_random_pairs(self):
        rng = random.Random(12)
        for _ in range(200):
            (pair,) = random_sentences(rng, 1)
            expect = naive_sentence_bleu(*pair)
            assert sentence_bleu4(*pair) == pytest.approx(expect, abs=1e-12)

    def test_sentence_mode_is_mean_of_pairs(self):
        rng = random.Random(13)
        pairs = random_sentences(rng, 8)
        hyps = [c for c, _ in pairs]
        refs = [r for _, r in pairs]
        expect = sum(naive_sentence_bleu(c, r) for c, r in pairs) / len(pairs)
        assert bleu4(hyps, refs, mode="sentence") == pytest.approx(expect, abs=1e-12)

    def test_corpus_order_invariant(self):
        rng = random.Random(14)
        pairs = random_sentences(rng, 6)
        hyps = [c for c, _ in pairs]
        refs = [r for _, r in pairs]
        value = bleu4(hyps, refs)
        order = list(range(6))
        rng.shuffle(order)
        assert bleu4([hyps[i] for i in order], [refs[i] for i in order]) == pytest.approx(
            value, abs=1e-12
        )

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            bleu4(["a"], ["a", "b"])

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            bleu4(["a"], ["a"], mode="document")


class TestMicroF1:
    def test_frozen_value(self):
        assert micro_f1(2, 2, 1) == pytest.approx(0.5714285714285715, abs=1e-12)

    def test_edge_conventions(self):
        assert micro_f1(0, 0, 0) == 1.0
        assert micro_f1(0, 3, 0) == 0.0
        assert micro_f1(0, 0, 3) == 0.0
        assert micro_f1(5, 0, 0) == 1.0

    def test_matches_formula_on_random_counts(self):
        rng = random.Random(15)
        for _ in range(200):
            tp, fp, fn = rng.randrange(10), rng.randrange(10), rng.randrange(10)
            p = tp / (tp + fp) if tp + fp else 1.0
            r = tp / (tp + fn) if tp + fn else 1.0
            expect = 2 * p * r / (p + r) if p + r else 0.0
            assert micro_f1(tp, fp, fn) == pytest.approx(expect, abs=1e-12)


class TestActionMetrics:
    def test_frozen_perplexity(self):
        probs = [[0.5, 0.5], [0.25, 0.75], [1.0, 0.0]]
        gold = [0, 0, 0]
        acc, ppl = action_metrics(probs, gold)
        assert ppl == pytest.approx(2.0, abs=1e-12)
        assert acc == pytest.approx(2 / 3, abs=1e-12)

    def test_uniform_distribution_perplexity_is_class_count(self):
        probs = [[1 / 7] * 7] * 5
        acc, ppl = action_metrics(probs, [3] * 5)
        assert ppl == pytest.approx(7.0, rel=1e-9)

    def test_perfect_prediction(self):
        probs = [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]
        acc, ppl = action_metrics(probs, [1, 0])
        assert acc == 1.0
        assert ppl == pytest.approx(1.0, abs=1e-12)

    def test_zero_gold_probability_floored_with_warning(self):
        with pytest.warns(UserWarning):
            acc, ppl = action_metrics([[1.0, 0.0]], [1])
        assert ppl == pytest.approx(1e12, rel=1e-6)

    def test_bad_distribution_rejected(self):
        with pytest.raises(ValueError):
            action_metrics([[0.5, 0.6]], [0])
        with pytest.raises(ValueError):
            action_metrics([[0.5, 0.5]], [2])
        with pytest.raises(ValueError):
            action_metrics([], [])

    def test_matches_naive_on_random_instances(self):
        rng = random.Random(16)
        for _ in range(100):
            n, c = rng.randrange(1, 8), rng.randrange(2, 6)
            probs = []
            for _ in range(n):
                raw = [rng.random() + 1e-3 for _ in range(c)]
                s = sum(raw)
                probs.append([x / s for x in raw])
            gold = [rng.randrange(c) for _ in range(n)]
            acc, ppl = action_metrics(probs, gold)
            hits = sum(1 for p, g in zip(probs, gold) if p.index(max(p)) == g)
            expect_ppl = math.exp(-sum(math.log(p[g]) for p, g in zip(probs, gold)) / n)
            assert acc == pytest.approx(hits / n, abs=1e-12)
            assert ppl == pytest.approx(expect_ppl, rel=1e-9)


class TestAttributeMetrics:
    def test_furniture_single_label(self):
        acc, f1 = attribute_metrics([3, 5, 7], [3, 5, 9], Domain.FURNITURE)
        assert acc == pytest.approx(2 / 3, abs=1e-12)
        assert f1 == pytest.approx(2 / 3, abs=1e-12)

    def test_fashion_multilabel_pooling(self):
        pred = [(1, 1, 0), (0, 1, 0)]
        gold = [(1, 0, 0), (0, 1, 1)]
        acc, f1 = attribute_metrics(pred, gold, Domain.FASHION)
        assert acc == 0.0
        # TP 2, FP 1, FN 1 pooled
        assert f1 == pytest.approx(micro_f1(2, 1, 1), abs=1e-12)

    def test_fashion_exact_set(self):
        pred = [(1, 0, 1), (0, 0, 0)]
        gold = [(1, 0, 1), (0, 0, 0)]
        acc, f1 = attribute_metrics(pred, gold, Domain.FASHION)
        assert acc == 1.0
        assert f1 == 1.0

    def test_vector_length_mismatch(self):
        with pytest.raises(ValueError):
            attribute_metrics([(1, 0)], [(1, 0, 0)], Domain.FASHION)

    def test_matches_naive_on_random_instances(self):
        rng = random.Random(17)
        for _ in range(100):
            n = rng.randrange(1, 10)
            pred = [tuple(rng.randrange(2) for _ in range(5)) for _ in range(n)]
            gold = [tuple(rng.randrange(2) for _ in range(5)) for _ in range(n)]
            acc, f1 = attribute_metrics(pred, gold, Domain.FASHION)
            exact = sum(1 for p, g in zip(pred, gold) if p == g)
            tp = sum(a and b for p, g in zip(pred, gold) for a, b in zip(p, g))
            fp = sum(a and not b for p, g in zip(pred, gold) for a, b in zip(p, g))
            fn = sum(b and not a for p, g in zip(pred, gold) for a, b in zip(p, g))
            assert acc == pytest.approx(exact / n, abs=1e-12)
            assert f1 == pytest.approx(micro_f1(tp, fp, fn), abs=1e-12)


class TestRetrievalMetrics:
    def test_frozen_values(self):
        out = retrieval_metrics([0, 2, 4], n_candidates=100)
        assert out["recall_at_1"] == pytest.approx(1 / 3, abs=1e-12)
        assert out["recall_at_5"] == 1.0
        assert out["recall_at_10"] == 1.0
        assert out["mean_rank"] == pytest.approx(3.0, abs=1e-12)
        assert out["mrr"] == pytest.approx(0.5111111111111111, abs=1e-12)

    def test_second_frozen_case(self):
        out = retrieval_metrics([0, 1, 3], n_candidates=10)
        assert out["recall_at_1"] == pytest.approx(1 / 3, abs=1e-12)
        assert out["mean_rank"] == pytest.approx(7 / 3, abs=1e-12)
        assert out["mrr"] == pytest.approx(7 / 12, abs=1e-12)

    def test_recall_monotone_in_k(self):
        rng = random.Random(18)
        for _ in range(50):
            ranks = [rng.randrange(100) for _ in range(rng.randrange(1, 20))]
            out = retrieval_metrics(ranks, ks=(1, 5, 10, 50), n_candidates=100)
            assert (
                out["recall_at_1"]
                <= out["recall_at_5"]
                <= out["recall_at_10"]
                <= out["recall_at_50"]
                <= 1.0
            )
            assert 1.0 <= out["mean_rank"] <= 100.0
            assert 0.0 < out["mrr"] <= 1.0

    def test_out_of_range_rank_rejected(self):
        with pytest.raises(ValueError):
            retrieval_metrics([100], n_candidates=100)
        with pytest.raises(ValueError):
            retrieval_metrics([-1])
        with pytest.raises(ValueError):
            retrieval_metrics([])


def frames(*specs):
    return [BeliefFrame(intent, tuple(slots)) for intent, slots in specs]


class TestBeliefMetrics:
    def test_frozen_multiset_case(self):
        gold = [
            frames(("A", []), ("B", [])),
            frames(("A", [])),
        ]
        pred = [
            frames(("A", []), ("C", [])),
            frames(("A", []), ("A", [])),
        ]
        intent_f1, slot_f1, joint = belief_metrics(pred, gold)
        assert intent_f1 == pytest.approx(0.5714285714285715, abs=1e-12)
        assert slot_f1 == 1.0  # no slots anywhere: zero counts convention
        assert joint == 0.0

    def test_exact_match(self):
        gold = [frames(("DA:GREET", [("k", "v")]))]
        pred = [frames(("DA:GREET", [("k", "v")]))]
        assert belief_metrics(pred, gold) == (1.0, 1.0, 1.0)

    def test_slot_pairs_pool_across_frames(self):
        gold = [frames(("A", [("k1", "v1")]), ("B", [("k2", "v2")]))]
        pred = [frames(("A", [("k1", "v1"), ("k2", "v2")]), ("B", []))]
        intent_f1, slot_f1, joint = belief_metrics(pred, gold)
        assert slot_f1 == 1.0
        assert joint == 1.0  # multisets agree even though frame grouping differs

    def test_frame_order_irrelevant(self):
        gold = [frames(("A", []), ("B", []))]
        pred = [frames(("B", []), ("A", []))]
        assert belief_metrics(pred, gold)[2] == 1.0

    def test_duplicate_intents_counted_as_multiset(self):
        gold = [frames(("A", []), ("A", []))]
        pred = [frames(("A", []))]
        intent_f1, _, joint = belief_metrics(pred, gold)
        assert intent_f1 == pytest.approx(2 / 3, abs=1e-12)
        assert joint == 0.0

    def test_matches_naive_on_random_instances(self):
        rng = random.Random(19)
        intents = ["A", "B", "C"]
        kvs = [("k1", "v1"), ("k2", "v2"), ("k1", "v3")]
        for _ in range(100):
            n = rng.randrange(1, 6)
            gold, pred = [], []
            for _ in range(n):
                gold.append(
                    frames(*[
                        (rng.choice(intents), [rng.choice(kvs) for _ in range(rng.randrange(2))])
                        for _ in range(rng.randrange(1, 3))
                    ])
                )
                pred.append(
                    frames(*[
                        (rng.choice(intents), [rng.choice(kvs) for _ in range(rng.randrange(2))])
                        for _ in range(rng.randrange(3))
                    ])
                )
            intent_f1, slot_f1, joint = belief_metrics(pred, gold)

            def multiset_tp(gold_items, pred_items):
                left = list(gold_items)
                tp = 0
                for item in pred_items:
                    if item in left:
                        left.remove(item)
                        tp += 1
                return tp

            itp = ifp = ifn = stp = sfp = sfn = jhit = 0
            for g_frames, p_frames in zip(gold, pred):
                gi = [f.intent for f in g_frames]
                pi = [f.intent for f in p_frames]
                gs = [kv for f in g_frames for kv in f.slots]
                ps = [kv for f in p_frames for kv in f.slots]
                tp = multiset_tp(gi, pi)
                itp, ifp, ifn = itp + tp, ifp + len(pi) - tp, ifn + len(gi) - tp
                tp = multiset_tp(gs, ps)
                stp, sfp, sfn = stp + tp, sfp + len(ps) - tp, sfn + len(gs) - tp
                if sorted(gi) == sorted(pi) and sorted(gs) == sorted(ps):
                    jhit += 1
            assert intent_f1 == pytest.approx(micro_f1(itp, ifp, ifn), abs=1e-12)
            assert slot_f1 == pytest.approx(micro_f1(stp, sfp, sfn), abs=1e-12)
            assert joint == pytest.approx(jhit / n, abs=1e-12)


def make_turn_scores(rng, n_actions=7):
    raw = [rng.random() + 1e-3 for _ in range(n_actions)]
    s = sum(raw)
    return TurnScores(
        action_probs=tuple(x / s for x in raw),
        gold_action=rng.randrange(n_actions),
        pred_attributes=rng.randrange(60),
        gold_attributes=rng.randrange(60),
        hypothesis="a red chair",
        reference="a red chair",
        gt_rank=rng.randrange(100),
        pred_frames=(BeliefFrame("DA:GREET"),),
        gold_frames=(BeliefFrame("DA:GREET"),),
    )


class TestReport:
    def test_compose_and_serialize(self):
        rng = random.Random(20)
        turns = [make_turn_scores(rng) for _ in range(12)]
        report = compose_report(turns, Domain.FURNITURE, n_candidates=100)
        assert report.domain == "furniture"
        assert report.n_turns == 12
        again = MetricsReport.from_dict(report.to_dict())
        assert again == report

    def test_table_row_shape(self):
        rng = random.Random(21)
        turns = [make_turn_scores(rng) for _ in range(5)]
        report = compose_report(turns, Domain.FURNITURE, n_candidates=100)
        row = report.table_row()
        fields = row.split("\t")
        assert len(fields) == len(TABLE_COLUMNS)
        for cell in fields:
            float(cell)

    def test_furniture_attribute_score_is_accuracy(self):
        rng = random.Random(22)
        turns = [make_turn_scores(rng) for _ in range(5)]
        report = compose_report(turns, Domain.FURNITURE, n_candidates=100)
        assert report.attribute_score == report.attribute_accuracy

    def test_invariants_enforced(self):
        rng = random.Random(23)
        turns = [make_turn_scores(rng) for _ in range(3)]
        report = compose_report(turns, Domain.FURNITURE, n_candidates=100)
        bad = dict(report.to_dict())
        bad["bleu4"] = 1.5
        with pytest.raises(ValueError):
            MetricsReport.from_dict(bad)
