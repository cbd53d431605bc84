"""Evaluation metrics for the three sub-tasks.

API prediction is scored with action accuracy, attribute accuracy / micro-F1,
and action perplexity. Response generation is scored with corpus BLEU-4 and,
via candidate ranking, Recall@K, mean rank, and MRR. Belief tracking is
scored with intent F1, slot F1, and joint accuracy over per-turn multisets.

All functions are pure; identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import Domain
from .serializer import BeliefFrame

#: Column heads for the plain-text score row, in report order.
TABLE_COLUMNS = (
    "Act.Acc",
    "Attr.Score",
    "Act.Perp",
    "BLEU-4",
    "R@1",
    "R@5",
    "R@10",
    "MeanRank",
    "MRR",
    "IntentF1",
    "SlotF1",
    "Joint",
)

_GOLD_PROB_FLOOR = 1e-12


def micro_f1(tp: int, fp: int, fn: int) -> float:
    """Micro-averaged F1 from pooled counts.

    With nothing predicted, precision defaults to 1; with nothing gold,
    recall defaults to 1 (so empty-vs-empty scores a perfect 1.0).
    """
    precision = tp / (tp + fp) if tp + fp > 0 else 1.0
    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _pair_counts(hyp: Sequence[str], ref: Sequence[str], n: int) -> tuple[int, int]:
    """Clipped n-gram matches and total hypothesis n-grams for one pair."""
    hyp_counts = _ngrams(hyp, n)
    ref_counts = _ngrams(ref, n)
    match = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
    return match, max(0, len(hyp) - n + 1)


def _sentence_bleu(hyp: Sequence[str], ref: Sequence[str]) -> float:
    if not hyp:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        match, total = _pair_counts(hyp, ref, n)
        if n >= 2:  # add-one smoothing for the higher orders
            match += 1
            total += 1
        if match == 0:
            return 0.0
        log_sum += math.log(match / total)
    c, r = len(hyp), len(ref)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / 4.0)


def bleu4(
    hypotheses: Sequence[str],
    references: Sequence[str],
    mode: str = "corpus",
) -> float:
    """BLEU-4 on whitespace tokens, in [0, 1].

    Corpus mode pools clipped n-gram matches over all pairs before taking
    the geometric mean; a pooled zero precision gives 0. Sentence mode
    applies add-one smoothing to the order-2..4 counts of each pair and
    averages the per-pair scores.
    """
    if mode not in ("corpus", "sentence"):
        raise ValueError(f"unknown BLEU mode {mode!r}")
    if not hypotheses:
        raise ValueError("at least one hypothesis is required")
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis/reference count mismatch")
    pairs = [(h.split(), r.split()) for h, r in zip(hypotheses, references)]
    if mode == "sentence":
        return float(np.mean([_sentence_bleu(h, r) for h, r in pairs]))
    c = sum(len(h) for h, _ in pairs)
    r = sum(len(rf) for _, rf in pairs)
    if c == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        match = total = 0
        for hyp, ref in pairs:
            m, t = _pair_counts(hyp, ref, n)
            match += m
            total += t
        if match == 0 or total == 0:
            return 0.0
        log_sum += math.log(match / total)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / 4.0)


def sentence_bleu4(hypothesis: str, reference: str) -> float:
    """Smoothed BLEU-4 of a single pair (the candidate-ranking scorer)."""
    return _sentence_bleu(hypothesis.split(), reference.split())


# ---------------------------------------------------------------------------
# API metrics
# ---------------------------------------------------------------------------


def action_metrics(
    probabilities: Sequence[Sequence[float]], gold: Sequence[int]
) -> tuple[float, float]:
    """Accuracy and perplexity of the gold action under predicted distributions.

    Perplexity is exp of the negated mean log probability assigned to the
    gold action. Zero gold probabilities are floored at 1e-12 and flagged
    with a warning.
    """
    if len(probabilities) != len(gold):
        raise ValueError("probability/gold length mismatch")
    if not gold:
        raise ValueError("no turns to score")
    probs = [np.asarray(p, dtype=np.float64) for p in probabilities]
    for i, p in enumerate(probs):
        if abs(float(p.sum()) - 1.0) > 1e-6:
            raise ValueError(f"probabilities of turn {i} sum to {p.sum()!r}, not 1")
        if not (0 <= gold[i] < p.size):
            raise ValueError(f"gold action {gold[i]} out of range at turn {i}")
    hits = sum(int(np.argmax(p)) == g for p, g in zip(probs, gold))
    floored = 0
    total_log = 0.0
    for p, g in zip(probs, gold):
        pg = float(p[g])
        if pg < _GOLD_PROB_FLOOR:
            pg = _GOLD_PROB_FLOOR
            floored += 1
        total_log += math.log(pg)
    if floored:
        warnings.warn(f"floored zero gold-action probability on {floored} turn(s)")
    perplexity = math.exp(-total_log / len(gold))
    return hits / len(gold), perplexity


def attribute_metrics(
    predictions: Sequence, gold: Sequence, domain: Domain
) -> tuple[float, float]:
    """Attribute accuracy and micro-F1.

    Furniture attributes are single labels: accuracy over the label plus a
    one-vs-all micro-F1. Fashion attributes are 0/1 vectors: exact-set
    accuracy plus micro-F1 with TP/FP/FN pooled across labels and turns.
    """
    if len(predictions) != len(gold):
        raise ValueError("prediction/gold length mismatch")
    if not gold:
        raise ValueError("no turns to score")
    tp = fp = fn = 0
    exact = 0
    if domain is Domain.FURNITURE:
        for p, g in zip(predictions, gold):
            if int(p) == int(g):
                tp += 1
                exact += 1
            else:
                fp += 1
                fn += 1
    else:
        for p, g in zip(predictions, gold):
            pv = [int(x) for x in p]
            gv = [int(x) for x in g]
            if len(pv) != len(gv):
                raise ValueError("fashion attribute vectors differ in length")
            if pv == gv:
                exact += 1
            for a, b in zip(pv, gv):
                if a and b:
                    tp += 1
                elif a and not b:
                    fp += 1
                elif b and not a:
                    fn += 1
    return exact / len(gold), micro_f1(tp, fp, fn)


# ---------------------------------------------------------------------------
# Retrieval metrics
# ---------------------------------------------------------------------------


def retrieval_metrics(
    gt_ranks: Sequence[int],
    ks: Sequence[int] = (1, 5, 10),
    n_candidates: int = 100,
) -> dict[str, float]:
    """Recall@K, mean rank (1-based), and MRR from 0-based gold ranks."""
    if not gt_ranks:
        raise ValueError("no ranks to score")
    for rank in gt_ranks:
        if not (0 <= rank < n_candidates):
            raise ValueError(f"rank {rank} out of range [0, {n_candidates})")
    n = len(gt_ranks)
    out: dict[str, float] = {}
    for k in ks:
        out[f"recall_at_{k}"] = sum(rank < k for rank in gt_ranks) / n
    out["mean_rank"] = sum(rank + 1 for rank in gt_ranks) / n
    out["mrr"] = sum(1.0 / (rank + 1) for rank in gt_ranks) / n
    return out


# ---------------------------------------------------------------------------
# Belief metrics
# ---------------------------------------------------------------------------


def _turn_multisets(frames: Sequence[BeliefFrame]) -> tuple[Counter, Counter]:
    intents = Counter(f.intent for f in frames)
    slots = Counter((k, v) for f in frames for k, v in f.slots)
    return intents, slots


def belief_metrics(
    predicted: Sequence[Sequence[BeliefFrame]],
    gold: Sequence[Sequence[BeliefFrame]],
) -> tuple[float, float, float]:
    """Intent F1, slot F1, and joint accuracy over per-turn multisets.

    Intents are compared as multisets of canonical intent strings, slots as
    multisets of (key, value) pairs pooled over a turn's frames; both are
    micro-averaged over turns. A turn is jointly correct when both multisets
    match gold exactly.
    """
    if len(predicted) != len(gold):
        raise ValueError("predicted/gold turn count mismatch")
    if not gold:
        raise ValueError("no turns to score")
    itp = ifp = ifn = stp = sfp = sfn = 0
    joint = 0
    for pred_frames, gold_frames in zip(predicted, gold):
        pi, ps = _turn_multisets(pred_frames)
        gi, gs = _turn_multisets(gold_frames)
        i_hit = sum((pi & gi).values())
        s_hit = sum((ps & gs).values())
        itp += i_hit
        ifp += sum(pi.values()) - i_hit
        ifn += sum(gi.values()) - i_hit
        stp += s_hit
        sfp += sum(ps.values()) - s_hit
        sfn += sum(gs.values()) - s_hit
        if pi == gi and ps == gs:
            joint += 1
    return (
        micro_f1(itp, ifp, ifn),
        micro_f1(stp, sfp, sfn),
        joint / len(gold),
    )


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TurnScores:
    """Per-turn raw material for a MetricsReport."""

    action_probs: tuple[float, ...]
    gold_action: int
    pred_attributes: object  # int for furniture, 0/1 vector for fashion
    gold_attributes: object
    hypothesis: str
    reference: str
    gt_rank: int
    pred_frames: tuple[BeliefFrame, ...]
    gold_frames: tuple[BeliefFrame, ...]


@dataclass(frozen=True)
class MetricsReport:
    """One evaluated corpus slice, one row of the score table."""

    domain: str
    n_turns: int
    n_candidates: int
    action_accuracy: float
    attribute_accuracy: float
    attribute_f1: float
    attribute_score: float
    action_perplexity: float
    bleu4: float
    recall_at_1: float
    recall_at_5: float
    recall_at_10: float
    mean_rank: float
    mrr: float
    intent_f1: float
    slot_f1: float
    joint_accuracy: float

    def __post_init__(self) -> None:
        rates = {
            "action_accuracy": self.action_accuracy,
            "attribute_accuracy": self.attribute_accuracy,
            "attribute_f1": self.attribute_f1,
            "attribute_score": self.attribute_score,
            "bleu4": self.bleu4,
            "recall_at_1": self.recall_at_1,
            "recall_at_5": self.recall_at_5,
            "recall_at_10": self.recall_at_10,
            "mrr": self.mrr,
            "intent_f1": self.intent_f1,
            "slot_f1": self.slot_f1,
            "joint_accuracy": self.joint_accuracy,
        }
        for name, value in rates.items():
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} = {value} outside [0, 1]")
        if self.n_turns < 1:
            raise ValueError("a report needs at least one turn")
        if self.action_perplexity < 1.0:
            raise ValueError(f"perplexity {self.action_perplexity} below 1")
        if not (1.0 <= self.mean_rank <= self.n_candidates):
            raise ValueError(f"mean_rank {self.mean_rank} outside [1, n_candidates]")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def table_row(self) -> str:
        """Tab-separated values in TABLE_COLUMNS order, 4 decimals."""
        values = (
            self.action_accuracy,
            self.attribute_score,
            self.action_perplexity,
            self.bleu4,
            self.recall_at_1,
            self.recall_at_5,
            self.recall_at_10,
            self.mean_rank,
            self.mrr,
            self.intent_f1,
            self.slot_f1,
            self.joint_accuracy,
        )
        return "\t".join(f"{v:.4f}" for v in values)

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricsReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def compose_report(
    turns: Sequence[TurnScores], domain: Domain, n_candidates: int = 100
) -> MetricsReport:
    """Score every sub-task over the given turns and assemble the row.

    ``attribute_score`` follows the per-domain convention of the score
    table: accuracy for furniture, micro-F1 for fashion. Both values are
    always present as ``attribute_accuracy`` / ``attribute_f1``.
    """
    if not turns:
        raise ValueError("no turns to score")
    accuracy, perplexity = action_metrics(
        [t.action_probs for t in turns], [t.gold_action for t in turns]
    )
    attr_acc, attr_f1 = attribute_metrics(
        [t.pred_attributes for t in turns], [t.gold_attributes for t in turns], domain
    )
    blue = bleu4([t.hypothesis for t in turns], [t.reference for t in turns])
    ranks = retrieval_metrics([t.gt_rank for t in turns], n_candidates=n_candidates)
    intent_f1, slot_f1, joint = belief_metrics(
        [t.pred_frames for t in turns], [t.gold_frames for t in turns]
    )
    return MetricsReport(
        domain=domain.value,
        n_turns=len(turns),
        n_candidates=n_candidates,
        action_accuracy=accuracy,
        attribute_accuracy=attr_acc,
        attribute_f1=attr_f1,
        attribute_score=attr_acc if domain is Domain.FURNITURE else attr_f1,
        action_perplexity=perplexity,
        bleu4=blue,
        recall_at_1=ranks["recall_at_1"],
        recall_at_5=ranks["recall_at_5"],
        recall_at_10=ranks["recall_at_10"],
        mean_rank=ranks["mean_rank"],
        mrr=ranks["mrr"],
        intent_f1=intent_f1,
        slot_f1=slot_f1,
        joint_accuracy=joint,
    )
