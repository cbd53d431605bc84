"""Greedy decoding, API prediction at the belief-end marker, and retrieval
ranking.

Generation appends the argmax token (ties broken by lowest token id) with
the belief-segment id until "<EOS>" or the budget. The classifier heads tap
the hidden state at the generated "<EOB>"; when ground-truth action feeding
is on, the gold action token is force-appended right after "<EOB>" before
the response continues. Candidate ranking scores each candidate by smoothed
sentence BLEU-4 against the generated response.
"""

from __future__ import annotations

import zlib
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import ApiAction, BeliefFrame, Dialogue, Domain
from .metrics import MetricsReport, TurnScores, compose_report, sentence_bleu4
from .model import ModelConfig, classifier_forward, forward, _softmax
from .serializer import (
    EOB_TOKEN,
    EOS_TOKEN,
    Segment,
    SerializedExample,
    SerializerConfig,
    action_token,
    build_example,
    parse_belief,
)
from .tokenizer import Vocab


@dataclass(frozen=True)
class Generation:
    """Outcome of one greedy decode."""

    token_ids: tuple[int, ...]  # full sequence: prompt + generated
    prompt_len: int
    eob_position: int | None  # absolute index of the generated "<EOB>"
    forced_position: int | None  # absolute index of the injected action token
    hit_eos: bool
    budget_exhausted: bool

    @property
    def generated_ids(self) -> tuple[int, ...]:
        return self.token_ids[self.prompt_len :]


def _greedy_loop(
    params: Mapping[str, np.ndarray],
    cfg: ModelConfig,
    prompt_ids: Sequence[int],
    segment_ids: Sequence[int],
    vocab: Vocab,
    max_new_tokens: int,
    force_after_eob: int | None,
) -> Generation:
    if len(prompt_ids) != len(segment_ids):
        raise ValueError("prompt and segment lengths differ")
    if not prompt_ids:
        raise ValueError("empty prompt")
    eob_id = vocab.token_id(EOB_TOKEN)
    eos_id = vocab.token_id(EOS_TOKEN)
    ids = list(prompt_ids)
    segs = list(segment_ids)
    eob_position: int | None = None
    forced_position: int | None = None
    hit_eos = False
    emitted = 0
    while emitted < max_new_tokens and len(ids) < cfg.max_seq_len:
        cache = forward(params, np.asarray(ids), np.asarray(segs), cfg)
        logits = cache.logits[0, -1].copy()
        if eob_position is not None:
            logits[eob_id] = -np.inf  # at most one belief-end marker
        next_id = int(np.argmax(logits))  # argmax takes the lowest id on ties
        ids.append(next_id)
        segs.append(int(Segment.BEL))
        emitted += 1
        if next_id == eos_id:
            hit_eos = True
            break
        if next_id == eob_id:
            eob_position = len(ids) - 1
            if force_after_eob is not None and len(ids) < cfg.max_seq_len:
                ids.append(force_after_eob)
                segs.append(int(Segment.BEL))
                forced_position = len(ids) - 1
    return Generation(
        token_ids=tuple(ids),
        prompt_len=len(prompt_ids),
        eob_position=eob_position,
        forced_position=forced_position,
        hit_eos=hit_eos,
        budget_exhausted=not hit_eos,
    )


def greedy_generate(
    params: Mapping[str, np.ndarray],
    cfg: ModelConfig,
    prompt_ids: Sequence[int],
    segment_ids: Sequence[int],
    vocab: Vocab,
    max_new_tokens: int = 128,
) -> Generation:
    """Plain greedy decoding from the belief prompt to "<EOS>"."""
    return _greedy_loop(params, cfg, prompt_ids, segment_ids, vocab, max_new_tokens, None)


def respond_with_gt_action(
    params: Mapping[str, np.ndarray],
    cfg: ModelConfig,
    prompt_ids: Sequence[int],
    segment_ids: Sequence[int],
    vocab: Vocab,
    action_token_id: int,
    max_new_tokens: int = 128,
) -> Generation:
    """Greedy decoding that feeds an action token right after "<EOB>".

    The caller chooses the token: the ground-truth action for teacher-forced
    response generation, or the predicted one.
    """
    return _greedy_loop(
        params, cfg, prompt_ids, segment_ids, vocab, max_new_tokens, action_token_id
    )


@dataclass(frozen=True)
class ApiPrediction:
    api: ApiAction
    action_probs: tuple[float, ...]
    attribute_probs: tuple[float, ...]


def predict_api(
    params: Mapping[str, np.ndarray],
    hidden_at_tap: np.ndarray,
    domain: Domain,
) -> ApiPrediction:
    """Classifier-head prediction from the hidden state at the tap position.

    The action is the argmax of the domain's action head. Furniture
    attributes take the argmax of the attribute head; fashion attributes
    are the labels with sigmoid probability strictly above 0.5.
    """
    h = np.asarray(hidden_at_tap, dtype=np.float64).reshape(1, -1)
    action_logits = classifier_forward(params, f"{domain.value}_action", h)[0]
    action_probs = _softmax(action_logits)
    action = int(np.argmax(action_logits))
    attr_logits = classifier_forward(params, f"{domain.value}_attribute", h)[0]
    if domain is Domain.FURNITURE:
        attr_probs = _softmax(attr_logits)
        attributes: object = int(np.argmax(attr_logits))
    else:
        attr_probs = 1.0 / (1.0 + np.exp(-attr_logits))
        attributes = tuple(int(p > 0.5) for p in attr_probs)
    return ApiPrediction(
        api=ApiAction(action=action, attributes=attributes),
        action_probs=tuple(float(p) for p in action_probs),
        attribute_probs=tuple(float(p) for p in attr_probs),
    )


def rank_candidates(generated_response: str, candidates: Sequence[str]) -> list[int]:
    """0-based rank of every candidate by BLEU against the generated response.

    Candidates are scored as hypotheses with the generated response as the
    reference, sorted descending; ties keep ascending candidate index. The
    result is a permutation: result[i] is candidate i's rank.
    """
    if not candidates:
        raise ValueError("empty candidate list")
    scores = [sentence_bleu4(c, generated_response) for c in candidates]
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], i))
    ranks = [0] * len(candidates)
    for rank, i in enumerate(order):
        ranks[i] = rank
    return ranks


def build_candidate_pool(
    dialogue_id: str,
    turn_index: int,
    gold_response: str,
    distractor_pool: Sequence[str],
    n_candidates: int = 100,
) -> tuple[list[str], int]:
    """Deterministic per-turn candidate pool: the gold plus sampled distractors.

    The RNG seed derives from the dialogue id and turn index, so pools are
    reproducible without a candidates file. Distractors identical to the
    gold response are excluded; a too-small pool falls back to sampling
    with replacement.
    """
    if n_candidates < 1:
        raise ValueError("need at least one candidate")
    rng = random.Random(zlib.crc32(f"{dialogue_id}:{turn_index}".encode("utf-8")))
    eligible = sorted({d for d in distractor_pool if d != gold_response})
    need = n_candidates - 1
    if len(eligible) >= need:
        distractors = rng.sample(eligible, need)
    elif eligible:
        distractors = [rng.choice(eligible) for _ in range(need)]
    else:
        raise ValueError("no eligible distractor responses")
    gt_index = rng.randrange(n_candidates)
    candidates = distractors[:gt_index] + [gold_response] + distractors[gt_index:]
    return candidates, gt_index


# ---------------------------------------------------------------------------
# Turn decoding and corpus evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecodedTurn:
    dialogue_id: str
    turn_index: int
    domain: Domain
    belief_text: str
    response_text: str
    belief_frames: tuple[BeliefFrame, ...]
    prediction: ApiPrediction
    generation: Generation
    no_eob: bool


def _span_text(ids: Sequence[int], vocab: Vocab) -> str:
    """Plain text of a token-id span, special tokens dropped."""
    words = [vocab.token(i) for i in ids if i not in vocab.special_ids]
    return " ".join(words)


def decode_turn(
    params: Mapping[str, np.ndarray],
    cfg: ModelConfig,
    example: SerializedExample,
    ser_cfg: SerializerConfig,
    vocab: Vocab,
    use_gt_action: bool,
    max_new_tokens: int = 128,
) -> DecodedTurn:
    """Generate and split one turn: belief, API prediction, response."""
    prompt_ids = example.tokens[: example.prompt_len]
    prompt_segs = example.segment_ids[: example.prompt_len]
    domain = example.domain
    if use_gt_action and ser_cfg.add_action:
        act_id = vocab.token_id(action_token(domain, example.action_label))
        gen = respond_with_gt_action(
            params, cfg, prompt_ids, prompt_segs, vocab, act_id, max_new_tokens
        )
    else:
        gen = greedy_generate(params, cfg, prompt_ids, prompt_segs, vocab, max_new_tokens)

    eos_id = vocab.token_id(EOS_TOKEN)
    seq = list(gen.token_ids)
    if gen.hit_eos:
        seq = seq[:-1]  # drop "<EOS>" from the text spans
    no_eob = gen.eob_position is None
    if no_eob:
        belief_ids: list[int] = []
        response_ids = seq[gen.prompt_len :]
        tap = len(gen.token_ids) - 1
    else:
        belief_ids = seq[gen.prompt_len : gen.eob_position]
        response_ids = seq[gen.eob_position + 1 :]
        tap = gen.eob_position
    response_ids = [i for i in response_ids if i != eos_id]

    belief_text = _span_text(belief_ids, vocab)
    response_text = _span_text(response_ids, vocab)
    frames = parse_belief(belief_text, ser_cfg)

    cache = forward(
        params,
        np.asarray(gen.token_ids),
        np.asarray([*example.segment_ids[: gen.prompt_len]] + [int(Segment.BEL)] * (len(gen.token_ids) - gen.prompt_len)),
        cfg,
    )
    prediction = predict_api(params, cache.hidden[0, tap], domain)
    return DecodedTurn(
        dialogue_id=example.dialogue_id,
        turn_index=example.turn_index,
        domain=domain,
        belief_text=belief_text,
        response_text=response_text,
        belief_frames=frames,
        prediction=prediction,
        generation=gen,
        no_eob=no_eob,
    )


@dataclass
class EvalResult:
    reports: dict[Domain, MetricsReport]
    predictions: list[dict]
    decoded: list[DecodedTurn] = field(repr=False)


def evaluate_corpus(
    params: Mapping[str, np.ndarray],
    cfg: ModelConfig,
    corpora: Mapping[Domain, Sequence[Dialogue]],
    ser_cfg: SerializerConfig,
    vocab: Vocab,
    use_gt_action: bool | None = None,
    n_candidates: int = 100,
    max_new_tokens: int = 128,
    candidate_pools: Mapping[tuple[str, int], tuple[Sequence[str], int]] | None = None,
) -> EvalResult:
    """Decode every turn of every dialogue and score all three sub-tasks.

    ``use_gt_action`` defaults to the serializer's action-feeding flag.
    ``candidate_pools`` maps (dialogue_id, turn_index) to a pre-built
    (candidates, gt_index) pair; missing pools are synthesized
    deterministically from the corpus' own gold responses.
    """
    if use_gt_action is None:
        use_gt_action = ser_cfg.add_action
    reports: dict[Domain, MetricsReport] = {}
    predictions: list[dict] = []
    decoded_all: list[DecodedTurn] = []
    for domain in sorted(corpora, key=lambda d: d.value):
        dialogues = corpora[domain]
        examples: list[SerializedExample] = []
        for dlg in dialogues:
            for ti in range(len(dlg.turns)):
                examples.append(build_example(dlg, ti, ser_cfg, vocab, max_len=cfg.max_seq_len))
        golds = {
            (e.dialogue_id, e.turn_index): e.gold_response for e in examples
        }
        by_id = {d.dialogue_id: d for d in dialogues}
        pool_sizes: set[int] = set()
        scores: list[TurnScores] = []
        for example in examples:
            turn = decode_turn(params, cfg, example, ser_cfg, vocab, use_gt_action, max_new_tokens)
            key = (example.dialogue_id, example.turn_index)
            if candidate_pools is not None and key in candidate_pools:
                candidates, gt_index = candidate_pools[key]
                candidates = list(candidates)
            else:
                distractors = [r for k, r in golds.items() if k != key]
                candidates, gt_index = build_candidate_pool(
                    example.dialogue_id, example.turn_index, example.gold_response,
                    distractors, n_candidates,
                )
            pool_sizes.add(len(candidates))
            ranks = rank_candidates(turn.response_text, candidates)
            gt_rank = ranks[gt_index]
            gold_frames = by_id[example.dialogue_id].turns[example.turn_index].belief
            scores.append(
                TurnScores(
                    action_probs=turn.prediction.action_probs,
                    gold_action=example.action_label,
                    pred_attributes=turn.prediction.api.attributes,
                    gold_attributes=example.attribute_label,
                    hypothesis=turn.response_text,
                    reference=example.gold_response,
                    gt_rank=gt_rank,
                    pred_frames=turn.belief_frames,
                    gold_frames=tuple(gold_frames),
                )
            )
            predictions.append(
                {
                    "dialogue_id": example.dialogue_id,
                    "turn": example.turn_index,
                    "domain": domain.value,
                    "belief_frames": [f.to_dict() for f in turn.belief_frames],
                    "action": turn.prediction.api.action,
                    "attributes": turn.prediction.api.attributes
                    if isinstance(turn.prediction.api.attributes, int)
                    else list(turn.prediction.api.attributes),
                    "response": turn.response_text,
                    "gt_rank": gt_rank,
                    "candidate_ranks": ranks,
                    "no_eob": turn.no_eob,
                }
            )
            decoded_all.append(turn)
        if len(pool_sizes) != 1:
            raise ValueError(f"candidate pools differ in size: {sorted(pool_sizes)}")
        reports[domain] = compose_report(scores, domain, n_candidates=pool_sizes.pop())
    return EvalResult(reports=reports, predictions=predictions, decoded=decoded_all)
