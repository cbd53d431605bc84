"""Flat-text serialization of dialogue turns and its partial inverse.

One training example covers one turn. Its surface form is

    [domain indicator]
    { per windowed turn:  System : [action token] <previous response>
                          User : <utterance>
                          <SOM> <flattened visual objects> <EOM> }
    => Belief State : <belief> <EOB> [gold action token] <response> <EOS>

where the window holds the last ``history_turns`` turns ending at the current
one and the square-bracketed parts appear only under the matching feature
flag. Spans carry segment ids (system / user / multimodal / belief) and a
loss mask; with history-loss masking on, every token strictly before the
current turn's "User" prefix is excluded from the LM loss.

Everything here works on whitespace-separated surface tokens. Encoding to
ids is the tokenizer's job; ``build_example`` simply composes the two.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .corpus import (
    DEFAULT_MANIFESTS,
    INTENT_RE,
    ApiAction,
    BeliefFrame,
    Dialogue,
    Domain,
    DomainManifest,
    VisualObject,
)


class SerializerError(Exception):
    """Base class for serialization failures."""


class SequenceTooLongError(SerializerError):
    """A serialized example exceeds the model's maximum sequence length.

    Callers are expected to report and skip the example, never truncate it:
    truncation could silently drop the loss-bearing suffix.
    """

    def __init__(self, dialogue_id: str, turn_index: int, length: int, max_len: int):
        self.dialogue_id = dialogue_id
        self.turn_index = turn_index
        self.length = length
        self.max_len = max_len
        super().__init__(
            f"serialized turn {turn_index} of {dialogue_id!r} has {length} tokens, "
            f"model maximum is {max_len}"
        )


class Segment(enum.IntEnum):
    """Segment vocabulary for the segment embedding."""

    SYS = 0
    USER = 1
    BEL = 2
    MUL = 3


# Atomic special tokens. Order is load-bearing: the tokenizer assigns the
# lowest ids in exactly this order.
UNK_TOKEN = "<UNK>"
DOMAIN_TOKENS: dict[Domain, str] = {Domain.FURNITURE: "<FURN>", Domain.FASHION: "<FASH>"}
SOM_TOKEN = "<SOM>"
EOM_TOKEN = "<EOM>"
EOB_TOKEN = "<EOB>"
EOS_TOKEN = "<EOS>"
SEGMENT_TOKENS = ("<SEG_SYS>", "<SEG_USER>", "<SEG_BEL>", "<SEG_MUL>")

# Fixed plain-text constants of the format (not atomic: they tokenize into
# ordinary words).
ROLE_SYSTEM = "System :"
ROLE_USER = "User :"
BELIEF_PROMPT = "=> Belief State :"

_ACT_DOMAIN_TAGS = {Domain.FURNITURE: "FURN", Domain.FASHION: "FASH"}


def action_token(domain: Domain, action_index: int) -> str:
    """Dedicated special token for one domain's action class."""
    if action_index < 0:
        raise ValueError(f"action index must be >= 0, got {action_index}")
    return f"<ACT_{_ACT_DOMAIN_TAGS[domain]}_{action_index}>"


def special_tokens(
    manifests: Mapping[Domain, DomainManifest] | None = None,
) -> tuple[str, ...]:
    """All atomic special tokens, in id-assignment order."""
    manifests = manifests or DEFAULT_MANIFESTS
    tokens = [
        UNK_TOKEN,
        DOMAIN_TOKENS[Domain.FURNITURE],
        DOMAIN_TOKENS[Domain.FASHION],
        SOM_TOKEN,
        EOM_TOKEN,
        EOB_TOKEN,
        EOS_TOKEN,
        *SEGMENT_TOKENS,
    ]
    for domain in (Domain.FURNITURE, Domain.FASHION):
        n = manifests[domain].n_actions if domain in manifests else 0
        tokens.extend(action_token(domain, i) for i in range(n))
    return tuple(tokens)


SPECIAL_TOKENS = special_tokens()


@dataclass(frozen=True)
class SerializerConfig:
    """Serialization feature switches.

    ``intent_vocab`` is the closed set of canonical intents used to map
    split-form intents back to colon/dot form when parsing generated belief
    text; leave empty to keep unrecognized intents verbatim.
    """

    history_turns: int = 2
    split_intent: bool = True
    segment_embedding: bool = True
    add_action: bool = True
    mask_history_loss: bool = True
    multi_domain: bool = True
    intent_vocab: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.history_turns < 1:
            raise ValueError(f"history_turns must be >= 1, got {self.history_turns}")

    def to_dict(self) -> dict:
        return {
            "history_turns": self.history_turns,
            "split_intent": self.split_intent,
            "segment_embedding": self.segment_embedding,
            "add_action": self.add_action,
            "mask_history_loss": self.mask_history_loss,
            "multi_domain": self.multi_domain,
            "intent_vocab": list(self.intent_vocab),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SerializerConfig":
        d = dict(d)
        d["intent_vocab"] = tuple(d.get("intent_vocab", ()))
        return cls(**d)


# ---------------------------------------------------------------------------
# Text pieces
# ---------------------------------------------------------------------------


def flatten_visual(objects: Sequence[VisualObject]) -> str:
    """Render visible items as text, input order preserved."""
    parts = []
    for obj in objects:
        piece = (
            f"{obj.object_id} : pos {obj.position} "
            f"color [ {' '.join(obj.colors)} ] "
            f"class_name {obj.class_name} "
            f"decor_style [ {' '.join(obj.decor_styles)} ]"
        )
        for key, values in obj.extra:
            piece += f" {key} [ {' '.join(values)} ]"
        parts.append(piece)
    return " ".join(parts)


def split_intent(intent: str) -> str:
    """Lowercase an intent and split its separators into spaces.

    The leading "DA" becomes the word "intent":
    "DA:ASK:GET:FURNITURE.dimensions" -> "intent ask get furniture dimensions".
    """
    if not INTENT_RE.match(intent) and intent != "DA":
        raise ValueError(f"malformed intent {intent!r}")
    words = re.split(r"[:.]", intent)
    words[0] = "intent"
    return " ".join(words).lower()


def format_belief(frames: Sequence[BeliefFrame], cfg: SerializerConfig) -> str:
    """Render belief frames as `INTENT [ k1 = v1, k2 = v2 ]` groups."""
    parts = []
    for frame in frames:
        intent = split_intent(frame.intent) if cfg.split_intent else frame.intent
        slots = ", ".join(f"{k} = {v}" for k, v in frame.slots)
        parts.append(f"{intent} [ {slots} ]" if slots else f"{intent} [ ]")
    return " ".join(parts)


def _split_form_table(intent_vocab: Sequence[str]) -> dict[tuple[str, ...], str]:
    return {tuple(split_intent(i).split()): i for i in intent_vocab}


def _recover_intent(words: list[str], cfg: SerializerConfig) -> str | None:
    """Map an intent token span back to canonical form (best effort)."""
    if not cfg.split_intent:
        # canonical form is a single token; tolerate leading junk
        return words[-1] if words else None
    if "intent" in words:
        words = words[words.index("intent"):]
    elif not words:
        return None
    table = _split_form_table(cfg.intent_vocab)
    span = tuple(words)
    if span in table:
        return table[span]
    # longest known split form that prefixes the span
    best = None
    for known, canonical in table.items():
        if len(known) <= len(span) and span[: len(known)] == known:
            if best is None or len(known) > len(best[0]):
                best = (known, canonical)
    if best is not None:
        return best[1]
    return " ".join(words)  # out of vocabulary: keep verbatim in split form


def parse_belief(text: str, cfg: SerializerConfig) -> tuple[BeliefFrame, ...]:
    """Parse generated belief text; tolerant inverse of :func:`format_belief`.

    Greedy left-to-right scan for `INTENT [ slots ]` groups. An unterminated
    final group is closed implicitly; malformed slot pairs are dropped one by
    one; a group with no recoverable intent is dropped whole. Never raises.
    """
    tokens = text.split()
    frames: list[BeliefFrame] = []
    pos = 0
    while True:
        try:
            open_at = tokens.index("[", pos)
        except ValueError:
            break
        close_at = open_at + 1
        while close_at < len(tokens) and tokens[close_at] != "]":
            close_at += 1
        intent = _recover_intent(tokens[pos:open_at], cfg)
        if intent is not None:
            slots = _parse_slots(tokens[open_at + 1 : close_at])
            frames.append(BeliefFrame(intent=intent, slots=slots))
        pos = close_at + 1
    return tuple(frames)


def _parse_slots(tokens: list[str]) -> tuple[tuple[str, str], ...]:
    entries: list[list[str]] = [[]]
    for tok in tokens:
        if tok.endswith(",") and len(tok) > 1:
            entries[-1].append(tok[:-1])
            entries.append([])
        elif tok == ",":
            entries.append([])
        else:
            entries[-1].append(tok)
    slots = []
    for entry in entries:
        if "=" not in entry:
            continue
        eq = entry.index("=")
        key, value = " ".join(entry[:eq]), " ".join(entry[eq + 1 :])
        if key and value:
            slots.append((key, value))
    return tuple(slots)


# ---------------------------------------------------------------------------
# Example assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RenderedExample:
    """One serialized turn at the surface-token level."""

    tokens: tuple[str, ...]
    segment_ids: tuple[int, ...]
    loss_mask: tuple[bool, ...]
    eob_index: int
    prompt_len: int  # prefix length through the belief prompt tokens
    action_label: int
    attribute_label: int | tuple[int, ...]
    domain: Domain
    dialogue_id: str
    turn_index: int
    gold_belief: tuple[BeliefFrame, ...]
    gold_response: str


@dataclass(frozen=True)
class SerializedExample:
    """A rendered example encoded to token ids."""

    tokens: tuple[int, ...]
    segment_ids: tuple[int, ...]
    loss_mask: tuple[bool, ...]
    eob_index: int
    prompt_len: int
    action_label: int
    attribute_label: int | tuple[int, ...]
    domain: Domain
    dialogue_id: str
    turn_index: int
    gold_belief: tuple[BeliefFrame, ...]
    gold_response: str


def render_example(
    dialogue: Dialogue, turn_index: int, cfg: SerializerConfig
) -> RenderedExample:
    """Serialize one turn to surface tokens, segments, and the loss mask."""
    turns = dialogue.turns
    if not 0 <= turn_index < len(turns):
        raise IndexError(
            f"turn index {turn_index} out of range for {dialogue.dialogue_id!r} "
            f"with {len(turns)} turns"
        )

    # (text, segment, in_history) spans; in_history marks spans masked out
    # of the LM loss when history masking is on
    spans: list[tuple[str, Segment, bool]] = []
    if cfg.multi_domain:
        spans.append((DOMAIN_TOKENS[dialogue.domain], Segment.SYS, True))

    start = max(0, turn_index - cfg.history_turns + 1)
    for j in range(start, turn_index + 1):
        history = j < turn_index
        if j > 0:
            # the system slot of turn j replays the previous turn's response;
            # it stays masked even inside the current turn's block
            spans.append((ROLE_SYSTEM, Segment.SYS, True))
            if cfg.add_action:
                prev = turns[j - 1].action.action
                spans.append((action_token(dialogue.domain, prev), Segment.SYS, True))
            spans.append((turns[j - 1].system_response, Segment.SYS, True))
        spans.append((ROLE_USER, Segment.USER, history))
        spans.append((turns[j].user_utterance, Segment.USER, history))
        spans.append((SOM_TOKEN, Segment.MUL, history))
        if turns[j].visual:
            spans.append((flatten_visual(turns[j].visual), Segment.MUL, history))
        spans.append((EOM_TOKEN, Segment.MUL, history))

    current = turns[turn_index]
    prompt_spans = len(spans) + 1
    spans.append((BELIEF_PROMPT, Segment.BEL, False))
    belief_text = format_belief(current.belief, cfg)
    if belief_text:
        spans.append((belief_text, Segment.BEL, False))
    eob_span = len(spans)
    spans.append((EOB_TOKEN, Segment.BEL, False))
    if cfg.add_action:
        spans.append((action_token(dialogue.domain, current.action.action), Segment.BEL, False))
    spans.append((current.system_response, Segment.BEL, False))
    spans.append((EOS_TOKEN, Segment.BEL, False))

    tokens: list[str] = []
    segment_ids: list[int] = []
    loss_mask: list[bool] = []
    eob_index = prompt_len = -1
    for si, (text, segment, in_history) in enumerate(spans):
        if si == eob_span:
            eob_index = len(tokens)
        words = text.split()
        tokens.extend(words)
        segment_ids.extend([int(segment)] * len(words))
        keep = (not in_history) if cfg.mask_history_loss else True
        loss_mask.extend([keep] * len(words))
        if si == prompt_spans - 1:
            prompt_len = len(tokens)

    return RenderedExample(
        tokens=tuple(tokens),
        segment_ids=tuple(segment_ids),
        loss_mask=tuple(loss_mask),
        eob_index=eob_index,
        prompt_len=prompt_len,
        action_label=current.action.action,
        attribute_label=current.action.attributes,
        domain=dialogue.domain,
        dialogue_id=dialogue.dialogue_id,
        turn_index=turn_index,
        gold_belief=current.belief,
        gold_response=" ".join(current.system_response.split()),
    )


def build_example(
    dialogue: Dialogue,
    turn_index: int,
    cfg: SerializerConfig,
    vocab,
    max_len: int | None = None,
) -> SerializedExample:
    """Render one turn and encode it with ``vocab``.

    Raises :class:`SequenceTooLongError` when the result exceeds ``max_len``.
    """
    rendered = render_example(dialogue, turn_index, cfg)
    if max_len is not None and len(rendered.tokens) > max_len:
        raise SequenceTooLongError(
            dialogue.dialogue_id, turn_index, len(rendered.tokens), max_len
        )
    ids = tuple(vocab.encode(" ".join(rendered.tokens)))
    assert len(ids) == len(rendered.tokens)
    return SerializedExample(
        tokens=ids,
        segment_ids=rendered.segment_ids,
        loss_mask=rendered.loss_mask,
        eob_index=rendered.eob_index,
        prompt_len=rendered.prompt_len,
        action_label=rendered.action_label,
        attribute_label=rendered.attribute_label,
        domain=rendered.domain,
        dialogue_id=rendered.dialogue_id,
        turn_index=rendered.turn_index,
        gold_belief=rendered.gold_belief,
        gold_response=rendered.gold_response,
    )


def context_prompt(
    dialogue: Dialogue,
    turn_index: int,
    cfg: SerializerConfig,
    vocab,
    max_len: int | None = None,
) -> tuple[int, ...]:
    """Inference-time prefix: the example truncated after the belief prompt."""
    example = build_example(dialogue, turn_index, cfg, vocab, max_len=max_len)
    return example.tokens[: example.prompt_len]
