"""Closed whitespace vocabulary over serialized dialogue text.

The vocabulary is the union of the atomic special tokens and every surface
token occurring in a serialized rendering of the training corpora. Special
tokens take the lowest ids, in declaration order, so id layout is stable
across corpora; plain tokens follow in first-occurrence order. Unknown
tokens encode to ``unk_id``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import DEFAULT_MANIFESTS, Dialogue, Domain, DomainManifest
from .serializer import SerializerConfig, render_example, special_tokens

_ACT_RE = re.compile(r"^<ACT_(FURN|FASH)_\d+>$")
_BASE_SPECIALS = frozenset(special_tokens()) - {
    t for t in special_tokens() if _ACT_RE.match(t)
}


def _is_special(token: str) -> bool:
    return token in _BASE_SPECIALS or bool(_ACT_RE.match(token))


@dataclass(frozen=True)
class Vocab:
    """Immutable token table; encode/decode are pure."""

    tokens: tuple[str, ...]
    table: dict[str, int] = field(repr=False)
    special_ids: frozenset[int]
    unk_id: int

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Vocab":
        tokens = tuple(tokens)
        table = {tok: i for i, tok in enumerate(tokens)}
        if len(table) != len(tokens):
            raise ValueError("duplicate token in vocabulary")
        specials = frozenset(i for i, tok in enumerate(tokens) if _is_special(tok))
        try:
            unk_id = table["<UNK>"]
        except KeyError:
            raise ValueError("vocabulary is missing <UNK>") from None
        return cls(tokens=tokens, table=table, special_ids=specials, unk_id=unk_id)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.table

    def token_id(self, token: str) -> int:
        return self.table.get(token, self.unk_id)

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def split(self, text: str) -> list[str]:
        """Split text into surface tokens, keeping special tokens atomic."""
        out: list[str] = []
        for piece in _special_pattern().split(text):
            if not piece:
                continue
            if _is_special(piece):
                out.append(piece)
            else:
                out.extend(piece.split())
        return out

    def encode(self, text: str) -> list[int]:
        return [self.token_id(tok) for tok in self.split(text)]

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self.tokens[i] for i in ids)

    def save(self, path: str | Path) -> None:
        """Persist as a JSON array of token strings (index = id)."""
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(list(self.tokens), fh, ensure_ascii=False)

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_tokens(json.load(fh))


_pattern_cache: dict[int, re.Pattern] = {}


def _special_pattern() -> re.Pattern:
    # alternation of all literal specials plus the open-ended action-token form
    if 0 not in _pattern_cache:
        literals = sorted(_BASE_SPECIALS, key=len, reverse=True)
        alts = [re.escape(t) for t in literals] + [r"<ACT_(?:FURN|FASH)_\d+>"]
        _pattern_cache[0] = re.compile("(" + "|".join(alts) + ")")
    return _pattern_cache[0]


def build_vocab(
    corpora: Sequence[Sequence[Dialogue]],
    cfg: SerializerConfig,
    manifests: Mapping[Domain, DomainManifest] | None = None,
) -> Vocab:
    """Close the vocabulary over every serialized turn of the given corpora."""
    manifests = manifests or DEFAULT_MANIFESTS
    if not any(len(corpus) for corpus in corpora):
        raise ValueError("cannot build a vocabulary from an empty corpus")
    tokens: dict[str, None] = dict.fromkeys(special_tokens(manifests))
    for corpus in corpora:
        for dialogue in corpus:
            for turn_index in range(len(dialogue.turns)):
                rendered = render_example(dialogue, turn_index, cfg)
                tokens.update(dict.fromkeys(rendered.tokens))
    return Vocab.from_tokens(tuple(tokens))
