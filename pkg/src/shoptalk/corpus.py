"""Dialogue data model, JSONL ingestion, validation, and synthetic corpora.

All types are frozen dataclasses and safe to share across threads. Corpora
persist as UTF-8 JSONL, one dialogue object per line:

    {"dialogue_id": str, "domain": "furniture"|"fashion",
     "turns": [{"user": str, "system": str,
                "action": {"name": str, "attributes": [str]},
                "visual": [{"id": str, "pos": str, "color": [str],
                            "class_name": str, "decor_style": [str], ...}],
                "belief": [{"intent": str, "slots": [[str, str]]}]}]}

Extra keys on a visual object (beyond the five named ones) are kept as an
ordered attribute map. For the fashion domain, ``action.attributes`` may be
given either as attribute names or as a raw 0/1 vector.

Action and attribute vocabularies are per-domain manifests: ordered lists of
class names, class index = list position.
"""

from __future__ import annotations

import enum
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class Domain(enum.Enum):
    """The two shopping domains a dialogue can belong to."""

    FURNITURE = "furniture"
    FASHION = "fashion"


class CorpusError(Exception):
    """Base class for corpus ingestion failures."""


class SchemaError(CorpusError):
    """A JSONL line does not match the dialogue schema.

    Carries the 1-based line number and a dotted field path.
    """

    def __init__(self, message: str, line: int | None = None, path: str = ""):
        self.line = line
        self.path = path
        where = f"line {line}" if line is not None else "input"
        at = f" at {path}" if path else ""
        super().__init__(f"{where}{at}: {message}")


class InvariantError(CorpusError):
    """A structurally valid dialogue violates a data invariant."""


# intent grammar: DA(:SEGMENT)+(.SUFFIX)? with whitespace-free segments
INTENT_RE = re.compile(r"^DA(:[^:.\s]+)+(\.\S+)?$")

_SLOT_FORBIDDEN = set("=,[]")


@dataclass(frozen=True)
class DomainManifest:
    """Ordered action/attribute vocabularies for one domain."""

    domain: Domain
    actions: tuple[str, ...]
    attributes: tuple[str, ...]

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    def action_index(self, name: str) -> int:
        try:
            return self.actions.index(name)
        except ValueError:
            raise KeyError(f"unknown {self.domain.value} action {name!r}") from None

    def attribute_index(self, name: str) -> int:
        try:
            return self.attributes.index(name)
        except ValueError:
            raise KeyError(f"unknown {self.domain.value} attribute {name!r}") from None

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.value,
            "actions": list(self.actions),
            "attributes": list(self.attributes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DomainManifest":
        return cls(
            domain=Domain(d["domain"]),
            actions=tuple(d["actions"]),
            attributes=tuple(d["attributes"]),
        )


@dataclass(frozen=True)
class VisualObject:
    """One item visible in a turn, already described as text."""

    object_id: str
    position: str
    colors: tuple[str, ...]
    class_name: str
    decor_styles: tuple[str, ...]
    extra: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def to_dict(self) -> dict:
        d: dict = {
            "id": self.object_id,
            "pos": self.position,
            "color": list(self.colors),
            "class_name": self.class_name,
            "decor_style": list(self.decor_styles),
        }
        for key, values in self.extra:
            d[key] = list(values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VisualObject":
        named = {"id", "pos", "color", "class_name", "decor_style"}
        extra = tuple(
            (k, tuple(str(v) for v in vs)) for k, vs in d.items() if k not in named
        )
        return cls(
            object_id=d["id"],
            position=d["pos"],
            colors=tuple(d["color"]),
            class_name=d["class_name"],
            decor_styles=tuple(d["decor_style"]),
            extra=extra,
        )


@dataclass(frozen=True)
class BeliefFrame:
    """One dialog act: an intent plus its slot key/value pairs."""

    intent: str
    slots: tuple[tuple[str, str], ...] = ()

    def to_dict(self) -> dict:
        return {"intent": self.intent, "slots": [list(s) for s in self.slots]}

    @classmethod
    def from_dict(cls, d: dict) -> "BeliefFrame":
        return cls(
            intent=d["intent"],
            slots=tuple((str(k), str(v)) for k, v in d.get("slots", [])),
        )


@dataclass(frozen=True)
class ApiAction:
    """Gold API call of a turn.

    ``attributes`` is a single class index for furniture and a 0/1 vector of
    length 7 for fashion (multi-label).
    """

    action: int
    attributes: int | tuple[int, ...]

    def to_dict(self, manifest: DomainManifest) -> dict:
        if manifest.domain is Domain.FURNITURE:
            names = [manifest.attributes[int(self.attributes)]]
        else:
            names = [
                manifest.attributes[i]
                for i, bit in enumerate(self.attributes)
                if bit
            ]
        return {"name": manifest.actions[self.action], "attributes": names}

    @classmethod
    def from_dict(cls, d: dict, manifest: DomainManifest) -> "ApiAction":
        action = manifest.action_index(d["name"])
        attrs = d.get("attributes", [])
        if manifest.domain is Domain.FURNITURE:
            if len(attrs) != 1:
                raise KeyError(
                    f"furniture action needs exactly one attribute, got {len(attrs)}"
                )
            return cls(action=action, attributes=manifest.attribute_index(attrs[0]))
        # fashion: either attribute names or a raw 0/1 vector
        if attrs and all(isinstance(a, int) for a in attrs):
            return cls(action=action, attributes=tuple(attrs))
        vector = [0] * manifest.n_attributes
        for name in attrs:
            vector[manifest.attribute_index(name)] = 1
        return cls(action=action, attributes=tuple(vector))


@dataclass(frozen=True)
class Turn:
    """One exchange: user utterance, system response, API call, visible items,
    and the per-turn belief state (never accumulated across turns)."""

    user_utterance: str
    system_response: str
    action: ApiAction
    visual: tuple[VisualObject, ...] = ()
    belief: tuple[BeliefFrame, ...] = ()

    def to_dict(self, manifest: DomainManifest) -> dict:
        return {
            "user": self.user_utterance,
            "system": self.system_response,
            "action": self.action.to_dict(manifest),
            "visual": [v.to_dict() for v in self.visual],
            "belief": [b.to_dict() for b in self.belief],
        }

    @classmethod
    def from_dict(cls, d: dict, manifest: DomainManifest) -> "Turn":
        return cls(
            user_utterance=d["user"],
            system_response=d["system"],
            action=ApiAction.from_dict(d["action"], manifest),
            visual=tuple(VisualObject.from_dict(v) for v in d.get("visual", [])),
            belief=tuple(BeliefFrame.from_dict(b) for b in d.get("belief", [])),
        )


@dataclass(frozen=True)
class Dialogue:
    """A multi-turn dialogue in one domain."""

    dialogue_id: str
    domain: Domain
    turns: tuple[Turn, ...]

    def to_dict(self, manifest: DomainManifest) -> dict:
        return {
            "dialogue_id": self.dialogue_id,
            "domain": self.domain.value,
            "turns": [t.to_dict(manifest) for t in self.turns],
        }

    @classmethod
    def from_dict(cls, d: dict, manifest: DomainManifest) -> "Dialogue":
        return cls(
            dialogue_id=d["dialogue_id"],
            domain=Domain(d["domain"]),
            turns=tuple(Turn.from_dict(t, manifest) for t in d["turns"]),
        )


# ---------------------------------------------------------------------------
# Default manifests
# ---------------------------------------------------------------------------

FURNITURE_ACTIONS = (
    "None",
    "SearchFurniture",
    "SpecifyInfo",
    "FocusOnFurniture",
    "Rotate",
    "AddToCart",
    "GetInfo",
)

FURNITURE_ATTRIBUTES = (
    "furniture-type", "dimensions", "price", "material", "color",
    "decor-style", "rotation", "cart", "info", "availability",
    "brand", "weight", "height", "width", "depth",
    "finish", "assembly", "warranty", "rating", "reviews",
    "stock", "delivery", "discount", "fabric", "frame",
    "legs", "cushions", "storage", "shelves", "drawers",
    "seating", "capacity", "style-match", "room", "placement",
    "lighting", "texture", "pattern", "shape", "size-class",
    "comfort", "durability", "care", "origin", "collection",
    "designer", "era", "theme", "mount", "hardware",
    "upholstery", "padding", "backrest", "armrest", "swivel",
    "recline", "extension", "modular", "eco-label", "clearance",
)

FASHION_ACTIONS = (
    "None",
    "SearchDatabase",
    "SearchMemory",
    "SpecifyInfo",
    "AddToCart",
)

FASHION_ATTRIBUTES = (
    "availableSizes",
    "brand",
    "color",
    "customerRating",
    "pattern",
    "price",
    "info",
)

DEFAULT_MANIFESTS: dict[Domain, DomainManifest] = {
    Domain.FURNITURE: DomainManifest(
        Domain.FURNITURE, FURNITURE_ACTIONS, FURNITURE_ATTRIBUTES
    ),
    Domain.FASHION: DomainManifest(Domain.FASHION, FASHION_ACTIONS, FASHION_ATTRIBUTES),
}

assert len(FURNITURE_ACTIONS) == 7 and len(FURNITURE_ATTRIBUTES) == 60
assert len(FASHION_ACTIONS) == 5 and len(FASHION_ATTRIBUTES) == 7


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by :func:`validate`."""

    dialogue_id: str
    turn_index: int | None
    field_path: str
    message: str

    def __str__(self) -> str:
        turn = f" turn {self.turn_index}" if self.turn_index is not None else ""
        return f"[{self.dialogue_id}{turn}] {self.field_path}: {self.message}"


def _check_turn(
    dialogue_id: str,
    ti: int,
    turn: Turn,
    manifest: DomainManifest,
    out: list[Violation],
) -> None:
    def bad(path: str, msg: str) -> None:
        out.append(Violation(dialogue_id, ti, path, msg))

    if not turn.user_utterance:
        bad("user", "empty user utterance")
    if not turn.system_response:
        bad("system", "empty system response")

    seen_ids: set[str] = set()
    for vi, obj in enumerate(turn.visual):
        path = f"visual[{vi}]"
        if obj.object_id in seen_ids:
            bad(path + ".id", f"duplicate object_id {obj.object_id!r}")
        seen_ids.add(obj.object_id)
        strings = [obj.object_id, obj.position, obj.class_name]
        strings += list(obj.colors) + list(obj.decor_styles)
        for key, values in obj.extra:
            strings.append(key)
            strings += list(values)
        for s in strings:
            if not s:
                bad(path, "empty string field")
            elif "\n" in s:
                bad(path, f"newline in field value {s!r}")

    for bi, frame in enumerate(turn.belief):
        path = f"belief[{bi}]"
        if not INTENT_RE.match(frame.intent):
            bad(path + ".intent", f"malformed intent {frame.intent!r}")
        for key, value in frame.slots:
            if _SLOT_FORBIDDEN & set(key) or _SLOT_FORBIDDEN & set(value):
                bad(path + ".slots", f"forbidden character in slot ({key!r}, {value!r})")

    act = turn.action
    if not 0 <= act.action < manifest.n_actions:
        bad("action.name", f"action index {act.action} out of range")
    if manifest.domain is Domain.FURNITURE:
        if not isinstance(act.attributes, int):
            bad("action.attributes", "furniture attribute must be a single index")
        elif not 0 <= act.attributes < manifest.n_attributes:
            bad("action.attributes", f"attribute index {act.attributes} out of range")
    else:
        attrs = act.attributes
        if isinstance(attrs, int) or len(attrs) != manifest.n_attributes:
            got = 1 if isinstance(attrs, int) else len(attrs)
            bad(
                "action.attributes",
                f"fashion attribute vector must have length {manifest.n_attributes}, got {got}",
            )
        elif any(bit not in (0, 1) for bit in attrs):
            bad("action.attributes", "fashion attribute vector entries must be 0/1")


def validate(
    dialogues: Iterable[Dialogue],
    manifests: Mapping[Domain, DomainManifest] | None = None,
) -> list[Violation]:
    """Check every type invariant; returns an empty list iff all hold.

    Violations are data, not errors: nothing is raised.
    """
    manifests = manifests or DEFAULT_MANIFESTS
    out: list[Violation] = []
    for dlg in dialogues:
        if not dlg.turns:
            out.append(Violation(dlg.dialogue_id, None, "turns", "dialogue has no turns"))
            continue
        manifest = manifests[dlg.domain]
        for ti, turn in enumerate(dlg.turns):
            _check_turn(dlg.dialogue_id, ti, turn, manifest, out)
    return out


# ---------------------------------------------------------------------------
# JSONL I/O
# ---------------------------------------------------------------------------


def load_corpus(
    path: str | Path,
    domain: Domain,
    manifest: DomainManifest | None = None,
) -> list[Dialogue]:
    """Read a JSONL corpus, checking schema and invariants line by line.

    Raises :class:`SchemaError` (with line number and field path) on malformed
    lines and :class:`InvariantError` (naming dialogue and turn) when a
    structurally valid dialogue breaks a data invariant.
    """
    manifest = manifest or DEFAULT_MANIFESTS[domain]
    dialogues: list[Dialogue] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            try:
                dlg = Dialogue.from_dict(raw, manifest)
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(str(exc), line=lineno, path=_guess_path(exc)) from exc
            if dlg.domain is not domain:
                raise SchemaError(
                    f"expected domain {domain.value!r}, got {dlg.domain.value!r}",
                    line=lineno,
                    path="domain",
                )
            problems = validate([dlg], {domain: manifest})
            if problems:
                raise InvariantError(
                    f"line {lineno}: " + "; ".join(str(p) for p in problems)
                )
            dialogues.append(dlg)
    return dialogues


def _guess_path(exc: Exception) -> str:
    # KeyError('user') reads better as a field path than as a bare repr
    if isinstance(exc, KeyError) and exc.args and isinstance(exc.args[0], str):
        return exc.args[0]
    return ""


def save_corpus(
    dialogues: Sequence[Dialogue],
    path: str | Path,
    manifests: Mapping[Domain, DomainManifest] | None = None,
) -> None:
    """Write dialogues as JSONL, one object per line."""
    manifests = manifests or DEFAULT_MANIFESTS
    with open(path, "w", encoding="utf-8") as fh:
        for dlg in dialogues:
            fh.write(json.dumps(dlg.to_dict(manifests[dlg.domain]), ensure_ascii=False))
            fh.write("\n")


def corpus_intents(dialogues: Iterable[Dialogue]) -> tuple[str, ...]:
    """All distinct belief intents, in first-occurrence order."""
    seen: dict[str, None] = {}
    for dlg in dialogues:
        for turn in dlg.turns:
            for frame in turn.belief:
                seen.setdefault(frame.intent, None)
    return tuple(seen)


# ---------------------------------------------------------------------------
# Synthetic corpora
# ---------------------------------------------------------------------------

# Closed-world item facts. Responses only ever mention facts that are either
# visible in the serialized context or functions of the item class, so a small
# model can learn them instead of memorizing noise.

_FURN_CLASSES = (
    "Kitchen Islands", "Area Rugs", "Sofas",
    "Coffee Tables", "Bookcases", "Office Chairs",
)
_FURN_COLORS = ("White", "Beige", "Brown", "Black", "Grey", "Blue")
_FURN_DECOR = ("Rustic", "Modern", "Traditional", "Classic", "Sophisticated", "Contemporary")
_FURN_DIMS = {
    "Kitchen Islands": (52, 18, 36),
    "Area Rugs": (91, 64, 1),
    "Sofas": (84, 38, 34),
    "Coffee Tables": (48, 24, 18),
    "Bookcases": (36, 12, 72),
    "Office Chairs": (27, 27, 41),
}
_FURN_PRICE = {
    "Kitchen Islands": 649, "Area Rugs": 199, "Sofas": 899,
    "Coffee Tables": 249, "Bookcases": 329, "Office Chairs": 189,
}
_FURN_MATERIAL = {
    "Kitchen Islands": "wood", "Area Rugs": "wool", "Sofas": "leather",
    "Coffee Tables": "glass", "Bookcases": "oak", "Office Chairs": "mesh",
}

_FASH_CLASSES = ("Dresses", "Jackets", "Jeans", "Skirts", "Blouses", "Sweaters")
_FASH_COLORS = ("Red", "Navy", "Olive", "Cream", "Charcoal", "Yellow")
_FASH_PATTERNS = ("plain", "striped", "floral", "plaid", "dotted", "heathered")
_FASH_BRAND = {
    "Dresses": "Downtown Studio", "Jackets": "North Lodge", "Jeans": "River Works",
    "Skirts": "Modern Arts", "Blouses": "Glam Factory", "Sweaters": "Coats Plus",
}
_FASH_SIZES = {
    "Dresses": "XS S M", "Jackets": "M L XL", "Jeans": "28 30 32",
    "Skirts": "S M L", "Blouses": "XS S L", "Sweaters": "S L XL",
}
_FASH_PRICE = {
    "Dresses": 79, "Jackets": 129, "Jeans": 59,
    "Skirts": 49, "Blouses": 39, "Sweaters": 69,
}
_FASH_RATING = {
    "Dresses": "4.5", "Jackets": "4.1", "Jeans": "3.9",
    "Skirts": "4.8", "Blouses": "4.0", "Sweaters": "3.6",
}

# turn-count distributions chosen to hit the per-domain average turn targets
_TURN_DIST = {
    Domain.FURNITURE: ((6, 7, 8, 9), (0.15, 0.30, 0.35, 0.20)),  # mean 7.6
    Domain.FASHION: ((4, 5, 6, 7), (0.20, 0.35, 0.30, 0.15)),  # mean 5.4
}


def _furn_object(rng: random.Random, counter: int, position: str) -> VisualObject:
    cls = rng.choice(_FURN_CLASSES)
    color = rng.choice(_FURN_COLORS)
    decor = tuple(rng.sample(_FURN_DECOR, 2))
    extra = ()
    if rng.random() < 0.3:
        extra = (("material", (_FURN_MATERIAL[cls],)),)
    return VisualObject(
        object_id=f"OBJECT_{counter}",
        position=position,
        colors=(color,),
        class_name=cls,
        decor_styles=decor,
        extra=extra,
    )


def _fash_object(rng: random.Random, counter: int) -> VisualObject:
    cls = rng.choice(_FASH_CLASSES)
    color = rng.choice(_FASH_COLORS)
    pattern = rng.choice(_FASH_PATTERNS)
    return VisualObject(
        object_id=f"OBJECT_{counter}",
        position="focus",
        colors=(color,),
        class_name=cls,
        decor_styles=(pattern,),
        extra=(("brand", (_FASH_BRAND[cls],)),),
    )


def _furniture_turn(rng: random.Random, state: dict) -> Turn:
    manifest = DEFAULT_MANIFESTS[Domain.FURNITURE]
    visible: tuple[VisualObject, ...] = state["visible"]

    if not visible:
        kind = rng.choice(("greet", "search"))
    else:
        kind = rng.choice(
            ("dimensions", "price", "material", "prefer", "rotate", "cart", "search")
        )

    if kind == "greet":
        return Turn(
            user_utterance="hello , i am looking for some new furniture .",
            system_response="hi there , welcome to our store . what can i help you find ?",
            action=ApiAction(manifest.action_index("None"), manifest.attribute_index("info")),
            visual=visible,
            belief=(BeliefFrame("DA:GREET"),),
        )

    if kind == "search":
        positions = ("left", "center") if rng.random() < 0.5 else ("focus",)
        shown = []
        for pos in positions:
            shown.append(_furn_object(rng, state["counter"], pos))
            state["counter"] += 1
        state["visible"] = tuple(shown)
        first = shown[0]
        cls, color = first.class_name, first.colors[0]
        return Turn(
            user_utterance=f"do you have any {color} {cls} ?",
            system_response=f"here are some {cls} in {color} you might like .",
            action=ApiAction(
                manifest.action_index("SearchFurniture"),
                manifest.attribute_index("furniture-type"),
            ),
            visual=state["visible"],
            belief=(BeliefFrame("DA:REQUEST:SEARCH:FURNITURE", (("furniture-type", cls),)),),
        )

    obj = rng.choice(visible)
    cls = obj.class_name

    if kind == "dimensions":
        w, d, h = _FURN_DIMS[cls]
        return Turn(
            user_utterance=f"what are the dimensions of {obj.object_id} ?",
            system_response=(
                f"the width is {w} inches , depth {d} inches , and height is {h} inches ."
            ),
            action=ApiAction(
                manifest.action_index("SpecifyInfo"), manifest.attribute_index("dimensions")
            ),
            visual=visible,
            belief=(
                BeliefFrame(
                    "DA:ASK:GET:FURNITURE.dimensions", (("furniture-O", obj.object_id),)
                ),
            ),
        )
    if kind == "price":
        return Turn(
            user_utterance=f"how much is {obj.object_id} ?",
            system_response=f"the price of this {cls} is {_FURN_PRICE[cls]} dollars .",
            action=ApiAction(
                manifest.action_index("SpecifyInfo"), manifest.attribute_index("price")
            ),
            visual=visible,
            belief=(
                BeliefFrame("DA:ASK:GET:FURNITURE.price", (("furniture-O", obj.object_id),)),
            ),
        )
    if kind == "material":
        return Turn(
            user_utterance=f"what is {obj.object_id} made of ?",
            system_response=f"this {cls} is made of {_FURN_MATERIAL[cls]} .",
            action=ApiAction(
                manifest.action_index("GetInfo"), manifest.attribute_index("material")
            ),
            visual=visible,
            belief=(
                BeliefFrame(
                    "DA:ASK:GET:FURNITURE.material", (("furniture-O", obj.object_id),)
                ),
            ),
        )
    if kind == "prefer":
        return Turn(
            user_utterance=f"i like the {obj.colors[0]} one on the {obj.position} .",
            system_response=f"great choice , the {cls} suits a {obj.decor_styles[0]} room .",
            action=ApiAction(
                manifest.action_index("FocusOnFurniture"),
                manifest.attribute_index("placement"),
            ),
            visual=visible,
            belief=(
                BeliefFrame(
                    "DA:INFORM:PREFER:FURNITURE",
                    (("furniture-O", obj.object_id), ("furniture-attentionOn", "that")),
                ),
            ),
        )
    if kind == "rotate":
        direction = rng.choice(("left", "right", "back", "front"))
        return Turn(
            user_utterance=f"can you rotate {obj.object_id} to the {direction} ?",
            system_response=f"sure , rotating the {cls} to the {direction} now .",
            action=ApiAction(
                manifest.action_index("Rotate"), manifest.attribute_index("rotation")
            ),
            visual=visible,
            belief=(
                BeliefFrame(
                    "DA:REQUEST:ROTATE:FURNITURE",
                    (("furniture-O", obj.object_id), ("furniture-direction", direction)),
                ),
            ),
        )
    # cart
    return Turn(
        user_utterance=f"please add {obj.object_id} to my cart .",
        system_response=f"done , the {cls} has been added to your cart .",
        action=ApiAction(
            manifest.action_index("AddToCart"), manifest.attribute_index("cart")
        ),
        visual=visible,
        belief=(
            BeliefFrame("DA:REQUEST:ADD_TO_CART:FURNITURE", (("furniture-O", obj.object_id),)),
        ),
    )


def _fashion_attrs(manifest: DomainManifest, *names: str) -> tuple[int, ...]:
    vector = [0] * manifest.n_attributes
    for name in names:
        vector[manifest.attribute_index(name)] = 1
    return tuple(vector)


def _fashion_turn(rng: random.Random, state: dict) -> Turn:
    manifest = DEFAULT_MANIFESTS[Domain.FASHION]
    visible: tuple[VisualObject, ...] = state["visible"]

    if not visible:
        kind = rng.choice(("greet", "search"))
    else:
        kind = rng.choice(("price_sizes", "rating_brand", "pattern", "cart", "search", "memory"))

    if kind == "greet":
        return Turn(
            user_utterance="hi , i could use some outfit advice .",
            system_response="hello , happy to help you find an outfit today .",
            action=ApiAction(manifest.action_index("None"), _fashion_attrs(manifest, "info")),
            visual=visible,
            belief=(BeliefFrame("DA:GREET"),),
        )

    if kind in ("search", "memory"):
        obj = _fash_object(rng, state["counter"])
        state["counter"] += 1
        state["visible"] = (obj,)
        cls, color = obj.class_name, obj.colors[0]
        if kind == "search":
            return Turn(
                user_utterance=f"can you show me some {color} {cls} ?",
                system_response=f"here is a {color} {cls} from {_FASH_BRAND[cls]} .",
                action=ApiAction(
                    manifest.action_index("SearchDatabase"),
                    _fashion_attrs(manifest, "color"),
                ),
                visual=state["visible"],
                belief=(BeliefFrame("DA:REQUEST:GET:CLOTHING", (("fashion-type", cls),)),),
            )
        return Turn(
            user_utterance=f"show me the {cls} i saw earlier .",
            system_response=f"sure , bringing back the {cls} from earlier .",
            action=ApiAction(
                manifest.action_index("SearchMemory"), _fashion_attrs(manifest, "info")
            ),
            visual=state["visible"],
            belief=(BeliefFrame("DA:REQUEST:GET:CLOTHING.previous", (("fashion-type", cls),)),),
        )

    obj = visible[0]
    cls = obj.class_name

    if kind == "price_sizes":
        return Turn(
            user_utterance="what sizes does it come in and how much is it ?",
            system_response=(
                f"it comes in {_FASH_SIZES[cls]} and costs {_FASH_PRICE[cls]} dollars ."
            ),
            action=ApiAction(
                manifest.action_index("SpecifyInfo"),
                _fashion_attrs(manifest, "price", "availableSizes"),
            ),
            visual=visible,
            belief=(
                BeliefFrame("DA:ASK:GET:CLOTHING.price", (("fashion-O", obj.object_id),)),
            ),
        )
    if kind == "rating_brand":
        return Turn(
            user_utterance="who makes it and how well is it rated ?",
            system_response=(
                f"it is by {_FASH_BRAND[cls]} with a rating of {_FASH_RATING[cls]} stars ."
            ),
            action=ApiAction(
                manifest.action_index("SpecifyInfo"),
                _fashion_attrs(manifest, "brand", "customerRating"),
            ),
            visual=visible,
            belief=(
                BeliefFrame("DA:ASK:GET:CLOTHING.rating", (("fashion-O", obj.object_id),)),
            ),
        )
    if kind == "pattern":
        return Turn(
            user_utterance=f"what pattern does the {cls.lower()} piece have ?",
            system_response=f"the {cls} has a {obj.decor_styles[0]} pattern .",
            action=ApiAction(
                manifest.action_index("SpecifyInfo"), _fashion_attrs(manifest, "pattern")
            ),
            visual=visible,
            belief=(
                BeliefFrame("DA:ASK:GET:CLOTHING.pattern", (("fashion-O", obj.object_id),)),
            ),
        )
    # cart
    return Turn(
        user_utterance="i will take it , please add it to my cart .",
        system_response=f"great , the {cls} is in your cart .",
        action=ApiAction(
            manifest.action_index("AddToCart"), _fashion_attrs(manifest, "info")
        ),
        visual=visible,
        belief=(
            BeliefFrame("DA:REQUEST:ADD_TO_CART:CLOTHING", (("fashion-O", obj.object_id),)),
        ),
    )


def synth_corpus(seed: int, n_dialogues: int, domain: Domain) -> list[Dialogue]:
    """Deterministic synthetic corpus for one domain.

    A pure function of ``(seed, n_dialogues, domain)``. Beliefs and actions
    come from closed template sets (gold labels exactly recoverable), response
    templates are keyed by the gold action, and the turn-count distribution
    matches the domain's average turn target.
    """
    if n_dialogues < 1:
        raise ValueError(f"n_dialogues must be >= 1, got {n_dialogues}")
    rng = random.Random((seed, domain.value).__repr__())
    make_turn = _furniture_turn if domain is Domain.FURNITURE else _fashion_turn
    counts, weights = _TURN_DIST[domain]

    dialogues = []
    for di in range(n_dialogues):
        n_turns = rng.choices(counts, weights)[0]
        state = {"visible": (), "counter": 0}
        turns = tuple(make_turn(rng, state) for _ in range(n_turns))
        dialogues.append(
            Dialogue(
                dialogue_id=f"{domain.value}_{seed}_{di:04d}",
                domain=domain,
                turns=turns,
            )
        )
    return dialogues


def synth_contrast_corpus(seed: int, n_dialogues: int) -> list[Dialogue]:
    """Furniture corpus whose responses hinge on the API action alone.

    Every dialogue shares a byte-identical two-turn context; only the second
    turn's action (and the response template it selects) varies. Without the
    action injected into the input the two responses are indistinguishable
    from the context, so this corpus isolates how much response quality the
    action information buys.
    """
    if n_dialogues < 1:
        raise ValueError(f"n_dialogues must be >= 1, got {n_dialogues}")
    manifest = DEFAULT_MANIFESTS[Domain.FURNITURE]
    rng = random.Random((seed, "contrast").__repr__())

    fixed_object = VisualObject(
        object_id="OBJECT_0",
        position="focus",
        colors=("Brown",),
        class_name="Coffee Tables",
        decor_styles=("Modern", "Classic"),
    )
    opener = Turn(
        user_utterance="hello , i am looking for some new furniture .",
        system_response="hi there , take a look at this piece .",
        action=ApiAction(manifest.action_index("None"), manifest.attribute_index("info")),
        visual=(fixed_object,),
        belief=(BeliefFrame("DA:GREET"),),
    )
    variants = {
        "GetInfo": "it is made of solid walnut and feels very sturdy .",
        "SpecifyInfo": "it costs 200 dollars and ships for free .",
    }

    dialogues = []
    for di in range(n_dialogues):
        action_name = rng.choice(sorted(variants))
        follow_up = Turn(
            user_utterance="tell me more about it .",
            system_response=variants[action_name],
            action=ApiAction(
                manifest.action_index(action_name), manifest.attribute_index("info")
            ),
            visual=(fixed_object,),
            belief=(
                BeliefFrame("DA:ASK:GET:FURNITURE", (("furniture-O", "OBJECT_0"),)),
            ),
        )
        dialogues.append(
            Dialogue(
                dialogue_id=f"contrast_{seed}_{di:04d}",
                domain=Domain.FURNITURE,
                turns=(opener, follow_up),
            )
        )
    return dialogues
