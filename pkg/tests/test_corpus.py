"""Corpus types, validation, JSONL round trips, and the synthetic generators."""

import json

import pytest

from shoptalk.corpus import (
    DEFAULT_MANIFESTS,
    ApiAction,
    BeliefFrame,
    Dialogue,
    Domain,
    DomainManifest,
    InvariantError,
    SchemaError,
    Turn,
    VisualObject,
    corpus_intents,
    load_corpus,
    save_corpus,
    synth_contrast_corpus,
    synth_corpus,
    validate,
)

FURN = DEFAULT_MANIFESTS[Domain.FURNITURE]
FASH = DEFAULT_MANIFESTS[Domain.FASHION]


def make_turn(domain=Domain.FURNITURE, **overrides):
    base = dict(
        user_utterance="show me something",
        system_response="here you go",
        action=ApiAction(action=1, attributes=0 if domain is Domain.FURNITURE else (0,) * 7),
        visual=(),
        belief=(BeliefFrame("DA:REQUEST:GET:FURNITURE"),),
    )
    base.update(overrides)
    return Turn(**base)


def make_dialogue(domain=Domain.FURNITURE, turns=None, dialogue_id="d0"):
    return Dialogue(
        dialogue_id=dialogue_id,
        domain=domain,
        turns=turns if turns is not None else (make_turn(domain),),
    )


class TestManifests:
    def test_default_cardinalities(self):
        assert FURN.n_actions == 7
        assert FURN.n_attributes == 60
        assert FASH.n_actions == 5
        assert FASH.n_attributes == 7

    def test_index_round_trip(self):
        for manifest in (FURN, FASH):
            for i, name in enumerate(manifest.actions):
                assert manifest.action_index(name) == i
            for i, name in enumerate(manifest.attributes):
                assert manifest.attribute_index(name) == i

    def test_unknown_names_raise(self):
        with pytest.raises(KeyError):
            FURN.action_index("Teleport")
        with pytest.raises(KeyError):
            FASH.attribute_index("nope")

    def test_dict_round_trip(self):
        again = DomainManifest.from_dict(FURN.to_dict())
        assert again == FURN


class TestValidate:
    def test_synthetic_corpora_are_clean(self):
        for domain in Domain:
            dialogues = synth_corpus(seed=3, n_dialogues=6, domain=domain)
            assert validate(dialogues) == []

    def test_empty_utterance(self):
        dlg = make_dialogue(turns=(make_turn(user_utterance=""),))
        problems = validate([dlg])
        assert len(problems) == 1
        assert problems[0].field_path == "user"
        assert problems[0].turn_index == 0

    def test_malformed_intent(self):
        bad = make_turn(belief=(BeliefFrame("GREET"),))
        problems = validate([make_dialogue(turns=(bad,))])
        assert any("intent" in p.field_path for p in problems)

    def test_intent_needs_da_prefix_and_part(self):
        ok = make_turn(belief=(BeliefFrame("DA:ASK:GET:FURNITURE.price"),))
        assert validate([make_dialogue(turns=(ok,))]) == []
        for intent in ("DA", "DA:", "da:ask", "DA:ASK GET"):
            bad = make_turn(belief=(BeliefFrame(intent),))
            assert validate([make_dialogue(turns=(bad,))]) != []

    def test_furniture_attribute_range(self):
        bad = make_turn(action=ApiAction(action=0, attributes=60))
        problems = validate([make_dialogue(turns=(bad,))])
        assert any("out of range" in p.message for p in problems)

    def test_fashion_vector_length_and_bits(self):
        short = make_turn(Domain.FASHION, action=ApiAction(0, (0, 1)))
        problems = validate([make_dialogue(Domain.FASHION, turns=(short,))])
        assert any("length 7" in p.message for p in problems)
        bad_bit = make_turn(Domain.FASHION, action=ApiAction(0, (0, 1, 2, 0, 0, 0, 0)))
        problems = validate([make_dialogue(Domain.FASHION, turns=(bad_bit,))])
        assert any("0/1" in p.message for p in problems)

    def test_duplicate_object_ids(self):
        obj = VisualObject("OBJECT_0", "left", ("Red",), "Sofas", ("Modern",))
        turn = make_turn(visual=(obj, obj))
        problems = validate([make_dialogue(turns=(turn,))])
        assert any("duplicate" in p.message for p in problems)

    def test_empty_dialogue(self):
        problems = validate([make_dialogue(turns=())])
        assert len(problems) == 1
        assert problems[0].field_path == "turns"


class TestJsonl:
    def test_round_trip(self, tmp_path):
        """save then load reproduces the corpus structurally."""
        for domain, seed in ((Domain.FURNITURE, 5), (Domain.FASHION, 6)):
            dialogues = synth_corpus(seed=seed, n_dialogues=5, domain=domain)
            path = tmp_path / f"{domain.value}.jsonl"
            save_corpus(dialogues, path)
            again = load_corpus(path, domain)
            assert again == dialogues

    def test_save_is_deterministic(self, tmp_path):
        dialogues = synth_corpus(seed=5, n_dialogues=4, domain=Domain.FURNITURE)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_corpus(dialogues, a)
        save_corpus(dialogues, b)
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        dialogues = synth_corpus(seed=5, n_dialogues=1, domain=Domain.FURNITURE)
        save_corpus(dialogues, path)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write("{not json\n")
        with pytest.raises(SchemaError) as err:
            load_corpus(path, Domain.FURNITURE)
        assert err.value.line == 2

    def test_missing_key_names_field(self, tmp_path):
        record = make_dialogue().to_dict(FURN)
        del record["turns"][0]["user"]
        path = tmp_path / "missing.jsonl"
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        with pytest.raises(SchemaError) as err:
            load_corpus(path, Domain.FURNITURE)
        assert err.value.line == 1
        assert "user" in str(err.value)

    def test_domain_mismatch(self, tmp_path):
        # action/attribute names valid in both manifests, so parsing succeeds
        # and the loader's own domain check is what fires
        record = {
            "dialogue_id": "x",
            "domain": "furniture",
            "turns": [
                {
                    "user": "hi",
                    "system": "yo",
                    "action": {"name": "None", "attributes": ["info"]},
                    "visual": [],
                    "belief": [],
                }
            ],
        }
        path = tmp_path / "furn.jsonl"
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        with pytest.raises(SchemaError) as err:
            load_corpus(path, Domain.FASHION)
        assert "domain" in str(err.value)

    def test_wrong_manifest_fails_parse(self, tmp_path):
        path = tmp_path / "furn.jsonl"
        save_corpus(synth_corpus(seed=1, n_dialogues=1, domain=Domain.FURNITURE), path)
        with pytest.raises(SchemaError) as err:
            load_corpus(path, Domain.FASHION)
        assert err.value.line == 1

    def test_invariant_violation_refused(self, tmp_path):
        record = make_dialogue(turns=(make_turn(user_utterance="x"),)).to_dict(FURN)
        record["turns"][0]["user"] = ""
        path = tmp_path / "broken.jsonl"
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        with pytest.raises(InvariantError):
            load_corpus(path, Domain.FURNITURE)

    def test_unknown_action_name(self, tmp_path):
        record = make_dialogue().to_dict(FURN)
        record["turns"][0]["action"]["name"] = "Teleport"
        path = tmp_path / "unknown.jsonl"
        path.write_text(json.dumps(record) + "\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            load_corpus(path, Domain.FURNITURE)


class TestSynth:
    def test_deterministic(self):
        a = synth_corpus(seed=7, n_dialogues=10, domain=Domain.FASHION)
        b = synth_corpus(seed=7, n_dialogues=10, domain=Domain.FASHION)
        assert a == b

    def test_seed_changes_content(self):
        a = synth_corpus(seed=7, n_dialogues=10, domain=Domain.FURNITURE)
        b = synth_corpus(seed=8, n_dialogues=10, domain=Domain.FURNITURE)
        assert a != b

    def test_domains_differ(self):
        furn = synth_corpus(seed=7, n_dialogues=5, domain=Domain.FURNITURE)
        fash = synth_corpus(seed=7, n_dialogues=5, domain=Domain.FASHION)
        assert all(d.domain is Domain.FURNITURE for d in furn)
        assert all(d.domain is Domain.FASHION for d in fash)

    def test_mean_turn_counts(self):
        """Turn counts track the per-domain averages the generator targets."""
        furn = synth_corpus(seed=9, n_dialogues=200, domain=Domain.FURNITURE)
        fash = synth_corpus(seed=9, n_dialogues=200, domain=Domain.FASHION)
        furn_mean = sum(len(d.turns) for d in furn) / len(furn)
        fash_mean = sum(len(d.turns) for d in fash) / len(fash)
        assert 6.6 <= furn_mean <= 8.6
        assert 4.4 <= fash_mean <= 6.4
        assert furn_mean > fash_mean

    def test_ids_are_unique(self):
        dialogues = synth_corpus(seed=2, n_dialogues=50, domain=Domain.FASHION)
        ids = [d.dialogue_id for d in dialogues]
        assert len(set(ids)) == len(ids)

    def test_n_dialogues_validation(self):
        with pytest.raises(ValueError):
            synth_corpus(seed=0, n_dialogues=0, domain=Domain.FURNITURE)


class TestContrastCorpus:
    def test_shared_context_action_dependent_response(self):
        dialogues = synth_contrast_corpus(seed=4, n_dialogues=30)
        assert validate(dialogues) == []
        openers = {d.turns[0] for d in dialogues}
        assert len(openers) == 1
        actions = {d.turns[1].action.action for d in dialogues}
        assert len(actions) == 2
        by_action = {}
        for d in dialogues:
            by_action.setdefault(d.turns[1].action.action, set()).add(
                d.turns[1].system_response
            )
        for responses in by_action.values():
            assert len(responses) == 1
        assert len(set().union(*by_action.values())) == 2
        contexts = {d.turns[1].user_utterance for d in dialogues}
        assert len(contexts) == 1

    def test_deterministic(self):
        assert synth_contrast_corpus(seed=4, n_dialogues=12) == synth_contrast_corpus(
            seed=4, n_dialogues=12
        )


class TestIntents:
    def test_first_occurrence_order(self):
        t1 = make_turn(belief=(BeliefFrame("DA:ASK:GET:FURNITURE.price"),))
        t2 = make_turn(
            belief=(
                BeliefFrame("DA:REQUEST:GET:FURNITURE"),
                BeliefFrame("DA:ASK:GET:FURNITURE.price"),
            )
        )
        dlg = make_dialogue(turns=(t1, t2))
        assert corpus_intents([dlg]) == (
            "DA:ASK:GET:FURNITURE.price",
            "DA:REQUEST:GET:FURNITURE",
        )

    def test_covers_synthetic_corpus(self):
        dialogues = synth_corpus(seed=1, n_dialogues=20, domain=Domain.FASHION)
        intents = corpus_intents(dialogues)
        assert len(intents) == len(set(intents))
        seen = {f.intent for d in dialogues for t in d.turns for f in t.belief}
        assert set(intents) == seen
