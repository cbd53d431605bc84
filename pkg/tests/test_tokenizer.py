"""Vocabulary construction, encoding, and persistence."""

import pytest

from shoptalk.corpus import Domain, synth_corpus
from shoptalk.serializer import SPECIAL_TOKENS, special_tokens
from shoptalk.tokenizer import Vocab, build_vocab


@pytest.fixture(scope="module")
def vocab(small_corpora, full_config):
    return build_vocab(list(small_corpora.values()), full_config)


class TestVocab:
    def test_specials_take_lowest_ids(self, vocab):
        for i, token in enumerate(SPECIAL_TOKENS):
            assert vocab.token(i) == token
            assert i in vocab.special_ids
        assert vocab.unk_id == 0
        assert vocab.token(0) == "<UNK>"

    def test_special_count(self):
        # <UNK>, 2 domain, <SOM>/<EOM>/<EOB>/<EOS>, 4 segment, 7 + 5 action
        assert len(SPECIAL_TOKENS) == 1 + 2 + 4 + 4 + 12
        assert special_tokens() == SPECIAL_TOKENS

    def test_encode_decode_round_trip(self, vocab):
        """Round trip holds for any in-vocabulary text."""
        words = [vocab.token(i) for i in range(20, min(40, vocab.size))]
        text = " ".join(["User", ":"] + words + ["<SOM>", "<EOM>", "<EOB>", "<EOS>"])
        ids = vocab.encode(text)
        assert vocab.decode(ids) == text

    def test_unknown_maps_to_unk(self, vocab):
        ids = vocab.encode("zzzzz-not-a-token")
        assert ids == [vocab.unk_id]

    def test_glued_specials_split_atomically(self, vocab):
        assert vocab.split("<EOB><EOS>") == ["<EOB>", "<EOS>"]
        assert vocab.split("hi<EOS>") == ["hi", "<EOS>"]
        assert vocab.split("<ACT_FURN_3>ok") == ["<ACT_FURN_3>", "ok"]

    def test_plain_tokens_first_occurrence_order(self, small_corpora, full_config):
        v1 = build_vocab(list(small_corpora.values()), full_config)
        v2 = build_vocab(list(small_corpora.values()), full_config)
        assert v1.tokens == v2.tokens

    def test_covers_training_corpus(self, vocab, small_corpora, full_config):
        """No rendering of the source corpora should hit <UNK>."""
        from shoptalk.serializer import render_example

        for corpus in small_corpora.values():
            for dialogue in corpus:
                for ti in range(len(dialogue.turns)):
                    rendered = render_example(dialogue, ti, full_config)
                    ids = [vocab.token_id(t) for t in rendered.tokens]
                    assert vocab.unk_id not in ids

    def test_unseen_corpus_hits_unk(self, vocab, full_config):
        from shoptalk.serializer import render_example

        other = synth_corpus(seed=999, n_dialogues=10, domain=Domain.FURNITURE)
        hits = 0
        for dialogue in other:
            for ti in range(len(dialogue.turns)):
                rendered = render_example(dialogue, ti, full_config)
                hits += sum(1 for t in rendered.tokens if t not in vocab)
        assert hits > 0

    def test_duplicate_tokens_refused(self):
        with pytest.raises(ValueError):
            Vocab.from_tokens(("<UNK>", "a", "a"))

    def test_missing_unk_refused(self):
        with pytest.raises(ValueError):
            Vocab.from_tokens(("a", "b"))

    def test_empty_corpora_refused(self, full_config):
        with pytest.raises(ValueError):
            build_vocab([[], []], full_config)

    def test_save_load_round_trip(self, vocab, tmp_path):
        path = tmp_path / "vocab.json"
        vocab.save(path)
        again = Vocab.load(path)
        assert again == vocab
        assert again.special_ids == vocab.special_ids

    def test_len_and_contains(self, vocab):
        assert len(vocab) == vocab.size == len(vocab.tokens)
        assert "<EOS>" in vocab
        assert "zzzzz-not-a-token" not in vocab

    def test_action_tokens_present(self, vocab):
        for i in range(7):
            assert f"<ACT_FURN_{i}>" in vocab
        for i in range(5):
            assert f"<ACT_FASH_{i}>" in vocab
