"""Tokenizer round-trips, corpus generators, and file handling."""

import numpy as np
import pytest

from batkit import data
from batkit.data import (BOS, EOS, PAD, SEP, CorpusSpec, detokenize,
                         detokenize_report, gen_corpus, load_corpus, tokenize,
                         write_corpus)
from batkit.errors import ConfigError, VocabError


class TestTokenizer:
    def test_ascii(self):
        assert tokenize("ab") == [97, 98]
        assert detokenize([97, 98]) == "ab"

    def test_empty(self):
        assert tokenize("") == []
        assert detokenize([]) == ""

    def test_round_trip_random_utf8(self):
        """Identity oracle over 1000 random unicode strings."""
        rng = np.random.default_rng(0)
        for _ in range(1000):
            codepoints = rng.integers(1, 0x2FFF, size=rng.integers(0, 24))
            text = "".join(chr(int(c)) for c in codepoints
                           if not (0xD800 <= c <= 0xDFFF))
            assert detokenize(tokenize(text)) == text

    def test_specials_dropped_with_count(self):
        text, dropped = detokenize_report([BOS, 104, 105, SEP, EOS, PAD])
        assert text == "hi"
        assert dropped == 4

    def test_out_of_range_rejected(self):
        with pytest.raises(VocabError):
            detokenize([260])

    def test_validate_token_seq(self):
        data.validate_token_seq([0, 255, SEP])
        with pytest.raises(VocabError):
            data.validate_token_seq([300])
        with pytest.raises(VocabError):
            data.validate_token_seq([SEP], allow_specials=False)


class TestCorpusGen:
    def test_constant_docs(self):
        docs = gen_corpus(CorpusSpec(kind="constant", size=3, seed=0))
        assert len(docs) == 3
        assert all(set(doc) == {"a"} for doc in docs)

    def test_deterministic_regeneration(self):
        spec = CorpusSpec(kind="reversal", size=50, seed=123)
        assert gen_corpus(spec) == gen_corpus(spec)

    def test_copy_structure(self):
        for doc in gen_corpus(CorpusSpec(kind="copy", size=40, seed=1)):
            left, right = doc.split(data.GLYPH_SEP)
            assert left == right

    def test_reversal_structure(self):
        for doc in gen_corpus(CorpusSpec(kind="reversal", size=40, seed=2)):
            left, right = doc.split(data.GLYPH_SEP)
            assert right == left[::-1]

    def test_arithmetic_equations_correct(self):
        """Re-parse and re-compute oracle."""
        for doc in gen_corpus(CorpusSpec(kind="arithmetic", size=100, seed=3)):
            lhs, result = doc.split("=")
            a, b = lhs.split("+")
            assert int(a) + int(b) == int(result)

    def test_documents_fit_budget(self):
        spec = CorpusSpec(kind="mixture", size=200, seed=4, max_doc_tokens=30)
        for doc in gen_corpus(spec):
            assert len(tokenize(doc)) <= 30

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            CorpusSpec(kind="shakespeare", size=1, seed=0)


class TestCorpusFiles:
    def test_write_load_line_file(self, tmp_path):
        docs = ["alpha", "beta|gamma"]
        path = tmp_path / "corpus.txt"
        write_corpus(docs, path)
        assert load_corpus(path) == docs

    def test_load_directory(self, tmp_path):
        (tmp_path / "one.txt").write_text("a\nb\n", encoding="utf-8")
        (tmp_path / "two.txt").write_text("c\n", encoding="utf-8")
        assert load_corpus(tmp_path) == ["a", "b", "c"]

    def test_jsonl_round_trip(self, tmp_path):
        path = tmp_path / "records.jsonl"
        records = [{"prompt": "p", "response": "r"}, {"x": 1}]
        data.write_jsonl(records, path)
        assert list(data.read_jsonl(path)) == records
