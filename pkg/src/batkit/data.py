"""Byte-level tokenizer, synthetic corpora, and dataset file handling.

The vocabulary is the 256 byte values plus four specials::

    BOS = 256   sequence start (forward conditioning)
    EOS = 257   sequence end (backward conditioning / stop token)
    PAD = 258   batch padding, never scored
    SEP = 259   prompt/response and dialogue-turn separator

Tokenize/detokenize are mutually inverse on special-free sequences. Corpus
files are plain UTF-8 text (one document per line, or one file per document
in a directory), so generated documents use the ``|`` byte as their visible
separator glyph; the SEP *token* only ever appears through framing.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, FormatError, VocabError

BOS = 256
EOS = 257
PAD = 258
SEP = 259
VOCAB_SIZE = 260
SPECIALS = frozenset((BOS, EOS, PAD, SEP))

GLYPH_SEP = "|"  # printable stand-in for SEP inside text documents

TokenSeq = list[int]


def tokenize(text: str) -> TokenSeq:
    """UTF-8 bytes of the text, one token per byte."""
    return list(text.encode("utf-8"))


def detokenize(ids: Sequence[int]) -> str:
    """Inverse of tokenize; special tokens are dropped."""
    return detokenize_report(ids)[0]


def detokenize_report(ids: Sequence[int]) -> tuple[str, int]:
    """Decode to text; returns (text, number of dropped special tokens)."""
    raw = []
    dropped = 0
    for i in ids:
        i = int(i)
        if 0 <= i < 256:
            raw.append(i)
        elif i in SPECIALS:
            dropped += 1
        else:
            raise VocabError(f"token id {i} outside vocabulary")
    return bytes(raw).decode("utf-8", errors="replace"), dropped


def validate_token_seq(ids: Sequence[int], allow_specials: bool = True) -> None:
    for i in ids:
        i = int(i)
        if not 0 <= i < VOCAB_SIZE:
            raise VocabError(f"token id {i} outside vocabulary")
        if not allow_specials and i in SPECIALS:
            raise VocabError(f"special token id {i} not allowed here")


# --------------------------------------------------------------------------
# synthetic corpora

CORPUS_KINDS = ("constant", "copy", "reversal", "arithmetic", "mixture")


@dataclass
class CorpusSpec:
    """Recipe for a deterministic synthetic corpus."""

    kind: str
    size: int
    seed: int = 0
    max_doc_tokens: int = 62  # documents stay within max_seq_len - 2 for the CLI defaults

    def __post_init__(self):
        if self.kind not in CORPUS_KINDS:
            raise ConfigError(f"unknown corpus kind {self.kind!r}; have {CORPUS_KINDS}")
        if self.size < 1:
            raise ConfigError("corpus size must be >= 1")


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def _rand_word(rng: np.random.Generator, lo: int, hi: int) -> str:
    n = int(rng.integers(lo, hi + 1))
    return "".join(_LETTERS[int(i)] for i in rng.integers(0, len(_LETTERS), size=n))


def _one_doc(kind: str, rng: np.random.Generator, max_tokens: int) -> str:
    if kind == "constant":
        return "a" * min(32, max_tokens)
    if kind == "copy":
        half = (max_tokens - 1) // 2
        u = _rand_word(rng, 4, min(12, half))
        return f"{u}{GLYPH_SEP}{u}"
    if kind == "reversal":
        half = (max_tokens - 1) // 2
        u = _rand_word(rng, 4, min(12, half))
        return f"{u}{GLYPH_SEP}{u[::-1]}"
    if kind == "arithmetic":
        a = int(rng.integers(0, 1000))
        b = int(rng.integers(0, 1000))
        return f"{a}+{b}={a + b}"
    raise ConfigError(f"unknown corpus kind {kind!r}")


def gen_corpus(spec: CorpusSpec) -> list[str]:
    """Deterministic documents for the given spec (same seed, same bytes)."""
    rng = np.random.default_rng(spec.seed)
    docs = []
    kinds = [k for k in CORPUS_KINDS if k != "mixture"]
    for _ in range(spec.size):
        kind = spec.kind
        if kind == "mixture":
            kind = kinds[int(rng.integers(0, len(kinds)))]
        doc = _one_doc(kind, rng, spec.max_doc_tokens)
        assert len(tokenize(doc)) <= spec.max_doc_tokens
        docs.append(doc)
    return docs


def write_corpus(docs: Iterable[str], path: str | os.PathLike) -> None:
    """One document per line, UTF-8, LF endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(doc.replace("\n", " ") + "\n")


def load_corpus(path: str | os.PathLike) -> list[str]:
    """Directory of text files (one doc per file) or a one-doc-per-line file."""
    p = Path(path)
    if p.is_dir():
        docs = []
        for child in sorted(p.iterdir()):
            if child.is_file():
                docs.extend(_docs_from_file(child))
        return docs
    if p.is_file():
        return _docs_from_file(p)
    raise FormatError(f"corpus path does not exist: {p}")


def _docs_from_file(path: Path) -> list[str]:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".txt":
        return [line for line in text.split("\n") if line]
    return [text] if text else []


# --------------------------------------------------------------------------
# JSON Lines helpers


def read_jsonl(path: str | os.PathLike) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: bad JSON: {exc}") from exc


def write_jsonl(records: Iterable[dict], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_prompt_set(path: str | os.PathLike) -> list[str]:
    """One prompt per line, UTF-8; blank lines skipped."""
    with open(path, "r", encoding="utf-8") as fh:
        prompts = [line.rstrip("\n") for line in fh if line.strip()]
    if not prompts:
        raise FormatError(f"prompt set {path} is empty")
    return prompts
