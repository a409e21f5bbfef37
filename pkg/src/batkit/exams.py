"""Multiple-choice exam harness with few-shot and chain-of-thought modes.

Prompt templates are fixed verbatim here (version-pinned):

* a question block renders as ``Question: <q>`` followed by the four
  lettered options and a final ``Answer:`` line;
* an exemplar (shot) is the same block with its answer filled in as
  `` <letter>. <choice text>``;
* direct answering (DA) scores each choice text appended after the
  ``Answer:`` cue and picks the best (ties -> lowest index);
* chain-of-thought (COT) first greedy-generates up to a budget of rationale
  tokens after ``Let's reason step by step:``, then applies DA scoring on
  the extended context.

Scoring follows the pipeline's prompt/response framing: the formatted exam
prompt is the prompt, and the candidate continuation is scored as the
response (after the SEP token). Choice scores are length-normalized
log-likelihoods by default; ``sumll`` and ``letter`` variants are
selectable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .data import BOS, PAD, SEP, read_jsonl, tokenize
from .errors import ContractViolation, FormatError
from .model import Direction, Params, batch_logits, sample

log = logging.getLogger(__name__)

LETTERS = "ABCD"
ANSWER_CUE = "Answer:"
COT_CUE = "Let's reason step by step:"
SCORE_STYLES = ("sumll", "meanll", "letter")
PROMPT_STYLES = ("da", "cot")


@dataclass
class ExamItem:
    question: str
    choices: list[str]
    answer: int
    category: str

    def __post_init__(self):
        if len(self.choices) != 4:
            raise ContractViolation("exam items carry exactly 4 choices")
        if not 0 <= self.answer <= 3:
            raise ContractViolation(f"answer index {self.answer} out of range")


def parse_exam_record(rec: dict) -> ExamItem:
    answer = rec["answer"]
    if isinstance(answer, str):
        answer = answer.strip().upper()
        if answer not in LETTERS:
            raise FormatError(f"answer must be one of A-D, got {answer!r}")
        answer = LETTERS.index(answer)
    return ExamItem(question=rec["question"], choices=list(rec["choices"]),
                    answer=int(answer), category=rec.get("category", "default"))


def load_exam(path) -> list[ExamItem]:
    items = [parse_exam_record(rec) for rec in read_jsonl(path)]
    if not items:
        raise ContractViolation(f"exam file {path} is empty")
    return items


def format_question(item: ExamItem) -> str:
    lines = [f"Question: {item.question}"]
    lines += [f"{letter}. {text}" for letter, text in zip(LETTERS, item.choices)]
    lines.append(ANSWER_CUE)
    return "\n".join(lines)


def format_shot(item: ExamItem) -> str:
    return (format_question(item)
            + f" {LETTERS[item.answer]}. {item.choices[item.answer]}\n\n")


def choice_continuation(item: ExamItem, idx: int, score: str) -> str:
    if score == "letter":
        return f" {LETTERS[idx]}"
    return f" {LETTERS[idx]}. {item.choices[idx]}"


def _continuation_nll(params: Params, prompt_ids: list[int],
                      response_prefix: list[int], cont_ids: list[int]) -> np.ndarray:
    """Per-token NLL of cont_ids as the next response tokens after
    BOS prompt SEP response_prefix."""
    framed = [BOS] + prompt_ids + [SEP] + response_prefix + cont_ids
    inputs = np.array([framed[:-1]], dtype=np.int64)
    targets = np.array([framed[1:]], dtype=np.int64)
    logits = batch_logits(params, inputs, Direction.FORWARD.index)
    nll = T.cross_entropy(logits, targets).data[0]
    # accumulate in f64 so equal per-token NLLs stay exactly tied across
    # continuations of different lengths
    return nll[len(framed) - 1 - len(cont_ids):].astype(np.float64)


def score_item(params: Params, item: ExamItem, shots: Sequence[ExamItem],
               style: str = "da", score: str = "meanll",
               cot_max_tokens: int = 64) -> int | None:
    """Predicted choice index, or None when the prompt cannot fit."""
    if style not in PROMPT_STYLES:
        raise ContractViolation(f"style must be one of {PROMPT_STYLES}")
    if score not in SCORE_STYLES:
        raise ContractViolation(f"score must be one of {SCORE_STYLES}")

    prompt_text = "".join(format_shot(s) for s in shots) + format_question(item)
    prompt_ids = tokenize(prompt_text)
    max_len = params.config.max_seq_len

    response_prefix: list[int] = []
    if style == "cot":
        cue_ids = tokenize("\n" + COT_CUE)
        if len(prompt_ids) + len(cue_ids) + 3 > max_len:
            return None
        rationale = sample(params, prompt_ids + [SEP] + cue_ids, Direction.FORWARD,
                           max_new=cot_max_tokens, temperature=0.0, seed=0)
        response_prefix = cue_ids + rationale + tokenize("\n" + ANSWER_CUE)

    values = np.empty(4)
    for idx in range(4):
        cont_ids = tokenize(choice_continuation(item, idx, score))
        framed_len = 1 + len(prompt_ids) + 1 + len(response_prefix) + len(cont_ids)
        if framed_len - 1 > max_len:
            return None
        nll = _continuation_nll(params, prompt_ids, response_prefix, cont_ids)
        if score == "sumll" or score == "letter":
            values[idx] = -nll.sum()
        else:
            values[idx] = -nll.mean()
    return int(np.argmax(values))


@dataclass
class CategoryResult:
    category: str
    n: int
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.n if self.n else 0.0


@dataclass
class ExamReport:
    categories: list[CategoryResult]
    n_scored: int
    n_correct: int
    n_skipped_items: int
    skipped_categories: list[str]
    shots: int
    style: str
    score: str

    @property
    def overall(self) -> float:
        return self.n_correct / self.n_scored if self.n_scored else 0.0

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "n_scored": self.n_scored,
            "n_correct": self.n_correct,
            "n_skipped_items": self.n_skipped_items,
            "skipped_categories": self.skipped_categories,
            "shots": self.shots, "style": self.style, "score": self.score,
            "categories": [
                {"category": c.category, "n": c.n, "accuracy": c.accuracy}
                for c in self.categories
            ],
        }

    def render(self) -> str:
        lines = [f"{'category':<24} {'n':>6} {'accuracy':>9}"]
        for c in self.categories:
            lines.append(f"{c.category:<24} {c.n:>6} {c.accuracy:>9.4f}")
        lines.append(f"{'overall':<24} {self.n_scored:>6} {self.overall:>9.4f}")
        if self.n_skipped_items:
            lines.append(f"skipped items: {self.n_skipped_items}")
        if self.skipped_categories:
            lines.append("skipped categories: " + ", ".join(self.skipped_categories))
        return "\n".join(lines)


def run_exam(params: Params, items: Sequence[ExamItem], shots: int = 0,
             style: str = "da", score: str = "meanll") -> ExamReport:
    """Few-shot evaluation: the first `shots` items of each category serve
    as exemplars (excluded from scoring). Categories with too few items are
    skipped with a warning."""
    if not items:
        raise ContractViolation("exam is empty")
    by_cat: dict[str, list[ExamItem]] = {}
    for item in items:
        by_cat.setdefault(item.category, []).append(item)

    results: list[CategoryResult] = []
    skipped_cats: list[str] = []
    n_skipped_items = 0
    for category, members in by_cat.items():
        if len(members) <= shots:
            log.warning("category %r has %d item(s) <= %d shots; skipped",
                        category, len(members), shots)
            skipped_cats.append(category)
            continue
        exemplars = members[:shots]
        res = CategoryResult(category=category, n=0, correct=0)
        for item in members[shots:]:
            pred = score_item(params, item, exemplars, style=style, score=score)
            if pred is None:
                n_skipped_items += 1
                continue
            res.n += 1
            res.correct += int(pred == item.answer)
        results.append(res)

    return ExamReport(
        categories=results,
        n_scored=sum(c.n for c in results),
        n_correct=sum(c.correct for c in results),
        n_skipped_items=n_skipped_items,
        skipped_categories=skipped_cats,
        shots=shots, style=style, score=score)


# --------------------------------------------------------------------------
# synthetic exams


_WORDS = ("ash", "bay", "cod", "dew", "elm", "fog", "gem", "hay", "ivy", "jet",
          "kit", "log", "map", "net", "oak", "pod", "quay", "rye", "sap", "tin")


def gen_synthetic_exam(n_items: int, seed: int, n_categories: int = 4,
                       balanced: bool = True) -> list[ExamItem]:
    """Deterministic word-identification items with (optionally) exactly
    balanced answer keys."""
    if n_items < 1:
        raise ContractViolation("n_items must be >= 1")
    rng = np.random.default_rng(seed)
    if balanced:
        keys = np.tile(np.arange(4), (n_items + 3) // 4)[:n_items]
        rng.shuffle(keys)
    else:
        keys = rng.integers(0, 4, size=n_items)
    items = []
    for i in range(n_items):
        picks = rng.choice(len(_WORDS), size=4, replace=False)
        answer = int(keys[i])
        target = _WORDS[picks[answer]]
        items.append(ExamItem(
            question=f"Which option is the word '{target}'? (#{i})",
            choices=[_WORDS[p] for p in picks],
            answer=answer,
            category=f"cat{i % n_categories}"))
    return items
