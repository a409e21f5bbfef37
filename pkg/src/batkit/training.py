"""Training objectives and the optimizer loop.

Pretraining sums the per-token NLL of both factorization directions and
normalizes by 2x(token count) per sequence, so each direction contributes
equally and values are comparable across lengths. Instruction tuning is
forward-only and scores response tokens (plus the closing EOS); prompt
positions carry zero loss. The optimizer is Adam with global-norm gradient
clipping; given identical (seed, config, dataset) the loop is bitwise
reproducible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from . import tensor as T
from .data import BOS, EOS, PAD, SEP, tokenize
from .errors import ContractViolation, FormatError, TrainingAborted
from .model import Direction, ModelConfig, Params, batch_logits

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 8
    steps: int = 100
    grad_clip_norm: float = 1.0
    seed: int = 0
    # RLHF knobs (consumed by batkit.rlhf)
    lambda_it: float = 0.0
    lambda_pt: float = 0.0
    ppo_clip_eps: float = 0.2
    ppo_epochs: int = 4
    rollout_max_new: int = 24
    rollout_temperature: float = 1.0
    preference_sign: str = "literal"
    holdout_fraction: float = 0.0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ContractViolation("learning_rate must be >= 0")
        for name in ("adam_beta1", "adam_beta2", "adam_eps", "batch_size", "steps"):
            if getattr(self, name) <= 0:
                raise ContractViolation(f"{name} must be > 0")
        if self.lambda_it < 0 or self.lambda_pt < 0:
            raise ContractViolation("lambda_it and lambda_pt must be >= 0")
        if self.preference_sign not in ("literal", "flipped"):
            raise ContractViolation("preference_sign must be 'literal' or 'flipped'")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractViolation(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class PromptResponsePair:
    prompt: list[int]
    response: list[int]

    def __post_init__(self):
        if not self.prompt or not self.response:
            raise ContractViolation("prompt and response must be non-empty")


USER_TAG = "U:"
ASSISTANT_TAG = "A:"


@dataclass
class DialogueHistory:
    """Ordered (speaker, text) turns; speakers alternate, ending with the
    assistant turn that becomes the training target."""

    turns: list[tuple[str, str]]


def flatten_dialogue(history: DialogueHistory | Sequence[tuple[str, str]]) -> PromptResponsePair:
    """Concatenate all but the last turn into the prompt (speaker-tagged,
    SEP-joined); the final assistant turn is the response."""
    turns = history.turns if isinstance(history, DialogueHistory) else list(history)
    if len(turns) < 2:
        raise FormatError("dialogue needs at least one user and one assistant turn")
    for i, (speaker, _) in enumerate(turns):
        expected = "user" if i % 2 == 0 else "assistant"
        if speaker != expected:
            raise FormatError(
                f"turn {i}: expected speaker {expected!r}, got {speaker!r}")
    if turns[-1][0] != "assistant":
        raise FormatError("last turn must be the assistant response")

    prompt: list[int] = []
    for i, (speaker, text) in enumerate(turns[:-1]):
        if i:
            prompt.append(SEP)
        tag = USER_TAG if speaker == "user" else ASSISTANT_TAG
        prompt.extend(tokenize(tag + text))
    return PromptResponsePair(prompt, tokenize(turns[-1][1]))


# --------------------------------------------------------------------------
# objectives


def _frame_batch(seqs: Sequence[Sequence[int]], direction: Direction):
    """Inputs/targets/mask for one direction. Each sequence of length T maps
    to T predictions: forward conditions on BOS + preceding tokens, backward
    on EOS + following tokens (via reversal)."""
    B = len(seqs)
    L = max(len(s) for s in seqs)
    inputs = np.full((B, L), PAD, dtype=np.int64)
    targets = np.full((B, L), PAD, dtype=np.int64)
    mask = np.zeros((B, L), dtype=np.float64)
    for b, seq in enumerate(seqs):
        toks = [int(t) for t in seq]
        if direction is Direction.BACKWARD:
            toks = toks[::-1]
        start = BOS if direction is Direction.FORWARD else EOS
        inputs[b, : len(toks)] = [start] + toks[:-1]
        targets[b, : len(toks)] = toks
        mask[b, : len(toks)] = 1.0
    return inputs, targets, mask


def bidir_pretrain_loss(params: Params, seqs: Sequence[Sequence[int]],
                        directions: tuple[Direction, ...] = (Direction.FORWARD,
                                                             Direction.BACKWARD),
                        tape: T.Tape | None = None,
                        bound: dict[str, T.Tensor] | None = None) -> T.Tensor:
    """Mean over the batch of per-sequence NLL summed over the requested
    directions, each sequence normalized by 2x(its token count) so that the
    two single-direction losses add up to the bidirectional one."""
    if not seqs:
        raise ContractViolation("empty batch")
    for s in seqs:
        if not len(s):
            raise ContractViolation("empty sequence in batch")
        if len(s) > params.config.max_seq_len:
            raise ContractViolation(
                f"sequence of {len(s)} tokens does not fit max_seq_len "
                f"{params.config.max_seq_len} after framing")
    w = bound if bound is not None else params.bind(tape)
    dt = params.tensors["tok_emb"].dtype
    B = len(seqs)
    total = None
    for direction in directions:
        inputs, targets, mask = _frame_batch(seqs, direction)
        weights = mask.copy()
        for b, s in enumerate(seqs):
            weights[b] /= 2.0 * len(s) * B
        logits = batch_logits(params, inputs, direction.index, tape, bound=w)
        nll = T.cross_entropy(logits, targets)
        contrib = (nll * weights.astype(dt)).sum()
        total = contrib if total is None else total + contrib
    return total


def _frame_pair(pair: PromptResponsePair):
    framed = [BOS] + list(pair.prompt) + [SEP] + list(pair.response) + [EOS]
    inputs = framed[:-1]
    targets = framed[1:]
    boundary = 1 + len(pair.prompt)  # first position whose target is in the response
    return inputs, targets, boundary


def instruct_loss(params: Params, pairs: Sequence[PromptResponsePair],
                  tape: T.Tape | None = None,
                  bound: dict[str, T.Tensor] | None = None,
                  return_skipped: bool = False):
    """Forward-direction NLL averaged over response tokens (and EOS) only.

    Pairs that do not fit max_seq_len are skipped with a counted warning;
    an entirely skipped batch is a contract violation.
    """
    if not pairs:
        raise ContractViolation("empty batch")
    kept, skipped = [], 0
    for pair in pairs:
        if len(pair.prompt) + len(pair.response) + 3 > params.config.max_seq_len:
            skipped += 1
        else:
            kept.append(pair)
    if skipped:
        log.warning("instruct_loss: skipped %d overlong pair(s)", skipped)
    if not kept:
        raise ContractViolation("every pair in the batch was overlong")

    framed = [_frame_pair(p) for p in kept]
    B = len(framed)
    L = max(len(inp) for inp, _, _ in framed)
    inputs = np.full((B, L), PAD, dtype=np.int64)
    targets = np.full((B, L), PAD, dtype=np.int64)
    mask = np.zeros((B, L), dtype=np.float64)
    for b, (inp, tgt, boundary) in enumerate(framed):
        inputs[b, : len(inp)] = inp
        targets[b, : len(tgt)] = tgt
        mask[b, boundary: len(tgt)] = 1.0

    w = bound if bound is not None else params.bind(tape)
    dt = params.tensors["tok_emb"].dtype
    logits = batch_logits(params, inputs, Direction.FORWARD.index, tape, bound=w)
    nll = T.cross_entropy(logits, targets)
    weights = (mask / mask.sum()).astype(dt)
    loss = (nll * weights).sum()
    return (loss, skipped) if return_skipped else loss


# --------------------------------------------------------------------------
# optimizer


class Adam:
    """Adam with global-norm clipping over a named parameter dict."""

    def __init__(self, tensors: dict[str, np.ndarray], config: TrainConfig):
        self.config = config
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in tensors.items()}

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> float:
        """Apply one update in place; returns the pre-clip global norm."""
        cfg = self.config
        names = sorted(tensors)
        sq = 0.0
        for name in names:
            g = grads[name]
            sq += float(np.dot(g.reshape(-1), g.reshape(-1)))
        norm = float(np.sqrt(sq))
        scale = 1.0
        if cfg.grad_clip_norm and norm > cfg.grad_clip_norm:
            scale = cfg.grad_clip_norm / norm
        self.t += 1
        for name in names:
            g = grads[name]
            if scale != 1.0:
                g = g * g.dtype.type(scale)
            kernels.active.adam_step(
                tensors[name], g, self.m[name], self.v[name], self.t,
                cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        return norm


# --------------------------------------------------------------------------
# the loop


def _parse_instruct_record(rec: dict) -> PromptResponsePair:
    if "turns" in rec:
        turns = [(t["speaker"], t["text"]) for t in rec["turns"]]
        return flatten_dialogue(turns)
    if "prompt" in rec and "response" in rec:
        return PromptResponsePair(tokenize(rec["prompt"]), tokenize(rec["response"]))
    raise FormatError(f"instruction record needs prompt/response or turns: {rec}")


def prepare_pretrain_dataset(docs: Sequence[str | Sequence[int]],
                             cfg: ModelConfig) -> list[list[int]]:
    out = []
    truncated = 0
    for doc in docs:
        toks = tokenize(doc) if isinstance(doc, str) else [int(t) for t in doc]
        if not toks:
            continue
        limit = cfg.max_seq_len - 2
        if len(toks) > limit:
            toks = toks[:limit]
            truncated += 1
        out.append(toks)
    if truncated:
        log.warning("truncated %d overlong document(s)", truncated)
    if not out:
        raise ContractViolation("dataset is empty after tokenization")
    return out


def prepare_instruct_dataset(records: Iterable[dict | PromptResponsePair]) -> list[PromptResponsePair]:
    out = []
    for rec in records:
        out.append(rec if isinstance(rec, PromptResponsePair) else _parse_instruct_record(rec))
    if not out:
        raise ContractViolation("dataset is empty")
    return out


def train(params: Params, objective: str, dataset, config: TrainConfig,
          loss_fn: Callable | None = None,
          on_step: Callable[[int, float], None] | None = None) -> tuple[Params, list[float]]:
    """Adam training loop over a tokenized dataset.

    objective selects the loss: 'pretrain' (bidirectional NLL over token
    sequences) or 'instruct' (response NLL over prompt/response pairs).
    A custom loss_fn(params, batch, tape) overrides both. Identical
    (seed, config, dataset) inputs give bitwise-identical results.
    """
    if objective == "pretrain":
        items = prepare_pretrain_dataset(dataset, params.config)
        fn = loss_fn or (lambda p, batch, tape: bidir_pretrain_loss(p, batch, tape=tape))
    elif objective == "instruct":
        items = prepare_instruct_dataset(dataset)
        fn = loss_fn or (lambda p, batch, tape: instruct_loss(p, batch, tape=tape))
    else:
        if loss_fn is None:
            raise ContractViolation(f"unknown objective {objective!r}")
        items = list(dataset)
        fn = loss_fn
    if not items:
        raise ContractViolation("dataset is empty")

    work = params.clone()
    opt = Adam(work.tensors, config)
    rng = np.random.default_rng(config.seed)
    order: list[int] = []
    history: list[float] = []

    for step in range(config.steps):
        while len(order) < config.batch_size:
            order.extend(rng.permutation(len(items)).tolist())
        batch_ids = order[: config.batch_size]
        del order[: config.batch_size]
        batch = [items[i] for i in batch_ids]

        tape = T.Tape()
        loss = fn(work, batch, tape)
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingAborted(
                f"non-finite loss {value} at step {step}", step=step,
                batch_ids=batch_ids)
        history.append(value)
        grads = T.grad_by_name(loss)
        opt.step(work.tensors, grads)
        if on_step is not None:
            on_step(step, value)

    return work, history
