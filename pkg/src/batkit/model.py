"""Direction-conditioned decoder transformer.

One parameter set realizes both factorization directions of the sequence
probability: left-to-right, and right-to-left computed by reversing the
token sequence, adding a per-direction embedding at every position, and
reusing the single lower-triangular causal mask. Forward passes condition
on BOS; reversed passes condition on EOS (the terminator becomes the first
token of the reversed stream). Each real token is predicted exactly once
per direction.

Blocks are pre-layernorm with a GeLU FFN, learned absolute positions, and
an untied unembedding. The reward stage adds a single linear head applied
to the final-position hidden state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import tensor as T
from .data import BOS, EOS, PAD, SEP, VOCAB_SIZE
from .errors import ContractViolation, LengthError, VocabError
from .precision import active_dtype

ATTN_MASK_VALUE = -1e9

STAGES = ("pretrain", "instruct", "rl_policy", "reward")
_STAGE_CHAIN = {"pretrain": 0, "instruct": 1, "rl_policy": 2}


class Direction(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"

    @property
    def index(self) -> int:
        return 0 if self is Direction.FORWARD else 1


@dataclass(frozen=True)
class ModelConfig:
    d_model: int
    n_heads: int
    d_head: int
    d_ff: int
    n_layers: int
    max_seq_len: int
    vocab_size: int = VOCAB_SIZE

    def __post_init__(self):
        if self.vocab_size != VOCAB_SIZE:
            raise ContractViolation(f"vocab_size is fixed at {VOCAB_SIZE}")
        if min(self.d_model, self.n_heads, self.d_head, self.d_ff) < 1:
            raise ContractViolation("model dimensions must be >= 1")
        if self.n_layers < 0:
            raise ContractViolation("n_layers must be >= 0")
        if self.max_seq_len < 2:
            raise ContractViolation("max_seq_len must be >= 2")
        if self.d_model != self.n_heads * self.d_head:
            raise ContractViolation(
                f"d_model ({self.d_model}) != n_heads*d_head "
                f"({self.n_heads}*{self.d_head})")

    def to_dict(self) -> dict:
        return {
            "d_model": self.d_model, "n_heads": self.n_heads,
            "d_head": self.d_head, "d_ff": self.d_ff,
            "n_layers": self.n_layers, "max_seq_len": self.max_seq_len,
            "vocab_size": self.vocab_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{k: int(v) for k, v in d.items()})


def _layer_names(i: int, cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, dff = cfg.d_model, cfg.d_ff
    p = f"layers.{i}."
    return {
        p + "attn_ln.gain": (d,), p + "attn_ln.bias": (d,),
        p + "attn.wq": (d, d), p + "attn.wk": (d, d),
        p + "attn.wv": (d, d), p + "attn.wo": (d, d),
        p + "ffn_ln.gain": (d,), p + "ffn_ln.bias": (d,),
        p + "ffn.w1": (d, dff), p + "ffn.w2": (dff, d),
    }


def expected_shapes(cfg: ModelConfig, stage: str) -> dict[str, tuple[int, ...]]:
    shapes = {
        "tok_emb": (cfg.vocab_size, cfg.d_model),
        "pos_emb": (cfg.max_seq_len, cfg.d_model),
        "dir_emb": (2, cfg.d_model),
        "final_ln.gain": (cfg.d_model,), "final_ln.bias": (cfg.d_model,),
        "unembed": (cfg.d_model, cfg.vocab_size),
    }
    for i in range(cfg.n_layers):
        shapes.update(_layer_names(i, cfg))
    if stage == "reward":
        shapes["reward_head"] = (cfg.d_model, 1)
    return shapes


@dataclass
class Params:
    """Named tensors for one model stage.

    Stage transitions move only forward along pretrain -> instruct ->
    rl_policy; the reward stage is a head graft reachable from any stage.
    """

    config: ModelConfig
    tensors: dict[str, np.ndarray]
    stage_tag: str = "pretrain"

    def __post_init__(self):
        if self.stage_tag not in STAGES:
            raise ContractViolation(f"unknown stage {self.stage_tag!r}")
        self.validate()

    def validate(self) -> None:
        expected = expected_shapes(self.config, self.stage_tag)
        have = set(self.tensors)
        want = set(expected)
        if have != want:
            raise ContractViolation(
                f"tensor names mismatch: missing={sorted(want - have)} "
                f"unexpected={sorted(have - want)}")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ContractViolation(
                    f"{name}: shape {self.tensors[name].shape}, expected {shape}")

    def names(self) -> list[str]:
        return sorted(self.tensors)

    def clone(self) -> "Params":
        return Params(self.config, {k: v.copy() for k, v in self.tensors.items()},
                      self.stage_tag)

    def astype(self, dtype) -> "Params":
        return Params(self.config,
                      {k: v.astype(dtype) for k, v in self.tensors.items()},
                      self.stage_tag)

    def with_stage(self, stage: str) -> "Params":
        if stage not in STAGES:
            raise ContractViolation(f"unknown stage {stage!r}")
        if stage != "reward" and self.stage_tag != "reward":
            if _STAGE_CHAIN[stage] < _STAGE_CHAIN[self.stage_tag]:
                raise ContractViolation(
                    f"stage may only advance: {self.stage_tag} -> {stage}")
        elif self.stage_tag == "reward" and stage != "reward":
            raise ContractViolation("reward params cannot rejoin the policy chain")
        out = self.clone()
        if stage == "reward" and "reward_head" not in out.tensors:
            d = self.config.d_model
            out.tensors["reward_head"] = np.zeros((d, 1), dtype=self._dtype())
        if stage != "reward":
            out.tensors.pop("reward_head", None)
        return Params(out.config, out.tensors, stage)

    def _dtype(self):
        return self.tensors["tok_emb"].dtype

    def bind(self, tape: T.Tape | None, trainable: bool = True) -> dict[str, T.Tensor]:
        """Attach every tensor to a tape as a named (trainable) leaf."""
        if tape is None:
            return {k: T.Tensor(v) for k, v in self.tensors.items()}
        return {k: tape.leaf(v, trainable=trainable, name=k)
                for k, v in sorted(self.tensors.items())}


def init_params(cfg: ModelConfig, seed: int, stage: str = "pretrain",
                init_scale: float = 0.02) -> Params:
    """Random initialization: N(0, init_scale) weights, identity layernorms."""
    rng = np.random.default_rng(seed)
    dt = active_dtype()
    tensors = {}
    for name, shape in sorted(expected_shapes(cfg, stage).items()):
        if name.endswith("ln.gain"):
            tensors[name] = np.ones(shape, dtype=dt)
        elif name.endswith("ln.bias") or name == "reward_head":
            tensors[name] = np.zeros(shape, dtype=dt)
        else:
            tensors[name] = rng.normal(0.0, init_scale, size=shape).astype(dt)
    return Params(cfg, tensors, stage)


# --------------------------------------------------------------------------
# forward computation


def _causal_mask(length: int, dtype) -> np.ndarray:
    mask = np.zeros((length, length), dtype=dtype)
    mask[np.triu_indices(length, k=1)] = dtype.type(ATTN_MASK_VALUE)
    return mask


def batch_hidden(params: Params, inputs: np.ndarray, dir_index: int,
                 tape: T.Tape | None = None,
                 bound: dict[str, T.Tensor] | None = None) -> T.Tensor:
    """Residual-stream output (B, L, d_model) for framed input ids."""
    cfg = params.config
    inputs = np.asarray(inputs, dtype=np.int64)
    if inputs.ndim != 2:
        raise ContractViolation("batch input must be 2-D (batch, positions)")
    B, L = inputs.shape
    if L > cfg.max_seq_len:
        raise LengthError(f"sequence length {L} exceeds max_seq_len {cfg.max_seq_len}")
    if inputs.min() < 0 or inputs.max() >= cfg.vocab_size:
        raise VocabError("token id outside vocabulary")

    w = bound if bound is not None else params.bind(tape)
    tok = T.gather_rows(w["tok_emb"], inputs)                      # (B, L, d)
    pos = T.gather_rows(w["pos_emb"], np.arange(L, dtype=np.int64))
    dire = T.gather_rows(w["dir_emb"], np.array([dir_index], dtype=np.int64))
    h = tok + pos + dire

    nh, dh = cfg.n_heads, cfg.d_head
    scale = 1.0 / float(np.sqrt(dh))
    mask = T.Tensor(_causal_mask(L, params._dtype()))

    for i in range(cfg.n_layers):
        p = f"layers.{i}."
        a = T.layernorm(h, w[p + "attn_ln.gain"], w[p + "attn_ln.bias"])
        q = (a @ w[p + "attn.wq"]).reshape(B, L, nh, dh).transpose((0, 2, 1, 3))
        k = (a @ w[p + "attn.wk"]).reshape(B, L, nh, dh).transpose((0, 2, 1, 3))
        v = (a @ w[p + "attn.wv"]).reshape(B, L, nh, dh).transpose((0, 2, 1, 3))
        scores = (q @ k.transpose((0, 1, 3, 2))) * scale + mask
        att = T.softmax(scores)
        ctx = (att @ v).transpose((0, 2, 1, 3)).reshape(B, L, nh * dh)
        h = h + ctx @ w[p + "attn.wo"]

        m = T.layernorm(h, w[p + "ffn_ln.gain"], w[p + "ffn_ln.bias"])
        h = h + T.gelu(m @ w[p + "ffn.w1"]) @ w[p + "ffn.w2"]

    return T.layernorm(h, w["final_ln.gain"], w["final_ln.bias"])


def batch_logits(params: Params, inputs: np.ndarray, dir_index: int,
                 tape: T.Tape | None = None,
                 bound: dict[str, T.Tensor] | None = None) -> T.Tensor:
    w = bound if bound is not None else params.bind(tape)
    h = batch_hidden(params, inputs, dir_index, tape, bound=w)
    return h @ w["unembed"]


def conditioned_logits(params: Params, ids: Sequence[int], dir_index: int,
                       start_token: int, tape: T.Tape | None = None) -> T.Tensor:
    """Next-token logits for each position of ids, conditioned on a start
    token: row t is the distribution over ids[t] given start + ids[:t]."""
    ids = [int(i) for i in ids]
    framed = np.array([[start_token] + ids[:-1]], dtype=np.int64)
    out = batch_logits(params, framed, dir_index, tape)
    return out.reshape(len(ids), params.config.vocab_size)


def forward(params: Params, tokens: Sequence[int], direction: Direction,
            tape: T.Tape | None = None) -> T.Tensor:
    """Per-position next-token logits (T, vocab) in the given direction.

    Forward: row t depends only on tokens before t. Backward: computed on
    the reversed sequence and returned row-reversed, so row t depends only
    on tokens after t.
    """
    tokens = [int(t) for t in tokens]
    if not tokens:
        raise ContractViolation("empty token sequence")
    if len(tokens) > params.config.max_seq_len:
        raise LengthError(
            f"{len(tokens)} tokens exceed max_seq_len {params.config.max_seq_len}")
    if min(tokens) < 0 or max(tokens) >= params.config.vocab_size:
        raise VocabError("token id outside vocabulary")
    if direction is Direction.FORWARD:
        return conditioned_logits(params, tokens, 0, BOS, tape)
    rev = conditioned_logits(params, tokens[::-1], 1, EOS, tape)
    return T.gather_rows(rev, np.arange(len(tokens) - 1, -1, -1, dtype=np.int64))


def reward_forward(params: Params, prompt: Sequence[int], response: Sequence[int],
                   tape: T.Tape | None = None,
                   bound: dict[str, T.Tensor] | None = None) -> T.Tensor:
    """Scalar reward: linear head on the final hidden state over
    prompt + SEP + response."""
    if params.stage_tag != "reward":
        raise ContractViolation(f"reward_forward needs stage=reward, got {params.stage_tag}")
    ids = [int(t) for t in prompt] + [SEP] + [int(t) for t in response]
    if len(ids) > params.config.max_seq_len:
        raise LengthError(f"{len(ids)} tokens exceed max_seq_len")
    w = bound if bound is not None else params.bind(tape)
    h = batch_hidden(params, np.array([ids], dtype=np.int64), 0, tape, bound=w)
    last = T.gather_rows(h.reshape(len(ids), params.config.d_model),
                         np.array([len(ids) - 1], dtype=np.int64))
    return (last @ w["reward_head"]).reshape(())


def batch_rewards(params: Params, pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
                  tape: T.Tape | None = None,
                  bound: dict[str, T.Tensor] | None = None) -> T.Tensor:
    """Rewards for a batch of (prompt, response) pairs, PAD-pooled. Returns
    a (B,) tensor; equals reward_forward on each pair."""
    if params.stage_tag != "reward":
        raise ContractViolation("batch_rewards needs stage=reward")
    seqs = []
    for prompt, response in pairs:
        ids = [int(t) for t in prompt] + [SEP] + [int(t) for t in response]
        if len(ids) > params.config.max_seq_len:
            raise LengthError(f"{len(ids)} tokens exceed max_seq_len")
        seqs.append(ids)
    L = max(len(s) for s in seqs)
    batch = np.full((len(seqs), L), PAD, dtype=np.int64)
    last = np.empty(len(seqs), dtype=np.int64)
    for b, s in enumerate(seqs):
        batch[b, : len(s)] = s
        last[b] = b * L + len(s) - 1
    w = bound if bound is not None else params.bind(tape)
    h = batch_hidden(params, batch, 0, tape, bound=w)
    flat = h.reshape(len(seqs) * L, params.config.d_model)
    pooled = T.gather_rows(flat, last)
    return (pooled @ w["reward_head"]).reshape(len(seqs))


def sample(params: Params, prompt: Sequence[int], direction: Direction,
           max_new: int, temperature: float, seed: int) -> list[int]:
    """Autoregressive decode. Returns the newly generated tokens in natural
    reading order (for the backward direction they precede the prompt).

    temperature 0 is argmax with lowest-token-id tie-break; generation
    stops at EOS, max_new tokens, or the model's context limit.
    """
    if temperature < 0:
        raise ContractViolation("temperature must be >= 0")
    if max_new < 1:
        raise ContractViolation("max_new must be >= 1")
    cfg = params.config
    prompt = [int(t) for t in prompt]
    if len(prompt) + 1 > cfg.max_seq_len:
        raise LengthError("prompt alone exceeds max_seq_len")

    if direction is Direction.FORWARD:
        stream = [BOS] + prompt
    else:
        stream = [EOS] + prompt[::-1]
    rng = np.random.default_rng(seed)
    generated: list[int] = []
    for _ in range(max_new):
        if len(stream) + 1 > cfg.max_seq_len:
            break
        logits = batch_logits(params, np.array([stream], dtype=np.int64),
                              direction.index).data[0, -1]
        if temperature == 0:
            nxt = int(np.argmax(logits))
        else:
            z = (logits / temperature).astype(np.float64)
            z -= z.max()
            p = np.exp(z)
            p /= p.sum()
            nxt = int(rng.choice(cfg.vocab_size, p=p))
        if nxt == EOS:
            break
        stream.append(nxt)
        generated.append(nxt)
    if direction is Direction.BACKWARD:
        generated.reverse()
    return generated
