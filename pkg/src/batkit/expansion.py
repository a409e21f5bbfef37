"""Function-preserving model growth: width expansion and layer stacking.

Width expansion builds index maps from target coordinates onto source
coordinates: an identity prefix, with the new tail either *sampled*
uniformly with replacement ("approx" mode) or generated by *cyclic
repetition* ("exact" mode, requires an integer width multiple). A weight
matrix grows in two stages: rows are copied through the in-map and divided
by the multiplicity of their source row, then columns are copied through
the out-map. Copying the inputs of a grown layer therefore reproduces the
original outputs, duplicated along the out-map.

Exactness through layernorm needs every residual coordinate duplicated the
same number of times (uniform multiplicity preserves mean and variance),
which is why exact mode insists on integer multiples and cyclic maps;
sampled maps are still offered, with the drift reported rather than
asserted. Attention width grows by whole-head duplication so the head-size
scaling stays untouched; feed-forward width has its own flat map; gains,
biases and embeddings expand by copy, never averaged.

Sampling uses the SplitMix64 generator (documented in :class:`SplitMix64`)
so maps are reproducible from (d_src, d_tgt, seed, structure) across
implementations.

Depth grows by duplicating the whole layer stack (layer L+i is a bitwise
copy of layer i) and retraining, progressively doubling from a shallow
model to the target depth.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation
from .model import Direction, ModelConfig, Params, forward, init_params
from .precision import active_dtype

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """The normative map-sampling generator.

    state is a 64-bit integer. Each draw advances
    ``state = (state + 0x9E3779B97F4A7C15) mod 2**64`` and outputs::

        z = state
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (mod 2**64)
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB  (mod 2**64)
        z = z ^ (z >> 31)

    ``next_below(n)`` is ``z mod n``.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        return self.next_u64() % n


MODES = ("exact", "approx")
STRUCTURES = ("flat", "head_block")


@dataclass(frozen=True)
class ExpansionMap:
    """Index map from target coordinates onto source coordinates.

    ``m`` has length d_tgt with 0-based values in [0, d_src); the first
    d_src entries are the identity. ``multiplicity[i]`` counts how many
    target coordinates map onto source coordinate i (the re-scaling
    denominators); it sums to d_tgt and every entry is >= 1.
    """

    d_src: int
    d_tgt: int
    seed: int
    structure: str
    mode: str
    m: np.ndarray
    multiplicity: np.ndarray
    d_head: int | None = None

    def __post_init__(self):
        if self.m.shape != (self.d_tgt,):
            raise ContractViolation("map length must equal d_tgt")
        if self.multiplicity.sum() != self.d_tgt or self.multiplicity.min() < 1:
            raise ContractViolation("multiplicities must cover every source index")
        if not np.array_equal(self.m[: self.d_src], np.arange(self.d_src)):
            raise ContractViolation("map must be the identity on the source prefix")

    def to_json_line(self) -> str:
        return json.dumps({
            "kind": "expansion_map", "d_src": self.d_src, "d_tgt": self.d_tgt,
            "seed": self.seed, "structure": self.structure, "mode": self.mode,
            "d_head": self.d_head, "index_base": 0,
            "m": self.m.tolist(), "multiplicity": self.multiplicity.tolist(),
        })


def identity_map(n: int) -> ExpansionMap:
    return ExpansionMap(n, n, 0, "flat", "exact",
                        np.arange(n, dtype=np.int64),
                        np.ones(n, dtype=np.int64))


def _tail(d_src: int, d_tgt: int, seed: int, mode: str) -> np.ndarray:
    """Source indices for target coordinates d_src..d_tgt-1."""
    count = d_tgt - d_src
    if count == 0:
        return np.empty(0, dtype=np.int64)
    if mode == "exact":
        if d_tgt % d_src != 0:
            raise ContractViolation(
                f"exact mode needs an integer multiple, got {d_src} -> {d_tgt}")
        return np.array([i % d_src for i in range(d_src, d_tgt)], dtype=np.int64)
    gen = SplitMix64(seed)
    return np.array([gen.next_below(d_src) for _ in range(count)], dtype=np.int64)


def build_mapping(d_src: int, d_tgt: int, seed: int, structure: str = "flat",
                  d_head: int | None = None, mode: str = "exact") -> ExpansionMap:
    """Construct a coordinate map: identity prefix plus a sampled (approx)
    or cyclically repeated (exact) tail. head_block structure maps whole
    head-sized blocks so attention geometry survives."""
    if mode not in MODES:
        raise ContractViolation(f"mode must be one of {MODES}")
    if structure not in STRUCTURES:
        raise ContractViolation(f"structure must be one of {STRUCTURES}")
    if d_src < 1 or d_tgt < d_src:
        raise ContractViolation(f"need d_tgt >= d_src >= 1, got {d_src} -> {d_tgt}")

    if structure == "head_block":
        if not d_head or d_src % d_head or d_tgt % d_head:
            raise ContractViolation(
                "head_block structure needs dims divisible by d_head")
        h_src, h_tgt = d_src // d_head, d_tgt // d_head
        heads = np.concatenate([np.arange(h_src, dtype=np.int64),
                                _tail(h_src, h_tgt, seed, mode)])
        m = (heads[:, None] * d_head + np.arange(d_head, dtype=np.int64)).reshape(-1)
    else:
        m = np.concatenate([np.arange(d_src, dtype=np.int64),
                            _tail(d_src, d_tgt, seed, mode)])
    multiplicity = np.bincount(m, minlength=d_src).astype(np.int64)
    return ExpansionMap(d_src, d_tgt, seed, structure, mode, m, multiplicity,
                        d_head=d_head)


def expand_matrix(q: np.ndarray, m_in: ExpansionMap, m_out: ExpansionMap) -> np.ndarray:
    """Two-stage weight growth: row i of the intermediate is row m_in[i] of
    q divided by that source row's multiplicity; column j of the result is
    column m_out[j] of the intermediate."""
    q = np.asarray(q)
    if q.shape != (m_in.d_src, m_out.d_src):
        raise ContractViolation(
            f"matrix shape {q.shape} does not match maps "
            f"({m_in.d_src}, {m_out.d_src})")
    scaled = q[m_in.m, :] / m_in.multiplicity[m_in.m][:, None].astype(q.dtype)
    return np.ascontiguousarray(scaled[:, m_out.m])


def expand_vector(v: np.ndarray, m_out: ExpansionMap) -> np.ndarray:
    """Copy semantics along the out-map (gains, biases, embedding columns)."""
    v = np.asarray(v)
    if v.shape != (m_out.d_src,):
        raise ContractViolation(f"vector shape {v.shape} != ({m_out.d_src},)")
    return np.ascontiguousarray(v[m_out.m])


def save_maps(maps: Sequence[ExpansionMap], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for m in maps:
            fh.write(m.to_json_line() + "\n")


# --------------------------------------------------------------------------
# whole-model width expansion


def plan_maps(src_cfg: ModelConfig, tgt_cfg: ModelConfig, seed: int,
              mode: str = "exact") -> dict[str, ExpansionMap]:
    """One shared residual map, one whole-head attention map, one FFN map."""
    if tgt_cfg.n_layers != src_cfg.n_layers:
        raise ContractViolation("width expansion keeps n_layers fixed; use stack_layers")
    if tgt_cfg.d_head != src_cfg.d_head:
        raise ContractViolation("d_head is fixed; widths grow by whole heads")
    if tgt_cfg.max_seq_len != src_cfg.max_seq_len:
        raise ContractViolation("max_seq_len expansion is out of scope")
    for dim in ("d_model", "n_heads", "d_ff"):
        if getattr(tgt_cfg, dim) < getattr(src_cfg, dim):
            raise ContractViolation(f"target {dim} smaller than source")
    gen = SplitMix64(seed)
    seeds = [gen.next_u64() for _ in range(3)]
    return {
        "residual": build_mapping(src_cfg.d_model, tgt_cfg.d_model,
                                  seeds[0], "flat", mode=mode),
        "heads": build_mapping(src_cfg.d_model, tgt_cfg.d_model, seeds[1],
                               "head_block", d_head=src_cfg.d_head, mode=mode),
        "ffn": build_mapping(src_cfg.d_ff, tgt_cfg.d_ff, seeds[2], "flat", mode=mode),
    }


def expand_model(src: Params, tgt_cfg: ModelConfig, seed: int,
                 mode: str = "exact") -> Params:
    """Grow src to tgt_cfg's widths with one consistent residual map.

    In exact mode the grown model computes identical logits (up to float
    rounding) for every input; approx mode follows the sampled maps and the
    verifier reports drift instead of asserting it.
    """
    maps = plan_maps(src.config, tgt_cfg, seed, mode)
    res, heads, ffn = maps["residual"], maps["heads"], maps["ffn"]
    id_vocab = identity_map(src.config.vocab_size)
    id_pos = identity_map(src.config.max_seq_len)
    id_dir = identity_map(2)
    id_one = identity_map(1)

    out: dict[str, np.ndarray] = {}
    for name, q in src.tensors.items():
        if name == "tok_emb":
            out[name] = expand_matrix(q, id_vocab, res)
        elif name == "pos_emb":
            out[name] = expand_matrix(q, id_pos, res)
        elif name == "dir_emb":
            out[name] = expand_matrix(q, id_dir, res)
        elif name.endswith(("ln.gain", "ln.bias")):
            out[name] = expand_vector(q, res)
        elif name.endswith((".wq", ".wk", ".wv")):
            out[name] = expand_matrix(q, res, heads)
        elif name.endswith(".wo"):
            out[name] = expand_matrix(q, heads, res)
        elif name.endswith(".w1"):
            out[name] = expand_matrix(q, res, ffn)
        elif name.endswith(".w2"):
            out[name] = expand_matrix(q, ffn, res)
        elif name == "unembed":
            out[name] = expand_matrix(q, res, id_vocab)
        elif name == "reward_head":
            out[name] = expand_matrix(q, res, id_one)
        else:
            raise ContractViolation(f"no expansion rule for tensor {name!r}")
    return Params(tgt_cfg, out, src.stage_tag)


def verify_preservation(src: Params, tgt: Params, n_probes: int, seed: int) -> float:
    """Max |logit difference| between the two models over random probe
    sequences, both directions, in the active float width."""
    if src.config.vocab_size != tgt.config.vocab_size:
        raise ContractViolation("vocab mismatch")
    if src.config.n_layers != tgt.config.n_layers:
        raise ContractViolation("layer-count mismatch; compare equal depths")
    dt = active_dtype()
    a = src.astype(dt)
    b = tgt.astype(dt)
    rng = np.random.default_rng(seed)
    max_len = min(src.config.max_seq_len, tgt.config.max_seq_len)
    worst = 0.0
    for _ in range(n_probes):
        length = int(rng.integers(1, max_len))
        tokens = rng.integers(0, 256, size=length).tolist()
        for direction in (Direction.FORWARD, Direction.BACKWARD):
            la = forward(a, tokens, direction).data
            lb = forward(b, tokens, direction).data
            worst = max(worst, float(np.max(np.abs(la - lb))))
    return worst


# --------------------------------------------------------------------------
# depth growth


def stack_layers(src: Params, times: int = 1, max_layers: int = 4096) -> Params:
    """Duplicate the whole layer stack `times` times (depth x 2^times).

    After one doubling, layer L+i is a bitwise copy of layer i; embeddings,
    the final layernorm and the unembedding are copied unchanged.
    """
    if times < 1:
        raise ContractViolation("times must be >= 1")
    new_layers = src.config.n_layers * (2 ** times)
    if new_layers > max_layers:
        raise ContractViolation(
            f"stacking to {new_layers} layers exceeds the limit {max_layers}")
    if src.config.n_layers == 0:
        raise ContractViolation("cannot stack a 0-layer model")

    params = src
    for _ in range(times):
        L = params.config.n_layers
        cfg = replace(params.config, n_layers=2 * L)
        tensors: dict[str, np.ndarray] = {}
        for name, arr in params.tensors.items():
            if name.startswith("layers."):
                continue
            tensors[name] = arr.copy()
        for i in range(2 * L):
            src_i = i % L
            prefix = f"layers.{src_i}."
            for name, arr in params.tensors.items():
                if name.startswith(prefix):
                    tensors[f"layers.{i}." + name[len(prefix):]] = arr.copy()
        params = Params(cfg, tensors, params.stage_tag)
    return params


@dataclass
class StageReport:
    stage: int
    depth: int
    steps: int
    seconds: float
    losses: list[float]


TrainFn = Callable[[Params, Sequence, int, int], tuple[Params, list[float]]]


def progressive_stack(train_fn: TrainFn, model_cfg: ModelConfig, k: int,
                      per_stage_steps: Sequence[int], corpus: Sequence,
                      seed: int) -> tuple[Params, list[StageReport]]:
    """Train a depth-L/2^k model from scratch, then k rounds of
    (double the stack, retrain). model_cfg.n_layers is the target depth.

    train_fn(params, corpus, steps, stage_index) -> (params, loss history)
    supplies the Train() step so callers control the objective/optimizer.
    """
    target = model_cfg.n_layers
    if k < 0:
        raise ContractViolation("k must be >= 0")
    if target % (2 ** k) != 0:
        raise ContractViolation(f"target depth {target} not divisible by 2^{k}")
    if len(per_stage_steps) != k + 1:
        raise ContractViolation(
            f"need {k + 1} per-stage step counts, got {len(per_stage_steps)}")

    params = init_params(replace(model_cfg, n_layers=target >> k), seed=seed)
    reports: list[StageReport] = []
    for stage in range(k + 1):
        if stage > 0:
            params = stack_layers(params, times=1)
        t0 = time.perf_counter()
        params, losses = train_fn(params, corpus, int(per_stage_steps[stage]), stage)
        reports.append(StageReport(
            stage=stage, depth=params.config.n_layers,
            steps=int(per_stage_steps[stage]),
            seconds=time.perf_counter() - t0, losses=losses))
    return params, reports
