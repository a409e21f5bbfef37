"""Reward modeling, the regularized RL objective, PPO, and AI feedback.

The reward model trains on the pairwise hinge
``max(0, 1 - d * (r(y) - r(y')))`` taken literally: d = -1 marks the first
response preferred, d = +1 the second, d = 0 a tie (constant loss, exactly
zero gradient). Because the literal hinge drives the margin
``d * (r(y) - r(y'))`` to +1, ranking accuracy is scored as
``sign(r(y) - r(y')) == sign(d)``; ``preference_sign='flipped'`` negates d
everywhere for the opposite convention.

The policy objective combines sequence-level reward, a sequence-level
log-ratio penalty against the frozen instruct reference (weight lambda_it),
and the bidirectional pretraining likelihood (weight lambda_pt). It is
optimized as a critic-free PPO: scalar per-rollout returns, advantages
centered on the batch mean, per-response-token probability ratios with a
clipped surrogate.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import logging
from dataclasses import dataclass, field, asdict
from typing import Callable, Iterable, Sequence

import numpy as np

from . import tensor as T
from .data import BOS, EOS, PAD, SEP, tokenize
from .errors import ConfigError, ContractViolation, TrainingAborted
from .model import (Direction, Params, batch_logits, batch_rewards,
                    reward_forward, sample)
from .training import Adam, TrainConfig, bidir_pretrain_loss, prepare_pretrain_dataset

log = logging.getLogger(__name__)

VALID_D = (-1, 0, 1)


@dataclass
class PreferenceRecord:
    """One labeled comparison of two responses to the same prompt."""

    id: str
    prompt: str
    response_a: str
    response_b: str
    d: int
    accept_a: bool | None = None
    accept_b: bool | None = None
    source: str = "human"
    annotator_id: str | None = None
    created_at: str = ""
    quality_flag: str | None = None

    def __post_init__(self):
        if self.d not in VALID_D:
            raise ContractViolation(f"d must be in {VALID_D}, got {self.d}")
        if self.source == "ai" and not self.annotator_id:
            raise ContractViolation("AI records must name their judge in annotator_id")

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.quality_flag is None:
            out.pop("quality_flag")
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PreferenceRecord":
        known = {"id", "prompt", "response_a", "response_b", "d", "accept_a",
                 "accept_b", "source", "annotator_id", "created_at", "quality_flag"}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class PromptSet:
    """Prompt pool for rollout sampling."""

    prompts: list[str]

    def __post_init__(self):
        if not self.prompts:
            raise ContractViolation("prompt set must be non-empty")

    def validate_for(self, cfg) -> None:
        for p in self.prompts:
            if len(tokenize(p)) > cfg.max_seq_len // 2:
                raise ContractViolation(
                    f"prompt longer than max_seq_len/2: {p[:40]!r}...")


def _utcnow() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# --------------------------------------------------------------------------
# reward model


def reward_loss(r_y: T.Tensor, r_yp: T.Tensor, d: int) -> T.Tensor:
    """Hinge on the labeled margin; subgradient 0 at the kink, and exactly
    zero gradient to both rewards when d = 0."""
    if d not in VALID_D:
        raise ContractViolation(f"d must be in {VALID_D}, got {d}")
    return T.relu(1.0 - (r_y - r_yp) * float(d))


def _signed(d: int, preference_sign: str) -> int:
    return d if preference_sign == "literal" else -d


def _tokenize_record(rec: PreferenceRecord):
    return tokenize(rec.prompt), tokenize(rec.response_a), tokenize(rec.response_b)


def ranking_accuracy(params: Params, records: Sequence[PreferenceRecord],
                     preference_sign: str = "literal") -> float:
    """Fraction of non-tie records whose reward margin has the trained sign."""
    scored = 0
    correct = 0
    for rec in records:
        if rec.d == 0:
            continue
        x, a, b = _tokenize_record(rec)
        ra = reward_forward(params, x, a).item()
        rb = reward_forward(params, x, b).item()
        scored += 1
        if _signed(rec.d, preference_sign) * (ra - rb) > 0:
            correct += 1
    if scored == 0:
        raise ContractViolation("no non-tie records to score")
    return correct / scored


def train_reward_model(init: Params, prefs: Sequence[PreferenceRecord],
                       config: TrainConfig,
                       holdout: Sequence[PreferenceRecord] | None = None,
                       ) -> tuple[Params, dict]:
    """Minimize the mean hinge loss over the records.

    Returns (reward params, stats); stats carries the loss history and the
    held-out pairwise ranking accuracy (on the training records when no
    holdout is given). Refuses datasets with no non-tie records.
    """
    prefs = list(prefs)
    if not any(r.d != 0 for r in prefs):
        raise ContractViolation("all-ties dataset carries no gradient signal")

    params = init.clone() if init.stage_tag == "reward" else init.with_stage("reward")
    cfg = params.config
    usable = []
    for rec in prefs:
        x, a, b = _tokenize_record(rec)
        if max(len(x) + 1 + len(a), len(x) + 1 + len(b)) > cfg.max_seq_len:
            log.warning("skipping overlong preference record %s", rec.id)
            continue
        usable.append((x, a, b, _signed(rec.d, config.preference_sign)))
    if not usable:
        raise ContractViolation("every record was overlong")

    opt = Adam(params.tensors, config)
    rng = np.random.default_rng(config.seed)
    order: list[int] = []
    history: list[float] = []
    for step in range(config.steps):
        while len(order) < config.batch_size:
            order.extend(rng.permutation(len(usable)).tolist())
        batch_ids = order[: config.batch_size]
        del order[: config.batch_size]
        batch = [usable[i] for i in batch_ids]

        tape = T.Tape()
        bound = params.bind(tape)
        ra = batch_rewards(params, [(x, a) for x, a, _, _ in batch], tape, bound=bound)
        rb = batch_rewards(params, [(x, b) for x, _, b, _ in batch], tape, bound=bound)
        dvec = np.array([d for *_, d in batch], dtype=params.tensors["tok_emb"].dtype)
        loss = T.relu(1.0 - (ra - rb) * dvec).mean()
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingAborted(f"non-finite reward loss at step {step}",
                                  step=step, batch_ids=batch_ids)
        history.append(value)
        opt.step(params.tensors, T.grad_by_name(loss))

    eval_set = list(holdout) if holdout else prefs
    stats = {
        "loss_history": history,
        "final_loss": history[-1] if history else None,
        "ranking_accuracy": ranking_accuracy(params, eval_set, config.preference_sign),
        "n_train": len(usable),
        "n_eval": len(eval_set),
    }
    return params, stats


# --------------------------------------------------------------------------
# rollouts and sequence log-probabilities


@dataclass
class Rollout:
    prompt_ids: list[int]
    response_ids: list[int]
    reward: float = 0.0
    old_logprobs: np.ndarray | None = None  # per response token, rollout-time policy


def _rollout_frames(rollouts: Sequence[Rollout]):
    """Batched forward framing of BOS x SEP y with a response-token mask."""
    B = len(rollouts)
    lens = [1 + len(r.prompt_ids) + len(r.response_ids) for r in rollouts]
    L = max(lens)
    inputs = np.full((B, L), PAD, dtype=np.int64)
    targets = np.full((B, L), PAD, dtype=np.int64)
    mask = np.zeros((B, L), dtype=np.float64)
    for b, r in enumerate(rollouts):
        framed = [BOS] + list(r.prompt_ids) + [SEP] + list(r.response_ids)
        inputs[b, : len(framed) - 1] = framed[:-1]
        targets[b, : len(framed) - 1] = framed[1:]
        start = 1 + len(r.prompt_ids)  # position whose target is y_1
        mask[b, start: start + len(r.response_ids)] = 1.0
    return inputs, targets, mask


def response_token_nll(params: Params, rollouts: Sequence[Rollout],
                       tape: T.Tape | None = None,
                       bound: dict[str, T.Tensor] | None = None):
    """Per-token NLL tensor (B, L) for the response tokens, plus the mask."""
    inputs, targets, mask = _rollout_frames(rollouts)
    logits = batch_logits(params, inputs, Direction.FORWARD.index, tape, bound=bound)
    return T.cross_entropy(logits, targets), mask


def sequence_logprob(params: Params, prompt_ids: Sequence[int],
                     response_ids: Sequence[int]) -> float:
    """log pi(y|x): sum of per-token log-probabilities of the response."""
    if not response_ids:
        return 0.0
    roll = Rollout(list(prompt_ids), list(response_ids))
    nll, mask = response_token_nll(params, [roll])
    return -float((nll.data * mask).sum())


def rl_objective_estimate(policy: Params, instruct_ref: Params,
                          reward: Params | Callable, rollouts: Sequence[Rollout],
                          pretrain_batch: Sequence[Sequence[int]],
                          lambda_it: float, lambda_pt: float) -> float:
    """Monte-Carlo estimate of the regularized policy objective: mean
    sequence reward minus the lambda_it-weighted log-ratio to the instruct
    reference, plus the lambda_pt-weighted bidirectional log-likelihood of
    the pretraining batch."""
    if policy.config != instruct_ref.config:
        raise ContractViolation("policy and instruct reference configs differ")
    total = 0.0
    for roll in rollouts:
        r = _reward_value(reward, roll)
        term = r
        if lambda_it != 0.0:
            lp_rl = sequence_logprob(policy, roll.prompt_ids, roll.response_ids)
            lp_inst = sequence_logprob(instruct_ref, roll.prompt_ids, roll.response_ids)
            term -= lambda_it * (lp_rl - lp_inst)
        total += term
    estimate = total / len(rollouts)
    if lambda_pt != 0.0:
        estimate += lambda_pt * (-bidir_pretrain_loss(policy, pretrain_batch).item())
    return estimate


def _reward_value(reward: Params | Callable, roll: Rollout) -> float:
    if isinstance(reward, Params):
        return reward_forward(reward, roll.prompt_ids, roll.response_ids).item()
    return float(reward(roll.prompt_ids, roll.response_ids))


# --------------------------------------------------------------------------
# PPO


def ppo_epoch(policy: Params, instruct_ref: Params, reward: Params | Callable,
              prompt_set: PromptSet, pretrain_corpus: Sequence[str],
              config: TrainConfig, opt: Adam | None = None,
              epoch: int = 0) -> tuple[Params, dict]:
    """One PPO epoch: sample a response per prompt, score returns, run
    config.ppo_epochs clipped-surrogate updates with the pretraining
    regularizer folded into each step.

    Returns (updated policy, stats). Stats include the mean reward of the
    rollouts, the mean sequence log-ratio against the instruct reference,
    and the per-inner-step clip fraction (zero on the first step, where the
    ratios are exactly one).
    """
    if policy.stage_tag != "rl_policy":
        raise ContractViolation(f"policy stage must be rl_policy, got {policy.stage_tag}")
    prompt_set.validate_for(policy.config)
    pretrain_seqs = prepare_pretrain_dataset(pretrain_corpus, policy.config)

    work = policy.clone()
    if opt is None:
        opt = Adam(work.tensors, config)
    eps = float(config.ppo_clip_eps)

    # -- rollouts under the current policy
    rollouts: list[Rollout] = []
    for i, prompt in enumerate(prompt_set.prompts):
        prompt_ids = tokenize(prompt)
        seed = np.random.SeedSequence([config.seed, epoch, i]).generate_state(1)[0]
        # condition on the same BOS x SEP framing that scoring uses
        response = sample(work, prompt_ids + [SEP], Direction.FORWARD,
                          max_new=config.rollout_max_new,
                          temperature=config.rollout_temperature, seed=int(seed))
        roll = Rollout(prompt_ids, response)
        roll.reward = _reward_value(reward, roll)
        rollouts.append(roll)

    nll0, mask = response_token_nll(work, rollouts)
    old_nll = nll0.data.copy()
    for b, roll in enumerate(rollouts):
        roll.old_logprobs = -old_nll[b][mask[b] > 0]

    log_ratios = []
    returns = np.zeros(len(rollouts))
    for b, roll in enumerate(rollouts):
        lp_rl = float(roll.old_logprobs.sum())
        lp_inst = sequence_logprob(instruct_ref, roll.prompt_ids, roll.response_ids)
        log_ratios.append(lp_rl - lp_inst)
        returns[b] = roll.reward - config.lambda_it * (lp_rl - lp_inst)
    advantages = returns - returns.mean()

    dt = work.tensors["tok_emb"].dtype
    tok_counts = mask.sum(axis=1)
    weights = np.zeros_like(mask)
    nonzero = tok_counts > 0
    weights[nonzero] = mask[nonzero] / tok_counts[nonzero, None] / len(rollouts)
    adv_rows = (advantages[:, None] * weights).astype(dt)

    pt_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, epoch, 7919]).generate_state(4))
    clip_fractions = []
    for inner in range(config.ppo_epochs):
        tape = T.Tape()
        bound = work.bind(tape)
        nll_new, _ = response_token_nll(work, rollouts, tape, bound=bound)
        # ratio = pi_new / pi_old = exp(logp_new - logp_old) = exp(nll_old - nll_new)
        ratio = T.exp(T.Tensor(old_nll.astype(dt)) - nll_new)

        flat_ratio = ratio.data[mask > 0]
        clipped = np.mean((flat_ratio < 1.0 - eps) | (flat_ratio > 1.0 + eps))
        clip_fractions.append(float(clipped))

        unclipped = ratio * adv_rows
        clamped = T.clip(ratio, 1.0 - eps, 1.0 + eps) * adv_rows
        surrogate = T.minimum(unclipped, clamped).sum()
        loss = -surrogate
        if config.lambda_pt != 0.0:
            ids = pt_rng.choice(len(pretrain_seqs),
                                size=min(config.batch_size, len(pretrain_seqs)),
                                replace=False)
            pt_batch = [pretrain_seqs[int(i)] for i in ids]
            loss = loss + config.lambda_pt * bidir_pretrain_loss(
                work, pt_batch, tape=tape, bound=bound)
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingAborted(f"non-finite PPO loss at inner step {inner}",
                                  step=inner, dump=[asdict(r) if not isinstance(r.old_logprobs, np.ndarray)
                                                    else {**asdict(r), "old_logprobs": r.old_logprobs.tolist()}
                                                    for r in rollouts])
        opt.step(work.tensors, T.grad_by_name(loss))

    stats = {
        "epoch": epoch,
        "mean_reward": float(np.mean([r.reward for r in rollouts])),
        "mean_return": float(returns.mean()),
        "mean_log_ratio": float(np.mean(log_ratios)),
        "clip_fractions": clip_fractions,
        "mean_response_len": float(np.mean([len(r.response_ids) for r in rollouts])),
        "n_empty_responses": int(sum(1 for r in rollouts if not r.response_ids)),
    }
    return work, stats


def ppo_train(policy: Params, instruct_ref: Params, reward: Params | Callable,
              prompt_set: PromptSet, pretrain_corpus: Sequence[str],
              config: TrainConfig, n_epochs: int,
              on_epoch: Callable[[dict], None] | None = None
              ) -> tuple[Params, list[dict]]:
    """Run n_epochs of ppo_epoch with persistent optimizer state."""
    work = policy.clone()
    opt = Adam(work.tensors, config)
    stats = []
    for epoch in range(n_epochs):
        work, st = ppo_epoch(work, instruct_ref, reward, prompt_set,
                             pretrain_corpus, config, opt=opt, epoch=epoch)
        stats.append(st)
        if on_epoch is not None:
            on_epoch(st)
    return work, stats


def mean_oracle_reward(policy: Params, reward: Params | Callable,
                       prompt_set: PromptSet, config: TrainConfig,
                       seed: int = 10_000) -> float:
    """Evaluation pass: sample one response per prompt with a dedicated seed
    stream and average the reward; used for before/after comparisons."""
    total = 0.0
    for i, prompt in enumerate(prompt_set.prompts):
        prompt_ids = tokenize(prompt)
        s = np.random.SeedSequence([seed, i]).generate_state(1)[0]
        response = sample(policy, prompt_ids + [SEP], Direction.FORWARD,
                          max_new=config.rollout_max_new,
                          temperature=config.rollout_temperature, seed=int(s))
        total += _reward_value(reward, Rollout(prompt_ids, response))
    return total / len(prompt_set.prompts)


# --------------------------------------------------------------------------
# AI feedback


JUDGES = ("length", "keyword", "oracle-model")


def ai_feedback(judge: str, prompt: str, response_a: str, response_b: str,
                keyword: str | None = None,
                reward_params: Params | None = None) -> PreferenceRecord:
    """Programmatic preference judgment.

    Judges: 'length' (longer response preferred), 'keyword' (more hits on
    the target keyword preferred), 'oracle-model' (higher reward under the
    designated reward params preferred). d = -1 marks response_a preferred,
    +1 response_b, 0 a tie.
    """
    name = judge
    if judge == "length":
        score_a, score_b = len(tokenize(response_a)), len(tokenize(response_b))
    elif judge == "keyword":
        if not keyword:
            raise ConfigError("keyword judge requires a keyword")
        name = f"keyword:{keyword}"
        score_a, score_b = response_a.count(keyword), response_b.count(keyword)
    elif judge == "oracle-model":
        if reward_params is None or reward_params.stage_tag != "reward":
            raise ConfigError("oracle-model judge requires reward-stage params")
        score_a = reward_forward(reward_params, tokenize(prompt), tokenize(response_a)).item()
        score_b = reward_forward(reward_params, tokenize(prompt), tokenize(response_b)).item()
    else:
        raise ConfigError(f"unknown judge {judge!r}; have {JUDGES}")

    if score_a > score_b:
        d = -1
    elif score_b > score_a:
        d = 1
    else:
        d = 0
    digest = hashlib.sha1(
        "\x1f".join((name, prompt, response_a, response_b)).encode("utf-8")).hexdigest()
    return PreferenceRecord(
        id=f"ai-{digest[:16]}", prompt=prompt, response_a=response_a,
        response_b=response_b, d=d, source="ai", annotator_id=name,
        created_at=_utcnow())
