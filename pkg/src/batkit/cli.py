"""Command-line entry point wiring the library into reproducible commands.

Configuration comes from an optional TOML file (``[model]`` and ``[train]``
tables) with full override via flags; flags win. Every artifact-producing
command writes a run manifest before its outputs. The environment variable
``BATKIT_F64=1`` switches the process into the 64-bit verification mode.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import checkpoint, data, exams, expansion, manifest, rlhf, service, training
from .errors import BatkitError
from .model import Direction, ModelConfig, init_params, sample
from .rlhf import PreferenceRecord, PromptSet, ai_feedback
from .training import TrainConfig

DEFAULT_MODEL = {
    "d_model": 64, "n_heads": 4, "d_head": 16, "d_ff": 256,
    "n_layers": 2, "max_seq_len": 64,
}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _model_config(file_cfg: dict, args) -> ModelConfig:
    merged = dict(DEFAULT_MODEL)
    merged.update(file_cfg.get("model", {}))
    for key in DEFAULT_MODEL:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            merged[key] = flag
    return ModelConfig(**{k: int(v) for k, v in merged.items()})


_TRAIN_FLAGS = ("learning_rate", "batch_size", "steps", "seed", "grad_clip_norm",
                "lambda_it", "lambda_pt", "ppo_clip_eps", "ppo_epochs",
                "rollout_max_new", "rollout_temperature", "preference_sign")


def _train_config(file_cfg: dict, args) -> TrainConfig:
    merged = dict(file_cfg.get("train", {}))
    for key in _TRAIN_FLAGS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return TrainConfig.from_dict(merged)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model", "model architecture (overrides [model] in --config)")
    for key in DEFAULT_MODEL:
        g.add_argument(f"--{key.replace('_', '-')}", type=int, default=None)


def _add_train_flags(p: argparse.ArgumentParser, ppo: bool = False) -> None:
    g = p.add_argument_group("training", "optimizer settings (override [train] in --config)")
    g.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    g.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    g.add_argument("--steps", type=int, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--grad-clip-norm", dest="grad_clip_norm", type=float, default=None)
    if ppo:
        g.add_argument("--lambda-it", dest="lambda_it", type=float, default=None)
        g.add_argument("--lambda-pt", dest="lambda_pt", type=float, default=None)
        g.add_argument("--ppo-clip-eps", dest="ppo_clip_eps", type=float, default=None)
        g.add_argument("--ppo-epochs", dest="ppo_epochs", type=int, default=None)
        g.add_argument("--rollout-max-new", dest="rollout_max_new", type=int, default=None)
        g.add_argument("--rollout-temperature", dest="rollout_temperature",
                       type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="batkit",
        description="Desk-scale bidirectional LM training pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate synthetic corpora, prompt sets, exams")
    p.add_argument("--kind", required=True,
                   choices=list(data.CORPUS_KINDS) + ["prompts", "exam"])
    p.add_argument("--size", type=int, required=True, help="documents/prompts/items")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--max-doc-tokens", type=int, default=62)
    p.add_argument("--categories", type=int, default=4, help="exam categories")

    p = sub.add_parser("pretrain", help="bidirectional pretraining")
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    _add_train_flags(p)

    p = sub.add_parser("instruct", help="instruction tuning from a checkpoint")
    p.add_argument("--config")
    p.add_argument("--init", required=True, help="pretrained checkpoint")
    p.add_argument("--data", required=True, help="JSONL of prompt/response or dialogue records")
    p.add_argument("--out", required=True)
    _add_train_flags(p)

    p = sub.add_parser("reward-train", help="train the preference reward model")
    p.add_argument("--config")
    p.add_argument("--init", required=True, help="instruct checkpoint to graft the head onto")
    p.add_argument("--prefs", required=True, help="JSONL of preference records")
    p.add_argument("--out", required=True)
    p.add_argument("--holdout-frac", type=float, default=0.0)
    p.add_argument("--preference-sign", choices=["literal", "flipped"], default=None)
    _add_train_flags(p)

    p = sub.add_parser("ppo", help="policy optimization against a reward source")
    p.add_argument("--config")
    p.add_argument("--policy", required=True, help="instruct checkpoint to clone as policy")
    p.add_argument("--instruct-ref", required=True)
    p.add_argument("--reward", help="reward-model checkpoint")
    p.add_argument("--oracle", help="built-in oracle reward: byte-density:<char>")
    p.add_argument("--prompts", required=True, help="one prompt per line")
    p.add_argument("--pretrain-corpus", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--out", required=True)
    _add_train_flags(p, ppo=True)

    p = sub.add_parser("expand", help="function-preserving width expansion")
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--width-mult", type=int, help="multiply d_model, n_heads, d_ff")
    p.add_argument("--d-model", type=int)
    p.add_argument("--n-heads", type=int)
    p.add_argument("--d-ff", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=expansion.MODES, default="exact")
    p.add_argument("--verify", action="store_true", help="report max drift after expanding")
    p.add_argument("--probes", type=int, default=20)
    p.add_argument("--maps-out", help="write the maps as JSON Lines for audit")

    p = sub.add_parser("stack", help="duplicate the layer stack (depth x 2^times)")
    p.add_argument("--src", required=True)
    p.add_argument("--times", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("prog-stack", help="progressive depth growth with retraining")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, required=True, help="number of doublings")
    p.add_argument("--stage-steps", required=True,
                   help="comma-separated step counts, k+1 entries")
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    _add_train_flags(p)

    p = sub.add_parser("verify", help="function-preservation drift between two checkpoints")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--probes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval", help="run a multiple-choice exam")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--exam", required=True)
    p.add_argument("--shots", type=int, default=5)
    p.add_argument("--style", choices=list(exams.PROMPT_STYLES), default="da")
    p.add_argument("--score", choices=list(exams.SCORE_STYLES), default="meanll")
    p.add_argument("--report", help="write the machine-readable report here (JSON)")

    p = sub.add_parser("sample", help="generate text from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--prompt", default="")
    p.add_argument("--direction", choices=["forward", "backward"], default="forward")
    p.add_argument("--max-new", type=int, default=48)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--raw", action="store_true",
                   help="no SEP framing between prompt and continuation")

    p = sub.add_parser("serve", help="run the preference annotation service")
    p.add_argument("--store", required=True, help="append-only JSONL store path")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--lease-seconds", type=float, default=service.DEFAULT_LEASE_SECONDS)

    p = sub.add_parser("ai-feedback", help="generate preference records with a rule judge")
    p.add_argument("--judge", required=True,
                   help="length | keyword:<word> | oracle-model")
    p.add_argument("--pairs", required=True,
                   help="JSONL with prompt/response_a/response_b fields")
    p.add_argument("--out", help="write records to this JSONL file")
    p.add_argument("--store", help="append records to a service store")
    p.add_argument("--reward", help="reward checkpoint for the oracle-model judge")

    return parser


# --------------------------------------------------------------------------
# subcommand implementations


def _cmd_gen_data(args) -> int:
    out = Path(args.out)
    if args.kind == "exam":
        items = exams.gen_synthetic_exam(args.size, args.seed, args.categories)
        manifest.write_manifest("gen-data", args._argv,
                                {"kind": args.kind, "size": args.size,
                                 "categories": args.categories},
                                {"seed": args.seed}, {}, [out])
        data.write_jsonl(
            ({"question": it.question, "choices": it.choices,
              "answer": exams.LETTERS[it.answer], "category": it.category}
             for it in items), out)
    elif args.kind == "prompts":
        rng = np.random.default_rng(args.seed)
        prompts = [f"write about {data._rand_word(rng, 3, 8)}" for _ in range(args.size)]
        manifest.write_manifest("gen-data", args._argv,
                                {"kind": args.kind, "size": args.size},
                                {"seed": args.seed}, {}, [out])
        out.write_text("\n".join(prompts) + "\n", encoding="utf-8")
    else:
        spec = data.CorpusSpec(kind=args.kind, size=args.size, seed=args.seed,
                               max_doc_tokens=args.max_doc_tokens)
        manifest.write_manifest("gen-data", args._argv,
                                {"kind": args.kind, "size": args.size,
                                 "max_doc_tokens": args.max_doc_tokens},
                                {"seed": args.seed}, {}, [out])
        data.write_corpus(data.gen_corpus(spec), out)
    print(f"wrote {out}")
    return 0


def _cmd_pretrain(args) -> int:
    file_cfg = _load_config(args.config)
    model_cfg = _model_config(file_cfg, args)
    train_cfg = _train_config(file_cfg, args)
    docs = data.load_corpus(args.corpus)
    manifest.write_manifest(
        "pretrain", args._argv,
        {"model": model_cfg.to_dict(), "train": train_cfg.__dict__},
        {"seed": train_cfg.seed}, {"corpus": args.corpus}, [args.out])
    params = init_params(model_cfg, seed=train_cfg.seed)
    params, history = training.train(params, "pretrain", docs, train_cfg)
    checkpoint.save(params, args.out)
    print(f"final loss {history[-1]:.4f} over {len(history)} steps -> {args.out}")
    return 0


def _cmd_instruct(args) -> int:
    file_cfg = _load_config(args.config)
    params, _ = checkpoint.load(args.init)
    train_cfg = _train_config(file_cfg, args)
    records = list(data.read_jsonl(args.data))
    manifest.write_manifest(
        "instruct", args._argv,
        {"model": params.config.to_dict(), "train": train_cfg.__dict__},
        {"seed": train_cfg.seed},
        {"init": args.init, "data": args.data}, [args.out])
    params = params.with_stage("instruct")
    params, history = training.train(params, "instruct", records, train_cfg)
    checkpoint.save(params, args.out)
    print(f"final loss {history[-1]:.4f} over {len(history)} steps -> {args.out}")
    return 0


def _cmd_reward_train(args) -> int:
    file_cfg = _load_config(args.config)
    params, _ = checkpoint.load(args.init)
    train_cfg = _train_config(file_cfg, args)
    records = [PreferenceRecord.from_dict(r) for r in data.read_jsonl(args.prefs)]
    holdout = None
    if args.holdout_frac > 0:
        rng = np.random.default_rng(train_cfg.seed)
        order = rng.permutation(len(records))
        n_hold = max(1, int(len(records) * args.holdout_frac))
        holdout = [records[i] for i in order[:n_hold]]
        records = [records[i] for i in order[n_hold:]]
    manifest.write_manifest(
        "reward-train", args._argv,
        {"model": params.config.to_dict(), "train": train_cfg.__dict__,
         "holdout_frac": args.holdout_frac},
        {"seed": train_cfg.seed},
        {"init": args.init, "prefs": args.prefs}, [args.out])
    reward, stats = rlhf.train_reward_model(params, records, train_cfg, holdout=holdout)
    checkpoint.save(reward, args.out)
    print(f"ranking accuracy {stats['ranking_accuracy']:.3f} "
          f"(n={stats['n_eval']}) -> {args.out}")
    return 0


def _oracle_reward(spec: str):
    kind, _, arg = spec.partition(":")
    if kind == "byte-density":
        if len(arg) != 1:
            raise BatkitError("byte-density oracle needs a single character")
        byte = data.tokenize(arg)[0]

        def fn(prompt_ids, response_ids):
            if not response_ids:
                return 0.0
            return sum(1 for t in response_ids if t == byte) / len(response_ids)

        return fn
    raise BatkitError(f"unknown oracle {spec!r}")


def _cmd_ppo(args) -> int:
    file_cfg = _load_config(args.config)
    policy, _ = checkpoint.load(args.policy)
    instruct_ref, _ = checkpoint.load(args.instruct_ref)
    train_cfg = _train_config(file_cfg, args)
    if bool(args.reward) == bool(args.oracle):
        raise BatkitError("pass exactly one of --reward / --oracle")
    reward = checkpoint.load(args.reward)[0] if args.reward else _oracle_reward(args.oracle)
    prompts = PromptSet(data.load_prompt_set(args.prompts))
    corpus = data.load_corpus(args.pretrain_corpus)
    inputs = {"policy": args.policy, "instruct_ref": args.instruct_ref,
              "prompts": args.prompts, "pretrain_corpus": args.pretrain_corpus}
    if args.reward:
        inputs["reward"] = args.reward
    manifest.write_manifest(
        "ppo", args._argv,
        {"model": policy.config.to_dict(), "train": train_cfg.__dict__,
         "epochs": args.epochs, "oracle": args.oracle},
        {"seed": train_cfg.seed}, inputs, [args.out])
    policy = policy.with_stage("rl_policy")
    policy, stats = rlhf.ppo_train(
        policy, instruct_ref, reward, prompts, corpus, train_cfg, args.epochs,
        on_epoch=lambda st: print(
            f"epoch {st['epoch']:>3}: reward {st['mean_reward']:.4f} "
            f"log-ratio {st['mean_log_ratio']:+.3f} "
            f"clip {st['clip_fractions'][-1]:.3f}"))
    checkpoint.save(policy, args.out)
    print(f"mean reward {stats[-1]['mean_reward']:.4f} -> {args.out}")
    return 0


def _cmd_expand(args) -> int:
    src, src_cfg = checkpoint.load(args.src)
    if args.width_mult:
        tgt_cfg = replace(src_cfg,
                          d_model=src_cfg.d_model * args.width_mult,
                          n_heads=src_cfg.n_heads * args.width_mult,
                          d_ff=src_cfg.d_ff * args.width_mult)
    else:
        tgt_cfg = replace(src_cfg,
                          d_model=args.d_model or src_cfg.d_model,
                          n_heads=args.n_heads or src_cfg.n_heads,
                          d_ff=args.d_ff or src_cfg.d_ff)
    outputs = [args.out] + ([args.maps_out] if args.maps_out else [])
    manifest.write_manifest(
        "expand", args._argv,
        {"src_model": src_cfg.to_dict(), "tgt_model": tgt_cfg.to_dict(),
         "mode": args.mode},
        {"seed": args.seed}, {"src": args.src}, outputs)
    tgt = expansion.expand_model(src, tgt_cfg, seed=args.seed, mode=args.mode)
    checkpoint.save(tgt, args.out)
    if args.maps_out:
        maps = expansion.plan_maps(src_cfg, tgt_cfg, args.seed, args.mode)
        expansion.save_maps(list(maps.values()), args.maps_out)
    if args.verify:
        drift = expansion.verify_preservation(src, tgt, args.probes, args.seed)
        print(f"max drift over {args.probes} probes: {drift:.3e}")
    print(f"expanded {src_cfg.d_model}->{tgt_cfg.d_model} -> {args.out}")
    return 0


def _cmd_stack(args) -> int:
    src, src_cfg = checkpoint.load(args.src)
    manifest.write_manifest(
        "stack", args._argv,
        {"src_model": src_cfg.to_dict(), "times": args.times},
        {}, {"src": args.src}, [args.out])
    out = expansion.stack_layers(src, times=args.times)
    checkpoint.save(out, args.out)
    print(f"stacked {src_cfg.n_layers} -> {out.config.n_layers} layers -> {args.out}")
    return 0


def _cmd_prog_stack(args) -> int:
    file_cfg = _load_config(args.config)
    model_cfg = _model_config(file_cfg, args)
    train_cfg = _train_config(file_cfg, args)
    steps = [int(s) for s in args.stage_steps.split(",")]
    docs = data.load_corpus(args.corpus)
    manifest.write_manifest(
        "prog-stack", args._argv,
        {"model": model_cfg.to_dict(), "train": train_cfg.__dict__,
         "k": args.k, "stage_steps": steps},
        {"seed": train_cfg.seed}, {"corpus": args.corpus}, [args.out])

    def train_fn(params, corpus, n_steps, stage):
        cfg = replace(train_cfg, steps=n_steps)
        return training.train(params, "pretrain", corpus, cfg)

    params, reports = expansion.progressive_stack(
        train_fn, model_cfg, args.k, steps, docs, seed=train_cfg.seed)
    checkpoint.save(params, args.out)
    for r in reports:
        final = r.losses[-1] if r.losses else float("nan")
        print(f"stage {r.stage}: depth {r.depth:>3}, {r.steps} steps, "
              f"{r.seconds:.1f}s, final loss {final:.4f}")
    print(f"-> {args.out}")
    return 0


def _cmd_verify(args) -> int:
    src, _ = checkpoint.load(args.src)
    tgt, _ = checkpoint.load(args.tgt)
    drift = expansion.verify_preservation(src, tgt, args.probes, args.seed)
    print(f"max drift over {args.probes} probes: {drift:.3e}")
    return 0


def _cmd_eval(args) -> int:
    params, _ = checkpoint.load(args.ckpt)
    items = exams.load_exam(args.exam)
    report = exams.run_exam(params, items, shots=args.shots,
                            style=args.style, score=args.score)
    print(report.render())
    if args.report:
        manifest.write_manifest(
            "eval", args._argv,
            {"shots": args.shots, "style": args.style, "score": args.score},
            {}, {"ckpt": args.ckpt, "exam": args.exam}, [args.report])
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    return 0


def _cmd_sample(args) -> int:
    params, _ = checkpoint.load(args.ckpt)
    prompt_ids = data.tokenize(args.prompt)
    if not args.raw and params.stage_tag != "pretrain" and args.direction == "forward":
        prompt_ids = prompt_ids + [data.SEP]
    direction = Direction.FORWARD if args.direction == "forward" else Direction.BACKWARD
    out = sample(params, prompt_ids, direction, max_new=args.max_new,
                 temperature=args.temperature, seed=args.seed)
    print(data.detokenize(out))
    return 0


def _cmd_serve(args) -> int:
    store = service.PreferenceStore(args.store, lease_seconds=args.lease_seconds)
    server = service.make_server(store, port=args.port, host=args.host)
    print(f"annotation service on http://{args.host}:{server.server_address[1]} "
          f"(store: {args.store})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        store.close()
    return 0


def _cmd_ai_feedback(args) -> int:
    judge, _, kw = args.judge.partition(":")
    reward_params = None
    if judge == "oracle-model":
        if not args.reward:
            raise BatkitError("oracle-model judge needs --reward")
        reward_params, _ = checkpoint.load(args.reward)
    if not args.out and not args.store:
        raise BatkitError("pass --out and/or --store")

    records = []
    for rec in data.read_jsonl(args.pairs):
        records.append(ai_feedback(
            judge, rec["prompt"], rec["response_a"], rec["response_b"],
            keyword=kw or None, reward_params=reward_params))
    if args.out:
        manifest.write_manifest(
            "ai-feedback", args._argv, {"judge": args.judge},
            {}, {"pairs": args.pairs}, [args.out])
        data.write_jsonl((r.to_dict() for r in records), args.out)
    if args.store:
        store = service.PreferenceStore(args.store)
        for r in records:
            store.add_record(r)
        store.close()
    counts = {d: sum(1 for r in records if r.d == d) for d in (-1, 0, 1)}
    print(f"judged {len(records)} pairs: {counts}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "pretrain": _cmd_pretrain,
    "instruct": _cmd_instruct,
    "reward-train": _cmd_reward_train,
    "ppo": _cmd_ppo,
    "expand": _cmd_expand,
    "stack": _cmd_stack,
    "prog-stack": _cmd_prog_stack,
    "verify": _cmd_verify,
    "eval": _cmd_eval,
    "sample": _cmd_sample,
    "serve": _cmd_serve,
    "ai-feedback": _cmd_ai_feedback,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = list(argv) if argv is not None else sys.argv[1:]
    try:
        return _COMMANDS[args.command](args)
    except BatkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
