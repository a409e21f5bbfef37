"""Benchmark the numpy reference kernels against the compiled backend.

Times each fused kernel on training-shaped inputs plus one full optimizer
step of the 2-layer pretraining configuration, for both backends. Run:

    python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from batkit import kernels
from batkit.data import CorpusSpec, gen_corpus
from batkit.model import ModelConfig, init_params
from batkit.training import TrainConfig, train


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(dtype=np.float32):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(512, 256)).astype(dtype)
    gy = rng.normal(size=(512, 256)).astype(dtype)
    gain = rng.normal(size=256).astype(dtype)
    bias = rng.normal(size=256).astype(dtype)
    logits = rng.normal(size=(512, 260)).astype(dtype)
    glog = rng.normal(size=(512, 260)).astype(dtype)
    targets = rng.integers(0, 260, size=512)
    gnll = rng.normal(size=512).astype(dtype)
    p = rng.normal(size=65536).astype(dtype)
    g = rng.normal(size=65536).astype(dtype)
    m = np.zeros_like(p)
    v = np.zeros_like(p)

    def ln_pair(be):
        y, mean, rstd = be.layernorm_fwd(x, gain, bias, 1e-5)
        be.layernorm_bwd(x, gain, mean, rstd, gy)

    def xent_pair(be):
        nll, probs = be.xent_fwd(logits, targets)
        be.xent_bwd(probs, targets, gnll)

    return {
        "gelu fwd+bwd": lambda be: (be.gelu_fwd(x), be.gelu_bwd(x, gy)),
        "layernorm fwd+bwd": ln_pair,
        "softmax fwd+bwd": lambda be: be.softmax_bwd(be.softmax_fwd(logits), glog),
        "xent fwd+bwd": xent_pair,
        "adam step": lambda be: be.adam_step(p, g, m, v, 1, 1e-3, 0.9, 0.999, 1e-8),
    }


def train_step_benchmark(backend_name, steps=20):
    kernels.use(backend_name)
    cfg = ModelConfig(d_model=64, n_heads=4, d_head=16, d_ff=256,
                      n_layers=2, max_seq_len=64)
    docs = gen_corpus(CorpusSpec(kind="reversal", size=64, seed=0))
    params = init_params(cfg, seed=0)
    conf = TrainConfig(learning_rate=1e-3, steps=steps, batch_size=16, seed=0)
    t0 = time.perf_counter()
    train(params, "pretrain", docs, conf)
    return (time.perf_counter() - t0) / steps


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = kernels.available()
    print(f"backends: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled backend not built; showing reference only")

    cases = kernel_cases()
    header = f"{'kernel':<22}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print("\n" + header)
    print("-" * len(header))
    for name, fn in cases.items():
        row = f"{name:<22}"
        times = {}
        for backend in backends:
            be = kernels._BACKENDS[backend]
            times[backend] = time_call(lambda: fn(be), args.repeats)
            row += f"{times[backend] * 1e6:>12.1f}us"
        if len(backends) == 2:
            row += f"{times['reference'] / times['compiled']:>9.2f}x"
        print(row)

    print("\nfull training step (2-layer, d_model=64, batch 16):")
    step_times = {}
    previous = kernels.backend_name()
    try:
        for backend in backends:
            step_times[backend] = train_step_benchmark(backend)
            print(f"  {backend:<12} {step_times[backend] * 1e3:8.1f} ms/step")
    finally:
        kernels.use(previous)
    if len(step_times) == 2:
        print(f"  end-to-end speedup: "
              f"{step_times['reference'] / step_times['compiled']:.2f}x")


if __name__ == "__main__":
    main()
