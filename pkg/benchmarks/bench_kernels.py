"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times the row kernels at shapes typical of training (batch 64, 33 tokens,
width 128), then one full training step of a small model under each
backend, and checks that both backends agree.
"""

import argparse
import timeit

import numpy as np

from protofuse.dataio import Config, SynthSpec, collate, generate_synthetic
from protofuse.diffcore import backward, kernels
from protofuse.model import build_variant


def kernel_cases(rng):
    x = rng.standard_normal((64 * 33, 128))
    gy = rng.standard_normal(x.shape)
    s = rng.standard_normal((64 * 8 * 33, 33))
    gs = rng.standard_normal(s.shape)
    gain, bias = rng.standard_normal(128), rng.standard_normal(128)
    y_sm = kernels.softmax_lastdim(s)
    _, xhat, rstd = kernels.layer_norm_lastdim(x, gain, bias, 1e-5)
    return {
        "softmax fwd": lambda: kernels.softmax_lastdim(s),
        "softmax bwd": lambda: kernels.softmax_lastdim_backward(y_sm, gs),
        "layer norm fwd": lambda: kernels.layer_norm_lastdim(x, gain, bias, 1e-5),
        "layer norm bwd": lambda: kernels.layer_norm_lastdim_backward(gy, xhat, rstd, gain),
    }


def train_step_case():
    manifest, samples = generate_synthetic(SynthSpec(n_train=64, n_valid=0, n_test=0))
    model = build_variant(Config(d=32, K=4, layers=2, heads=2), manifest.widths)
    batch = collate(samples)
    rng = np.random.default_rng(0)

    def step():
        model.zero_grad()
        loss, _, _ = model.loss(batch, training=True, rng=rng)
        backward(loss)

    return step


def parity(rng):
    x = rng.standard_normal((50, 17))
    gain, bias = rng.standard_normal(17), rng.standard_normal(17)
    gy = rng.standard_normal(x.shape)
    out = {}
    for name in ("python", "cython"):
        kernels.use_backend(name)
        y = kernels.softmax_lastdim(x)
        ln, xhat, rstd = kernels.layer_norm_lastdim(x, gain, bias, 1e-5)
        grads = kernels.layer_norm_lastdim_backward(gy, xhat, rstd, gain)
        out[name] = [y, kernels.softmax_lastdim_backward(y, gy), ln, *grads]
    return max(float(np.max(np.abs(a - b))) for a, b in zip(out["python"], out["cython"]))


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    try:
        kernels.use_backend("cython")
    except ImportError:
        print("compiled backend not built; run `pip install -e . --no-build-isolation`")
        return

    rng = np.random.default_rng(0)
    print(f"max |python - cython| over all kernels: {parity(rng):.2e}")
    print(f"{'case':<18}{'python ms':>12}{'cython ms':>12}{'speedup':>9}")
    results = {}
    for backend in ("python", "cython"):
        kernels.use_backend(backend)
        cases = kernel_cases(np.random.default_rng(0))
        cases["train step"] = train_step_case()
        for name, fn in cases.items():
            fn()
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            results.setdefault(name, {})[backend] = best * 1e3
    for name, t in results.items():
        print(f"{name:<18}{t['python']:>12.2f}{t['cython']:>12.2f}{t['python'] / t['cython']:>8.1f}x")


if __name__ == "__main__":
    main()
