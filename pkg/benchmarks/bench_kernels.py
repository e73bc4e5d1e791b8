"""Compare the compiled kernels with the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat N]``

Times the group prox and the logistic prox on their own, then a full PPDNA
solve with each backend patched in.
"""
import argparse
import timeit

import numpy as np

from exlasso import kernels
from exlasso.ppdna import PpdnaConfig, ppdna_solve
from exlasso.synthdata import SynthConfig, generate

TASK_LABEL = {"regression": "least squares", "classification": "logistic"}


def best(fn, repeat, number):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def kernel_cases(rng):
    for ngroups, size in [(20, 50), (200, 10), (5, 2000)]:
        n = ngroups * size
        offsets = np.arange(0, n + 1, size, dtype=np.int64)
        a = rng.standard_normal(n)
        w = np.ones(n)
        yield f"group_prox {ngroups}x{size}", lambda impl, a=a, w=w, o=offsets: impl.group_prox(
            a, w, o, 0.05)
    ragged = rng.integers(1, 40, 300)
    offsets = np.concatenate([[0], np.cumsum(ragged)]).astype(np.int64)
    a = rng.standard_normal(int(offsets[-1]))
    w = rng.uniform(0.5, 2.0, a.size)
    yield "group_prox ragged 300 groups", lambda impl: impl.group_prox(a, w, offsets, 0.05)
    for m in (200, 5000):
        v = rng.standard_normal(m) * 3.0
        b = rng.choice([-1.0, 1.0], m)
        yield f"logistic_prox m={m}", lambda impl, v=v, b=b: impl.logistic_prox(v, b, 2.0)


def solve_with(impl, spec):
    saved = kernels.group_prox, kernels.logistic_prox
    kernels.group_prox, kernels.logistic_prox = impl.group_prox, impl.logistic_prox
    try:
        return ppdna_solve(spec, PpdnaConfig(tol=1e-6))
    finally:
        kernels.group_prox, kernels.logistic_prox = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.compiled is None:
        raise SystemExit("compiled kernels are not built; run pip install -e . first")
    impls = {"cython": kernels.compiled, "numpy": kernels.fallback}
    rng = np.random.default_rng(0)

    print(f"{'case':34s} {'cython':>11s} {'numpy':>11s} {'speedup':>8s}")
    for name, fn in kernel_cases(rng):
        t = {k: best(lambda impl=impl: fn(impl), args.repeat, 20) for k, impl in impls.items()}
        print(f"{name:34s} {t['cython'] * 1e6:9.1f}us {t['numpy'] * 1e6:9.1f}us "
              f"{t['numpy'] / t['cython']:7.1f}x")

    for task, p in [("regression", 50), ("regression", 100), ("classification", 50)]:
        spec, _ = generate(SynthConfig(200, 20, p, seed=0, lam=1e-3, task=task))
        t, labels = {}, {}
        for k, impl in impls.items():
            t[k] = best(lambda impl=impl: solve_with(impl, spec), max(1, args.repeat // 2), 1)
            labels[k] = solve_with(impl, spec).iterations_label
        name = f"ppdna {TASK_LABEL[task]} (200,20,{p})"
        print(f"{name:34s} {t['cython'] * 1e3:9.1f}ms {t['numpy'] * 1e3:9.1f}ms "
              f"{t['numpy'] / t['cython']:7.1f}x  iterations {labels['cython']} / {labels['numpy']}")


if __name__ == "__main__":
    main()
