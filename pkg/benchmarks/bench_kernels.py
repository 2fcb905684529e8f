"""Compiled kernels against the pure-Python fallback.

Times expression evaluation and word integration with each backend on the
same inputs and prints a small table. Usage::

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from lieclf import _kernels
from lieclf.config import load_fixture
from lieclf.lie import Leaf, Node
from lieclf.steering import word_for_bracket


def _integrate(mod, sysd, word, x, t, substeps):
    lay = sysd.layout
    ctrl = np.array([c for c, _ in word.segments], dtype=np.int32)
    dur = np.array([f * t for _, f in word.segments])
    out = np.zeros((1 + len(ctrl) * substeps, 1 + sysd.dim))
    segs = np.zeros(len(out), dtype=np.int32)
    return mod.integrate_word(*lay.arrays(), ctrl, dur, int(sysd.has_drift), np.array(x, float),
                              substeps, substeps, out, segs)


def _field_evals(mod, sysd, X):
    lay = sysd.layout
    out = np.zeros(sysd.dim)
    for x in X:
        for i in range(1, sysd.m + 1):
            mod.eval_field(*lay.arrays(), i, x, out)


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    mods = _kernels.backends()
    if "compiled" not in mods:
        print("compiled kernels not built; only the fallback is available")
    X = np.random.default_rng(0).uniform(-1, 1, (2000, 3))
    cases = []
    for name in ("nonholonomic", "lipschitz", "bump_system"):
        sysd = load_fixture(name).system
        cases.append((f"eval fields x2000 [{name}]", lambda m, s=sysd: _field_evals(m, s, X)))
        w = word_for_bracket(Node(Node(Leaf(1), Leaf(2)), Leaf(1)))
        cases.append((f"integrate 10-seg word x20 [{name}]",
                      lambda m, s=sysd, w=w: [_integrate(m, s, w, [0.3, 0.2, 0.1], 0.5, 64)
                                              for _ in range(20)]))
    print(f"{'case':45s} " + " ".join(f"{n:>12s}" for n in mods) + "   speedup")
    for label, fn in cases:
        t = {n: _best(lambda: fn(m), args.repeat) for n, m in mods.items()}
        row = " ".join(f"{t[n] * 1e3:10.2f}ms" for n in mods)
        sp = t["python"] / t["compiled"] if "compiled" in t else float("nan")
        print(f"{label:45s} {row}   {sp:7.1f}x")


if __name__ == "__main__":
    main()
