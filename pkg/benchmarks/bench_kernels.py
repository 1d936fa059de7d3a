"""Time the compiled kernels against the numpy fallback on representative sizes.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from jcm import kernels
from jcm.constellation import make_rect_qam


def cases(rng):
    c = make_rect_qam(16)
    pts = rng.standard_normal(20_000) + 1j * rng.standard_normal(20_000)
    logq = np.log(rng.dirichlet(np.ones(16), size=50_000))
    tau = rng.gumbel(size=logq.shape)
    seqs = c.points[rng.integers(0, 16, size=(256, 2))]
    z = rng.standard_normal((4000, 2)) + 1j * rng.standard_normal((4000, 2))
    logw = np.log(rng.dirichlet(np.ones(256), size=8))
    # backends take contiguous float64 buffers; the public wrappers normally coerce
    re, im, cre, cim, zr, zi, sr, si = (np.ascontiguousarray(a) for a in (
        pts.real, pts.imag, c.points.real, c.points.imag, z.real, z.imag, seqs.real, seqs.imag))
    return {
        "nearest_symbol 20k x 16": lambda b: b.nearest_symbol(re, im, cre, cim),
        "gumbel_argmax 50k x 16": lambda b: b.gumbel_argmax(logq, tau),
        "relaxed_softmax 50k x 16": lambda b: b.relaxed_softmax(logq, tau, 1.5),
        "gaussian_log_evidence 4k x 8 x 256": lambda b: b.gaussian_log_evidence(
            zr, zi, sr, si, logw, 0.5),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = {"python": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled extension unavailable; timing the fallback only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':38s}" + "".join(f"{b:>12s}" for b in backends) + "     speedup")
    for name, fn in cases(rng).items():
        times = {b: min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
                 for b, mod in backends.items()}
        row = f"{name:38s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times.values())
        if "cython" in times:
            row += f"  {times['python'] / times['cython']:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
