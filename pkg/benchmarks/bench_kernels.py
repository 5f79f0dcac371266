"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--quick]

Prints per-call times for each kernel on each backend, then end-to-end
timings of a min-cut and a power minimization with the backend swapped in.
"""
import argparse
import contextlib
import time
import timeit

import numpy as np

from relaycap import kernels, netmodel, powopt, sfm


def per_call(fn, args, number):
    t = timeit.Timer(lambda: fn(*args)).repeat(3, number)
    return min(t) / number


@contextlib.contextmanager
def use_backend(mod):
    names = ["gaussian_logdet_real", "gaussian_logdet_complex", "erasure_value", "gfp_rank",
             "cut_terms_real", "cut_terms_complex"]
    saved = {k: getattr(kernels, k) for k in names}
    for k in names:
        setattr(kernels, k, getattr(mod, k))
    try:
        yield
    finally:
        for k, v in saved.items():
            setattr(kernels, k, v)


def kernel_cases(rng, sizes):
    for n in sizes:
        H = rng.standard_normal((n, n))
        Hc = np.ascontiguousarray(H + 1j * rng.standard_normal((n, n)))
        tx = (np.arange(n) < n // 2).astype(np.uint8)
        p = rng.uniform(0, 2, n)
        yield f"logdet real n={n}", "gaussian_logdet_real", (H, tx, p)
        yield f"logdet complex n={n}", "gaussian_logdet_complex", (Hc, tx, p)
        eps = rng.random((n, n))
        yield f"erasure n={n}", "erasure_value", (eps, tx)
        r, t = n - n // 2, n // 2
        A = np.ascontiguousarray(rng.standard_normal((r, t)))
        yield f"cut terms n={n}", "cut_terms_real", (A, p[:t], np.empty((t, t)))
    for m in (8, 24):
        M = np.ascontiguousarray(rng.integers(0, 3, (m, m)), dtype=np.int64)
        yield f"GF(3) rank {m}x{m}", "gfp_rank", (M, 3)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(0)
    number = 200 if args.quick else 2000
    sizes = (8, 32) if args.quick else (8, 16, 32, 64)

    names = sorted(backends)
    print(f"{'kernel':28s}" + "".join(f"{b:>14s}" for b in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fname, fargs in kernel_cases(rng, sizes):
        ts = [per_call(getattr(backends[b], fname), fargs, number) for b in names]
        line = f"{label:28s}" + "".join(f"{t * 1e6:12.2f}us" for t in ts)
        if len(ts) > 1:
            line += f"{ts[1] / ts[0] if names[0] == 'cython' else ts[0] / ts[1]:11.1f}x"
        print(line)

    print()
    n_layered = 40 if args.quick else 100
    layered = netmodel.random_gaussian_network(n_layered, 10, "layered(4)")
    dense = netmodel.random_gaussian_network(12, 3)
    for b in names:
        with use_backend(backends[b]):
            t = time.perf_counter()
            res = sfm.min_cut(layered, 1.0)
            t_cut = time.perf_counter() - t
            t = time.perf_counter()
            opt = powopt.minimize_power(dense, 4.0, 100.0)
            t_opt = time.perf_counter() - t
        print(f"[{b:6s}] min cut, layered n={n_layered}: {t_cut:7.3f} s ({res.value:.6f} bits)   "
              f"power min, dense n=12: {t_opt:7.3f} s ({opt.total_power:.6f})")


if __name__ == "__main__":
    main()
