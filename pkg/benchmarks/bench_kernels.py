"""Compare the numba and numpy backends on the two hot kernels.

    python3 benchmarks/bench_kernels.py [--n-roots N] [--grid G] [--repeat R]

Prints best-of-R wall times and the max difference between backends.
"""
import argparse
import time

import numpy as np

from cdshear import kernels
from cdshear.grid import GridDomain, nodal_to_gauss
from cdshear.materials import double_well


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n-roots", type=int, default=1_000_000)
    ap.add_argument("--grid", type=int, default=257)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    tau_sq = rng.uniform(0.0, 2.0, args.n_roots)
    m, meas = double_well()
    a, b = 4 * meas.alpha / m.h0, 4 * meas.alpha * (m.xi0 - meas.beta)

    dom = GridDomain(args.grid, args.grid)
    u = rng.standard_normal(dom.shape) * 0.1
    tau_g = np.ascontiguousarray(nodal_to_gauss(np.broadcast_to([1.0, 0.0], dom.shape + (2,))))
    coeffs, center = m.poly()

    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    results = {}
    prev = kernels.get_backend()
    try:
        for be in backends:
            kernels.set_backend(be)
            # warm-up triggers compilation for numba
            kernels.cubic_real_roots(a, b, 0.0, -tau_sq[:10])
            kernels.potential_and_gradient(u, tau_g, dom.h1, dom.h2, meas.alpha, meas.beta, coeffs, center)
            t_c, roots = best_of(lambda: kernels.cubic_real_roots(a, b, 0.0, -tau_sq), args.repeat)
            t_p, pot = best_of(
                lambda: kernels.potential_and_gradient(u, tau_g, dom.h1, dom.h2, meas.alpha, meas.beta, coeffs, center),
                args.repeat,
            )
            results[be] = (t_c, t_p, roots, pot)
    finally:
        kernels.set_backend(prev)

    print(f"{'kernel':<28}{'backend':<8}{'time [ms]':>12}{'speedup':>10}")
    base = results["numpy"]
    for k, label in ((0, f"cubic roots (n={args.n_roots})"), (1, f"potential+grad ({args.grid}^2)")):
        for be in backends:
            t = results[be][k]
            print(f"{label:<28}{be:<8}{1e3 * t:>12.2f}{base[k] / t:>10.1f}")
    if "numba" in results:
        r_np, r_nb = base[2][0], results["numba"][2][0]
        droot = np.nanmax(np.abs(r_np - r_nb))
        dE = abs(base[3][0] - results["numba"][3][0]) / abs(base[3][0])
        dG = np.max(np.abs(base[3][1] - results["numba"][3][1]))
        print(f"max |root difference| = {droot:.2e}; relative energy difference = {dE:.2e}; max gradient difference = {dG:.2e}")


if __name__ == "__main__":
    main()
