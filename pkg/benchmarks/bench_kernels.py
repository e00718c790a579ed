"""Time the numba kernels against their numpy fallbacks.

Run with ``python benchmarks/bench_kernels.py [--n 20000] [--repeat 3]``.
The first numba call of each kernel is a warm-up so compile time is excluded.
"""

import argparse
import time

import numpy as np

from sepprob import _accel
from sepprob import criteria as cr
from sepprob.estimator import alpha_curve, default_grid, get_system, sample_states
from sepprob.lowdisc import QmcStream
from sepprob.statespace import eigvalsh_batch, haar_unitaries, unitary_coord_count


def best_of(fn, repeat):
    fn()  # warm-up
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n):
    system = get_system("2q-complex")
    stream = QmcStream(35, scramble_seed=17)
    coords = QmcStream(unitary_coord_count(4, "complex"), scramble_seed=3).points(1, n)
    rng = np.random.default_rng(0)
    g = rng.standard_normal((n, 4, 4)) + 1j * rng.standard_normal((n, 4, 4))
    herm = g + np.conj(np.swapaxes(g, 1, 2))
    st = sample_states(system, QmcStream(system.coord_count, scramble_seed=8), 1, n)
    grid = default_grid(100)
    return {
        "faure_points": lambda: stream.points(1, n),
        "haar_unitaries": lambda: haar_unitaries(coords, 4, "complex"),
        "eigvalsh_batch": lambda: eigvalsh_batch(herm),
        "convdet_thresholds": lambda: cr.convdet_thresholds(st.rho, st.pt, st.spectra, st.pt_eigs),
        "alpha_curve(det)": lambda: alpha_curve(system, "det", ("hs",), n, grid, seed=5, n_blocks=20),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    work = cases(args.n)
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':22} {'numba s':>10} {'numpy s':>10} {'speed-up':>9}")
    for name, fn in work.items():
        t = {}
        for backend in ("numba", "numpy"):
            prev = _accel.set_backend(backend)
            try:
                t[backend] = best_of(fn, args.repeat)
            finally:
                _accel.set_backend(prev)
        print(f"{name:22} {t['numba']:10.4f} {t['numpy']:10.4f} {t['numpy'] / t['numba']:8.1f}x")


if __name__ == "__main__":
    main()
