"""Compare the numba and numpy kernel paths.

Run with ``python benchmarks/bench_kernels.py [--size N] [--repeat R]``.
Each kernel is called once before timing so JIT compilation is excluded.
The end-to-end rows time full fits in a subprocess per backend, since the
backend is chosen once at import from ``CAVCHAR_DISABLE_NUMBA``.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from cavchar import kernels
from cavchar._accel import HAVE_NUMBA

FIT_SNIPPET = """
import time
from cavchar.synth import SynthSpec, generate_synthetic
from cavchar.resonance import extract_resonance
from cavchar.xps import fit_nb3d
s11 = generate_synthetic(SynthSpec("s11", {"f_r": 5.5e9, "q_int": 1e9, "q_ext": 2e9,
      "env_delay": 3e-8}, {"span_linewidths": 20, "num": 401}, {"snr_db": 40}, 1))[0]
xps = generate_synthetic(SynthSpec("xps", {"components": [
      {"species": "Nb2O5", "position_5_2": 207.5, "area_total": 60, "width": 1.4},
      {"species": "NbO", "position_5_2": 203.8, "area_total": 30, "width": 1.1},
      {"species": "Nb-metal", "position_5_2": 202.2, "area_total": 10, "width": 0.7,
       "asymmetry": 0.1}]}, {"start": 198, "stop": 214, "num": 321}, {"snr_db": 40}, 1))[0]
extract_resonance(s11); fit_nb3d(xps)
for name, fn in (("extract_resonance", lambda: extract_resonance(s11)),
                 ("fit_nb3d", lambda: fit_nb3d(xps))):
    t = time.perf_counter()
    for _ in range(REPEAT):
        fn()
    print(name, (time.perf_counter() - t) / REPEAT)
"""


def _cases(n):
    rng = np.random.default_rng(0)
    z = 0.5 + 1j * rng.uniform(-1e3, 1e3, n)
    x = np.geomspace(1e-3, 1e3, n)
    a = rng.uniform(-50, 50, n) + 1j * rng.uniform(0.01, 50, n)
    f = np.linspace(5.4999e9, 5.5001e9, n)
    e = np.linspace(198, 214, n)
    y = 10 + 80 * np.exp(-((e - 207) / 1.2) ** 2) + 0.5 * (e - 198)
    s11 = (5.5e9, 1e6, 0.8, 0.1, 0.7, 1.2, 3e-8)
    return [
        ("digamma", kernels.digamma_nb, kernels.digamma_np, (z,)),
        ("trigamma", kernels.trigamma_nb, kernels.trigamma_np, (z,)),
        ("tls_shift_bracket", kernels.tls_shift_bracket_nb, kernels.tls_shift_bracket_np, (x,)),
        ("expe1", kernels.expe1_nb, kernels.expe1_np, (a,)),
        ("s11_reflection", kernels.s11_reflection_nb, kernels.s11_reflection_np, (f, *s11)),
        ("shirley", kernels.shirley_nb, kernels.shirley_np, (e, y)),
    ]


def _best(fn, args, repeat):
    fn(*args)
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def _fit_times(disable, repeat):
    env = dict(os.environ, CAVCHAR_DISABLE_NUMBA="1" if disable else "0")
    code = f"REPEAT = {repeat}\n" + FIT_SNIPPET
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout
    return {k: float(v) for k, v in (line.split() for line in out.splitlines())}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--no-fits", action="store_true", help="skip the end-to-end fit rows")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 0
    print(f"{'kernel':<20}{'numba (ms)':>12}{'numpy (ms)':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, nb, npy, a in _cases(args.size):
        t_nb, t_np = _best(nb, a, args.repeat), _best(npy, a, args.repeat)
        diff = float(np.max(np.abs(np.asarray(nb(*a)) - np.asarray(npy(*a)))))
        print(f"{name:<20}{1e3 * t_nb:>12.3f}{1e3 * t_np:>12.3f}{t_np / t_nb:>10.2f}{diff:>14.2e}")
    if not args.no_fits:
        fast, slow = _fit_times(False, 3), _fit_times(True, 3)
        for name in fast:
            print(f"{name:<20}{1e3 * fast[name]:>12.3f}{1e3 * slow[name]:>12.3f}"
                  f"{slow[name] / fast[name]:>10.2f}{'':>14}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
