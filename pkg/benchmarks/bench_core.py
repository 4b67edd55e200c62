"""Compare the compiled core with the pure-Python fallback.

Each backend runs in its own interpreter because the choice is made at
import time (``GENPHYS_PURE_PYTHON=1`` forces the fallback).

    python3 benchmarks/bench_core.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit


def _cases():
    import numpy as np

    from genphys import special
    from genphys.density_flow import DeltaMixture, fields
    from genphys.pde_catalog import PdeSpec

    x = np.geomspace(1e-3, 50.0, 20000)
    rng = np.random.default_rng(0)
    data = DeltaMixture(rng.normal(size=(64, 2)))
    pts = rng.normal(size=(4000, 2)) * 2
    sp = PdeSpec("screened_poisson", 2, m=1.0)
    helm = PdeSpec("helmholtz", 2, k0=0.05)
    return {
        "bessel_k(1.3, 20k points)": lambda: special.bessel_k(1.3, x),
        "bessel_jy(0.5, 20k points)": lambda: special.bessel_jy(0.5, x),
        "screened Poisson fields (4000 x 64)": lambda: fields(sp, data, pts, 0.7),
        "Helmholtz fields (4000 x 64)": lambda: fields(helm, data, pts, 0.7),
    }


def worker(repeat):
    from genphys import special
    out = {"backend": special.backend_name(), "timings": {}}
    for name, fn in _cases().items():
        fn()
        out["timings"][name] = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(json.dumps(out))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.worker:
        worker(args.repeat)
        return 0
    results = []
    for pure in ("0", "1"):
        env = dict(os.environ, GENPHYS_PURE_PYTHON=pure)
        proc = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat)],
                              env=env, capture_output=True, text=True, check=True)
        results.append(json.loads(proc.stdout))
    fast, slow = results
    if fast["backend"] != "cython":
        print("compiled core not available; only the fallback was timed")
    width = max(len(k) for k in fast["timings"])
    print(f"{'case':<{width}}  {fast['backend']:>10}  {slow['backend']:>10}  speedup")
    for name, t_fast in fast["timings"].items():
        t_slow = slow["timings"][name]
        print(f"{name:<{width}}  {t_fast * 1e3:8.2f}ms  {t_slow * 1e3:8.2f}ms  {t_slow / t_fast:6.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
