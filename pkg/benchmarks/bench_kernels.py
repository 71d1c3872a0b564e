"""Compare the compiled kernels with the plain-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Each backend runs in its own interpreter, since the switch
(``LORENTZ_FICK_DISABLE_JIT``) is read at import time.  The sample counts are
small so the pure-Python side finishes in under a minute; the printed rate
is paths per second.
"""

import argparse
import json
import math
import os
import subprocess
import sys
import time

WORKLOADS = {
    "boltzmann": 4000,
    "landau": 100,
    "micro": 40,
}


def _measure(repeat):
    from lorentz_fick._accel import backend_name
    from lorentz_fick.kinetic_sim import GeneratorSpec, stationary_estimate_kinetic
    from lorentz_fick.micro_sim import stationary_estimate_micro
    from lorentz_fick.params import KineticParams
    from lorentz_fick.scattering import RadialPotential, build_table

    p = KineticParams(epsilon=0.05, alpha=0.1, lam=0.05, mu=1.0, L=0.5)
    table = build_table(RadialPotential.quartic(), p.coupling, 64)
    gen = GeneratorSpec.landau(p, table=table)
    v = (math.cos(0.7), math.sin(0.7))
    runs = {
        "boltzmann": lambda n: stationary_estimate_kinetic("boltzmann", (0.25, 0.0), 0.7, p, n, table=table),
        "landau": lambda n: stationary_estimate_kinetic("landau", (0.25, 0.0), 0.7, p, n, gen=gen),
        "micro": lambda n: stationary_estimate_micro((0.25, 0.0), v, p, n),
    }
    out = {"backend": backend_name()}
    for name, fn in runs.items():
        n = WORKLOADS[name]
        fn(1)  # compile, or warm caches
        best = math.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            est = fn(n)
            best = min(best, time.perf_counter() - t0)
        out[name] = {"n": n, "seconds": best, "rate": n / best, "mean": est.mean}
    return out


def _child(disable, repeat):
    env = dict(os.environ, LORENTZ_FICK_DISABLE_JIT="1" if disable else "0")
    cmd = [sys.executable, __file__, "--child", "--repeat", str(repeat)]
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        print(json.dumps(_measure(args.repeat)))
        return
    jit, py = _child(False, args.repeat), _child(True, args.repeat)
    print(f"{'kernel':<10} {'n':>5} {'numba [s]':>10} {'python [s]':>11} {'speedup':>8}  same result")
    for name in WORKLOADS:
        a, b = jit[name], py[name]
        print(f"{name:<10} {a['n']:>5} {a['seconds']:>10.4f} {b['seconds']:>11.4f} "
              f"{b['seconds'] / a['seconds']:>8.1f}  {a['mean'] == b['mean']}")


if __name__ == "__main__":
    main()
