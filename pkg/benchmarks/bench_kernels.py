"""Time the numba and numpy kernel backends side by side.

Each backend runs in its own interpreter because the switch is read at import.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKLOAD = r"""
import json, sys, time
import numpy as np
from platoon_hinf import BACKEND, PlatoonConfig, ScenarioSpec, default_weights, simulate
from platoon_hinf.platoon import MULTIOBJECTIVE
from platoon_hinf.synthesis import Controller, GridObjective

repeat = int(sys.argv[1])
cfg = PlatoonConfig.from_flat(mode="CACC", h=0.5)
obj = GridObjective(cfg, default_weights(cfg.ts), 5, MULTIOBJECTIVE)
rng = np.random.default_rng(0)
x0 = np.array([0.0] * 4 + [-8.0, 10.0] + [0.0] * 5)
xs = [x0 + 1e-3 * rng.normal(size=x0.size) for _ in range(200)]
K = Controller.from_coefficients([-8.0, 10.0], [0.0, 1.0], cfg.ts)
scen = ScenarioSpec.standard()

def best(fn):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

res = {
    "backend": BACKEND,
    "objective_x200": best(lambda: [obj(x, 100.0) for x in xs]),
    "simulate_m5_70s": best(lambda: simulate(cfg.replace(m=5), K, scen)),
    "simulate_m50_70s": best(lambda: simulate(cfg.replace(m=50), K, scen)),
}
print(json.dumps(res))
"""


def run(disable, repeat):
    env = dict(os.environ)
    env.pop("PLATOON_HINF_DISABLE_NUMBA", None)
    if disable:
        env["PLATOON_HINF_DISABLE_NUMBA"] = "1"
    out = subprocess.run(
        [sys.executable, "-c", _WORKLOAD, str(repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    print(f"{'workload':<20}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:<20}{fast[key]:>11.4f}s{slow[key]:>11.4f}s{slow[key] / fast[key]:>9.1f}x")


if __name__ == "__main__":
    main()
