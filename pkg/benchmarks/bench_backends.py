"""Compare the numba and numpy kernel backends.

Each backend runs in its own interpreter (the backend is fixed at import
time through SCLDPC_BACKEND).  Timings exclude a warm-up call, so numba's
compile time is reported separately.

    python benchmarks/bench_backends.py [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from scldpc import BACKEND
from scldpc.bec import bec_bp_threshold, bec_run
from scldpc.channels import BAWGN, ChannelParam, channel_density
from scldpc.coupling import CoupledSpec
from scldpc.de import de_step_coupled, Constellation
from scldpc.density import GridSpec, chk_conv, var_conv

repeat = int(sys.argv[1])
grid = GridSpec(25.0, 2048)
c = channel_density(ChannelParam(BAWGN, 0.95), grid)
line = CoupledSpec.line(3, 6, 16, 3)
X = Constellation.uniform(c, line.positions)

cases = {
    "check convolution (2048 bins)": lambda: chk_conv(c, c),
    "variable convolution (2048 bins)": lambda: var_conv(c, c),
    "density DE step, L=16": lambda: de_step_coupled(c, X, line),
    "scalar BEC run, L=16, eps=0.488": lambda: bec_run(0.488, line, max_iters=10**5),
    "scalar BEC threshold, L=16": lambda: bec_bp_threshold(line),
}
out = {"backend": BACKEND, "cases": {}}
for name, fn in cases.items():
    t0 = time.perf_counter()
    fn()
    first = time.perf_counter() - t0
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    out["cases"][name] = {"first": first, "best": min(times)}
print(json.dumps(out))
"""


def run_backend(name, repeat):
    env = dict(os.environ, SCLDPC_BACKEND=name)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    res = {name: run_backend(name, args.repeat) for name in ("numba", "numpy")}
    width = max(len(k) for k in res["numba"]["cases"])
    print(f"{'case':<{width}}  {'numba':>10}  {'numpy':>10}  {'speed-up':>8}  {'numba 1st':>10}")
    for case, nb in res["numba"]["cases"].items():
        npy = res["numpy"]["cases"][case]
        ratio = npy["best"] / nb["best"] if nb["best"] > 0 else float("inf")
        print(f"{case:<{width}}  {nb['best']:>9.4f}s  {npy['best']:>9.4f}s  {ratio:>7.1f}x  "
              f"{nb['first']:>9.3f}s")


if __name__ == "__main__":
    main()
