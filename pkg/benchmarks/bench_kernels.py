"""Compare the numba and pure-numpy backends on the hot kernels.

Each backend runs in its own interpreter because ``RCM_NUMBA`` is read at
import time. Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, time
import numpy as np
from rcm import kernels
from rcm.field import ModelParams, decaying_field
from rcm.lattice import build_box
from rcm.measure import enumerate_measure
from rcm.sampler import ChainConfig, run_chain, bernoulli_samples
from rcm import events

repeat = {repeat}

def best(fn):
    fn()  # warm-up (and JIT compile)
    ts = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t)
    return min(ts)

g1 = build_box(2, 1)
h = decaying_field(3, g1.all_vertices)
p1 = ModelParams(beta=0.5, q=3, field=h, bc="free")
g8 = build_box(2, 8)
p8 = ModelParams(beta=0.3, q=2, field=decaying_field(2, g8.all_vertices))
cfg = ChainConfig(p8, burn_in=0, samples=200)
obs = [("open", events.open_count(g8.n_edges))]

def labels():
    kernels.label_all_configs(g1.n_vertices, g1.edge_array, g1.n_edges, False)

t = enumerate_measure(p1, g1)
res = {{
    "backend": kernels.BACKEND,
    "label_all_configs_r1": best(labels),
    "enumerate_r1_q3_cached": best(lambda: enumerate_measure(p1, g1)),
    "lattice_scan_r1": best(lambda: kernels.lattice_margin(t.log_weights)),
    "heat_bath_r8_200sweeps": best(lambda: run_chain(cfg, g8, obs)),
    "bernoulli_r8_200draws": best(lambda: bernoulli_samples(g8, 0.7, 1, n=200, rng=0)),
}}
print(json.dumps(res))
"""


def run_backend(flag: str, repeat: int) -> dict:
    env = dict(os.environ, RCM_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", WORKER.format(repeat=repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args(argv)

    nb = run_backend("1", args.repeat)
    np_ = run_backend("0", args.repeat)
    keys = [k for k in nb if k != "backend"]
    print(f"{'kernel':<26}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for k in keys:
        print(f"{k:<26}{nb[k]:>12.4f}{np_[k]:>12.4f}{np_[k] / nb[k]:>9.1f}x")
    if args.json:
        with open(args.json, "w") as f:
            json.dump({"numba": nb, "numpy": np_}, f, indent=2)


if __name__ == "__main__":
    main()
