"""Sweep throughput of the compiled and pure-Python kernels on planted data.

    python3 benchmarks/bench_kernels.py --n 40 --m 5 --sweeps 50
"""

import argparse
import time

import numpy as np

from depsbm.core import Hyperparameters
from depsbm.gibbs import ChainState, Model, SamplerOptions, sweep
from depsbm.kernels import get_backend
from depsbm.synthetic import generate_scenario, scenario


def time_backend(net, backend, sweeps, seed):
    model = Model(net, None, Hyperparameters(a_theta=np.ones(net.n_categories)),
                  SamplerOptions(supervised=False, backend=backend))
    chain = ChainState.from_prior(model, rng=seed)
    sweep(chain)
    t0 = time.perf_counter()
    for _ in range(sweeps):
        sweep(chain)
    return (time.perf_counter() - t0) / sweeps, chain


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=40)
    ap.add_argument("--m", type=int, default=5)
    ap.add_argument("--scenario", type=int, default=1, choices=(1, 2))
    ap.add_argument("--sweeps", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    net, *_ = generate_scenario(scenario(args.scenario, args.n, args.m), args.seed)
    backends = ["python"]
    try:
        get_backend("cython")
        backends.append("cython")
    except ImportError:
        print("compiled extension not built; timing the Python kernel only")
    results = {}
    for b in backends:
        per_sweep, chain = time_backend(net, b, args.sweeps, args.seed)
        results[b] = (per_sweep, chain)
        print(f"{b:>7}: {per_sweep * 1e3:9.3f} ms/sweep")
    if len(results) == 2:
        (tp, cp), (tc, cc) = results["python"], results["cython"]
        same = all(np.array_equal(a.z, b.z) for a, b in zip(cp.sides, cc.sides))
        print(f"speed-up {tp / tc:.1f}x; identical chains: {same}")


if __name__ == "__main__":
    main()
