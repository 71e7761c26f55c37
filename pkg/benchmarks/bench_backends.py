"""Compare the numba and numpy encoder backends on synthetic SI datasets.

    python benchmarks/bench_backends.py [--repeats 3] [--out bench.json]

Two families of datasets are timed: one varying the sequence length at fixed
contact density, one varying the contact density at fixed length. Each row
reports best-of-``repeats`` encoder times for both backends, their ratio and
the largest embedding difference between them.
"""

import argparse
import json

import numpy as np

from gdgesn import kernels
from gdgesn.cli import bench_dataset
from gdgesn.evaluation import EncodingCache
from gdgesn.graph import filter_dataset
from gdgesn.reservoir import EncoderConfig, encode_batch, init_stack
from gdgesn.si import SIConfig, generate_dataset

CASES = [
    ("T20", dict(num_timesteps=20)),
    ("T50", dict(num_timesteps=50)),
    ("T80", dict(num_timesteps=80)),
    ("q0.05", dict(contact_prob=0.05)),
    ("q0.20", dict(contact_prob=0.2)),
]


def max_backend_gap(ds, cfg):
    cache = EncodingCache(ds)
    w = cfg.schedule.window_sizes
    stack = init_stack(cfg, cache.esp_basis(np.arange(len(ds)), w))
    a = encode_batch(stack, cache.views(w), packed=cache.packed(w), backend="numba")
    b = encode_batch(stack, cache.views(w), packed=cache.packed(w), backend="numpy")
    return float(np.abs(a - b).max())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--groups", type=int, default=3)
    ap.add_argument("--layers", type=int, default=2)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    if not kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    cfg = EncoderConfig(num_groups=args.groups, num_layers=args.layers, rng_seed=7)
    rows = []
    print(f"{'case':>6} {'edges':>10} {'numba s':>9} {'numpy s':>9} {'speedup':>8} {'max gap':>9}")
    for name, kw in CASES:
        ds = filter_dataset(generate_dataset(SIConfig(rng_seed=7, name=name, **kw)))
        row = bench_dataset(ds, cfg, backends=("numba", "numpy"), repeats=args.repeats)
        row["speedup"] = row["encode_numpy_s"] / row["encode_numba_s"]
        row["max_gap"] = max_backend_gap(ds, cfg)
        rows.append(row)
        print(f"{name:>6} {row['total_edges']:>10} {row['encode_numba_s']:>9.3f} {row['encode_numpy_s']:>9.3f} "
              f"{row['speedup']:>8.2f} {row['max_gap']:>9.1e}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"groups": args.groups, "layers": args.layers, "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
