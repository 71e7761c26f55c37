"""Command line interface: ``gdgesn {gen,stats,cv,sweep,bench,train,predict}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import kernels
from .evaluation import CVProtocol, EncodingCache, SweepGrid, accuracy, run_cv, run_sweep
from .graph import DatasetError, compute_stats, filter_dataset, load_dataset, save_dataset
from .model import GDGESN, load_model, save_model
from .readout import fit
from .reservoir import EncoderConfig, encode_batch, init_stack
from .si import SIConfig, generate_dataset

log = logging.getLogger("gdgesn")


def _int_list(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    return tuple(out)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _resolve_seed(args) -> int:
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy % (2**31))
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _add_encoder_flags(p: argparse.ArgumentParser, *, grid: bool = False) -> None:
    d = EncoderConfig()
    g = p.add_argument_group("encoder")
    g.add_argument("--reservoir-size", type=int, default=d.reservoir_size)
    g.add_argument("--spectral-radius", type=float, default=d.spectral_radius)
    g.add_argument("--leaking-rate", type=float, default=d.leaking_rate)
    g.add_argument("--input-scaling", type=float, default=d.input_scaling)
    g.add_argument("--density", type=float, default=d.density)
    g.add_argument("--gamma", type=float, default=1e-3, help="ridge regularisation")
    if grid:
        g.add_argument("--layers", type=_int_list, default=(1, 2, 3, 4), help="e.g. 1,2 or 1-4")
        g.add_argument("--groups", type=_int_list, default=(1, 2, 3), help="e.g. 1,3 or 1-3")
    else:
        g.add_argument("--layers", type=int, default=2)
        g.add_argument("--groups", type=int, default=3)
        g.add_argument("--windows", type=_int_list, default=None,
                       help="window size per group (default 2g-1)")


def _add_protocol_flags(p: argparse.ArgumentParser) -> None:
    d = CVProtocol()
    g = p.add_argument_group("protocol")
    g.add_argument("--folds", type=int, default=d.num_folds)
    g.add_argument("--inits", type=int, default=d.num_random_inits, help="random initialisations per fold")
    g.add_argument("--no-shuffle", action="store_true", help="keep file order when forming folds")
    g.add_argument("--jobs", type=int, default=1)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (fresh one printed if omitted)")
    p.add_argument("--keep-empty", action="store_true", help="do not drop edgeless snapshots on load")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _encoder_config(args, parser, **over) -> EncoderConfig:
    fields = dict(
        reservoir_size=args.reservoir_size,
        spectral_radius=args.spectral_radius,
        leaking_rate=args.leaking_rate,
        input_scaling=args.input_scaling,
        density=args.density,
        rng_seed=args.seed or 0,
    )
    if not isinstance(args.layers, tuple):
        fields.update(num_layers=args.layers, num_groups=args.groups, window_sizes=args.windows)
    fields.update(over)
    try:
        return EncoderConfig(**fields)
    except ValueError as exc:
        parser.error(str(exc))


def _protocol(args, parser) -> CVProtocol:
    try:
        return CVProtocol(num_folds=args.folds, num_random_inits=args.inits, master_seed=args.seed,
                          shuffle=not args.no_shuffle, gamma=args.gamma, jobs=args.jobs)
    except ValueError as exc:
        parser.error(str(exc))


def _load(path, args):
    ds = load_dataset(path)
    return ds if args.keep_empty else filter_dataset(ds)


def _write_report(report, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(report.to_json())
    (outdir / "report.txt").write_text(report.to_text())
    (outdir / "report.csv").write_text(report.to_csv())
    (outdir / "timing.json").write_text(json.dumps(report.timing, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args, parser) -> int:
    seed = _resolve_seed(args)
    try:
        cfg = SIConfig(
            num_vertices=args.vertices,
            num_timesteps=args.timesteps,
            graphs_per_class=args.graphs_per_class,
            infection_probs=args.classes,
            contact_prob=args.contact_prob[0] if len(args.contact_prob) == 1 else args.contact_prob,
            initial_infected=args.initial_infected,
            rng_seed=seed,
            name=args.name,
        )
    except ValueError as exc:
        parser.error(str(exc))
    ds = generate_dataset(cfg)
    save_dataset(ds, args.out)
    lengths = [g.num_timesteps for g in ds]
    print(f"wrote {args.out}: N_S={len(ds)} N_V={ds.num_vertices} N_Y={ds.num_classes} "
          f"mean N_T={np.mean(lengths):.2f} total edges={ds.total_edges}")
    return 0


def cmd_stats(args, parser) -> int:
    ds = _load(args.dataset, args)
    stats = compute_stats(ds)
    out = {
        "name": ds.name,
        "num_graphs": len(ds),
        "num_vertices": ds.num_vertices,
        "num_classes": ds.num_classes,
        "class_counts": np.bincount(ds.labels, minlength=ds.num_classes).tolist(),
        "mean_length": stats.mean_length,
        "min_length": min(stats.lengths),
        "max_length": max(stats.lengths),
        "total_edges": stats.total_edges,
        "max_adjacency_spectral_radius": stats.max_adjacency_spectral_radius,
    }
    print(json.dumps(out, indent=2))
    return 0


def cmd_cv(args, parser) -> int:
    _resolve_seed(args)
    cfg = _encoder_config(args, parser)
    proto = _protocol(args, parser)
    ds = _load(args.dataset, args)
    report = run_cv(ds, cfg, proto)
    _write_report(report, Path(args.out))
    print(report.to_text(), end="")
    return 0


def cmd_sweep(args, parser) -> int:
    _resolve_seed(args)
    cfg = _encoder_config(args, parser)
    proto = _protocol(args, parser)
    try:
        grid = SweepGrid(layers=args.layers, groups=args.groups)
    except ValueError as exc:
        parser.error(str(exc))
    ds = _load(args.dataset, args)
    report = run_sweep(ds, cfg, grid, proto)
    _write_report(report, Path(args.out))
    print(report.to_text(), end="")
    return 0


def _best_time(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_dataset(ds, cfg: EncoderConfig, *, backends=("numba",), repeats: int = 3,
                  readout_repeats: int = 50, gamma: float = 1e-3) -> dict:
    """Best-of-``repeats`` encoder time per backend and readout fit time."""
    cache = EncodingCache(ds)
    windows = cfg.schedule.window_sizes
    cache.prepare(windows)
    stack = init_stack(cfg, cache.esp_basis(np.arange(len(ds)), windows))
    views, packed = cache.views(windows), cache.packed(windows)
    row = {"name": ds.name, "num_graphs": len(ds), "total_edges": ds.total_edges,
           "merged_edges": int(sum(p[2].shape[0] for p in packed))}
    emb = None
    for name in backends:
        encode_batch(stack, views, packed=packed, backend=name)  # warm-up / JIT
        row[f"encode_{name}_s"] = _best_time(lambda: encode_batch(stack, views, packed=packed, backend=name), repeats)
        emb = encode_batch(stack, views, packed=packed, backend=name)
    row["readout_s"] = _best_time(lambda: fit(emb, ds.labels, gamma, ds.num_classes), readout_repeats)
    return row


def cmd_bench(args, parser) -> int:
    _resolve_seed(args)
    cfg = _encoder_config(args, parser)
    if args.backend == "both":
        backends = ("numba", "numpy") if kernels.NUMBA_AVAILABLE else ("numpy",)
    else:
        backends = (args.backend,)
    rows = [bench_dataset(_load(p, args), cfg, backends=backends, repeats=args.repeats, gamma=args.gamma)
            for p in args.datasets]
    cols = ["name", "num_graphs", "total_edges", "merged_edges"] + [f"encode_{b}_s" for b in backends] + ["readout_s"]
    print("  ".join(f"{c:>14}" for c in cols))
    for r in rows:
        print("  ".join(f"{r[c]:>14.6f}" if isinstance(r[c], float) else f"{r[c]:>14}" for c in cols))
    if len(rows) > 1:
        base = rows[0]
        for r in rows[1:]:
            ratio = r["total_edges"] / base["total_edges"]
            parts = [f"edges x{ratio:.2f}"]
            parts += [f"encode[{b}] x{r[f'encode_{b}_s'] / base[f'encode_{b}_s']:.2f}" for b in backends]
            parts.append(f"readout x{r['readout_s'] / base['readout_s']:.2f}")
            print(f"{r['name']} vs {base['name']}: " + ", ".join(parts))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.json").write_text(json.dumps({"config": asdict(cfg), "rows": rows}, indent=2) + "\n")
    return 0


def cmd_train(args, parser) -> int:
    _resolve_seed(args)
    cfg = _encoder_config(args, parser)
    ds = _load(args.dataset, args)
    model = GDGESN(cfg, args.gamma).fit(ds.graphs, num_classes=ds.num_classes)
    save_model(model, args.model)
    acc = accuracy(model.predict(ds.graphs), ds.labels)
    print(f"saved {args.model}; training accuracy {acc:.2f}%")
    return 0


def cmd_predict(args, parser) -> int:
    model = load_model(args.model)
    ds = _load(args.dataset, args)
    pred = model.predict(ds.graphs)
    out = {"predictions": pred.tolist(), "accuracy": accuracy(pred, ds.labels)}
    if args.out:
        Path(args.out).write_text(json.dumps(out) + "\n")
    print(f"accuracy {out['accuracy']:.2f}% on {len(ds)} graphs")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gdgesn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic SI dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--classes", type=_float_list, default=(0.2, 0.8), help="infection probability per class")
    p.add_argument("--graphs-per-class", type=int, default=100)
    p.add_argument("--vertices", type=int, default=60)
    p.add_argument("--timesteps", type=int, default=50)
    p.add_argument("--contact-prob", type=_float_list, default=(0.05,),
                   help="edge probability per pair and step (one value or one per class)")
    p.add_argument("--initial-infected", type=int, default=1)
    p.add_argument("--name", default="si")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("stats", help="print dataset statistics")
    p.add_argument("dataset")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("cv", help="cross-validate one configuration")
    p.add_argument("dataset")
    p.add_argument("--out", default="report", help="report directory")
    _add_encoder_flags(p)
    _add_protocol_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("sweep", help="cross-validate a layers x groups grid")
    p.add_argument("dataset")
    p.add_argument("--out", default="report", help="report directory")
    _add_encoder_flags(p, grid=True)
    _add_protocol_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="time encoder and readout against edge counts")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--backend", choices=("numba", "numpy", "both"), default="both" if kernels.NUMBA_AVAILABLE else "numpy")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out", default=None, help="directory for bench.json")
    _add_encoder_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("train", help="fit on a whole dataset and save the model")
    p.add_argument("dataset")
    p.add_argument("--model", required=True, help="output .npz path")
    _add_encoder_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify a dataset with a saved model")
    p.add_argument("dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None, help="JSON file for predictions")
    _add_common(p)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args, parser)
    except (DatasetError, FileNotFoundError, OSError, ValueError, ArithmeticError) as exc:
        print(f"gdgesn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
