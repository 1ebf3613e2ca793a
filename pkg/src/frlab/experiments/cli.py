"""Command line entry point: ``frlab {sweep,preset,bounds,check}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import ConfigError, FrlabError
from .config import ExperimentConfig, load_config
from .output import PlotOptions, emit_bounds_csv, emit_csv, emit_svg_plot
from .presets import DESIGNS, preset
from .sweep import compute_bounds, run_sweep


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override master_seed")
    common.add_argument("--threads", type=int, default=None, help="worker cap (default: FRLAB_THREADS or 1)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="frlab", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", parents=[common], help="run a sweep from a JSON config")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", required=True)

    pr = sub.add_parser("preset", parents=[common], help="run a preset design")
    pr.add_argument("design", choices=DESIGNS)
    pr.add_argument("--scale", type=float, default=1.0, help="multiplies every p in the grid")
    pr.add_argument("--replicates", type=int, default=None)
    pr.add_argument("--out", required=True)

    bd = sub.add_parser("bounds", parents=[common], help="evaluate the bound calculators on a config grid")
    bd.add_argument("--config", required=True)
    bd.add_argument("--out", required=True)

    ck = sub.add_parser("check", parents=[common], help="run the acceptance suite")
    ck.add_argument("--only", type=int, nargs="+", default=None, help="criterion numbers to run")
    return parser


def _seeded(config: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    if seed is None:
        return config
    if not 0 <= seed < 2**64:
        raise ConfigError("--seed must lie in [0, 2^64)")
    return config.with_(master_seed=seed)


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FrlabError(f"cannot create {out}: {exc.strerror}") from exc
    return out


def _run_and_write(config: ExperimentConfig, out: Path, threads: int | None) -> None:
    (out / "config.json").write_text(config.to_json() + "\n", encoding="utf-8")
    result = run_sweep(config, threads=threads)
    for msg in result.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    emit_csv(result, out / "results.csv")
    emit_bounds_csv(result.bound_rows, out / "bounds.csv")
    if result.rows and any(r.converged for r in result.rows):
        emit_svg_plot(result, out / "plot.svg", PlotOptions(title=config.design))
    print(f"wrote {len(result.rows)} rows to {out}")


def _check(only, threads) -> int:
    from ..acceptance import run_all

    results = run_all(threads, only)
    for r in results:
        print(r.line(), flush=True)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return 0 if passed == len(results) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return _check(args.only, args.threads)
        if args.command == "preset":
            config = preset(args.design, args.scale)
            if args.replicates is not None:
                config = config.with_(replicates=args.replicates)
        else:
            config = load_config(args.config)
        config = _seeded(config, args.seed)
        out = _out_dir(args.out)
        if args.command == "bounds":
            (out / "config.json").write_text(config.to_json() + "\n", encoding="utf-8")
            rows = compute_bounds(config)
            emit_bounds_csv(rows, out / "bounds.csv")
            print(f"wrote {len(rows)} bound rows to {out}")
            return 0
        _run_and_write(config, out, args.threads)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FrlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
