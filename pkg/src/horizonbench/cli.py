"""Command-line entry points: synth, ingest, sweep, slopes, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dataset import DEFAULT_PROFILES, Quantity, generate_synthetic, parse_pems_csv, read_series_csv, write_series_csv
from .errors import HorizonBenchError
from .models import MODEL_IDS, REGISTRY
from .report import emit_slope_csv, parse_metrics_csv, write_report
from .sweep import WINDOWS, run_sweep, slope_table

log = logging.getLogger("horizonbench")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3

SWEEP_DEFAULTS = {
    "models": "all",
    "windows": "1..20",
    "strategy": "direct",
    "profile": "paper",
    "seed": 0,
    "workers": 1,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with 2, which is reserved for data errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_windows(text) -> tuple:
    """'1..20', '1,5,10' or a JSON list."""
    if isinstance(text, (list, tuple)):
        values = [int(v) for v in text]
    elif ".." in str(text):
        lo, hi = str(text).split("..", 1)
        values = list(range(int(lo), int(hi) + 1))
    else:
        values = [int(v) for v in str(text).split(",") if v.strip()]
    if not values or min(values) < 1:
        raise UsageError(f"bad window list {text!r}")
    return tuple(sorted(set(values)))


def parse_models(text) -> tuple:
    if isinstance(text, (list, tuple)):
        ids = list(text)
    elif text == "all":
        return MODEL_IDS
    else:
        ids = [m.strip() for m in str(text).split(",") if m.strip()]
    unknown = [m for m in ids if m not in REGISTRY]
    if unknown or not ids:
        raise UsageError(f"unknown models {unknown}; known: {', '.join(sorted(REGISTRY))}")
    return tuple(ids)


def resolve_config(args) -> dict:
    """flags > JSON config file > built-in defaults"""
    config = dict(SWEEP_DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(loaded) - set(SWEEP_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        config.update(loaded)
    for key in SWEEP_DEFAULTS:
        value = getattr(args, key)
        if value is not None:
            config[key] = value
    if config["strategy"] not in ("direct", "recursive"):
        raise UsageError("strategy must be direct or recursive")
    if config["profile"] not in ("paper", "reduced"):
        raise UsageError("profile must be paper or reduced")
    config["models"] = parse_models(config["models"])
    config["windows"] = parse_windows(config["windows"])
    config["seed"] = int(config["seed"])
    config["workers"] = int(config["workers"])
    if config["workers"] < 1:
        raise UsageError("workers must be >= 1")
    return config


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise HorizonBenchError(f"cannot read {path}: {exc}") from exc


def cmd_synth(args) -> int:
    q = Quantity(args.quantity)
    series = generate_synthetic(args.days, args.seed, DEFAULT_PROFILES[q], q)
    Path(args.out).write_text(write_series_csv(series), encoding="utf-8")
    log.info("wrote %d %s samples to %s", len(series), q.value, args.out)
    return EXIT_OK


def cmd_ingest(args) -> int:
    series = parse_pems_csv(_read(args.pems), args.quantity)
    Path(args.out).write_text(write_series_csv(series), encoding="utf-8")
    log.info("ingested %d %s samples", len(series), series.quantity.value)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = resolve_config(args)
    data = {}
    for q in Quantity:
        path = getattr(args, q.value)
        if path:
            data[q] = read_series_csv(_read(path), q)
    if not data:
        raise UsageError("give at least one of --speed / --flow")
    result = run_sweep(data, config["models"], config["windows"], config["strategy"], config["profile"],
                       config["seed"], config["workers"])
    out = Path(args.out)
    write_report(result, out)
    timings = {f"{m}|{q}|{w}": c.seconds for (m, q, w), c in sorted(result.cells.items())}
    (out / "timings.json").write_text(json.dumps(timings, indent=2) + "\n", encoding="utf-8")
    if result.failed:
        log.warning("%d of %d cells failed", len(result.failed), len(result.cells))
        return EXIT_PARTIAL
    return EXIT_OK


def _load_result(in_dir):
    in_dir = Path(in_dir)
    manifest = json.loads(_read(in_dir / "manifest.json")) if (in_dir / "manifest.json").exists() else {}
    return parse_metrics_csv(_read(in_dir / "metrics.csv"), manifest.get("strategy", "direct"),
                             manifest.get("profile", "paper"), manifest.get("master_seed", 0), manifest)


def cmd_slopes(args) -> int:
    result = _load_result(args.in_dir)
    text = emit_slope_csv(slope_table(result, args.target))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    result = _load_result(args.in_dir)
    write_report(result, args.out)
    return EXIT_PARTIAL if result.failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="horizonbench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic series CSV")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quantity", choices=[q.value for q in Quantity], default="flow")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="convert a PeMS station CSV to canonical form")
    p.add_argument("--pems", required=True)
    p.add_argument("--quantity", choices=[q.value for q in Quantity], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("sweep", help="run the multi-window experiment")
    p.add_argument("--speed")
    p.add_argument("--flow")
    p.add_argument("--config", help="JSON file with sweep settings; flags override it")
    p.add_argument("--models", help="comma list or 'all'")
    p.add_argument("--windows", help="'1..20' or a comma list")
    p.add_argument("--strategy", choices=["direct", "recursive"])
    p.add_argument("--profile", choices=["paper", "reduced"])
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("slopes", help="log-linear fits of metric versus window")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--target", choices=["train", "test"], default="test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_slopes)

    p = sub.add_parser("report", help="regenerate CSVs, SVGs and the summary from a sweep directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HorizonBenchError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
