"""Deterministic emission of the sweep artifacts: CSV tables, SVG plots, markdown, manifest."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import NothingToPlot
from .metrics import MetricTriple
from .sweep import SPLITS, UNIT_SYSTEMS, Cell, SlopeFit, SlopeRecord, SweepResult, rank_models, slope_table

METRICS_HEADER = ["model", "quantity", "window", "unit_system", "split", "rmse", "mae", "r2", "seconds", "status"]
SLOPE_HEADER = ["model", "quantity", "metric", "target_split", "m", "c", "fit_r2", "excluded"]
PLOT_METRICS = ("rmse", "mae", "r2")


def fmt(x) -> str:
    """17 significant digits: enough for a lossless float64 roundtrip."""
    if x is None:
        return ""
    return format(float(x), ".17g")


def _parse_float(text):
    return None if text == "" else float(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# --------------------------------------------------------------------------
# metrics table


def emit_metrics_csv(result: SweepResult, include_seconds: bool = False) -> str:
    """One row per (cell, unit system, split).  Wall-clock seconds are opt-in because they
    are the only nondeterministic quantity a sweep produces."""
    rows = []
    for key in sorted(result.cells):
        cell = result.cells[key]
        seconds = fmt(cell.seconds) if include_seconds else ""
        for unit in sorted(UNIT_SYSTEMS):
            for split in sorted(SPLITS):
                t = cell.metrics.get((unit, split))
                if t is None:
                    rows.append([cell.model, cell.quantity, cell.window, unit, split, "", "", "", seconds, cell.status])
                    continue
                status = "r2_undefined" if t.r_squared is None else "ok"
                rows.append([cell.model, cell.quantity, cell.window, unit, split,
                             fmt(t.rmse), fmt(t.mae), fmt(t.r_squared), seconds, status])
    return _csv_text(METRICS_HEADER, rows)


def parse_metrics_csv(text: str, strategy: str = "direct", profile: str = "paper", master_seed: int = 0,
                      manifest: dict | None = None) -> SweepResult:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != METRICS_HEADER:
        raise ValueError(f"unexpected metrics header {reader.fieldnames}")
    grouped: dict = {}
    for row in reader:
        key = (row["model"], row["quantity"], int(row["window"]))
        entry = grouped.setdefault(key, {"metrics": {}, "statuses": set(), "seconds": 0.0})
        entry["statuses"].add(row["status"])
        if row["seconds"]:
            entry["seconds"] = float(row["seconds"])
        if row["rmse"] != "":
            entry["metrics"][(row["unit_system"], row["split"])] = MetricTriple(
                float(row["rmse"]), float(row["mae"]), _parse_float(row["r2"]))
    cells = {}
    for key, entry in grouped.items():
        failed = sorted(s for s in entry["statuses"] if s.startswith("failed"))
        status = failed[0] if failed else ("r2_undefined" if "r2_undefined" in entry["statuses"] else "ok")
        cells[key] = Cell(key[0], key[1], key[2], strategy, status, entry["metrics"], entry["seconds"])
    return SweepResult(cells, strategy, profile, master_seed, manifest or {})


# --------------------------------------------------------------------------
# slope table


def emit_slope_csv(records) -> str:
    rows = []
    for r in sorted(records, key=lambda r: (r.model, r.quantity, r.metric, r.target_split)):
        if r.fit is None:
            rows.append([r.model, r.quantity, r.metric, r.target_split, "", "", "", r.excluded])
        else:
            rows.append([r.model, r.quantity, r.metric, r.target_split,
                         fmt(r.fit.m), fmt(r.fit.c), fmt(r.fit.fit_r_squared), r.excluded])
    return _csv_text(SLOPE_HEADER, rows)


def parse_slope_csv(text: str):
    records = []
    for row in csv.DictReader(io.StringIO(text)):
        fit = None
        if row["m"] != "":
            fit = SlopeFit(float(row["m"]), float(row["c"]), _parse_float(row["fit_r2"]), int(row["excluded"]), 0)
        records.append(SlopeRecord(row["model"], row["quantity"], row["metric"], row["target_split"], fit,
                                   int(row["excluded"])))
    return records


# --------------------------------------------------------------------------
# SVG


PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22")
PANEL_W, PANEL_H = 320.0, 240.0
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 56.0, 16.0, 28.0, 36.0


def _c(v: float) -> str:
    return f"{v:.2f}"


class LogAxes:
    """Affine map from (window, log10 value) to pixel coordinates inside one panel."""

    def __init__(self, x_range, y_range, origin):
        self.x_lo, self.x_hi = x_range
        if self.x_hi == self.x_lo:
            self.x_lo, self.x_hi = self.x_lo - 0.5, self.x_hi + 0.5
        lo, hi = math.log10(y_range[0]), math.log10(y_range[1])
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        self.y_lo, self.y_hi = lo, hi
        self.left = origin[0] + MARGIN_L
        self.top = origin[1] + MARGIN_T
        self.width = PANEL_W - MARGIN_L - MARGIN_R
        self.height = PANEL_H - MARGIN_T - MARGIN_B

    def px(self, window, value):
        x = self.left + (window - self.x_lo) / (self.x_hi - self.x_lo) * self.width
        y = self.top + (self.y_hi - math.log10(value)) / (self.y_hi - self.y_lo) * self.height
        return x, y


def _fit_lookup(fits):
    out = {}
    for r in fits or ():
        if r.fit is not None:
            out[(r.model, r.quantity, r.metric)] = r.fit
    return out


def emit_degradation_svg(result: SweepResult, fits=None, models=None, split: str = "test",
                         unit_system: str = "normalized", metrics=PLOT_METRICS) -> str:
    """One panel per metric; a series per (model, quantity) with its fitted line overlaid.

    Nonpositive values cannot sit on a log axis and are left out, as in the slope fit.
    """
    selected = sorted(models) if models is not None else result.models
    if not selected:
        raise NothingToPlot("no models selected")
    lookup = _fit_lookup(fits)
    series = []
    for model in selected:
        for q in result.quantities:
            series.append((model, q))
    colors = {s: PALETTE[i % len(PALETTE)] for i, s in enumerate(series)}

    panels = []
    any_points = False
    for j, metric in enumerate(metrics):
        origin = (j * PANEL_W, 0.0)
        data = []
        for model, q in series:
            ws, vs = result.series(model, q, metric, split, unit_system)
            keep = vs > 0
            ws, vs = ws[keep], vs[keep]
            fit = lookup.get((model, q, metric)) if ws.size >= 2 else None
            data.append((model, q, ws, vs, fit))
        values = [v for *_, ws, vs, fit in data for v in vs]
        values += [v for *_, ws, vs, fit in data if fit is not None for v in fit.line(ws)]
        windows = [w for *_, ws, vs, fit in data for w in ws]
        panels.append((metric, origin, data, values, windows))
        any_points = any_points or bool(values)
    if not any_points:
        raise NothingToPlot("no positive values to plot")

    width = PANEL_W * len(metrics)
    height = PANEL_H + 18.0 * len(series) + 8.0
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_c(width)}" height="{_c(height)}" '
           f'viewBox="0 0 {_c(width)} {_c(height)}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{_c(width)}" height="{_c(height)}" fill="#ffffff"/>']
    for metric, origin, data, values, windows in panels:
        label = f"{metric} ({split}, {unit_system})"
        out.append(f'<text x="{_c(origin[0] + PANEL_W / 2)}" y="{_c(18.0)}" text-anchor="middle">{label}</text>')
        if not values:
            out.append(f'<text x="{_c(origin[0] + PANEL_W / 2)}" y="{_c(PANEL_H / 2)}" '
                       f'text-anchor="middle">no positive values</text>')
            continue
        axes = LogAxes((min(windows), max(windows)), (min(values), max(values)), origin)
        out.append(f'<rect x="{_c(axes.left)}" y="{_c(axes.top)}" width="{_c(axes.width)}" '
                   f'height="{_c(axes.height)}" fill="none" stroke="#444444"/>')
        for decade in range(math.floor(axes.y_lo), math.ceil(axes.y_hi) + 1):
            if axes.y_lo - 1e-12 <= decade <= axes.y_hi + 1e-12:
                _, y = axes.px(axes.x_lo, 10.0 ** decade)
                out.append(f'<line x1="{_c(axes.left)}" y1="{_c(y)}" x2="{_c(axes.left + axes.width)}" '
                           f'y2="{_c(y)}" stroke="#dddddd"/>')
                out.append(f'<text x="{_c(axes.left - 4)}" y="{_c(y + 4)}" text-anchor="end">1e{decade}</text>')
        for end, anchor in ((axes.x_lo, "start"), (axes.x_hi, "end")):
            x, _ = axes.px(end, 10.0 ** axes.y_lo)
            out.append(f'<text x="{_c(x)}" y="{_c(axes.top + axes.height + 14)}" text-anchor="{anchor}">'
                       f'{end:g}</text>')
        out.append(f'<text x="{_c(axes.left + axes.width / 2)}" y="{_c(axes.top + axes.height + 28)}" '
                   f'text-anchor="middle">window</text>')
        for model, q, ws, vs, fit in data:
            color = colors[(model, q)]
            for w, v in zip(ws, vs):
                x, y = axes.px(w, v)
                out.append(f'<circle cx="{_c(x)}" cy="{_c(y)}" r="2.5" fill="{color}"/>')
            if fit is not None:
                pts = " ".join(f"{_c(x)},{_c(y)}" for x, y in (axes.px(w, v) for w, v in zip(ws, fit.line(ws))))
                out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
    for i, (model, q) in enumerate(series):
        y = PANEL_H + 14.0 + 18.0 * i
        out.append(f'<rect x="{_c(MARGIN_L)}" y="{_c(y - 8)}" width="10" height="10" fill="{colors[(model, q)]}"/>')
        out.append(f'<text x="{_c(MARGIN_L + 16)}" y="{_c(y + 1)}">{model} / {q}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# markdown and bundle


def render_summary(result: SweepResult, records, target_split: str = "test") -> str:
    rankings = rank_models(result, target_split, [r for r in records if r.target_split == target_split])
    fits = {(r.model, r.quantity, r.metric): r.fit for r in records if r.target_split == target_split}
    lines = ["# Sweep summary", "",
             f"Strategy `{result.strategy}`, profile `{result.profile}`, master seed {result.master_seed}.",
             f"Metrics below are {target_split}-split values in normalized units.", ""]
    failed = sorted(result.failed, key=lambda c: (c.model, c.quantity, c.window))
    if failed:
        lines += [f"{len(failed)} cells failed:", ""]
        lines += [f"- {c.model} / {c.quantity} / window {c.window}: {c.status}" for c in failed]
        lines.append("")
    for q in result.quantities:
        lines += [f"## {q}", "", "| model | RMSE slope m | c | fit r2 | RMSE w1 | RMSE w_max |", "|---|---|---|---|---|---|"]
        w_lo, w_hi = result.windows[0], result.windows[-1]
        for model in rankings.robustness[q]:
            fit = fits.get((model, q, "rmse"))
            first = result.cells.get((model, q, w_lo))
            last = result.cells.get((model, q, w_hi))
            cols = [f"{fit.m:.4f}" if fit else "n/a", f"{fit.c:.4f}" if fit else "n/a",
                    f"{fit.fit_r_squared:.3f}" if fit and fit.fit_r_squared is not None else "n/a",
                    f"{first.metric('rmse', target_split):.4f}" if first and first.ok else "n/a",
                    f"{last.metric('rmse', target_split):.4f}" if last and last.ok else "n/a"]
            lines.append(f"| {model} | " + " | ".join(cols) + " |")
        lines.append("")
        for w in sorted({w_lo, w_hi}):
            ranked = rankings.per_window[(q, w)]
            lines.append(f"Best at window {w}: " + ", ".join(ranked[:5]) + ("" if ranked else "none"))
        lines.append("")
    return "\n".join(lines)


def write_report(result: SweepResult, out_dir, include_seconds: bool = False) -> dict:
    """Write the full bundle; returns {artifact name: path}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = slope_table(result, "test") + slope_table(result, "train")
    paths = {}

    def put(name, text):
        path = out / name
        path.write_text(text, encoding="utf-8", newline="\n")
        paths[name] = path

    put("metrics.csv", emit_metrics_csv(result, include_seconds))
    put("slopes.csv", emit_slope_csv(records))
    test_records = [r for r in records if r.target_split == "test"]
    for model in result.models:
        try:
            put(f"degradation_{model}.svg", emit_degradation_svg(result, test_records, [model]))
        except NothingToPlot:
            pass
    put("summary.md", render_summary(result, records))
    put("manifest.json", json.dumps(result.manifest, indent=2, sort_keys=True) + "\n")
    return paths
