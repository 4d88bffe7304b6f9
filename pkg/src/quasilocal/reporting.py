"""Deterministic report emission: CSV, JSON summary, plot script, figures.

CSV rows are sorted lexicographically on their formatted cells before
writing, so identical results give byte-identical files regardless of
the evaluation order that produced them.  Infinities serialize as the
literal string ``inf``; NaN anywhere is an internal error and refused.
Figures are rendered from the same rows the CSV carries, next to a
stand-alone plotting script that reproduces them from the CSV.
"""

from __future__ import annotations

import json
import math
import os
import time

import numpy as np

__all__ = ["format_cell", "write_csv", "write_summary", "write_plot_script",
           "render_figures", "emit_report"]


def format_cell(value) -> str:
    """Fixed textual form of one CSV cell."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            raise ValueError("NaN is not allowed in reports")
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if isinstance(value, complex):
        raise ValueError("split complex values into _re/_im columns")
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, columns, rows) -> None:
    """Write rows (dicts) under the given column order, sorted bytewise."""
    lines = []
    for row in rows:
        cells = [format_cell(row.get(c)) for c in columns]
        lines.append(",".join(cells))
    lines.sort()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for line in lines:
            fh.write(line + "\n")


def write_summary(path: str, rows, runtime: float) -> dict:
    """JSON summary: pass/fail counts and the worst margin seen."""
    passed = sum(1 for r in rows if r.get("passed") is True)
    failed = sum(1 for r in rows if r.get("passed") is False)
    margins = [r["margin"] for r in rows
               if isinstance(r.get("margin"), (int, float))
               and not math.isnan(r["margin"])]
    worst = min(margins) if margins else math.inf
    summary = {
        "pass_count": passed,
        "fail_count": failed,
        "worst_margin": "inf" if math.isinf(worst) else worst,
        "runtime_seconds": round(runtime, 3),
        "rows": len(rows),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


_PLOT_TEMPLATE = '''#!/usr/bin/env python3
"""Plot {command} results from {csv_name} (generated alongside the data)."""
import csv
import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path="{csv_name}"):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def num(x):
    return float("inf") if x == "inf" else float(x) if x else None


rows = load()
{body}
'''

_GENERIC_BODY = '''margins = [num(r["margin"]) for r in rows
           if r.get("margin") not in (None, "", "inf")]
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(sorted(margins), marker=".", lw=0.8)
ax.set_yscale("symlog", linthresh=1e-12)
ax.set_xlabel("row (sorted)")
ax.set_ylabel("margin  (theoretical - empirical)")
ax.axhline(0.0, color="red", lw=0.8)
ax.set_title("{command}: certificate margins")
fig.tight_layout()
fig.savefig("margins.png", dpi=150)
print("wrote margins.png")
'''


def write_plot_script(path: str, command: str, csv_name: str) -> None:
    body = _GENERIC_BODY.replace("{command}", command)
    text = _PLOT_TEMPLATE.format(command=command, csv_name=csv_name, body=body)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def render_figures(out_dir: str, command: str, columns, rows) -> list:
    """Render summary figures next to the CSV; returns the written paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)

    margins = [r["margin"] for r in rows
               if isinstance(r.get("margin"), (int, float))
               and math.isfinite(r["margin"])]
    if margins:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(sorted(margins), marker=".", lw=0.8)
        ax.set_yscale("symlog", linthresh=1e-12)
        ax.set_xlabel("row (sorted)")
        ax.set_ylabel("margin")
        ax.axhline(0.0, color="red", lw=0.8)
        ax.set_title(f"{command}: certificate margins")
        fig.tight_layout()
        path = os.path.join(fig_dir, "margins.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    if {"theoretical", "empirical"} <= set(columns):
        pts = [(r["theoretical"], r["empirical"]) for r in rows
               if isinstance(r.get("theoretical"), (int, float))
               and isinstance(r.get("empirical"), (int, float))
               and math.isfinite(r["theoretical"]) and r["empirical"] > 0]
        if pts:
            fig, ax = plt.subplots(figsize=(5, 5))
            xs = [p[1] for p in pts]
            ys = [p[0] for p in pts]
            ax.loglog(xs, ys, ".", ms=4)
            lo = min(min(xs), min(ys))
            hi = max(max(xs), max(ys))
            ax.loglog([lo, hi], [lo, hi], "r-", lw=0.8)
            ax.set_xlabel("empirical")
            ax.set_ylabel("theoretical bound")
            ax.set_title(f"{command}: bound vs experiment")
            fig.tight_layout()
            path = os.path.join(fig_dir, "bound_vs_empirical.png")
            fig.savefig(path, dpi=150)
            plt.close(fig)
            written.append(path)

    if {"separation", "abs_value"} <= set(columns):
        series: dict = {}
        for r in rows:
            if isinstance(r.get("abs_value"), (int, float)) and r["abs_value"] > 0:
                series.setdefault(r.get("label", ""), []).append(
                    (r["separation"], r["abs_value"]))
        if series:
            fig, ax = plt.subplots(figsize=(6, 4))
            for label, pts in sorted(series.items()):
                pts.sort()
                ax.semilogy([p[0] for p in pts], [p[1] for p in pts],
                            marker="o", ms=3, label=str(label))
            ax.set_xlabel("separation")
            ax.set_ylabel("|value|")
            ax.set_title(f"{command}: decay profiles")
            ax.legend(fontsize=7)
            fig.tight_layout()
            path = os.path.join(fig_dir, "decay.png")
            fig.savefig(path, dpi=150)
            plt.close(fig)
            written.append(path)
    return written


def emit_report(out_dir: str, command: str, columns, rows,
                started: float, figures: bool = True) -> dict:
    """Write CSV + JSON summary + plot script (and figures) for one run.

    Returns the summary dict.  The CSV and the plot script are
    byte-deterministic functions of the rows; figures are rendered
    separately and never feed back into the data files.
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_name = f"{command}.csv"
    write_csv(os.path.join(out_dir, csv_name), columns, rows)
    write_plot_script(os.path.join(out_dir, f"plot_{command.replace('-', '_')}.py"),
                      command, csv_name)
    summary = write_summary(os.path.join(out_dir, "summary.json"), rows,
                            time.time() - started)
    if figures:
        render_figures(out_dir, command, columns, rows)
    return summary
