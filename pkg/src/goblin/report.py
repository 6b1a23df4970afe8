"""Aggregate result CSVs across seeds and draw SVG line charts."""

import csv
import io
import re
from html import escape
from pathlib import Path

import numpy as np

from .evaluation import CSV_COLUMNS, normalized_cumreward
from .experiment import atomic_write, read_record

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
_CELL = re.compile(r"^gn(?P<g>[-+.\deE]+)_pn(?P<z>[-+.\deE]+)$")


def find_results(results_dir):
    """Result CSVs under ``results_dir`` keyed by (cell, algorithm label)."""
    root = Path(results_dir)
    groups = {}
    for path in sorted(root.rglob("*.csv")):
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            continue
        rec = read_record(path)
        cell = path.parent.relative_to(root).as_posix() or "."
        groups.setdefault((cell, rec.algo), []).append(rec)
    return groups


def aggregate(records):
    """Mean and standard error of normalized cumulative reward across runs."""
    T = min(r.T for r in records)
    curves = np.array([normalized_cumreward(r)[:T] for r in records])
    mean = curves.mean(axis=0)
    if len(records) > 1:
        stderr = curves.std(axis=0, ddof=1) / np.sqrt(len(records))
    else:
        stderr = np.zeros(T)
    return mean, stderr


def base_algo(label):
    return label.split(":", 1)[0]


def best_per_algorithm(curves):
    """Keep, per base algorithm, the variant with the best final mean."""
    best = {}
    for label, (mean, stderr, k) in curves.items():
        b = base_algo(label)
        if b not in best or mean[-1] > curves[best[b]][0][-1]:
            best[b] = label
    return {label: curves[label] for label in best.values()}


def line_chart_svg(series, title="", width=640, height=400, xlabel="round",
                   ylabel="normalized cumulative reward"):
    """Render ``{label: (mean, stderr)}`` as an SVG string (mean line, ±stderr band)."""
    left, right, top, bottom = 70, 170, 30, 45
    pw, ph = width - left - right, height - top - bottom
    T = max(len(m) for m, _ in series.values())
    lo = min(float(np.min(m - s)) for m, s in series.values())
    hi = max(float(np.max(m + s)) for m, s in series.values())
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    if hi - lo < 1e-12:
        hi = lo + 1.0
    sx = lambda t: left + pw * (t - 1) / max(T - 1, 1)
    sy = lambda v: top + ph * (hi - v) / (hi - lo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{left + pw / 2:.1f}" y="18" text-anchor="middle" font-size="13">'
           f'{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        y = sy(v)
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{v:.4g}</text>')
        t = 1 + (T - 1) * k / 4
        out.append(f'<text x="{sx(t):.1f}" y="{top + ph + 16}" text-anchor="middle">{t:.0f}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>')

    step = max(1, T // 400)
    for idx, (label, (mean, stderr)) in enumerate(sorted(series.items())):
        color = PALETTE[idx % len(PALETTE)]
        ts = np.arange(1, len(mean) + 1)[::step]
        m, s = mean[::step], stderr[::step]
        if np.any(s > 0):
            upper = " ".join(f"{sx(t):.1f},{sy(v):.1f}" for t, v in zip(ts, m + s))
            lower = " ".join(f"{sx(t):.1f},{sy(v):.1f}" for t, v in zip(ts[::-1], (m - s)[::-1]))
            out.append(f'<polygon points="{upper} {lower}" fill="{color}" fill-opacity="0.15" '
                       f'stroke="none"/>')
        pts = " ".join(f"{sx(t):.1f},{sy(v):.1f}" for t, v in zip(ts, m))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + 14 + 16 * idx
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 28}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 32}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def build_report(results_dir, out_dir=None):
    """Write ``aggregate.csv``, ``final.csv``, per-cell SVG charts and, for
    noise grids, ``table.md``.  Returns the list of files written."""
    groups = find_results(results_dir)
    if not groups:
        raise ValueError(f"no result files under {results_dir}")
    out = Path(out_dir or Path(results_dir) / "report")
    written = []

    by_cell = {}
    for (cell, label), recs in groups.items():
        mean, stderr = aggregate(recs)
        by_cell.setdefault(cell, {})[label] = (mean, stderr, len(recs))

    agg = io.StringIO()
    w = csv.writer(agg, lineterminator="\n")
    w.writerow(["cell", "algo", "runs", "t", "mean", "stderr"])
    fin = io.StringIO()
    wf = csv.writer(fin, lineterminator="\n")
    wf.writerow(["cell", "algo", "runs", "final_mean", "final_stderr", "best"])
    for cell in sorted(by_cell):
        curves = by_cell[cell]
        best = best_per_algorithm(curves)
        for label in sorted(curves):
            mean, stderr, k = curves[label]
            for t in range(len(mean)):
                w.writerow([cell, label, k, t + 1, repr(float(mean[t])), repr(float(stderr[t]))])
            wf.writerow([cell, label, k, repr(float(mean[-1])), repr(float(stderr[-1])),
                         int(label in best)])
        svg = line_chart_svg({lab: (m, s) for lab, (m, s, _) in best.items()},
                             title=cell if cell != "." else "")
        name = "curves.svg" if cell == "." else f"curves_{cell.replace('/', '_')}.svg"
        atomic_write(out / name, svg)
        written.append(out / name)
    atomic_write(out / "aggregate.csv", agg.getvalue())
    atomic_write(out / "final.csv", fin.getvalue())
    written += [out / "aggregate.csv", out / "final.csv"]

    grid = {}
    for cell, curves in by_cell.items():
        m = _CELL.match(cell)
        if m:
            grid[(float(m["g"]), float(m["z"]))] = best_per_algorithm(curves)
    if grid:
        atomic_write(out / "table.md", grid_table(grid))
        written.append(out / "table.md")
    return written


def grid_table(grid):
    """Markdown table: graph noise down the rows, payoff noise across columns."""
    gs = sorted({g for g, _ in grid})
    zs = sorted({z for _, z in grid})
    lines = ["| graph noise \\ payoff noise | " + " | ".join(f"{z:g}" for z in zs) + " |",
             "|---|" + "---|" * len(zs)]
    for g in gs:
        cells = []
        for z in zs:
            curves = grid.get((g, z), {})
            cells.append("<br>".join(f"{base_algo(lab)} {m[-1]:.1f}±{s[-1]:.1f}"
                                     for lab, (m, s, _) in sorted(curves.items())))
        lines.append(f"| {g:g} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
