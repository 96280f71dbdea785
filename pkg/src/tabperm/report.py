"""Artifact emission: heatmap CSV, JSON documents, SVG heatmap and slice curves.

Heatmap CSV layout: the header row is ``a\\b,0,1,...,m``, then one line per
``a`` from ``n`` down to ``0`` (so the identity corner is the top-right
value). Null entries are empty fields. Floats use Python ``repr``.

The SVG heatmap colormap interpolates linearly in RGB between five stops:
0.00 ``#440154``, 0.25 ``#3b528b``, 0.50 ``#21918c``, 0.75 ``#5ec962``,
1.00 ``#fde725``; nulls are ``#cccccc``.
"""

from __future__ import annotations

import csv
import io
import json
import os
import shutil
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .sweep import SUMMARY_COLUMNS, CorpusSummary, PlatonicHeatmap

COLORMAP = ((0.0, (0x44, 0x01, 0x54)), (0.25, (0x3B, 0x52, 0x8B)), (0.5, (0x21, 0x91, 0x8C)),
            (0.75, (0x5E, 0xC9, 0x62)), (1.0, (0xFD, 0xE7, 0x25)))
NULL_COLOR = "#cccccc"


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def heatmap_csv(heatmap: PlatonicHeatmap) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["a\\b", *range(heatmap.m + 1)])
    for a in range(heatmap.n, -1, -1):
        w.writerow([a, *("" if np.isnan(v) else repr(float(v)) for v in heatmap.grid[a])])
    return buf.getvalue()


def read_heatmap_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    body = sorted(rows[1:], key=lambda r: int(r[0]))
    return np.array([[np.nan if v == "" else float(v) for v in r[1:]] for r in body])


def color(value: float) -> str:
    if value is None or np.isnan(value):
        return NULL_COLOR
    v = min(1.0, max(0.0, float(value)))
    for (x0, c0), (x1, c1) in zip(COLORMAP, COLORMAP[1:]):
        if v <= x1:
            t = (v - x0) / (x1 - x0)
            return "#" + "".join(f"{round(a + (b - a) * t):02x}" for a, b in zip(c0, c1))
    return "#fde725"


def _metadata(timestamp: bool) -> str:
    if not timestamp:
        return ""
    return f"<metadata>generated {datetime.now(timezone.utc).isoformat()}</metadata>\n"


def heatmap_svg(heatmap: PlatonicHeatmap, title: str = "", cell: int = 24, timestamp: bool = True) -> str:
    n, m = heatmap.n, heatmap.m
    left, top = 48, 40 if title else 16
    width, height = left + cell * (m + 1) + 80, top + cell * (n + 1) + 40
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">\n', _metadata(timestamp)]
    if title:
        out.append(f'<text x="{left}" y="20" font-size="13">{escape(title)}</text>\n')
    for a in range(n + 1):
        y = top + (n - a) * cell
        out.append(f'<text x="{left - 6}" y="{y + cell * 0.65:.1f}" text-anchor="end">{a}</text>\n')
        for b in range(m + 1):
            v = heatmap.grid[a, b]
            label = "null" if np.isnan(v) else f"{v:.4f}"
            out.append(f'<rect x="{left + b * cell}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="{color(v)}"><title>H[{a},{b}] = {label}</title></rect>\n')
    for b in range(m + 1):
        out.append(f'<text x="{left + b * cell + cell / 2:.1f}" y="{top + (n + 1) * cell + 12}" '
                   f'text-anchor="middle">{b}</text>\n')
    out.append(f'<text x="{left + (m + 1) * cell / 2:.1f}" y="{top + (n + 1) * cell + 28}" '
               f'text-anchor="middle">b (fixed columns)</text>\n')
    out.append(f'<text x="12" y="{top + (n + 1) * cell / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 12 {top + (n + 1) * cell / 2:.1f})">a (fixed rows)</text>\n')
    cx, cy = left + m * cell, top
    out.append(f'<rect x="{cx}" y="{cy}" width="{cell}" height="{cell}" fill="none" '
               f'stroke="#d62728" stroke-width="2.5"/>\n')
    out.append(f'<text x="{cx + cell + 4}" y="{cy + cell * 0.65:.1f}" fill="#d62728">identity</text>\n')
    out.append("</svg>\n")
    return "".join(out)


def slices_svg(heatmap: PlatonicHeatmap, title: str = "", timestamp: bool = True,
               row_slice_b: int | None = None, col_slice_a: int | None = None) -> str:
    """Solid: columns restored ``H[n, b]``; dashed: rows restored ``H[a, m]``."""
    n, m = heatmap.n, heatmap.m
    rb = m if row_slice_b is None else row_slice_b
    ca = n if col_slice_a is None else col_slice_a
    w, h, left, top, pw, ph = 420, 280, 50, 30, 340, 200

    def pts(values, k):
        coords = []
        for i, v in enumerate(values):
            if not np.isnan(v):
                coords.append(f"{left + pw * i / k:.2f},{top + ph * (1 - v):.2f}")
        return " ".join(coords)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" '
           f'font-family="sans-serif" font-size="10">\n', _metadata(timestamp)]
    if title:
        out.append(f'<text x="{left}" y="18" font-size="13">{escape(title)}</text>\n')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>\n')
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = top + ph * (1 - t)
        out.append(f'<text x="{left - 4}" y="{y + 3:.1f}" text-anchor="end">{t:.2f}</text>\n')
        x = left + pw * t
        out.append(f'<text x="{x:.1f}" y="{top + ph + 14}" text-anchor="middle">{t:.2f}</text>\n')
    out.append(f'<text x="{left + pw / 2}" y="{top + ph + 30}" text-anchor="middle">'
               f'fraction of fixed indices (a/n or b/m)</text>\n')
    out.append(f'<polyline fill="none" stroke="#1f77b4" stroke-width="2" '
               f'points="{pts(heatmap.grid[ca, :], m)}"/>\n')
    out.append(f'<polyline fill="none" stroke="#ff7f0e" stroke-width="2" stroke-dasharray="6,4" '
               f'points="{pts(heatmap.grid[:, rb], n)}"/>\n')
    out.append(f'<text x="{left + 8}" y="{top + 14}" fill="#1f77b4">solid: H[{ca},b] columns restored</text>\n')
    out.append(f'<text x="{left + 8}" y="{top + 28}" fill="#ff7f0e">dashed: H[a,{rb}] rows restored</text>\n')
    out.append("</svg>\n")
    return "".join(out)


def summary_csv(summaries: list[CorpusSummary]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    cols = [f"{name}.{axis}" for name, axis in SUMMARY_COLUMNS]
    w.writerow(["provider_id", "mode", "n_reports",
                *[f"{c}.{s}" for c in cols for s in ("mean", "std", "count")]])
    for s in summaries:
        row = [s.group.get("provider_id", ""), s.group.get("mode", ""), s.n_reports]
        for key in SUMMARY_COLUMNS:
            st = s.stats[key]
            row += ["" if st.mean is None else repr(st.mean), "" if st.std is None else repr(st.std), st.count]
        w.writerow(row)
    return buf.getvalue()


def loss_csv(trace) -> str:
    return "epoch,mean_loss\n" + "".join(f"{k},{v!r}\n" for k, v in enumerate(trace))


def pca_2d(x: np.ndarray) -> np.ndarray:
    """Deterministic 2-D PCA (component signs fixed so the largest |loading| is positive)."""
    xc = np.asarray(x, dtype=float) - np.mean(x, axis=0)
    _, _, vt = np.linalg.svd(xc, full_matrices=False)
    comps = vt[:2]
    signs = np.sign(comps[np.arange(comps.shape[0]), np.argmax(np.abs(comps), axis=1)])
    comps = comps * signs[:, None]
    proj = xc @ comps.T
    if proj.shape[1] < 2:
        proj = np.hstack([proj, np.zeros((proj.shape[0], 2 - proj.shape[1]))])
    return proj


def write_artifacts(out_dir, files: dict[str, str]) -> list[Path]:
    """Write every file or none: stage in a temp dir beside ``out_dir``, then rename in."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=out_dir.parent))
    try:
        for name, text in files.items():
            target = stage / name
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name in files:
            dest = out_dir / name
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(stage / name, dest)
            written.append(dest)
        return written
    finally:
        shutil.rmtree(stage, ignore_errors=True)
