"""Turn protocol datasets into figures.

Read-only consumer of the simulator's documented file formats (CSV
tables, Wigner grid dumps, run manifests); never recomputes physics.
Three figure kinds:

  wigner_heatmap  one panel per input grid, diverging red/blue colormap
                  with the color scale centered exactly on zero
  lines           Fisher-information curves against t1
  time_curves     total-runtime curves, one per threshold

A figure spec is a small JSON file; see FigureSpec for the schema.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

KINDS = ("wigner_heatmap", "lines", "time_curves")
SUPPORTED_SCHEMA = 1
FIGSIZE_PANEL = (3.2, 3.2)
FIGSIZE_LINES = (5.5, 4.0)
DPI = 150

#: Fisher columns drawn by the lines kind, bottom-to-top legend order
FISHER_SERIES = ("cfi_homodyne", "cfi_phi", "qfi")
SERIES_STYLE = {
    "qfi": dict(color="tab:green", label="QFI"),
    "cfi_phi": dict(color="tab:red", linestyle="--", label="CFI (phi basis)"),
    "cfi_homodyne": dict(color="tab:blue", label="CFI (homodyne)"),
}


class DatasetError(ValueError):
    """Missing columns, malformed rows, or schema mismatch."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: dataset paths plus styling.

    kind       one of KINDS
    inputs     dataset files; heatmaps take one grid CSV per panel
    output     image path (suffix picks PNG or SVG)
    manifest   optional run manifest; its schema_version must match
    title, panel_titles, xlabel, ylabel, log_x  styling knobs
    """

    kind: str
    inputs: tuple[str, ...]
    output: str
    manifest: str | None = None
    title: str = ""
    panel_titles: tuple[str, ...] = field(default_factory=tuple)
    xlabel: str = ""
    ylabel: str = ""
    log_x: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DatasetError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise DatasetError("figure spec needs at least one input dataset")

    @classmethod
    def from_json(cls, path: str | Path) -> "FigureSpec":
        path = Path(path)
        raw = json.loads(path.read_text())
        known = {"kind", "inputs", "output", "manifest", "title",
                 "panel_titles", "xlabel", "ylabel", "log_x"}
        unknown = set(raw) - known
        if unknown:
            raise DatasetError(f"unknown figure-spec keys: {sorted(unknown)}")
        base = path.parent

        def resolve(p):
            q = Path(p)
            return str(q if q.is_absolute() else base / q)

        return cls(
            kind=raw.get("kind", ""),
            inputs=tuple(resolve(p) for p in raw.get("inputs", [])),
            output=resolve(raw.get("output", "figure.png")),
            manifest=resolve(raw["manifest"]) if raw.get("manifest") else None,
            title=raw.get("title", ""),
            panel_titles=tuple(raw.get("panel_titles", [])),
            xlabel=raw.get("xlabel", ""),
            ylabel=raw.get("ylabel", ""),
            log_x=bool(raw.get("log_x", False)),
        )


def check_manifest(path: str) -> None:
    data = json.loads(Path(path).read_text())
    version = data.get("schema_version")
    if version != SUPPORTED_SCHEMA:
        raise DatasetError(
            f"manifest schema version {version!r} not supported (expected {SUPPORTED_SCHEMA})")


def read_table(path: str) -> dict[str, np.ndarray]:
    """CSV table as named float columns (strings preserved as objects)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file, not even a header") from None
        rows = list(reader)
    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in rows]
        try:
            cols[name] = np.array([float(v) for v in vals])
        except ValueError:
            cols[name] = np.array(vals, dtype=object)
    return cols


def read_wigner_grid(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x, p, values) from an (x, p, value) triple dump."""
    cols = read_table(path)
    for need in ("x", "p", "value"):
        if need not in cols:
            raise DatasetError(f"{path}: wigner dump is missing column {need!r}")
    x = np.unique(cols["x"])
    p = np.unique(cols["p"])
    if x.size * p.size != cols["value"].size:
        raise DatasetError(f"{path}: grid is not a complete rectangle")
    vals = cols["value"].reshape(x.size, p.size)
    return x, p, vals


def zero_centered_limits(values: np.ndarray) -> tuple[float, float]:
    """Symmetric color limits so zero always maps to the colormap middle."""
    peak = float(np.max(np.abs(values))) if values.size else 1.0
    peak = peak or 1.0
    return -peak, peak


def _draw_wigner(spec: FigureSpec) -> plt.Figure:
    n = len(spec.inputs)
    fig, axes = plt.subplots(1, n, figsize=(FIGSIZE_PANEL[0] * n, FIGSIZE_PANEL[1]),
                             squeeze=False)
    for i, path in enumerate(spec.inputs):
        ax = axes[0][i]
        x, p, vals = read_wigner_grid(path)
        lo, hi = zero_centered_limits(vals)
        mesh = ax.pcolormesh(x, p, vals.T, cmap="RdBu_r", vmin=lo, vmax=hi,
                             shading="auto", rasterized=True)
        ax.set_xlabel(spec.xlabel or "X")
        if i == 0:
            ax.set_ylabel(spec.ylabel or "P")
        if i < len(spec.panel_titles):
            ax.set_title(spec.panel_titles[i])
        fig.colorbar(mesh, ax=ax, fraction=0.046)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig


def _draw_lines(spec: FigureSpec) -> plt.Figure:
    fig, ax = plt.subplots(figsize=FIGSIZE_LINES)
    for path in spec.inputs:
        cols = read_table(path)
        if "t1" not in cols:
            raise DatasetError(f"{path}: missing column 't1'")
        if cols["t1"].size == 0:
            continue  # empty-but-valid dataset: leave the axes bare
        branches = cols.get("branch")
        groups = [None]
        if branches is not None and branches.dtype == object:
            distinct = sorted(set(branches.tolist()))
            if len(distinct) > 1:
                groups = distinct
        for group in groups:
            sel = np.ones(cols["t1"].size, dtype=bool) if group is None \
                else np.asarray(branches == group)
            for series in FISHER_SERIES:
                if series not in cols:
                    continue
                y = cols[series][sel]
                t = cols["t1"][sel]
                keep = np.isfinite(y)
                if not np.any(keep):
                    continue
                style = dict(SERIES_STYLE[series])
                if group is not None:
                    style["label"] = f"{style['label']} [{group}]"
                    if group == "gaussian_only":
                        style["linestyle"] = ":"
                order = np.argsort(t[keep])
                ax.plot(t[keep][order], y[keep][order], **style)
    ax.set_xlabel(spec.xlabel or "t1")
    ax.set_ylabel(spec.ylabel or "Fisher information")
    if spec.log_x:
        ax.set_xscale("log")
    if spec.title:
        ax.set_title(spec.title)
    if ax.lines:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def _draw_time_curves(spec: FigureSpec) -> plt.Figure:
    fig, ax = plt.subplots(figsize=FIGSIZE_LINES)
    for path in spec.inputs:
        cols = read_table(path)
        for need in ("threshold", "t1", "total"):
            if need not in cols:
                raise DatasetError(f"{path}: missing column {need!r}")
        for thr in np.unique(cols["threshold"]):
            sel = (cols["threshold"] == thr) & np.isfinite(cols["total"])
            if not np.any(sel):
                continue
            order = np.argsort(cols["t1"][sel])
            ax.plot(cols["t1"][sel][order], cols["total"][sel][order],
                    label=f"threshold {thr:g}")
    ax.set_xlabel(spec.xlabel or "t1")
    ax.set_ylabel(spec.ylabel or "total time t1 + t2")
    if spec.log_x:
        ax.set_xscale("log")
    if spec.title:
        ax.set_title(spec.title)
    if ax.lines:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


_DRAW = {
    "wigner_heatmap": _draw_wigner,
    "lines": _draw_lines,
    "time_curves": _draw_time_curves,
}


def build_figure(spec: FigureSpec) -> plt.Figure:
    """Figure object for a spec; rendering stays a pure function of the
    input files."""
    if spec.manifest:
        check_manifest(spec.manifest)
    return _DRAW[spec.kind](spec)


def render(spec: FigureSpec) -> Path:
    """Draw and write the image; returns the output path."""
    fig = build_figure(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=DPI)
    plt.close(fig)
    return out


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="protocolplots",
                                 description="Render protocol dataset figures")
    sub = ap.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render a figure from a JSON spec")
    p_render.add_argument("spec", help="figure spec JSON file")
    args = ap.parse_args(argv)
    try:
        out = render(FigureSpec.from_json(args.spec))
    except (DatasetError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
