"""Plot-data tables and deterministic SVG line plots.

SVG output is byte-stable: the Agg backend is used, element ids are
derived from a fixed hash salt, and the creation date is omitted.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import OutputError  # noqa: E402

# kind -> (x column, y columns, x label, y label)
PLOT_KINDS: Dict[str, Tuple[Optional[str], Tuple[str, ...], str, str]] = {
    "spectrum": ("wavelength_nm", ("T", "R"), "wavelength (nm)", "T, R"),
    "position-sweep": ("delta_z_nm", ("eta",), "emitter offset from defect centre (nm)", "channeling efficiency"),
    "mirror-scan": ("kappa_ghz", ("t0", "r0"), "cavity decay rate (GHz)", "on-resonance T0, R0"),
    "sweep": (None, ("lambda_res_nm",), "", "resonance wavelength (nm)"),
}

_STYLE = {
    "svg.hashsalt": "capcav",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
}


@dataclass
class PlotTable:
    """Columns of one plot; ``x_name`` names the abscissa column."""

    x_name: str
    columns: Dict[str, np.ndarray]
    markers: List[Tuple[float, str]] = field(default_factory=list)  # (x, label)
    series_label: Dict[str, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.columns[self.x_name]) if self.x_name in self.columns else 0


def read_table(path, kind: str) -> PlotTable:
    """Load a CSV previously written by the toolkit (``#`` lines skipped)."""
    x_col, y_cols, _, _ = _kind(kind)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from None
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise OutputError(f"{path}: no header row")
    reader = csv.reader(lines)
    header = next(reader)
    x_col = x_col or header[0]
    missing = [c for c in (x_col, *y_cols) if c not in header]
    if missing:
        raise OutputError(f"{path}: missing columns {missing} for plot kind {kind!r}")
    data = {c: [] for c in header}
    for row in reader:
        for c, v in zip(header, row):
            data[c].append(v)
    cols = {}
    for c in (x_col, *y_cols):
        cols[c] = np.array([float(v) if v != "" else np.nan for v in data[c]])
    return PlotTable(x_col, cols)


def _kind(kind):
    if kind not in PLOT_KINDS:
        raise OutputError(f"unknown plot kind {kind!r}; choose from {sorted(PLOT_KINDS)}")
    return PLOT_KINDS[kind]


def table_csv(table: PlotTable, header_lines: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    names = [table.x_name] + [c for c in table.columns if c != table.x_name]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for i in range(len(table)):
        w.writerow([_fmt(table.columns[c][i]) for c in names])
    return buf.getvalue()


def _fmt(v) -> str:
    return "" if not np.isfinite(v) else f"{float(v):.9g}"


def render_svg(kind: str, table: PlotTable, path, description: str = "") -> None:
    """Line plot of ``table`` written as SVG with reproducible bytes."""
    x_col, y_cols, xlabel, ylabel = _kind(kind)
    if len(table) == 0:
        raise OutputError(f"nothing to plot for {kind!r}: empty result")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        x = table.columns[table.x_name]
        style = "o" if kind == "mirror-scan" else "-"
        for c in y_cols:
            if c in table.columns:
                ax.plot(x, table.columns[c], style, label=table.series_label.get(c, c), ms=4)
        for c, y in table.columns.items():
            if c.startswith("fit_"):
                ax.plot(x, y, "--", color="0.4", lw=0.8, label=table.series_label.get(c, c))
        for xm, label in table.markers:
            ax.axvline(xm, color="0.6", lw=0.6, ls=":")
            ax.annotate(label, (xm, 1.0), xycoords=("data", "axes fraction"),
                        ha="center", va="bottom", fontsize=7)
        ax.set_xlabel(xlabel or table.x_name)
        ax.set_ylabel(ylabel)
        if len(y_cols) > 1 or any(c.startswith("fit_") for c in table.columns):
            ax.legend(frameon=False)
        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None, "Description": description})
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from None
        finally:
            plt.close(fig)


def emit_plot_data(kind: str, table: PlotTable, out_dir, svg: bool = True,
                   header_lines: Sequence[str] = (), stem: Optional[str] = None) -> List[Path]:
    """Write ``<stem>.csv`` and, with ``svg``, ``<stem>.svg`` into ``out_dir``."""
    _kind(kind)
    if len(table) == 0:
        raise OutputError(f"nothing to plot for {kind!r}: empty result")
    out = Path(out_dir)
    stem = stem or kind.replace("-", "_")
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{stem}.csv"
        csv_path.write_text(table_csv(table, header_lines), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write into {out}: {exc}") from None
    paths = [csv_path]
    if svg:
        svg_path = out / f"{stem}.svg"
        render_svg(kind, table, svg_path, "; ".join(header_lines))
        paths.append(svg_path)
    return paths
