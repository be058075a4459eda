"""Side-by-side comparison of toolkit output with the published figures.

Closed-form rows evaluate the QED relations on the published inputs.
Surrogate rows run the calibrated cavity pipeline.  Each row passes when
its deviation is strictly inside the tolerance, so a zero tolerance
scale fails every row.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

from . import __version__, pipeline, qed
from .config import RunConfig
from .errors import CapcavError
from .grating import effective_length, intracavity_envelope

# published values the toolkit is compared against
PUBLISHED = {
    "q_x": 944.0,
    "q_y": 2498.0,
    "kappa": 193.0,
    "q_sc": 26894.0,
    "finesse_sc": 297.0,
    "one_pass_loss": 0.0104,
    "finesse": 28.0,
    "two_g0": 50.0,
    "eta_cav": 0.93,
    "lambda_res_y": 619.0,
    "lambda_res_x": 618.0,
    "q_surrogate_y": 2498.0,
    "q_surrogate_x": 944.0,
    "l_eff": 28.0,
    "kappa_sc_fit": 18.0,
}


@dataclass(frozen=True)
class ComparisonRow:
    key: str
    quantity: str
    published: float
    toolkit: Optional[float]
    tolerance: str
    passed: bool
    note: str = ""

    @property
    def deviation(self) -> Optional[float]:
        if self.toolkit is None or not math.isfinite(self.toolkit):
            return None
        return (self.toolkit - self.published) / self.published


@dataclass(frozen=True)
class Report:
    rows: List[ComparisonRow]
    notes: List[str]
    config_hash: str
    version: str = __version__

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)


def _judge(kind: str, ref: float, value: Optional[float], tol, scale: float) -> Tuple[bool, str]:
    """``kind`` is ``rel``, ``abs`` or ``range`` (``tol`` = (lo, hi))."""
    if kind == "range":
        lo, hi = tol
        a, b = ref - scale * (ref - lo), ref + scale * (hi - ref)
        desc = f"in ({a:g}, {b:g})"
        ok = value is not None and a < value < b
    elif kind == "abs":
        t = scale * tol
        desc = f"+/-{t:g} abs"
        ok = value is not None and abs(value - ref) < t
    else:
        t = scale * tol
        desc = f"+/-{100 * t:g}%"
        ok = value is not None and abs(value - ref) < t * abs(ref)
    if value is not None and not math.isfinite(value):
        ok = False
    return ok, desc


def build_report(cfg: RunConfig, tolerance_scale: Optional[float] = None) -> Report:
    """Evaluate every comparison row for ``cfg``."""
    scale = cfg.reproduce.tolerance_scale if tolerance_scale is None else tolerance_scale
    tol = cfg.reproduce.tolerances
    rep = cfg.reproduce
    em = cfg.emitter
    my = pipeline.measurement(cfg, "y")
    mx = pipeline.measurement(cfg, "x")

    rows: List[ComparisonRow] = []
    notes: List[str] = []

    def row(key, label, kind, fn: Callable[[], float], tol_key=None, note=""):
        tkey = tol_key or (key + ("_abs" if kind == "abs" else ""))
        if kind == "range":
            t = (tol[key + "_lo_um"], tol[key + "_hi_um"])
        else:
            t = tol[tkey]
        try:
            value = float(fn())
            err = ""
        except (CapcavError, ValueError, ZeroDivisionError) as exc:
            value, err = None, f"{type(exc).__name__}: {exc}"
        ok, desc = _judge(kind, PUBLISHED[key], value, t, scale)
        rows.append(ComparisonRow(key, label, PUBLISHED[key], value, desc, ok, note or err))

    # closed forms on the published inputs
    f_sc = lambda: qed.finesse(rep.l_eff_um, rep.kappa_sc_ghz)
    row("q_x", f"Q x-pol ({mx.lambda_res:g} nm, {mx.delta_lambda:g} nm)", "rel", lambda: qed.quality_factor(mx))
    row("q_y", f"Q y-pol ({my.lambda_res:g} nm, {my.delta_lambda:g} nm)", "rel", lambda: qed.quality_factor(my))
    row("kappa", "kappa y-pol (GHz)", "rel", lambda: qed.kappa_from_linewidth(my))
    row("q_sc", f"Q_sc (kappa_sc = {rep.kappa_sc_ghz:g} GHz)", "rel",
        lambda: qed.scattering_Q(my.lambda_res, rep.kappa_sc_ghz))
    row("finesse_sc", f"F_sc (l_eff = {rep.l_eff_um:g} um)", "rel", f_sc)
    row("one_pass_loss", "one-pass loss L", "rel", lambda: qed.one_pass_loss(f_sc()))
    row("finesse", f"F (kappa = {rep.kappa_ghz:g} GHz)", "rel", lambda: qed.finesse(rep.l_eff_um, rep.kappa_ghz))
    row("two_g0", f"2g0 (F_P = {em.purcell:g}, gamma = {em.gamma_ghz:g} GHz) GHz", "rel",
        lambda: qed.rabi_from_purcell(em.purcell, rep.kappa_ghz, em.gamma_ghz))
    row("eta_cav", f"eta_cav (beta0 = {em.beta0:g})", "abs",
        lambda: qed.cavity_enhanced_eta(em.purcell, em.beta0))

    # calibrated surrogate
    state = {}

    def surrogate(pol):
        if pol not in state:
            try:
                cal = pipeline.calibrate(cfg, pol)
                spec = pipeline.calibrated_spec(cfg, cal)
                state[pol] = (cal, spec, pipeline.surrogate_resonance(spec, cal), None)
            except CapcavError as exc:
                state[pol] = (None, None, None, exc)
        cal, spec, res, exc = state[pol]
        if exc is not None:
            raise exc
        return cal, spec, res

    def l_eff():
        _, spec, res = surrogate("y")
        return effective_length(intracavity_envelope(spec, res.lambda_res)) * 1e-3

    def kappa_sc():
        cal, spec, _ = surrogate("y")
        return qed.fit_kappa_sc(qed.mirror_scan(spec, window=cal.window(spec)))[0]

    row("lambda_res_y", "surrogate lambda_res y-pol (nm)", "abs", lambda: surrogate("y")[2].lambda_res)
    row("lambda_res_x", "surrogate lambda_res x-pol (nm)", "abs", lambda: surrogate("x")[2].lambda_res)
    row("q_surrogate_y", "surrogate Q y-pol", "rel", lambda: surrogate("y")[2].Q)
    row("q_surrogate_x", "surrogate Q x-pol", "rel", lambda: surrogate("x")[2].Q)
    row("l_eff", "surrogate l_eff y-pol (um)", "range", l_eff, note="1/e-intensity extent, own definition")
    row("kappa_sc_fit", "surrogate kappa_sc fit (GHz)", "rel", kappa_sc)

    lam = my.lambda_res * 1e-9
    printed = qed.C_LIGHT * my.delta_lambda * 1e-9 / lam
    notes.append(f"kappa: published form c*dlambda/lambda_res has units of speed ({printed:.4g} m/s); "
                 f"computed as c*dlambda/lambda_res^2 = {qed.kappa_from_linewidth(my):.4g} GHz")
    notes.append("F = c/(2 l_eff kappa), L = pi/F_sc, Q_sc = (c/lambda_res)/kappa_sc and "
                 "eta = F_P b0/(1 - b0 + F_P b0) are reconstructed relations")
    for pol, (cal, _, res, exc) in sorted(state.items()):
        if cal is not None:
            notes.append(f"{pol}-pol surrogate: delta_n = {cal.delta_n:.6g}, base offset = {cal.base_offset:.6g}, "
                         f"slat loss = {cal.slat_loss:.8g}, stop band {res.stopband_lo:.2f}-{res.stopband_hi:.2f} nm")
    return Report(rows, notes, cfg.config_hash)


def _num(v):
    return "" if v is None else f"{v:.9g}"


HEADER = ("quantity", "published", "toolkit", "rel_deviation", "tolerance", "status")


def report_table(report: Report) -> str:
    """Fixed-width human-readable table followed by the notes."""
    cells = [HEADER]
    for r in report.rows:
        dev = "" if r.deviation is None else f"{100 * r.deviation:+.3f}%"
        tk = "error" if r.toolkit is None else f"{r.toolkit:.6g}"
        cells.append((r.quantity, f"{r.published:g}", tk, dev, r.tolerance, "PASS" if r.passed else "FAIL"))
    widths = [max(len(row[i]) for row in cells) for i in range(len(HEADER))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    for r in report.rows:
        if r.note and r.toolkit is None:
            lines.append(f"! {r.quantity}: {r.note}")
    lines.append("")
    lines.extend(f"note: {n}" for n in report.notes)
    passed = sum(r.passed for r in report.rows)
    lines.append(f"{passed}/{len(report.rows)} rows PASS")
    return "\n".join(lines) + "\n"


def report_csv(report: Report) -> str:
    buf = io.StringIO()
    buf.write(f"# config_sha256={report.config_hash}\n# capcav_version={report.version}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("key",) + HEADER)
    for r in report.rows:
        w.writerow((r.key, r.quantity, _num(r.published), _num(r.toolkit), _num(r.deviation), r.tolerance,
                    "PASS" if r.passed else "FAIL"))
    return buf.getvalue()


def report_json(report: Report) -> str:
    doc = {
        "provenance": {"config_sha256": report.config_hash, "capcav_version": report.version},
        "all_passed": report.all_passed,
        "rows": [
            {"key": r.key, "quantity": r.quantity, "published": r.published,
             "toolkit": None if r.toolkit is None else float(f"{r.toolkit:.9g}"),
             "rel_deviation": None if r.deviation is None else float(f"{r.deviation:.9g}"),
             "tolerance": r.tolerance, "status": "PASS" if r.passed else "FAIL", "note": r.note}
            for r in report.rows
        ],
        "notes": report.notes,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
