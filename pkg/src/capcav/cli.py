"""Command-line front end.

Exit codes: 0 success, 1 comparison failure, 2 physics failure (no guided
mode, no stop band, failed fit or calibration), 3 I/O or output-format
problem, 4 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__, pipeline, qed
from .config import ConfigError, RunConfig, load_config
from .errors import CapcavError, OutputError

EXIT_OK, EXIT_COMPARE, EXIT_PHYSICS, EXIT_IO, EXIT_CONFIG = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="run configuration file (overlaid on the default file)")
    p.add_argument("--out", help="output directory (default: output.directory)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--format", choices=("csv", "json", "both"), help="data file format")
    p.add_argument("--svg", action="store_true", help="also render SVG plots")
    p.add_argument("--pol", choices=("x", "y"), help="polarization (default: grating.polarization)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="capcav", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"capcav {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    verbs = {
        "mode-solve": "solve the fundamental guided mode of the fiber",
        "spectrum": "transmission/reflection spectrum of the calibrated cavity",
        "resonance": "resonance wavelength, linewidth, T0, R0 and Q",
        "figures": "full cavity-QED figure set as JSON",
        "fit-kappa-sc": "slat-count scan and scattering-rate fit",
        "sweep": "parameter sweep given by the config sweep block",
        "reproduce-paper": "compare toolkit output with the published values",
        "plot": "write plot data and SVG for one result kind",
    }
    for name, helptext in verbs.items():
        p = sub.add_parser(name, help=helptext, description=helptext)
        _common(p)
        if name == "reproduce-paper":
            p.add_argument("--tolerance-scale", type=float, help="multiply every tolerance")
        if name == "plot":
            p.add_argument("kind", help="spectrum | position-sweep | mirror-scan | sweep")
            p.add_argument("--input", help="plot an existing CSV instead of recomputing")
    return parser


# -- helpers ------------------------------------------------------------------

class _Ctx:
    def __init__(self, args, cfg: RunConfig):
        self.args = args
        self.cfg = cfg
        self.out = Path(args.out or cfg.output.directory)
        self.fmt = args.format or cfg.output.formats
        self.svg = args.svg or cfg.output.svg
        self.pol = args.pol or cfg.grating.polarization

    @property
    def provenance(self):
        return {"config_sha256": self.cfg.config_hash, "capcav_version": __version__}

    @property
    def header_lines(self):
        return [f"config_sha256={self.cfg.config_hash}", f"capcav_version={__version__}"]

    def want(self, kind):
        return self.fmt in (kind, "both")

    def write(self, name: str, text: str) -> Path:
        try:
            self.out.mkdir(parents=True, exist_ok=True)
            path = self.out / name
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OutputError(f"cannot write {self.out / name}: {exc}") from None
        return path

    def write_json(self, name: str, doc: dict) -> Optional[Path]:
        if not self.want("json"):
            return None
        doc = {"provenance": self.provenance, **doc}
        return self.write(name, json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _r9(v):
    if v is None:
        return None
    v = float(v)
    return float(f"{v:.9g}") if math.isfinite(v) else None


def _table(rows) -> str:
    w = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(w)}  {v}" for k, v in rows) + "\n"


def _calibrated(ctx):
    cal = pipeline.calibrate(ctx.cfg, ctx.pol)
    return cal, pipeline.calibrated_spec(ctx.cfg, cal)


# -- verbs -------------------------------------------------------------------

def cmd_mode_solve(ctx: _Ctx) -> int:
    from .modes import solve_fundamental_mode

    g = ctx.cfg.geometry
    geom = g.to_geometry()
    mode = solve_fundamental_mode(geom, g.wavelength_nm)
    n1, n2, n3 = geom.indices(g.wavelength_nm)
    doc = {
        "d_in_nm": g.d_in_nm, "d_out_nm": g.d_out_nm, "wavelength_nm": g.wavelength_nm,
        "indices": {"core": n1, "shell": n2, "cladding": n3},
        "n_eff": _r9(mode.n_eff), "beta_per_m": _r9(mode.beta), "azimuthal_order": mode.azimuthal_order,
        "layer_coefficients": [[_r9(c.real), _r9(c.imag)] for c in mode.layer_coefficients],
    }
    ctx.write_json("mode.json", doc)
    if ctx.want("csv"):
        ctx.write("mode.csv", "".join(f"# {h}\n" for h in ctx.header_lines)
                  + "d_in_nm,d_out_nm,wavelength_nm,n_eff,beta_per_m\n"
                  + f"{g.d_in_nm:.9g},{g.d_out_nm:.9g},{g.wavelength_nm:.9g},{mode.n_eff:.9g},{mode.beta:.9g}\n")
    sys.stdout.write(_table([("d_in (nm)", f"{g.d_in_nm:g}"), ("d_out (nm)", f"{g.d_out_nm:g}"),
                             ("wavelength (nm)", f"{g.wavelength_nm:g}"), ("n_eff", f"{mode.n_eff:.9f}"),
                             ("beta (rad/m)", f"{mode.beta:.6e}")]))
    return EXIT_OK


def _spectrum_table(spectrum):
    from .plotting import PlotTable

    return PlotTable("wavelength_nm", {"wavelength_nm": spectrum.wavelengths, "T": spectrum.T, "R": spectrum.R})


def cmd_spectrum(ctx: _Ctx) -> int:
    from .grating import write_spectrum_csv
    from .plotting import render_svg

    cal, spec = _calibrated(ctx)
    sp = pipeline.spectrum_grid(spec, cal)
    if ctx.want("csv"):
        ctx.out.mkdir(parents=True, exist_ok=True)
        write_spectrum_csv(sp, ctx.out / "spectrum.csv", ctx.header_lines)
    ctx.write_json("spectrum.json", {
        "polarization": ctx.pol,
        "wavelength_nm": [_r9(v) for v in sp.wavelengths], "T": [_r9(v) for v in sp.T], "R": [_r9(v) for v in sp.R],
    })
    if ctx.svg:
        ctx.out.mkdir(parents=True, exist_ok=True)
        render_svg("spectrum", _spectrum_table(sp), ctx.out / "spectrum.svg", "; ".join(ctx.header_lines))
    sys.stdout.write(f"{len(sp)} points, {sp.wavelengths[0]:.2f}-{sp.wavelengths[-1]:.2f} nm -> {ctx.out}\n")
    return EXIT_OK


def _resonance_doc(res, cal):
    return {
        "polarization": cal.polarization, "lambda_res_nm": _r9(res.lambda_res), "fwhm_nm": _r9(res.fwhm),
        "t0": _r9(res.T0), "r0": _r9(res.R0), "q": _r9(res.Q), "stopband_lo_nm": _r9(res.stopband_lo),
        "stopband_hi_nm": _r9(res.stopband_hi),
        "calibration": {"delta_n": _r9(cal.delta_n), "base_offset": _r9(cal.base_offset),
                        "slat_loss": _r9(cal.slat_loss)},
    }


def cmd_resonance(ctx: _Ctx) -> int:
    cal, spec = _calibrated(ctx)
    res = pipeline.surrogate_resonance(spec, cal)
    doc = _resonance_doc(res, cal)
    ctx.write_json("resonance.json", doc)
    flat = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    if ctx.want("csv"):
        ctx.write("resonance.csv", "".join(f"# {h}\n" for h in ctx.header_lines)
                  + ",".join(flat) + "\n" + ",".join("" if v is None else str(v) for v in flat.values()) + "\n")
    sys.stdout.write(_table([(k, str(v)) for k, v in flat.items()]))
    return EXIT_OK


def cmd_figures(ctx: _Ctx) -> int:
    cal, spec = _calibrated(ctx)
    fs = qed.figure_set(spec, pipeline.emitter_spec(ctx.cfg), pipeline.measurement(ctx.cfg, ctx.pol),
                        ctx.cfg.emitter.purcell)
    text = fs.to_json(provenance=ctx.provenance)
    if ctx.want("json"):
        ctx.write("figures.json", text)
    if ctx.want("csv"):
        d = fs.as_json_dict()
        ctx.write("figures.csv", "".join(f"# {h}\n" for h in ctx.header_lines) + ",".join(d) + "\n"
                  + ",".join("" if v is None else f"{v:.9g}" for v in d.values()) + "\n")
    sys.stdout.write(_table([(k, "inf" if v is None else f"{v:.6g}") for k, v in fs.as_json_dict().items()]))
    return EXIT_OK


def _mirror_table(points, kappa_sc):
    from .plotting import PlotTable

    k = np.array([p.kappa for p in points])
    order = np.argsort(k)
    k = k[order]
    t0 = np.array([p.T0 for p in points])[order]
    r0 = np.array([p.R0 for p in points])[order]
    x = kappa_sc / k
    return PlotTable("kappa_ghz", {"kappa_ghz": k, "N": np.array([p.N for p in points], float)[order],
                                   "t0": t0, "r0": r0, "fit_t0": (1 - x) ** 2, "fit_r0": x * x})


def cmd_fit_kappa_sc(ctx: _Ctx) -> int:
    from .plotting import emit_plot_data

    cal, spec = _calibrated(ctx)
    points = qed.mirror_scan(spec, window=cal.window(spec))
    ksc, rms = qed.fit_kappa_sc(points)
    table = _mirror_table(points, ksc)
    if ctx.want("csv") or ctx.svg:
        emit_plot_data("mirror-scan", table, ctx.out, svg=ctx.svg, header_lines=ctx.header_lines)
    ctx.write_json("fit_kappa_sc.json", {
        "polarization": ctx.pol, "kappa_sc_ghz": _r9(ksc), "rms_residual": _r9(rms),
        "points": [{"N": p.N, "kappa_ghz": _r9(p.kappa), "t0": _r9(p.T0), "r0": _r9(p.R0)} for p in points],
    })
    sys.stdout.write(_table([("kappa_sc (GHz)", f"{ksc:.6g}"), ("rms residual", f"{rms:.3g}"),
                             ("points", str(len(points)))]))
    return EXIT_OK


def cmd_sweep(ctx: _Ctx) -> int:
    from .sweep import run_sweep, sweep_csv, sweep_json

    if ctx.cfg.sweep is None:
        raise ConfigError(["sweep command needs a sweep block (sweep.parameter, start, stop, step)"])
    cal = pipeline.calibrate(ctx.cfg, ctx.pol)
    result = run_sweep(ctx.cfg, jobs=max(1, ctx.args.jobs), calibration=cal)
    if ctx.want("csv"):
        ctx.write("sweep.csv", sweep_csv(result))
    if ctx.want("json"):
        ctx.write("sweep.json", sweep_json(result))
    if ctx.svg and len(result):
        from .plotting import PlotTable, render_svg

        x = np.array([r.value for r in result.rows])
        y = np.array([np.nan if v is None else v for v in result.column("lambda_res_nm")])
        table = PlotTable(result.parameter, {result.parameter: x, "lambda_res_nm": y})
        render_svg("sweep", table, ctx.out / "sweep.svg", "; ".join(ctx.header_lines))
    failed = sum(bool(r.error) for r in result.rows)
    sys.stdout.write(f"{len(result)} points ({failed} failed) over {result.parameter} -> {ctx.out}\n")
    return EXIT_OK


def cmd_reproduce_paper(ctx: _Ctx) -> int:
    from .report import build_report, report_csv, report_json, report_table

    rep = build_report(ctx.cfg, ctx.args.tolerance_scale)
    sys.stdout.write(report_table(rep))
    if ctx.want("csv"):
        ctx.write("reproduce.csv", report_csv(rep))
    if ctx.want("json"):
        ctx.write("reproduce.json", report_json(rep))
    if ctx.svg:
        from .plotting import render_svg

        try:
            cal, spec = _calibrated(ctx)
            sp = pipeline.spectrum_grid(spec, cal)
            ctx.out.mkdir(parents=True, exist_ok=True)
            render_svg("spectrum", _spectrum_table(sp), ctx.out / "spectrum.svg", "; ".join(ctx.header_lines))
        except CapcavError as exc:
            sys.stderr.write(f"spectrum plot skipped: {exc}\n")
    return EXIT_OK if rep.all_passed else EXIT_COMPARE


def _position_tables(ctx):
    from .emitter import PAPER_CENTRED, position_sweep
    from .plotting import PlotTable

    model = PAPER_CENTRED
    period = model.standing_period
    tables = {}
    for pol in ("y", "x", "z"):
        sw = position_sweep(model, (0.0, 2 * period), 1.0, pol)
        t = PlotTable("delta_z_nm", {"delta_z_nm": sw.delta_z, "eta": sw.eta},
                      markers=[(z, f"max {z:g}") for z in sw.maxima], series_label={"eta": f"{pol}-pol"})
        tables[pol] = t
    return tables


def cmd_plot(ctx: _Ctx) -> int:
    from .plotting import PLOT_KINDS, emit_plot_data, read_table

    kind = ctx.args.kind
    if kind not in PLOT_KINDS:
        raise OutputError(f"unknown plot kind {kind!r}; choose from {sorted(PLOT_KINDS)}")
    if ctx.args.input:
        table = read_table(ctx.args.input, kind)
        paths = emit_plot_data(kind, table, ctx.out, svg=True, header_lines=ctx.header_lines)
    elif kind == "spectrum":
        cal, spec = _calibrated(ctx)
        paths = emit_plot_data(kind, _spectrum_table(pipeline.spectrum_grid(spec, cal)), ctx.out,
                               header_lines=ctx.header_lines)
    elif kind == "position-sweep":
        paths = []
        for pol, table in _position_tables(ctx).items():
            paths += emit_plot_data(kind, table, ctx.out, header_lines=ctx.header_lines,
                                    stem=f"position_sweep_{pol}")
    elif kind == "mirror-scan":
        cal, spec = _calibrated(ctx)
        points = qed.mirror_scan(spec, window=cal.window(spec))
        ksc, _ = qed.fit_kappa_sc(points)
        paths = emit_plot_data(kind, _mirror_table(points, ksc), ctx.out, header_lines=ctx.header_lines)
    else:
        raise OutputError("plot sweep needs --input <sweep.csv>")
    for p in paths:
        sys.stdout.write(f"{p}\n")
    return EXIT_OK


COMMANDS = {
    "mode-solve": cmd_mode_solve,
    "spectrum": cmd_spectrum,
    "resonance": cmd_resonance,
    "figures": cmd_figures,
    "fit-kappa-sc": cmd_fit_kappa_sc,
    "sweep": cmd_sweep,
    "reproduce-paper": cmd_reproduce_paper,
    "plot": cmd_plot,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.verb](_Ctx(args, cfg))
    except ConfigError as exc:
        for v in exc.violations:
            sys.stderr.write(f"config error: {v}\n")
        return EXIT_CONFIG
    except OutputError as exc:
        sys.stderr.write(f"output error: {exc}\n")
        return EXIT_IO
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO
    except (CapcavError, ValueError) as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
