"""Parameter sweeps over the mode solver and cavity surrogate.

Each sweep point is an independent task: the fiber mode is re-solved for
the point's geometry, the calibrated grating contrast, offset and loss are
held fixed, and the resonance is re-extracted.  Points run in a process
pool when ``jobs > 1``; rows are always assembled in parameter order, so
output bytes do not depend on the pool size.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from . import __version__
from . import pipeline
from .config import RunConfig, SweepConfig
from .errors import CapcavError
from .qed import LinewidthMeasurement, cavity_enhanced_eta, kappa_from_linewidth

COLUMNS = ("n_eff", "lambda_res_nm", "fwhm_nm", "q", "t0", "r0", "kappa_ghz",
           "stopband_lo_nm", "stopband_hi_nm", "eta_cav", "eta_surrogate")

# sweep parameter -> GratingCavitySpec field (None: geometry or wavelength)
_SPEC_FIELD = {"slat_count": "slat_count", "duty_cycle": "duty_cycle", "period_nm": "period",
               "defect_width_nm": "defect_width", "d_in_nm": None, "d_out_nm": None,
               "wavelength_nm": None}


@dataclass(frozen=True)
class SweepRow:
    value: float
    outputs: Dict[str, Optional[float]]
    error: str = ""


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    rows: List[SweepRow]
    config_hash: str
    version: str = __version__
    polarization: str = "y"
    reference_q: Optional[float] = None
    calibration: Dict[str, float] = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> List[Optional[float]]:
        return [r.outputs.get(name) for r in self.rows]

    @property
    def provenance(self) -> Dict[str, str]:
        return {"config_sha256": self.config_hash, "capcav_version": self.version}


def _point(task):
    cfg, cal, q_ref, parameter, value = task
    out: Dict[str, Optional[float]] = {k: None for k in COLUMNS}
    geom_kw = {}
    spec_kw = {}
    if parameter in ("d_in_nm", "d_out_nm"):
        geom_kw[parameter] = float(value)
    elif parameter != "wavelength_nm":
        spec_kw[_SPEC_FIELD[parameter]] = value
    wavelength = float(value) if parameter == "wavelength_nm" else cfg.geometry.wavelength_nm
    try:
        geom = cfg.geometry.to_geometry(**geom_kw)
        from .modes import solve_fundamental_mode

        out["n_eff"] = solve_fundamental_mode(geom, wavelength).n_eff
        if parameter != "wavelength_nm":
            spec = pipeline.calibrated_spec(cfg, cal, **geom_kw, **spec_kw)
            r = pipeline.surrogate_resonance(spec, cal)
            kappa = kappa_from_linewidth(LinewidthMeasurement(r.lambda_res, r.fwhm))
            out.update(lambda_res_nm=r.lambda_res, fwhm_nm=r.fwhm, q=r.Q, t0=r.T0, r0=r.R0,
                       kappa_ghz=kappa, stopband_lo_nm=r.stopband_lo, stopband_hi_nm=r.stopband_hi)
            if q_ref:
                # Purcell factor scaled with Q at fixed mode volume
                fp = cfg.emitter.purcell * r.Q / q_ref
                out["eta_cav"] = cavity_enhanced_eta(fp, cfg.emitter.beta0)
        out["eta_surrogate"] = pipeline.surrogate_eta(cfg)
        return SweepRow(float(value), out)
    except (CapcavError, ValueError) as exc:
        return SweepRow(float(value), out, f"{type(exc).__name__}: {exc}")


def run_sweep(cfg: RunConfig, sweep: Optional[SweepConfig] = None, jobs: int = 1,
              calibration: Optional[pipeline.Calibration] = None) -> SweepResult:
    """Evaluate every sweep point; failures are recorded per row."""
    sweep = sweep or cfg.sweep
    if sweep is None:
        raise ValueError("config has no sweep block")
    values = sweep.values()
    cal = calibration or pipeline.calibrate(cfg)
    q_ref = None
    if values and sweep.parameter != "wavelength_nm":
        try:
            q_ref = pipeline.surrogate_resonance(pipeline.calibrated_spec(cfg, cal), cal).Q
        except CapcavError:
            q_ref = None
    tasks = [(cfg, cal, q_ref, sweep.parameter, v) for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_point, tasks))
    else:
        rows = [_point(t) for t in tasks]
    meta = {"delta_n": cal.delta_n, "base_offset": cal.base_offset, "slat_loss": cal.slat_loss}
    return SweepResult(sweep.parameter, rows, cfg.config_hash, polarization=cal.polarization,
                       reference_q=q_ref, calibration=meta)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return ""
    if isinstance(v, int):
        return str(v)
    return f"{v:.9g}"


def _num(v):
    if v is None or not math.isfinite(v):
        return None
    return float(f"{v:.9g}")


def sweep_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    buf.write(f"# config_sha256={result.config_hash}\n")
    buf.write(f"# capcav_version={result.version}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([result.parameter, *COLUMNS, "error"])
    for row in result.rows:
        w.writerow([_fmt(row.value), *(_fmt(row.outputs.get(c)) for c in COLUMNS), row.error])
    return buf.getvalue()


def sweep_json(result: SweepResult) -> str:
    doc = {
        "provenance": result.provenance,
        "parameter": result.parameter,
        "polarization": result.polarization,
        "calibration": {k: _num(v) for k, v in result.calibration.items()},
        "reference_q": None if result.reference_q is None else _num(result.reference_q),
        "columns": [result.parameter, *COLUMNS, "error"],
        "rows": [
            {result.parameter: _num(r.value), **{c: _num(r.outputs.get(c)) if r.outputs.get(c) is not None
                                                 else None for c in COLUMNS}, "error": r.error}
            for r in result.rows
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def monotonic(values: Sequence[Optional[float]]) -> int:
    """+1 strictly increasing, -1 strictly decreasing, 0 otherwise (None breaks it)."""
    if len(values) < 2 or any(v is None for v in values):
        return 0
    d = [b - a for a, b in zip(values, values[1:])]
    if all(x > 0 for x in d):
        return 1
    if all(x < 0 for x in d):
        return -1
    return 0
