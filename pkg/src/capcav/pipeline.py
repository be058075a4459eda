"""Config-driven assembly of calibrated cavity specs and derived records."""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import grating as gr
from . import qed
from .config import RunConfig
from .emitter import PAPER_CENTRED, PAPER_OFF_CENTRE, EmitterPlacement, eta_of_position
from .modes import neff_dispersion, solve_fundamental_mode

OFF_CENTRE_NM = 25.0  # radial offsets beyond this use the off-centre surrogate


@functools.lru_cache(maxsize=64)
def _dispersion(geom, lo, hi):
    return neff_dispersion(geom, lo, hi)


def base_index(cfg: RunConfig, **geom_overrides):
    """Base index for the grating: the fiber's n_eff(lambda) or a constant."""
    if cfg.grating.base_index != "mode":
        return float(cfg.grating.base_index)
    geom = cfg.geometry.to_geometry(**geom_overrides)
    return _dispersion(geom, cfg.grating.dispersion_lo_nm, cfg.grating.dispersion_hi_nm)


def template_spec(cfg: RunConfig, pol: Optional[str] = None, base=None) -> gr.GratingCavitySpec:
    g = cfg.grating
    return gr.GratingCavitySpec(
        period=g.period_nm, duty_cycle=g.duty_cycle, slat_count=g.slat_count,
        base_n_eff=base_index(cfg) if base is None else base,
        defect_width=g.defect_width, slat_height=g.slat_height_um,
        polarization_tag=pol or g.polarization,
    )


@dataclass(frozen=True)
class Calibration:
    """Fitted surrogate parameters for one polarization; the base index is
    ``fiber n_eff(lambda) + base_offset`` (or the fixed value + offset)."""

    polarization: str
    delta_n: float
    base_offset: float
    slat_loss: float
    target_lambda_res: Optional[float]

    def apply(self, spec: gr.GratingCavitySpec) -> gr.GratingCavitySpec:
        return replace(spec, delta_n=self.delta_n, slat_loss=self.slat_loss,
                       base_n_eff=gr._with_offset(spec.base_n_eff, self.base_offset))

    def window(self, spec: gr.GratingCavitySpec):
        return gr.resonance_window(spec, self.target_lambda_res)


def _offset_of(base) -> float:
    if isinstance(base, gr.ShiftedIndex):
        return base.offset
    return 0.0


def calibrate(cfg: RunConfig, pol: Optional[str] = None) -> Calibration:
    """Resolve delta_n, base offset and slat loss for ``pol``.

    Values given in the config are used as they are; missing ones are
    calibrated against the config targets.
    """
    pol = pol or cfg.grating.polarization
    pc = cfg.grating.pol(pol)
    spec = template_spec(cfg, pol)
    if pc.delta_n is not None and pc.base_offset is not None:
        dn, offset = pc.delta_n, pc.base_offset
    else:
        targets = {"lambda_res": pc.target_lambda_res_nm, "stopband_width": pc.target_stopband_width_nm}
        start = replace(spec, delta_n=pc.delta_n or 0.0,
                        base_n_eff=gr._with_offset(spec.base_n_eff, pc.base_offset or 0.0))
        dn, base = gr.calibrate_contrast(targets, start)
        if callable(base):
            offset = _offset_of(base)
        else:
            offset = float(base) - float(spec.base_n_eff)
    if pc.slat_loss is not None:
        loss = pc.slat_loss
    elif pc.target_kappa_sc_ghz:
        lossless = replace(spec, delta_n=dn, base_n_eff=gr._with_offset(spec.base_n_eff, offset))
        loss = gr.calibrate_slat_loss(pc.target_kappa_sc_ghz, lossless,
                                      window=gr.resonance_window(lossless, pc.target_lambda_res_nm))
    else:
        loss = 1.0
    return Calibration(pol, float(dn), float(offset), float(loss), pc.target_lambda_res_nm)


def calibrated_spec(cfg: RunConfig, cal: Calibration, **overrides) -> gr.GratingCavitySpec:
    """Calibrated spec, optionally with grating or geometry fields replaced.

    Geometry overrides (``d_in_nm``, ``d_out_nm``) re-solve the fiber index
    while keeping the calibrated offset and contrast.
    """
    geom_keys = {k: overrides.pop(k) for k in ("d_in_nm", "d_out_nm") if k in overrides}
    spec = template_spec(cfg, cal.polarization, base_index(cfg, **geom_keys))
    if "defect_width" not in overrides and "period" in overrides:
        overrides["defect_width"] = 1.5 * overrides["period"] if cfg.grating.defect_width_nm is None \
            else cfg.grating.defect_width_nm
    return cal.apply(replace(spec, **overrides))


def emitter_spec(cfg: RunConfig) -> qed.EmitterSpec:
    e = cfg.emitter
    return qed.EmitterSpec(gamma=e.gamma_ghz, lambda_emit=e.lambda_nm, beta0=e.beta0)


def measurement(cfg: RunConfig, pol: Optional[str] = None) -> qed.LinewidthMeasurement:
    pol = pol or cfg.grating.polarization
    m = cfg.measurement[pol]
    return qed.LinewidthMeasurement(m.lambda_res_nm, m.delta_lambda_nm, pol)


def surrogate_eta(cfg: RunConfig) -> float:
    """Position/orientation surrogate at the configured emitter placement."""
    e = cfg.emitter
    model = PAPER_OFF_CENTRE if e.radial_offset_nm > OFF_CENTRE_NM else PAPER_CENTRED
    place = EmitterPlacement(e.delta_z_nm, e.radial_offset_nm, e.theta_rad, e.pol_axis)
    return eta_of_position(place, model)


def fundamental_neff(cfg: RunConfig, **geom_overrides) -> float:
    geom = cfg.geometry.to_geometry(**geom_overrides)
    return solve_fundamental_mode(geom, cfg.geometry.wavelength_nm).n_eff


def spectrum_grid(spec, cal: Calibration, step: float = gr.FINE_STEP):
    lo, hi = cal.window(spec)
    try:
        guide = gr.mirror_stopband(spec, lo, hi)
    except gr.NoStopband:
        guide = None
    return gr.refined_spectrum(spec, lo, hi, fine=step, guide=guide)


def surrogate_resonance(spec, cal: Calibration) -> gr.ResonanceReport:
    lo, hi = cal.window(spec)
    return gr.tracked_resonance(spec, lo, hi)


def mean_index_at(spec, lam: float) -> float:
    return float(spec.mean_index(np.array([lam]))[0])
