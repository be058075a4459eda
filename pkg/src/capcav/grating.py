"""Defect-mode grating cavity as a 1-D effective-index stack.

The grating on the fiber is collapsed to alternating segments of the
guided-mode index (gaps) and guided-mode index plus ``delta_n`` (slats).
Half the slats sit on each side of a central base-index defect segment of
length ``w_g``.  Each homogeneous segment is represented by its
characteristic matrix

    [[cos d, -i sin d / n], [-i n sin d, cos d]],   d = 2 pi n L / lambda

with per-slat amplitude loss ``a`` folded in as ``d -> d - i ln a``.
All routines are vectorised over the wavelength grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import FitFailed, NoConvergence, NoDefectPeak, NoStopband

IndexLike = Union[float, Callable[[np.ndarray], np.ndarray]]

DEFAULT_THRESHOLD = 0.5
COARSE_STEP = 0.1
FINE_STEP = 0.01
MIN_POINTS_PER_LINE = 20
GRID_WINDOW = (550.0, 700.0)


@dataclass(frozen=True)
class ShiftedIndex:
    """Per-wavelength base index ``fn(lambda) + offset``."""

    fn: Callable[[np.ndarray], np.ndarray]
    offset: float = 0.0

    def __call__(self, lam):
        return np.asarray(self.fn(lam), dtype=float) + self.offset


@dataclass(frozen=True)
class GratingCavitySpec:
    period: float  # nm
    duty_cycle: float
    slat_count: int  # total, split equally on both sides
    base_n_eff: IndexLike
    delta_n: float = 0.0
    slat_loss: float = 1.0  # amplitude transmission per slat
    defect_width: Optional[float] = None  # nm, default 1.5 * period
    slat_height: float = 2.0  # um; metadata, unused by the 1-D model
    polarization_tag: str = "y"

    def __post_init__(self):
        if self.defect_width is None:
            object.__setattr__(self, "defect_width", 1.5 * self.period)
        problems = []
        if not self.period > 0:
            problems.append("period must be > 0")
        if not 0 < self.duty_cycle < 1:
            problems.append("duty_cycle must be in (0,1)")
        if self.slat_count < 2 or self.slat_count % 2:
            problems.append("slat_count must be even and >= 2")
        if not self.defect_width > 0:
            problems.append("defect_width must be > 0")
        if self.delta_n < 0:
            problems.append("delta_n must be >= 0")
        if not 0 < self.slat_loss <= 1:
            problems.append("slat_loss must be in (0,1]")
        if self.polarization_tag not in ("x", "y"):
            problems.append("polarization_tag must be 'x' or 'y'")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def slat_thickness(self) -> float:
        return self.duty_cycle * self.period

    def base_index(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if callable(self.base_n_eff):
            return np.broadcast_to(self.base_n_eff(lam), lam.shape).astype(float)
        return np.full(lam.shape, float(self.base_n_eff))

    def mean_index(self, lam) -> np.ndarray:
        """Index averaged over one grating period."""
        return self.base_index(lam) + self.duty_cycle * self.delta_n

    @property
    def stack_length(self) -> float:
        return self.slat_count * self.period + self.defect_width


@dataclass(frozen=True, eq=False)
class CavitySpectrum:
    wavelengths: np.ndarray
    t_amp: np.ndarray
    r_amp: np.ndarray
    T: np.ndarray
    R: np.ndarray

    def __len__(self):
        return len(self.wavelengths)


@dataclass(frozen=True)
class ResonanceReport:
    lambda_res: float
    fwhm: float
    T0: float
    R0: float
    Q: float
    stopband_lo: float
    stopband_hi: float

    @property
    def stopband_width(self) -> float:
        return self.stopband_hi - self.stopband_lo


@dataclass(frozen=True, eq=False)
class FieldEnvelope:
    z_positions: np.ndarray  # nm from defect centre
    intensity: np.ndarray  # |E|^2, peak = 1
    defect_width: float  # nm


# -- transfer matrices ------------------------------------------------------

def segment_matrix(n, length: float, wavelength, loss_amp: float = 1.0) -> np.ndarray:
    """Characteristic matrix of a homogeneous segment.

    ``loss_amp`` multiplies the amplitude of a wave crossing the segment.
    Broadcasts over ``n`` and ``wavelength``; the trailing axes are 2x2.
    """
    n = np.asarray(n, dtype=float)
    lam = np.asarray(wavelength, dtype=float)
    d = 2.0 * np.pi * n * length / lam - 1j * math.log(loss_amp)
    c, s = np.cos(d), np.sin(d)
    shape = np.broadcast(n, lam).shape
    M = np.empty(shape + (2, 2), dtype=complex)
    M[..., 0, 0] = c
    M[..., 0, 1] = -1j * s / n
    M[..., 1, 0] = -1j * n * s
    M[..., 1, 1] = c
    return M


def _mirror_cells(spec: GratingCavitySpec, lam):
    nb = spec.base_index(lam)
    gap = segment_matrix(nb, spec.period - spec.slat_thickness, lam)
    slat = segment_matrix(nb + spec.delta_n, spec.slat_thickness, lam, spec.slat_loss)
    return nb, gap, slat


def stack_matrix(spec: GratingCavitySpec, lam) -> np.ndarray:
    """Total characteristic matrix of the symmetric cavity.

    Layout from the input side: ``(gap, slat) x N/2``, defect,
    ``(slat, gap) x N/2``.
    """
    lam = np.asarray(lam, dtype=float)
    nb, gap, slat = _mirror_cells(spec, lam)
    half = spec.slat_count // 2
    left = np.linalg.matrix_power(gap @ slat, half)
    right = np.linalg.matrix_power(slat @ gap, half)
    return left @ segment_matrix(nb, spec.defect_width, lam) @ right


def segments_matrix(segments: Sequence[Tuple[float, float, float]], lam) -> np.ndarray:
    """Product of segment matrices for an arbitrary ``(n, length, loss)`` list."""
    lam = np.asarray(lam, dtype=float)
    M = np.broadcast_to(np.eye(2, dtype=complex), lam.shape + (2, 2)).copy()
    for n, L, loss in segments:
        M = M @ segment_matrix(n, L, lam, loss)
    return M


def transmission_reflection(M, n_in, n_out) -> Tuple[np.ndarray, np.ndarray]:
    """Intensity ``(T, R)`` of a stack matrix between two media."""
    t, r = _amplitudes(M, n_in, n_out)
    return np.real(n_out / n_in) * np.abs(t) ** 2, np.abs(r) ** 2


def _amplitudes(M, n_in, n_out):
    B = M[..., 0, 0] + M[..., 0, 1] * n_out
    C = M[..., 1, 0] + M[..., 1, 1] * n_out
    den = n_in * B + C
    return 2.0 * n_in / den, (n_in * B - C) / den


# -- spectra --------------------------------------------------------------

def wavelength_grid(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0 or hi < lo:
        return np.array([])
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def cavity_spectrum(spec: GratingCavitySpec, grid, window=GRID_WINDOW) -> CavitySpectrum:
    """Amplitude and intensity transmission/reflection on ``grid``.

    ``grid`` is an array of wavelengths (nm) or a ``(lo, hi, step)`` tuple.
    """
    if isinstance(grid, tuple) and len(grid) == 3:
        lam = wavelength_grid(*grid)
    else:
        lam = np.asarray(grid, dtype=float).ravel()
    if lam.size == 0:
        raise ValueError("empty wavelength grid")
    if window is not None and (lam.min() < window[0] or lam.max() > window[1]):
        raise ValueError(f"wavelength grid must lie within {window[0]}-{window[1]} nm")
    M = stack_matrix(spec, lam)
    nb = spec.base_index(lam)
    t, r = _amplitudes(M, nb, nb)
    T, R = np.abs(t) ** 2, np.abs(r) ** 2
    return CavitySpectrum(lam, t, r, T, R)


def merge_spectra(*spectra: CavitySpectrum) -> CavitySpectrum:
    lam = np.concatenate([s.wavelengths for s in spectra])
    lam_r = np.round(lam, 9)
    _, keep = np.unique(lam_r, return_index=True)
    pick = lambda attr: np.concatenate([getattr(s, attr) for s in spectra])[keep]
    return CavitySpectrum(pick("wavelengths"), pick("t_amp"), pick("r_amp"), pick("T"), pick("R"))


def refined_spectrum(spec: GratingCavitySpec, lo: float, hi: float,
                     coarse: float = COARSE_STEP, fine: float = FINE_STEP,
                     threshold: float = DEFAULT_THRESHOLD,
                     guide: Optional[Tuple[float, float]] = None) -> CavitySpectrum:
    """Coarse scan over [lo, hi] merged with fine scans of the stop band and line.

    Pass 1 uses ``coarse`` steps to find the stop band; pass 2 covers the
    stop band at ``fine`` steps; a third pass is added around the line if
    it is narrower than ``MIN_POINTS_PER_LINE`` fine steps.  ``guide`` is
    passed on to the stop-band search.
    """
    base = cavity_spectrum(spec, (lo, hi, coarse))
    try:
        band = _stopband(base.wavelengths, base.T, threshold, guide)
    except NoStopband:
        return base
    a = max(lo, base.wavelengths[band[0]] - 2 * coarse)
    b = min(hi, base.wavelengths[band[1]] + 2 * coarse)
    out = merge_spectra(base, cavity_spectrum(spec, (a, b, fine)))
    try:
        res = find_resonance(out, threshold, guide=guide)
    except (NoStopband, NoDefectPeak):
        return out
    if res.fwhm < MIN_POINTS_PER_LINE * fine:
        step = res.fwhm / (2 * MIN_POINTS_PER_LINE)
        half = 3.0 * res.fwhm
        out = merge_spectra(out, cavity_spectrum(spec, (res.lambda_res - half, res.lambda_res + half, step)))
    return out


# -- resonance extraction ---------------------------------------------------

def _runs(mask):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    cuts = np.flatnonzero(np.diff(idx) > 1) + 1
    return [(int(r[0]), int(r[-1])) for r in np.split(idx, cuts)]


def _stopband(lam, T, threshold, guide: Optional[Tuple[float, float]] = None):
    """Index span of the stop band: the sub-threshold run holding the deepest
    minimum, merged with neighbouring runs across gaps narrower than the wider
    of the two runs (this bridges the defect line when it rises above
    ``threshold``).  A neighbour narrower than half the gap is a side-lobe
    dip and is not merged.

    With ``guide`` (nm, the stop band of the defect-free grating) the band
    is instead every run overlapping the guide, plus the gaps between them.
    """
    runs = _runs(T < threshold)
    if not runs:
        raise NoStopband(f"transmission never drops below {threshold}")
    if guide is not None:
        hits = [(a, b) for a, b in runs if lam[b] >= guide[0] and lam[a] <= guide[1]]
        if not hits:
            raise NoStopband("no sub-threshold region overlaps the grating stop band")
        lo, hi = hits[0][0], hits[-1][1]
        if hi - lo < 2:
            raise NoStopband("stop band narrower than the grid")
        return lo, hi
    i0 = int(np.argmin(T))
    k = next(j for j, (a, b) in enumerate(runs) if a <= i0 <= b)
    lo, hi = runs[k]
    width = lambda a, b: lam[b] - lam[a]
    joins = lambda gap, a, b: gap < max(width(lo, hi), width(a, b)) and width(a, b) >= 0.5 * gap
    for j in range(k + 1, len(runs)):
        a, b = runs[j]
        if joins(lam[a] - lam[hi], a, b):
            hi = b
        else:
            break
    for j in range(k - 1, -1, -1):
        a, b = runs[j]
        if joins(lam[lo] - lam[b], a, b):
            lo = a
        else:
            break
    if hi - lo < 2:
        raise NoStopband("stop band narrower than the grid")
    return lo, hi


def _crossing(lam, T, i, j, level):
    """Linear interpolation of where T crosses ``level`` between samples i and j."""
    if T[j] == T[i]:
        return lam[i]
    return lam[i] + (level - T[i]) * (lam[j] - lam[i]) / (T[j] - T[i])


def _quadratic_vertex(x, y):
    """Vertex of the parabola through three samples, clamped to their span."""
    a, b, c = np.polyfit(x - x[1], y, 2)
    if a >= 0:
        return float(x[1]), float(y[1])
    xv = float(np.clip(-b / (2 * a), x[0] - x[1], x[2] - x[1]))
    return float(x[1] + xv), float(a * xv * xv + b * xv + c)


def find_resonance(spectrum: CavitySpectrum, threshold: float = DEFAULT_THRESHOLD,
                   min_prominence: float = 1e-3,
                   guide: Optional[Tuple[float, float]] = None) -> ResonanceReport:
    """Locate the stop band and the defect line inside it.

    The line centre comes from a quadratic through the three samples around
    the highest interior local maximum of T; the FWHM is measured at half the
    peak-to-floor height, with linear interpolation on both shoulders.
    ``guide`` (nm) is the stop band of the defect-free grating, when known.
    """
    lam, T, R = spectrum.wavelengths, spectrum.T, spectrum.R
    lo, hi = _stopband(lam, T, threshold, guide)
    band_lo = _crossing(lam, T, lo - 1, lo, threshold) if lo > 0 else lam[lo]
    band_hi = _crossing(lam, T, hi, hi + 1, threshold) if hi + 1 < len(lam) else lam[hi]

    inner = np.arange(lo + 1, hi)
    is_max = (T[inner] > T[inner - 1]) & (T[inner] >= T[inner + 1])
    cands = inner[is_max]
    if cands.size == 0:
        raise NoDefectPeak("no local transmission maximum inside the stop band")
    i = int(cands[np.argmax(T[cands])])
    floor = float(T[lo:hi + 1].min())
    if T[i] - floor < min_prominence:
        raise NoDefectPeak("interior transmission peak below prominence threshold")

    sl = slice(i - 1, i + 2)
    lam_res, peak = _quadratic_vertex(lam[sl], T[sl])
    half = floor + 0.5 * (peak - floor)
    j = i
    while j > lo and T[j] > half:
        j -= 1
    k = i
    while k < hi and T[k] > half:
        k += 1
    if T[j] > half or T[k] > half:
        raise NoDefectPeak("line shoulders extend past the stop band")
    left = _crossing(lam, T, j, j + 1, half)
    right = _crossing(lam, T, k - 1, k, half)
    fwhm = right - left

    coeff_r = np.polyfit(lam[sl] - lam[i], R[sl], 2)
    R0 = float(np.clip(np.polyval(coeff_r, lam_res - lam[i]), 0.0, 1.0))
    T0 = float(np.clip(peak, 0.0, 1.0))
    return ResonanceReport(float(lam_res), float(fwhm), T0, R0, float(lam_res / fwhm),
                           float(band_lo), float(band_hi))


def mirror_spec(spec: GratingCavitySpec) -> GratingCavitySpec:
    """The same grating without its defect: the defect becomes an ordinary gap."""
    return replace(spec, defect_width=spec.period - spec.slat_thickness)


def mirror_stopband(spec: GratingCavitySpec, lo: float, hi: float,
                    threshold: float = DEFAULT_THRESHOLD,
                    coarse: float = COARSE_STEP) -> Tuple[float, float]:
    """Edges (nm) of the deepest sub-threshold run of the defect-free grating.

    Without a defect there is no line inside the band, so no runs need
    merging.
    """
    s = cavity_spectrum(mirror_spec(spec), (lo, hi, coarse))
    lam, T = s.wavelengths, s.T
    runs = _runs(T < threshold)
    if not runs:
        raise NoStopband(f"defect-free transmission never drops below {threshold}")
    i0 = int(np.argmin(T))
    a, b = next((a, b) for a, b in runs if a <= i0 <= b)
    edge_lo = _crossing(lam, T, a - 1, a, threshold) if a > 0 else lam[a]
    edge_hi = _crossing(lam, T, b, b + 1, threshold) if b + 1 < len(lam) else lam[b]
    return float(edge_lo), float(edge_hi)


def resonance(spec: GratingCavitySpec, lo: float, hi: float,
              threshold: float = DEFAULT_THRESHOLD) -> ResonanceReport:
    """Refined cavity spectrum over [lo, hi] followed by :func:`find_resonance`,
    guided by the stop band of the defect-free grating when it has one."""
    try:
        guide = mirror_stopband(spec, lo, hi, threshold)
    except NoStopband:
        guide = None
    return find_resonance(refined_spectrum(spec, lo, hi, threshold=threshold, guide=guide),
                          threshold, guide=guide)


# -- intracavity field ------------------------------------------------------

def _segments(spec: GratingCavitySpec, lam: float):
    """``(index, length, loss)`` for every segment from the input side."""
    nb = float(spec.base_index(np.array([lam]))[0])
    t = spec.slat_thickness
    g = spec.period - t
    half = spec.slat_count // 2
    slat = (nb + spec.delta_n, t, spec.slat_loss)
    gap = (nb, g, 1.0)
    return nb, [gap, slat] * half + [(nb, spec.defect_width, 1.0)] + [slat, gap] * half


def intracavity_envelope(spec: GratingCavitySpec, wavelength: float,
                         samples_per_segment: int = 8) -> FieldEnvelope:
    """Normalised |E|^2 along the stack for unit illumination from the left.

    Tangential (E, H) is propagated backwards from the exit face, where it
    equals ``t * (1, n_out)``; E at each point is the sum of the forward and
    backward waves.
    """
    nb, segs = _segments(spec, wavelength)
    lam = np.array([wavelength])
    t, _ = _amplitudes(stack_matrix(spec, lam), nb, nb)
    v = np.array([t[0], nb * t[0]], dtype=complex)
    total = sum(L for _, L, _ in segs)
    z = total
    zs, es = [z], [v[0]]
    for n, L, loss in reversed(segs):
        if L == 0:
            continue
        sub = L / samples_per_segment
        M = segment_matrix(n, sub, wavelength, loss ** (1.0 / samples_per_segment))
        for _ in range(samples_per_segment):
            v = M @ v
            z -= sub
            zs.append(z)
            es.append(v[0])
    zs = np.array(zs[::-1])
    inten = np.abs(np.array(es[::-1])) ** 2
    centre = spec.slat_count // 2 * spec.period + 0.5 * spec.defect_width
    return FieldEnvelope(zs - centre, inten / inten.max(), float(spec.defect_width))


def _local_maxima(y):
    i = np.arange(1, len(y) - 1)
    return i[(y[i] > y[i - 1]) & (y[i] >= y[i + 1])]


def effective_length(envelope: FieldEnvelope, min_maxima: int = 5,
                     cutoff: float = 0.05) -> float:
    """Full 1/e-intensity extent ``w_g + z_left + z_right`` (nm).

    Each side's decay length comes from a least-squares line through
    ``log I`` of the local maxima outside the defect that are still above
    ``cutoff`` of the peak.
    """
    z, I = envelope.z_positions, envelope.intensity
    peaks = _local_maxima(I)
    edge = 0.5 * envelope.defect_width
    lengths = []
    for side in (-1, 1):
        sel = peaks[(side * z[peaks] > edge) & (I[peaks] >= cutoff * I.max())]
        if sel.size < min_maxima:
            raise FitFailed(f"only {sel.size} usable maxima on the {'left' if side < 0 else 'right'} side")
        slope, _ = np.polyfit(np.abs(z[sel]), np.log(I[sel]), 1)
        if not slope < 0:
            raise FitFailed("envelope does not decay away from the defect")
        lengths.append(-1.0 / slope)
    return float(envelope.defect_width + lengths[0] + lengths[1])


SCAN_THRESHOLDS = (0.5, 0.7, 0.9)


def tracked_resonance(spec: GratingCavitySpec, lo: float, hi: float,
                      thresholds: Sequence[float] = SCAN_THRESHOLDS) -> ResonanceReport:
    """:func:`resonance` with the band threshold loosened step by step.

    Short mirrors may not push T below the first threshold on both sides
    of the line; the line itself is what the caller needs.
    """
    for k, th in enumerate(thresholds):
        try:
            return resonance(spec, lo, hi, threshold=th)
        except (NoStopband, NoDefectPeak):
            if k == len(thresholds) - 1:
                raise
    raise ValueError("no thresholds given")


def resonance_window(spec: GratingCavitySpec, centre: Optional[float] = None,
                     half_width: float = 15.0) -> Tuple[float, float]:
    """Search window around ``centre`` or, by default, the Bragg wavelength
    ``2 * period * mean_index`` evaluated at 620 nm."""
    if centre is None:
        centre = 2.0 * spec.period * float(spec.mean_index(np.array([620.0]))[0])
    return max(GRID_WINDOW[0], centre - half_width), min(GRID_WINDOW[1], centre + half_width)


# -- calibration ------------------------------------------------------------

def _with_offset(base: IndexLike, delta: float) -> IndexLike:
    if callable(base):
        if isinstance(base, ShiftedIndex):
            return ShiftedIndex(base.fn, base.offset + delta)
        return ShiftedIndex(base, delta)
    return float(base) + delta


def _group_index(spec: GratingCavitySpec, lam: float, h: float = 0.5) -> float:
    n = spec.mean_index(np.array([lam - h, lam, lam + h]))
    return float(n[1] - lam * (n[2] - n[0]) / (2 * h))


def calibrate_contrast(targets: dict, spec_template: GratingCavitySpec,
                       tol: float = 0.1, max_iter: int = 60,
                       threshold: float = DEFAULT_THRESHOLD) -> Tuple[float, IndexLike]:
    """Fit ``delta_n`` (stop-band width) and the base index (line position).

    ``targets`` holds ``lambda_res`` and ``stopband_width`` in nm.  The base
    index is shifted by a constant; with a dispersive callback the shift is
    applied on top of the callback.  Returns ``(delta_n, base_n_eff)``.
    """
    lam_t = float(targets["lambda_res"])
    w_t = float(targets["stopband_width"])
    if not w_t > 0:
        raise ValueError("stopband_width target must be positive")
    lo = max(GRID_WINDOW[0], lam_t - 3 * w_t - 3)
    hi = min(GRID_WINDOW[1], lam_t + 3 * w_t + 3)
    state = {"spec": spec_template, "evals": 0}

    def measure(spec):
        state["evals"] += 1
        if state["evals"] > max_iter:
            raise NoConvergence(f"calibrate_contrast exceeded {max_iter} spectrum evaluations")
        r = resonance(spec, lo, hi, threshold)
        return r.lambda_res, r.stopband_width

    def tune_line(spec):
        """Shift the base index until the line sits on target; returns (spec, width)."""
        for _ in range(max_iter):
            lam_r, width = measure(spec)
            err = lam_t - lam_r
            if abs(err) < 0.2 * tol:
                return spec, width
            shift = _group_index(spec, lam_r) * err / lam_r
            spec = replace(spec, base_n_eff=_with_offset(spec.base_n_eff, shift))
        raise NoConvergence("line position did not converge")

    spec = spec_template
    if spec.delta_n > 0:
        try:
            lam_r, width = measure(spec)
            if abs(lam_r - lam_t) < tol and abs(width - w_t) < tol:
                return spec.delta_n, spec.base_n_eff
        except (NoStopband, NoDefectPeak):
            pass
    else:
        ng = _group_index(spec, lam_t)
        dn = math.pi * ng * w_t / (2 * lam_t * math.sin(math.pi * spec.duty_cycle))
        nbar = lam_t / (2 * spec.period)
        base_here = float(spec.base_index(np.array([lam_t]))[0])
        spec = replace(spec, delta_n=dn,
                       base_n_eff=_with_offset(spec.base_n_eff, nbar - spec.duty_cycle * dn - base_here))

    def width_error(spec):
        spec, width = tune_line(spec)
        return spec, width - w_t

    spec, err = width_error(spec)
    # secant on delta_n, falling back to proportional steps while unbracketed
    prev = None
    while abs(err) >= tol:
        dn = spec.delta_n
        if prev is not None and prev[1] != err:
            new_dn = dn - err * (dn - prev[0]) / (err - prev[1])
        else:
            new_dn = dn * w_t / (w_t + err)
        new_dn = float(np.clip(new_dn, 0.5 * dn, 2.0 * dn))
        for _ in range(8):
            try:
                trial = width_error(replace(spec, delta_n=new_dn))
                break
            except (NoStopband, NoDefectPeak):
                new_dn = 0.5 * (new_dn + dn)  # line lost: back off towards the last good point
        else:
            raise NoConvergence("stop band lost while adjusting delta_n")
        prev = (dn, err)
        spec, err = trial
    return spec.delta_n, spec.base_n_eff


def calibrate_slat_loss(target_kappa_sc: float, spec: GratingCavitySpec,
                        n_values: Sequence[int] = tuple(range(200, 501, 50)),
                        rel_tol: float = 2e-3, max_iter: int = 60,
                        lo: float = 0.99,
                        window: Optional[Tuple[float, float]] = None) -> float:
    """Per-slat amplitude loss for which the mirror-scan fit recovers ``target_kappa_sc``.

    Bisection on ``slat_loss`` in ``(lo, 1]``; the fitted scattering rate
    falls monotonically as ``slat_loss`` rises.  A trial loss at which a
    scan spectrum has no resolvable line counts as too lossy.
    """
    from .qed import fit_kappa_sc, mirror_scan

    if target_kappa_sc < 0:
        raise ValueError("target kappa_sc must be >= 0")
    if target_kappa_sc == 0:
        return 1.0

    def fitted(loss):
        try:
            pts = mirror_scan(replace(spec, slat_loss=loss), n_values, window)
        except (NoStopband, NoDefectPeak):
            return math.inf  # loss has washed out the line: far too lossy
        return fit_kappa_sc(pts)[0]

    a, b = lo, 1.0  # fitted(a) > target > fitted(b)
    if fitted(a) < target_kappa_sc:
        raise NoConvergence(f"target {target_kappa_sc} GHz needs slat_loss below {lo}")
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        k = fitted(mid)
        if abs(k - target_kappa_sc) <= rel_tol * target_kappa_sc:
            return mid
        if k > target_kappa_sc:
            a = mid
        else:
            b = mid
    raise NoConvergence("slat-loss bisection did not converge")


# -- export -----------------------------------------------------------------

def write_spectrum_csv(spectrum: CavitySpectrum, path, header_lines: Sequence[str] = ()) -> None:
    """CSV ``wavelength_nm,T,R`` with 9 significant digits.

    ``header_lines`` are written first as ``# ...`` comment lines.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wavelength_nm", "T", "R"])
        for lam, T, R in zip(spectrum.wavelengths, spectrum.T, spectrum.R):
            w.writerow([f"{lam:.9g}", f"{T:.9g}", f"{R:.9g}"])
