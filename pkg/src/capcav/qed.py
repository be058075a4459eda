"""Closed-form cavity-QED figures of merit and the scattering-rate fit.

Rates are ordinary frequencies in GHz (not angular), lengths of the cavity
mode in um, wavelengths in nm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import constants
from scipy.optimize import minimize_scalar

C_LIGHT = constants.c  # m/s


@dataclass(frozen=True)
class LinewidthMeasurement:
    lambda_res: float  # nm
    delta_lambda: float  # nm
    polarization_tag: str = "y"

    def __post_init__(self):
        if not 0 < self.delta_lambda < self.lambda_res:
            raise ValueError("need 0 < delta_lambda < lambda_res")


@dataclass(frozen=True)
class MirrorScanPoint:
    N: int
    kappa: float  # GHz
    T0: float
    R0: float

    def __post_init__(self):
        if not (0 <= self.T0 <= 1 and 0 <= self.R0 <= 1):
            raise ValueError(f"T0, R0 must lie in [0, 1]: {self.T0}, {self.R0}")
        if self.T0 + self.R0 > 1 + 1e-9:
            raise ValueError(f"T0 + R0 = {self.T0 + self.R0} exceeds 1")


@dataclass(frozen=True)
class EmitterSpec:
    gamma: float  # GHz
    lambda_emit: float = 619.0  # nm
    beta0: float = 0.52

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not 0 <= self.beta0 <= 1:
            raise ValueError("beta0 must lie in [0, 1]")


JSON_KEYS = ("kappa_ghz", "kappa_sc_ghz", "q", "q_sc", "finesse", "finesse_sc",
             "one_pass_loss", "purcell", "two_g0_ghz", "eta_cav", "l_eff_um")


@dataclass(frozen=True)
class QedFigureSet:
    kappa: float
    kappa_sc: float
    Q: float
    Q_sc: float
    F: float
    F_sc: float
    one_pass_loss: float
    F_P: float
    C: float
    two_g0: float
    eta_cav: float
    l_eff: float  # um
    T0: float = 1.0
    R0: float = 0.0

    def as_json_dict(self) -> dict:
        vals = (self.kappa, self.kappa_sc, self.Q, self.Q_sc, self.F, self.F_sc,
                self.one_pass_loss, self.F_P, self.two_g0, self.eta_cav, self.l_eff)
        return {k: (float(v) if math.isfinite(v) else None) for k, v in zip(JSON_KEYS, vals)}

    def to_json(self, **extra) -> str:
        doc = dict(extra)
        doc.update(self.as_json_dict())
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


# -- closed forms -----------------------------------------------------------

def kappa_from_linewidth(m: LinewidthMeasurement) -> float:
    """Total field decay rate ``c * dlambda / lambda^2`` in GHz."""
    lam = m.lambda_res * 1e-9
    return C_LIGHT * (m.delta_lambda * 1e-9) / lam**2 / 1e9


def quality_factor(m: LinewidthMeasurement) -> float:
    return m.lambda_res / m.delta_lambda


def on_resonance_TR(kappa: float, kappa_sc: float) -> Tuple[float, float]:
    """``T0 = (1 - kappa_sc/kappa)^2``, ``R0 = (kappa_sc/kappa)^2``."""
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    if kappa_sc < 0:
        raise ValueError("kappa_sc must be >= 0")
    if kappa_sc > kappa:
        raise ValueError(f"kappa_sc ({kappa_sc}) exceeds kappa ({kappa})")
    x = kappa_sc / kappa
    return (1.0 - x) ** 2, x * x


def finesse(l_eff: float, kappa: float) -> float:
    """``c / (2 l_eff kappa)`` for ``l_eff`` in um and ``kappa`` in GHz."""
    if not l_eff > 0:
        raise ValueError("l_eff must be > 0")
    if kappa == 0:
        return math.inf
    return C_LIGHT / (2.0 * l_eff * 1e-6 * kappa * 1e9)


def scattering_Q(lambda_res: float, kappa_sc: float) -> float:
    """Scattering-limited quality factor ``(c / lambda_res) / kappa_sc``."""
    if kappa_sc == 0:
        return math.inf
    return C_LIGHT / (lambda_res * 1e-9) / (kappa_sc * 1e9)


def one_pass_loss(F_sc: float) -> float:
    """Fractional power lost per pass, ``pi / F_sc``."""
    if not F_sc > 0:
        raise ValueError("F_sc must be > 0")
    return math.pi / F_sc


def rabi_from_purcell(F_P: float, kappa: float, gamma: float) -> float:
    """Single-photon Rabi frequency ``2 g0 = sqrt(F_P kappa gamma)`` (GHz)."""
    return math.sqrt(F_P * kappa * gamma)


def purcell(two_g0: float, kappa: float, gamma: float) -> float:
    """``F_P ~ C = (2 g0)^2 / (kappa gamma)``."""
    return two_g0 * two_g0 / (kappa * gamma)


def cavity_enhanced_eta(F_P: float, beta0: float) -> float:
    """Channeling efficiency with Purcell enhancement of the guided fraction."""
    if F_P < 0 or not 0 <= beta0 <= 1:
        raise ValueError("need F_P >= 0 and beta0 in [0, 1]")
    num = F_P * beta0
    den = 1.0 - beta0 + num
    if den == 0:
        return 0.0
    return min(1.0, max(0.0, num / den))


def channeling_efficiency(P_C: float, P_T: float) -> float:
    if not P_T > 0:
        raise ValueError("P_T must be > 0")
    if P_C < 0 or P_C > P_T:
        raise ValueError(f"need 0 <= P_C <= P_T, got P_C={P_C}, P_T={P_T}")
    return P_C / P_T


# -- kappa_sc fit -----------------------------------------------------------

def _objective(points):
    k = np.array([p.kappa for p in points])
    T = np.array([p.T0 for p in points])
    R = np.array([p.R0 for p in points])

    def cost(ksc):
        x = ksc / k
        return float(np.sum((T - (1 - x) ** 2) ** 2 + (R - x * x) ** 2))

    return cost


def fit_kappa_sc(points: Sequence[MirrorScanPoint], xtol: float = 1e-4) -> Tuple[float, float]:
    """Least-squares scattering rate from on-resonance T0/R0 versus kappa.

    A 400-point grid over ``[0, min kappa]`` picks the basin, a bounded
    Brent search refines it, and the endpoints are kept if they score
    better.  Returns ``(kappa_sc, rms_residual)``.
    """
    points = list(points)
    if len(points) < 3:
        raise ValueError(f"need at least 3 scan points, got {len(points)}")
    if all(p.T0 == 0 and p.R0 == 0 for p in points):
        raise ValueError("all scan points are zero")
    kappas = [p.kappa for p in points]
    if len(set(kappas)) != len(kappas):
        raise ValueError("scan points must have distinct kappa")
    if min(kappas) <= 0:
        raise ValueError("kappa must be > 0")
    cost = _objective(points)
    hi = min(kappas)
    grid = np.linspace(0.0, hi, 401)
    vals = np.array([cost(x) for x in grid])
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    best_x, best_v = grid[i], vals[i]
    if b > a:
        res = minimize_scalar(cost, bounds=(a, b), method="bounded", options={"xatol": xtol})
        if res.fun < best_v:
            best_x, best_v = float(res.x), float(res.fun)
    return float(best_x), math.sqrt(best_v / (2 * len(points)))


# -- pipeline ---------------------------------------------------------------

PAPER_N_VALUES = tuple(range(200, 501, 50))


def mirror_scan(spec, n_values: Iterable[int] = PAPER_N_VALUES,
                window: Optional[Tuple[float, float]] = None) -> List[MirrorScanPoint]:
    """On-resonance T0, R0 and kappa of ``spec`` for each total slat count.

    Lines are located with :func:`tracked_resonance`, whose looser band
    thresholds keep the short-mirror end of the scan usable.
    """
    from .grating import resonance_window, tracked_resonance

    lo, hi = window or resonance_window(spec)
    out = []
    for n in n_values:
        r = tracked_resonance(replace(spec, slat_count=int(n)), lo, hi)
        kap = kappa_from_linewidth(LinewidthMeasurement(r.lambda_res, r.fwhm))
        T0, R0 = r.T0, r.R0
        if T0 + R0 > 1:  # interpolation rounding on a lossless line
            T0 = 1.0 - R0
        out.append(MirrorScanPoint(int(n), kap, T0, R0))
    return out


def figure_set(spec, emitter: EmitterSpec, measurement: LinewidthMeasurement,
               F_P: float, n_values: Iterable[int] = PAPER_N_VALUES) -> QedFigureSet:
    """Full figure chain: kappa, Q from the measured line; l_eff from the
    cavity envelope; kappa_sc from the slat-count scan; then F, F_sc, L,
    Q_sc, 2 g0 and the cavity-enhanced efficiency."""
    from .grating import effective_length, intracavity_envelope, resonance, resonance_window

    kappa = kappa_from_linewidth(measurement)
    Q = quality_factor(measurement)
    lo, hi = resonance_window(spec, measurement.lambda_res)
    res = resonance(spec, lo, hi)
    l_eff = effective_length(intracavity_envelope(spec, res.lambda_res)) * 1e-3
    kappa_sc, _ = fit_kappa_sc(mirror_scan(spec, n_values, (lo, hi)))
    F = finesse(l_eff, kappa)
    F_sc = finesse(l_eff, kappa_sc)
    L = one_pass_loss(F_sc) if math.isfinite(F_sc) else 0.0
    two_g0 = rabi_from_purcell(F_P, kappa, emitter.gamma)
    T0, R0 = on_resonance_TR(kappa, min(kappa_sc, kappa))
    return QedFigureSet(
        kappa=kappa, kappa_sc=kappa_sc, Q=Q, Q_sc=scattering_Q(measurement.lambda_res, kappa_sc),
        F=F, F_sc=F_sc, one_pass_loss=L, F_P=F_P, C=purcell(two_g0, kappa, emitter.gamma),
        two_g0=two_g0, eta_cav=cavity_enhanced_eta(F_P, emitter.beta0), l_eff=l_eff, T0=T0, R0=R0,
    )
