"""Exact hybrid modes of a three-layer (core / shell / cladding) fiber.

Longitudinal fields are expanded in each homogeneous layer as

    E_z = A f(r) e^{i m phi},    Z0 H_z = -i C f(r) e^{i m phi}

with ``f`` a cylinder function of argument ``k0 * sqrt(|n^2 - n_eff^2|) * r``:
ordinary Bessel J/Y where the layer index exceeds ``n_eff`` and modified
Bessel I/K where it does not.  Radial distances are handled internally in
units of ``1/k0`` (``rho = k0 r``), which removes ``k0`` from every
boundary equation.

The regular functions are normalised as ``J_m(u rho)/u^m`` and
``I_m(q rho)/q^m`` (identical small-argument limits), and the boundary
matrix is written in the column basis ``(A - n_eff C, s C)`` with
``s = n^2 - n_eff^2``.  In that basis every entry stays finite when a
layer index is crossed, so the determinant has no pole and no spurious
root at ``n_eff = n_core``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import constants, integrate, special

from .errors import AmbiguousBracket, GeometryError, NoGuidedMode, TrialIndexError
from .materials import SILICA, VACUUM, WATER, OpticalMaterial, refractive_index

Z0 = constants.mu_0 * constants.c  # vacuum impedance, ohm

DEFAULT_SCAN_STEP = 1e-4
DEFAULT_TOL = 1e-9
_EDGE = 1e-9  # scan starts this far inside the guidance interval


# cores thinner than this shift n_eff by ~(d_in/lambda)^2, far below the solver tolerance
MIN_CORE_NM = 1e-6


@dataclass(frozen=True)
class LayeredFiberGeometry:
    """Concentric core / shell / cladding fiber. Diameters in nm."""

    d_in: float
    d_out: float
    core: OpticalMaterial = WATER
    shell: OpticalMaterial = SILICA
    cladding: OpticalMaterial = VACUUM

    def __post_init__(self):
        if not (self.d_out > 0):
            raise GeometryError(f"d_out must be positive, got {self.d_out}")
        if self.d_in < 0:
            raise GeometryError(f"d_in must be non-negative, got {self.d_in}")
        if self.d_in >= self.d_out:
            raise GeometryError(f"degenerate geometry: d_in ({self.d_in}) must be < d_out ({self.d_out})")

    def indices(self, wavelength: float) -> Tuple[float, float, float]:
        return (
            refractive_index(self.core, wavelength),
            refractive_index(self.shell, wavelength),
            refractive_index(self.cladding, wavelength),
        )

    @property
    def has_core(self) -> bool:
        """False when the core is too thin to resolve; solved as two layers."""
        return self.d_in > MIN_CORE_NM

    def with_diameters(self, d_in: float, d_out: float) -> "LayeredFiberGeometry":
        return LayeredFiberGeometry(d_in, d_out, self.core, self.shell, self.cladding)


@dataclass(frozen=True)
class GuidedMode:
    wavelength: float  # nm
    n_eff: float
    beta: float  # rad/m
    azimuthal_order: int
    # (core A, C), (shell-regular A, C), (shell-singular A, C), (cladding A, C)
    layer_coefficients: Tuple[complex, ...] = field(repr=False)


# -- radial basis ---------------------------------------------------------

def _radial(n, neff, rho, m, singular):
    """Return ``(f, df/drho, g, s)`` for one basis function.

    ``g = (m f / rho - f') / s`` is evaluated from the order ``m+1``
    function so it stays finite as ``s -> 0``.
    """
    neff = np.asarray(neff, dtype=float)
    s = n * n - neff * neff
    k = np.sqrt(np.abs(s))
    x = k * rho
    osc = s > 0
    with np.errstate(all="ignore"):
        if not singular:
            f = np.where(osc, special.jv(m, x), special.iv(m, x)) / k**m
            fp = np.where(osc, special.jvp(m, x), special.ivp(m, x)) * k / k**m
            g = np.where(osc, special.jv(m + 1, x), special.iv(m + 1, x)) / k ** (m + 1)
        else:
            c = -0.5 * np.pi
            f = np.where(osc, c * special.yv(m, x), special.kv(m, x)) * k**m
            fp = np.where(osc, c * special.yvp(m, x), special.kvp(m, x)) * k ** (m + 1)
            g = np.where(osc, c * special.yv(m + 1, x), -special.kv(m + 1, x)) * k ** (m - 1)
    return f, fp, g, s


def _block(n, neff, rho, m, singular):
    """4x2 boundary block ``[E_z, H_z, E_phi, H_phi] x [E-type, H-type]``."""
    f, fp, g, s = _radial(n, neff, rho, m, singular)
    neff = np.asarray(neff, dtype=float)
    out = np.zeros(neff.shape + (4, 2))
    out[..., 0, 0] = f
    out[..., 1, 0] = -neff * f
    out[..., 2, 0] = neff * g
    out[..., 3, 0] = m * f / rho - n * n * g
    out[..., 1, 1] = s * f
    out[..., 2, 1] = fp
    out[..., 3, 1] = m * neff * f / rho
    return out


def _layout(geom: LayeredFiberGeometry, wavelength: float):
    """Basis functions as ``(layer, index, singular)`` plus interface radii in rho units."""
    n1, n2, n3 = geom.indices(wavelength)
    k0 = 2.0 * np.pi / wavelength
    rho_a = k0 * geom.d_in / 2.0
    rho_b = k0 * geom.d_out / 2.0
    if geom.has_core:
        bases = [(0, n1, False), (1, n2, False), (1, n2, True), (2, n3, True)]
    else:
        bases = [(1, n2, False), (2, n3, True)]
    return bases, rho_a, rho_b, (n1, n2, n3)


def _boundary_matrix(geom, wavelength, neff, m):
    """Unscaled boundary matrix, shape ``neff.shape + (N, N)`` with N = 8 or 4."""
    neff = np.atleast_1d(np.asarray(neff, dtype=float))
    bases, rho_a, rho_b, (n1, n2, n3) = _layout(geom, wavelength)
    if geom.has_core:
        M = np.zeros(neff.shape + (8, 8))
        M[..., 0:4, 0:2] = _block(n1, neff, rho_a, m, False)
        M[..., 0:4, 2:4] = -_block(n2, neff, rho_a, m, False)
        M[..., 0:4, 4:6] = -_block(n2, neff, rho_a, m, True)
        M[..., 4:8, 2:4] = _block(n2, neff, rho_b, m, False)
        M[..., 4:8, 4:6] = _block(n2, neff, rho_b, m, True)
        M[..., 4:8, 6:8] = -_block(n3, neff, rho_b, m, True)
    else:
        M = np.zeros(neff.shape + (4, 4))
        M[..., :, 0:2] = _block(n2, neff, rho_b, m, False)
        M[..., :, 2:4] = -_block(n3, neff, rho_b, m, True)
    return M


def _scaled(M):
    """Column- then row-normalise by largest magnitude; return (scaled, column scale)."""
    col = np.max(np.abs(M), axis=-2, keepdims=True)
    col = np.where(col > 0, col, 1.0)
    Ms = M / col
    row = np.max(np.abs(Ms), axis=-1, keepdims=True)
    row = np.where(row > 0, row, 1.0)
    return Ms / row, col[..., 0, :]


def _check_trial(geom, wavelength, neff):
    n = geom.indices(wavelength)
    lo, hi = n[2], max(n)
    arr = np.atleast_1d(np.asarray(neff, dtype=float))
    if np.any(arr <= lo) or np.any(arr >= hi):
        raise TrialIndexError(
            f"trial n_eff must lie in the open interval ({lo}, {hi}); got {arr.min()}..{arr.max()}"
        )
    if np.any(np.isin(arr, n)):
        raise TrialIndexError("trial n_eff coincides with a layer index")


def _determinants(geom, wavelength, neff, m):
    Ms, _ = _scaled(_boundary_matrix(geom, wavelength, neff, m))
    return np.linalg.det(Ms)


def dispersion_determinant(geom: LayeredFiberGeometry, wavelength: float,
                           n_eff_trial: float, m: int = 1) -> float:
    """Scaled determinant of the boundary-condition matrix.

    Zero crossings in ``n_eff_trial`` locate the guided modes of azimuthal
    order ``m``.  Rows and columns are normalised by their largest entry,
    which keeps the magnitude representable without moving the roots.
    """
    if geom.d_in >= geom.d_out:
        raise GeometryError("degenerate geometry")
    _check_trial(geom, wavelength, n_eff_trial)
    return float(_determinants(geom, wavelength, [n_eff_trial], m)[0])


# -- root finding ---------------------------------------------------------

def _scan_grid(lo, hi, step, layer_indices):
    count = int(math.ceil((hi - lo) / step))
    grid = hi - step * np.arange(count + 1)
    grid[-1] = lo
    grid = grid[grid >= lo]
    for n in layer_indices:
        hit = np.abs(grid - n) < 1e-12
        grid[hit] -= 1e-11
    return grid


def find_roots(geom: LayeredFiberGeometry, wavelength: float, m: int = 1,
               step: float = DEFAULT_SCAN_STEP, tol: float = DEFAULT_TOL,
               floor: Optional[float] = None) -> List[float]:
    """All roots of the dispersion determinant for order ``m``, descending.

    ``floor`` raises the lower end of the scan; roots above it are still
    all found, so the largest root is unaffected when it lies above.
    """
    n = geom.indices(wavelength)
    lo, hi = n[2] + _EDGE, max(n) - _EDGE
    if floor is not None:
        lo = max(lo, floor)
    if hi <= lo:
        return []
    grid = _scan_grid(lo, hi, step, n)
    if len(grid) < 2:
        grid = np.array([hi, lo])
    mids = 0.5 * (grid[:-1] + grid[1:])
    d = _determinants(geom, wavelength, grid, m)
    dm = _determinants(geom, wavelength, mids, m)
    sg, sm = np.sign(d), np.sign(dm)

    same = (sg[:-1] == sg[1:]) & (sg[:-1] != 0)
    split = same & (sm != sg[:-1]) & (sm != 0)
    if np.any(split):
        where = grid[np.argmax(split)]
        raise AmbiguousBracket(
            f"two roots inside one scan step near n_eff = {where:.6f}; reduce step below {step:g}"
        )

    roots = []
    for i in range(len(grid) - 1):
        if sg[i] == 0:
            roots.append(float(grid[i]))
            continue
        if sg[i + 1] == 0 or sg[i] == sg[i + 1]:
            continue
        a, b = grid[i + 1], grid[i]  # a < b
        fa = sg[i + 1]
        while b - a > tol:
            c = 0.5 * (a + b)
            fc = np.sign(_determinants(geom, wavelength, [c], m)[0])
            if fc == 0:
                a = b = c
                break
            if fc == fa:
                a = c
            else:
                b = c
        roots.append(0.5 * (a + b))
    if sg[-1] == 0:
        roots.append(float(grid[-1]))
    return sorted(set(roots), reverse=True)


def solve_fundamental_mode(geom: LayeredFiberGeometry, wavelength: float,
                           step: float = DEFAULT_SCAN_STEP,
                           tol: float = DEFAULT_TOL) -> GuidedMode:
    """Fundamental hybrid (HE11) mode, power-normalised to 1 W axial flux."""
    n1, n2, n3 = geom.indices(wavelength)
    if n2 <= n3:
        raise NoGuidedMode(f"shell index {n2} does not exceed cladding index {n3}")
    roots = find_roots(geom, wavelength, 1, step, tol)
    if not roots:
        raise NoGuidedMode(
            f"no guided m=1 mode for d_in={geom.d_in} nm, d_out={geom.d_out} nm at {wavelength} nm"
        )
    neff = roots[0]
    coeffs = _null_coefficients(geom, wavelength, neff, 1)
    mode = GuidedMode(wavelength, neff, 2.0 * np.pi * neff / (wavelength * 1e-9), 1, coeffs)
    p = axial_power(mode, geom)
    scale = 1.0 / math.sqrt(abs(p))
    return GuidedMode(mode.wavelength, neff, mode.beta, 1, tuple(c * scale for c in coeffs))


def _null_coefficients(geom, wavelength, neff, m):
    M = _boundary_matrix(geom, wavelength, [neff], m)[0]
    Ms, col = _scaled(M[None])
    _, _, vt = np.linalg.svd(Ms[0])
    x = vt[-1] / col[0]
    bases = _layout(geom, wavelength)[0]
    out = []
    for j, (_, n, _sing) in enumerate(bases):
        xe, xh = x[2 * j], x[2 * j + 1]
        s = n * n - neff * neff
        out.extend([xe, s * xh - neff * xe])  # A, C
    if not geom.has_core:
        out = [0.0, 0.0] + out[:2] + [0.0, 0.0] + out[2:]
    out = np.asarray(out, dtype=complex)
    big = out[np.argmax(np.abs(out))]
    out = out * (abs(big) / big)  # fix global phase: largest coefficient real positive
    return tuple(complex(c) for c in out)


# -- fields ---------------------------------------------------------------

_LAYER_BASES = {0: ((0, False),), 1: ((2, False), (4, True)), 2: ((6, True),)}


def _layer_of(geom, r):
    if r <= geom.d_in / 2.0 and geom.has_core:
        return 0
    if r <= geom.d_out / 2.0:
        return 1
    return 2


def _fields_rho(mode, geom, rho, layer):
    """Six field components (E_r, E_phi, E_z, Z0 H_r, Z0 H_phi, Z0 H_z) at phi = 0."""
    n = geom.indices(mode.wavelength)[layer]
    neff, m = mode.n_eff, mode.azimuthal_order
    rho = np.maximum(np.asarray(rho, dtype=float), 1e-12)
    out = np.zeros((6,) + rho.shape, dtype=complex)
    for offset, sing in _LAYER_BASES[layer]:
        A, C = mode.layer_coefficients[offset], mode.layer_coefficients[offset + 1]
        if A == 0 and C == 0:
            continue
        f, fp, _, s = _radial(n, neff, rho, m, sing)
        out[0] += 1j / s * (neff * A * fp + m * C * f / rho)
        out[1] += -1.0 / s * (m * neff * A * f / rho + C * fp)
        out[2] += A * f
        out[3] += 1.0 / s * (neff * C * fp + m * n * n * A * f / rho)
        out[4] += 1j / s * (m * neff * C * f / rho + n * n * A * fp)
        out[5] += -1j * C * f
    return out


def mode_field(mode: GuidedMode, geom: LayeredFiberGeometry, r: float, phi: float = 0.0,
               layer: Optional[int] = None) -> np.ndarray:
    """Complex ``(E_r, E_phi, E_z, H_r, H_phi, H_z)`` at radius ``r`` (nm), angle ``phi``.

    E in V/m and H in A/m for the 1 W normalisation of ``mode``.  ``layer``
    (0 core, 1 shell, 2 cladding) forces a layer's expansion to be used,
    which is how interface continuity is checked exactly.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    if layer is None:
        layer = _layer_of(geom, r)
    k0 = 2.0 * np.pi / mode.wavelength
    vals = _fields_rho(mode, geom, np.array([k0 * r]), layer)[:, 0]
    vals[3:] /= Z0
    return vals * np.exp(1j * mode.azimuthal_order * phi)


def axial_power(mode: GuidedMode, geom: LayeredFiberGeometry) -> float:
    """Total axial Poynting flux (W) of ``mode`` over the cross-section."""
    k0 = 2.0 * np.pi / mode.wavelength
    k0_m = k0 * 1e9

    def sz(rho, layer):
        e_r, e_p, _, h_r, h_p, _ = _fields_rho(mode, geom, np.array([rho]), layer)[:, 0]
        return float(np.real(e_r * np.conj(h_p) - e_p * np.conj(h_r))) * rho

    rho_a, rho_b = k0 * geom.d_in / 2.0, k0 * geom.d_out / 2.0
    total = 0.0
    opts = dict(limit=200, epsabs=0.0, epsrel=1e-10)
    if geom.has_core:
        total += integrate.quad(sz, 0.0, rho_a, args=(0,), **opts)[0]
    total += integrate.quad(sz, rho_a, rho_b, args=(1,), **opts)[0]
    total += integrate.quad(sz, rho_b, np.inf, args=(2,), **opts)[0]
    # 1/2 Re(E x H*) with H = (Z0 H)/Z0, 2 pi from phi, area element rho drho / k0^2
    return total * np.pi / Z0 / k0_m**2


# -- sweeps ---------------------------------------------------------------

@dataclass(frozen=True)
class NeffPoint:
    d_in: float
    d_out: float
    n_eff: float
    error: str = ""


@dataclass(frozen=True)
class NeffCurve:
    points: Tuple[NeffPoint, ...]
    increasing: bool
    decreasing: bool


def neff_curve(geom_template: LayeredFiberGeometry, sweep: Sequence[Tuple[float, float]],
               wavelength: float, jobs: int = 1, step: float = DEFAULT_SCAN_STEP) -> NeffCurve:
    """Independent fundamental-mode solves over a list of ``(d_in, d_out)`` pairs.

    Failures are recorded per point (``n_eff`` NaN, ``error`` set); the
    monotonicity flags consider only successful points.
    """

    def one(pair):
        d_in, d_out = pair
        try:
            g = geom_template.with_diameters(d_in, d_out)
            return NeffPoint(d_in, d_out, solve_fundamental_mode(g, wavelength, step).n_eff)
        except (NoGuidedMode, AmbiguousBracket, GeometryError) as exc:
            return NeffPoint(d_in, d_out, float("nan"), f"{type(exc).__name__}: {exc}")

    pairs = list(sweep)
    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            points = tuple(pool.map(one, pairs))
    else:
        points = tuple(one(p) for p in pairs)
    good = np.array([p.n_eff for p in points if not math.isnan(p.n_eff)])
    diffs = np.diff(good)
    return NeffCurve(points, bool(np.all(diffs > 0)), bool(np.all(diffs < 0)))


def neff_dispersion(geom: LayeredFiberGeometry, lo: float, hi: float,
                    samples: int = 5) -> Callable[[np.ndarray], np.ndarray]:
    """Cubic interpolant of the fundamental-mode n_eff over [lo, hi] nm."""
    from scipy.interpolate import CubicSpline

    lams = np.linspace(lo, hi, samples)
    neffs = []
    for lam in lams:
        # n_eff falls with wavelength: after the first sample only the band
        # just below the previous root needs scanning
        roots = find_roots(geom, lam, 1, floor=neffs[-1] - 0.05) if neffs else []
        if not roots:
            roots = find_roots(geom, lam, 1)
        if not roots:
            raise NoGuidedMode(f"no guided m=1 mode at {lam} nm")
        neffs.append(roots[0])
    spline = CubicSpline(lams, neffs)
    return lambda lam: spline(np.asarray(lam, dtype=float))


def group_index(geom: LayeredFiberGeometry, wavelength: float, dlam: float = 0.5) -> float:
    """``n_g = n_eff - lambda dn_eff/dlambda`` by central difference."""
    up = solve_fundamental_mode(geom, wavelength + dlam).n_eff
    dn = solve_fundamental_mode(geom, wavelength - dlam).n_eff
    n0 = solve_fundamental_mode(geom, wavelength).n_eff
    return n0 - wavelength * (up - dn) / (2.0 * dlam)
