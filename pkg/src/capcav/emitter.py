"""Standing-wave and orientation surrogate for emitter-to-fiber coupling.

The channeling efficiency of a dipole in the defect follows the cavity
standing wave along the fiber axis and mixes the x- and y-polarized
responses by Malus' law for in-plane orientations.  A z-oriented dipole
couples only weakly and is represented by a constant floor.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np

POL_AXES = ("x", "y", "z", "in-plane")


@dataclass(frozen=True)
class EmitterPlacement:
    delta_z: float = 0.0  # nm from the defect centre
    radial_offset: float = 0.0  # nm
    theta: float = 0.0  # rad, 0 = y, pi/2 = x
    pol_axis: str = "y"

    def __post_init__(self):
        if self.radial_offset < 0:
            raise ValueError("radial_offset must be >= 0")
        if not 0 <= self.theta <= math.pi / 2:
            raise ValueError("theta must lie in [0, pi/2]")
        if self.pol_axis not in POL_AXES:
            raise ValueError(f"pol_axis must be one of {POL_AXES}")


@dataclass(frozen=True)
class CouplingSurrogate:
    eta_anti_y: float = 0.87
    eta_anti_x: float = 0.71
    eta_node_y: float = 0.01
    eta_node_x: float = 0.03
    eta_z_floor: float = 0.02
    standing_period: float = 244.0  # nm

    def __post_init__(self):
        for name in ("eta_anti_y", "eta_anti_x", "eta_node_y", "eta_node_x", "eta_z_floor"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.eta_anti_y < self.eta_node_y or self.eta_anti_x < self.eta_node_x:
            raise ValueError("anti-node efficiency must not be below the node value")
        if not self.standing_period > 0:
            raise ValueError("standing_period must be > 0")


PAPER_CENTRED = CouplingSurrogate()
# 50 nm off axis: only the z floor is distinguished
PAPER_OFF_CENTRE = replace(PAPER_CENTRED, eta_z_floor=0.04)


def eta_of_orientation(theta: float, eta_y: float, eta_x: float) -> float:
    """``eta_y cos^2(theta) + eta_x sin^2(theta)``."""
    if not 0 <= theta <= math.pi / 2:
        raise ValueError("theta must lie in [0, pi/2]")
    c2 = math.cos(theta) ** 2
    return eta_y * c2 + eta_x * (1.0 - c2)


def _standing(delta_z, anti, node, period):
    return node + (anti - node) * np.cos(np.pi * np.asarray(delta_z, dtype=float) / period) ** 2


def eta_of_position(placement: EmitterPlacement, model: CouplingSurrogate = PAPER_CENTRED) -> float:
    """Efficiency at ``placement``.

    x and y dipoles follow ``node + (anti - node) cos^2(pi dz / period)``;
    in-plane dipoles mix the two by ``theta``; z dipoles sit on the floor.
    """
    pol = placement.pol_axis
    if pol == "z":
        return float(model.eta_z_floor)
    P = model.standing_period
    ey = float(_standing(placement.delta_z, model.eta_anti_y, model.eta_node_y, P))
    ex = float(_standing(placement.delta_z, model.eta_anti_x, model.eta_node_x, P))
    if pol == "y":
        return ey
    if pol == "x":
        return ex
    return eta_of_orientation(placement.theta, ey, ex)


@dataclass(frozen=True, eq=False)
class PositionSweep:
    delta_z: np.ndarray
    eta: np.ndarray
    pol_axis: str
    maxima: Tuple[float, ...]
    minima: Tuple[float, ...]

    def rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.delta_z.tolist(), self.eta.tolist()))


def _extrema(y, sign):
    """Indices into ``y[1:-1]`` of plateau-centred local extrema; the first
    and last samples of ``y`` are padding taken just outside the range."""
    y = sign * np.asarray(y)
    n = len(y)
    if n < 3 or np.ptp(y[1:-1]) == 0:
        return []
    out = []
    i = 1
    while i < n - 1:
        j = i
        while j + 1 < n - 1 and y[j + 1] == y[i]:
            j += 1
        if y[i - 1] < y[i] and y[j + 1] < y[i]:
            out.append((i + j) // 2 - 1)
        i = j + 1
    return out


def position_sweep(model: CouplingSurrogate, z_range: Tuple[float, float], step: float,
                   pol: str = "y", theta: float = 0.0) -> PositionSweep:
    """Tabulate :func:`eta_of_position` over the half-open ``[z0, z1)`` and
    locate extrema (a sample at ``z1`` would duplicate the one at ``z0``
    when the span is a whole number of periods)."""
    if not step > 0:
        raise ValueError("step must be > 0")
    z0, z1 = z_range
    count = max(0, int(math.ceil((z1 - z0) / step - 1e-9)))
    z = z0 + step * np.arange(count)
    at = lambda v: eta_of_position(EmitterPlacement(float(v), theta=theta, pol_axis=pol), model)
    eta = np.array([at(v) for v in z])
    if count:
        padded = np.concatenate([[at(z0 - step)], eta, [at(z[-1] + step)]])
    else:
        padded = eta
    # round away float noise so equal-valued samples form plateaus
    key = np.round(padded, 12)
    maxima = tuple(float(z[i]) for i in _extrema(key, 1))
    minima = tuple(float(z[i]) for i in _extrema(key, -1))
    return PositionSweep(z, eta, pol, maxima, minima)


def write_sweep_csv(sweep: PositionSweep, path, header_lines: Sequence[str] = ()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta_z_nm", "eta"])
        for z, e in sweep.rows():
            w.writerow([f"{z:.9g}", f"{e:.9g}"])
