"""Run configuration: a flat ``section.key = value`` text format.

Lines hold one assignment each; ``#`` starts a comment.  Units live in the
key names (``_nm``, ``_um``, ``_ghz``, ``_rad``).  Polarization-specific
grating and linewidth keys sit under ``grating.x.*`` / ``grating.y.*`` and
``measurement.x.*`` / ``measurement.y.*``.  A user file is overlaid on the
shipped default file, which can be replaced through ``CAPCAV_DEFAULT_CONFIG``.

The standard-library TOML reader is not available on every supported
Python, and this format needs no dependency.
"""

from __future__ import annotations

import hashlib
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .errors import ConfigError, ConfigSyntaxError
from .materials import material_by_name

DEFAULT_CONFIG_PATH = Path(__file__).with_name("data") / "paper_default.cfg"
ENV_DEFAULT = "CAPCAV_DEFAULT_CONFIG"

SWEEP_PARAMETERS = ("slat_count", "duty_cycle", "d_in_nm", "d_out_nm", "period_nm",
                    "defect_width_nm", "wavelength_nm")
FORMATS = ("csv", "json", "both")

_KEY_RE = re.compile(r"^[a-z][a-z0-9_]*(\.[a-z0-9_]+)+$")

# key -> (kind, constraint); constraint is checked after type conversion
_POL_KEYS = {
    "delta_n": ("float?", "nonneg"),
    "base_offset": ("float?", None),
    "slat_loss": ("float?", "loss"),
    "target_lambda_res_nm": ("float?", "pos"),
    "target_stopband_width_nm": ("float?", "pos"),
    "target_kappa_sc_ghz": ("float?", "nonneg"),
}

SCHEMA: Dict[str, Tuple[str, Optional[str]]] = {
    "geometry.d_in_nm": ("float", "nonneg"),
    "geometry.d_out_nm": ("float", "pos"),
    "geometry.core": ("material", None),
    "geometry.shell": ("material", None),
    "geometry.cladding": ("material", None),
    "geometry.wavelength_nm": ("float", "band"),
    "grating.period_nm": ("float", "pos"),
    "grating.duty_cycle": ("float", "open01"),
    "grating.slat_count": ("int", "even2"),
    "grating.defect_width_nm": ("float?", "pos"),
    "grating.slat_height_um": ("float", "pos"),
    "grating.base_index": ("index", None),
    "grating.polarization": ("choice:x,y", None),
    "grating.dispersion_lo_nm": ("float", "band"),
    "grating.dispersion_hi_nm": ("float", "band"),
    "measurement.x.lambda_res_nm": ("float", "pos"),
    "measurement.x.delta_lambda_nm": ("float", "pos"),
    "measurement.y.lambda_res_nm": ("float", "pos"),
    "measurement.y.delta_lambda_nm": ("float", "pos"),
    "emitter.gamma_ghz": ("float", "pos"),
    "emitter.beta0": ("float", "closed01"),
    "emitter.purcell": ("float", "nonneg"),
    "emitter.lambda_nm": ("float", "pos"),
    "emitter.delta_z_nm": ("float", None),
    "emitter.radial_offset_nm": ("float", "nonneg"),
    "emitter.theta_rad": ("float", "theta"),
    "emitter.pol_axis": ("choice:x,y,z,in-plane", None),
    "sweep.parameter": ("choice:" + ",".join(SWEEP_PARAMETERS), None),
    "sweep.start": ("float", None),
    "sweep.stop": ("float", None),
    "sweep.step": ("float", "pos"),
    "output.directory": ("str", None),
    "output.formats": ("choice:" + ",".join(FORMATS), None),
    "output.svg": ("bool", None),
    "reproduce.kappa_ghz": ("float", "pos"),
    "reproduce.kappa_sc_ghz": ("float", "pos"),
    "reproduce.l_eff_um": ("float", "pos"),
    "reproduce.tolerance_scale": ("float", "nonneg"),
}
for _pol in ("x", "y"):
    for _k, _v in _POL_KEYS.items():
        SCHEMA[f"grating.{_pol}.{_k}"] = _v

TOLERANCE_PREFIX = "tolerance."
OPTIONAL_SECTIONS = ("sweep.",)

_CONSTRAINTS = {
    "pos": (lambda v: v > 0, "must be > 0"),
    "nonneg": (lambda v: v >= 0, "must be >= 0"),
    "open01": (lambda v: 0 < v < 1, "must be in (0,1)"),
    "closed01": (lambda v: 0 <= v <= 1, "must be in [0,1]"),
    "loss": (lambda v: 0 < v <= 1, "must be in (0,1]"),
    "even2": (lambda v: v >= 2 and v % 2 == 0, "must be even and >= 2"),
    "band": (lambda v: 400 <= v <= 1000, "must be in [400,1000] nm"),
    "theta": (lambda v: 0 <= v <= math.pi / 2, "must be in [0,pi/2]"),
}


# -- text layer -------------------------------------------------------------

def parse_pairs(text: str) -> Dict[str, Tuple[str, int]]:
    """``key -> (raw value, line number)``; raises on syntax errors."""
    pairs: Dict[str, Tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigSyntaxError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigSyntaxError(f"malformed key {key!r} (want section.name)", lineno)
        if not value:
            raise ConfigSyntaxError(f"missing value for {key!r}", lineno)
        if key in pairs:
            raise ConfigSyntaxError(f"duplicate key {key!r} (first set on line {pairs[key][1]})", lineno)
        pairs[key] = (value, lineno)
    if not pairs:
        raise ConfigSyntaxError("empty configuration", 1)
    return pairs


def _convert(kind: str, raw: str):
    optional = kind.endswith("?")
    kind = kind.rstrip("?")
    if optional and raw.lower() in ("none", "auto"):
        return None
    if kind == "float":
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("not a finite number")
        return v
    if kind == "int":
        v = float(raw)
        if v != int(v):
            raise ValueError("not an integer")
        return int(v)
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError("not a boolean")
    if kind == "material":
        material_by_name(raw)
        return raw.lower()
    if kind == "index":
        if raw.lower() == "mode":
            return "mode"
        v = float(raw)
        if v < 1:
            raise ValueError("index below 1")
        return v
    if kind.startswith("choice:"):
        options = kind.split(":", 1)[1].split(",")
        if raw not in options:
            raise ValueError(f"must be one of {options}")
        return raw
    return raw


def _typed(pairs, violations, require_all: bool):
    values = {}
    for key, (raw, lineno) in pairs.items():
        if key.startswith(TOLERANCE_PREFIX):
            try:
                v = float(raw)
                if v < 0 or not math.isfinite(v):
                    raise ValueError
                values[key] = v
            except ValueError:
                violations.append(f"line {lineno}: {key} must be a non-negative number")
            continue
        if key not in SCHEMA:
            violations.append(f"line {lineno}: unknown key {key!r}")
            continue
        kind, constraint = SCHEMA[key]
        try:
            v = _convert(kind, raw)
        except ValueError as exc:
            violations.append(f"line {lineno}: {key}: invalid value {raw!r} ({exc})")
            continue
        if v is not None and constraint is not None:
            ok, msg = _CONSTRAINTS[constraint]
            if not ok(v):
                name = key.rsplit(".", 1)[1]
                violations.append(f"line {lineno}: {name} {msg}")
                continue
        values[key] = v
    if require_all:
        for key, (kind, _) in SCHEMA.items():
            if key not in pairs and not kind.endswith("?") and not key.startswith(OPTIONAL_SECTIONS):
                violations.append(f"missing required key {key!r}")
    return values


# -- typed blocks -------------------------------------------------------------

@dataclass(frozen=True)
class GeometryConfig:
    d_in_nm: float
    d_out_nm: float
    core: str
    shell: str
    cladding: str
    wavelength_nm: float

    def to_geometry(self, **overrides):
        from .modes import LayeredFiberGeometry

        d_in = overrides.get("d_in_nm", self.d_in_nm)
        d_out = overrides.get("d_out_nm", self.d_out_nm)
        return LayeredFiberGeometry(d_in, d_out, material_by_name(self.core),
                                    material_by_name(self.shell), material_by_name(self.cladding))


@dataclass(frozen=True)
class PolarizationConfig:
    delta_n: Optional[float] = None
    base_offset: Optional[float] = None
    slat_loss: Optional[float] = None
    target_lambda_res_nm: Optional[float] = None
    target_stopband_width_nm: Optional[float] = None
    target_kappa_sc_ghz: Optional[float] = None


@dataclass(frozen=True)
class GratingConfig:
    period_nm: float
    duty_cycle: float
    slat_count: int
    defect_width_nm: Optional[float]
    slat_height_um: float
    base_index: Union[str, float]
    polarization: str
    dispersion_lo_nm: float
    dispersion_hi_nm: float
    x: PolarizationConfig = PolarizationConfig()
    y: PolarizationConfig = PolarizationConfig()

    @property
    def defect_width(self) -> float:
        return 1.5 * self.period_nm if self.defect_width_nm is None else self.defect_width_nm

    def pol(self, tag: Optional[str] = None) -> PolarizationConfig:
        return getattr(self, tag or self.polarization)


@dataclass(frozen=True)
class Measurement:
    lambda_res_nm: float
    delta_lambda_nm: float


@dataclass(frozen=True)
class EmitterConfig:
    gamma_ghz: float
    beta0: float
    purcell: float
    lambda_nm: float
    delta_z_nm: float
    radial_offset_nm: float
    theta_rad: float
    pol_axis: str


@dataclass(frozen=True)
class SweepConfig:
    parameter: str
    start: float
    stop: float
    step: float

    def values(self) -> List[float]:
        """Inclusive ``start..stop`` in ``step`` increments; a zero-length or
        reversed range has no points."""
        if self.stop <= self.start:
            return []
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        vals = [self.start + i * self.step for i in range(count)]
        return [int(round(v)) for v in vals] if self.parameter == "slat_count" else vals


@dataclass(frozen=True)
class OutputConfig:
    directory: str
    formats: str
    svg: bool


@dataclass(frozen=True)
class ReproduceConfig:
    kappa_ghz: float
    kappa_sc_ghz: float
    l_eff_um: float
    tolerance_scale: float
    tolerances: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig
    grating: GratingConfig
    measurement: Dict[str, Measurement]
    emitter: EmitterConfig
    sweep: Optional[SweepConfig]
    output: OutputConfig
    reproduce: ReproduceConfig
    values: Dict[str, object] = field(default_factory=dict, compare=False, repr=False)

    @property
    def config_hash(self) -> str:
        return config_hash(self.values)


def config_hash(values: Dict[str, object]) -> str:
    """SHA-256 of the canonical ``key=value`` listing (comments and order ignored)."""
    canon = "\n".join(f"{k}={values[k]!r}" for k in sorted(values))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _section(values, prefix):
    n = len(prefix)
    return {k[n:]: v for k, v in values.items() if k.startswith(prefix) and "." not in k[n:]}


def _build(values, violations) -> Optional[RunConfig]:
    g = _section(values, "geometry.")
    if "d_in_nm" in g and "d_out_nm" in g and not g["d_in_nm"] < g["d_out_nm"]:
        violations.append("d_in must be smaller than d_out")
    gr = _section(values, "grating.")
    if "dispersion_lo_nm" in gr and "dispersion_hi_nm" in gr and not gr["dispersion_lo_nm"] < gr["dispersion_hi_nm"]:
        violations.append("dispersion_lo_nm must be below dispersion_hi_nm")
    pol = {p: PolarizationConfig(**_section(values, f"grating.{p}.")) for p in ("x", "y")}
    for p, pc in pol.items():
        if pc.delta_n is None and (pc.target_lambda_res_nm is None or pc.target_stopband_width_nm is None):
            violations.append(f"grating.{p}: give delta_n or both calibration targets")
    sw = _section(values, "sweep.")
    sweep = None
    if sw:
        missing = [k for k in ("parameter", "start", "stop", "step") if k not in sw]
        if missing:
            violations.append(f"sweep block incomplete, missing {missing}")
        else:
            sweep = SweepConfig(**sw)
    if violations:
        return None
    rep = _section(values, "reproduce.")
    tol = {k[len(TOLERANCE_PREFIX):]: v for k, v in values.items() if k.startswith(TOLERANCE_PREFIX)}
    return RunConfig(
        geometry=GeometryConfig(**g),
        grating=GratingConfig(**gr, **pol),
        measurement={p: Measurement(**_section(values, f"measurement.{p}.")) for p in ("x", "y")},
        emitter=EmitterConfig(**_section(values, "emitter.")),
        sweep=sweep,
        output=OutputConfig(**_section(values, "output.")),
        reproduce=ReproduceConfig(**rep, tolerances=tol),
        values=dict(values),
    )


def default_config_path() -> Path:
    return Path(os.environ.get(ENV_DEFAULT, DEFAULT_CONFIG_PATH))


def _default_values() -> Dict[str, object]:
    path = default_config_path()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"cannot read default config {path}: {exc}"]) from None
    violations: List[str] = []
    values = _typed(parse_pairs(text), violations, require_all=True)
    if violations:
        raise ConfigError([f"default config {path}: {v}" for v in violations])
    return values


def parse_config(text: str, use_defaults: bool = True) -> RunConfig:
    """Parse ``text`` into a validated :class:`RunConfig`.

    With ``use_defaults`` the text overrides the shipped default file;
    otherwise every required key must be present.  All violations are
    collected and raised together as one :class:`ConfigError`.
    """
    pairs = parse_pairs(text)
    violations: List[str] = []
    values = _typed(pairs, violations, require_all=not use_defaults)
    if use_defaults:
        merged = _default_values()
        merged.update(values)
        values = merged
    cfg = _build(values, violations)
    if violations:
        raise ConfigError(violations)
    return cfg


def load_config(path=None) -> RunConfig:
    """Read a config file; ``None`` loads the default file alone."""
    if path is None:
        path = default_config_path()
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"cannot read {path}: {exc}"]) from None
        return parse_config(text, use_defaults=False)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    return parse_config(text)


def with_overrides(cfg: RunConfig, **updates) -> RunConfig:
    """Re-validate ``cfg`` with some dotted keys replaced (``geometry__d_in_nm=...``)."""
    values = dict(cfg.values)
    for k, v in updates.items():
        values[k.replace("__", ".")] = v
    violations: List[str] = []
    text = "\n".join(f"{k} = {_render(v)}" for k, v in values.items())
    out_values = _typed(parse_pairs(text), violations, require_all=False)
    result = _build(out_values, violations)
    if violations:
        raise ConfigError(violations)
    return result


def _render(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)
