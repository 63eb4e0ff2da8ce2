"""Declarative scenario configs for the CLI.

Configs are JSON with the exact sections and keys below; unknown keys are
errors, not warnings, so configs double as regression fixtures. Angles are
degrees in the config and radians internally; conversion happens only here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .core import Projector
from .elements import KET_L, KET_R, OpticsGeometry, linear_polarizer_vector, mode_family
from .protocol import EraserSpec, SourceParams
from .simulate import AcquisitionSpec, NoiseSpec


class ConfigError(ValueError):
    """Invalid scenario config; the message names the offending field."""


DEFAULTS = {
    "source": {"a": 1 / math.sqrt(2), "b": 1 / math.sqrt(2), "phase_pol": 0.0,
               "c": 1 / math.sqrt(2), "d": 1 / math.sqrt(2), "phase_spatial": 0.0},
    "eraser": {"variant": "irreversible", "projector_angle_deg": None,
               "circular": "L", "idler_filter_mode": 0},
    "qudit": {"enabled": False, "D": 2, "j": 0},
    "noise": {"qwp_offset_deg": [0.0, 0.0], "retardance_error": 0.0,
              "werner_p": 1.0, "background_rate": 0.0},
    "acquisition": {"duration_s": 300.0, "pair_rate_hz": 4.2, "seed": 0},
    "geometry": {"slit_width_um": 80.0, "separation_um": 250.0, "wavelength_nm": 702.0,
                 "focal_length_mm": 300.0, "detector_slit_um": 50.0},
    "outputs": {"directory": "out", "formats": ["csv", "json"]},
}


def _require_number(value, path, low=None, high=None):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if low is not None and value < low:
        raise ConfigError(f"{path}: {value} below minimum {low}")
    if high is not None and value > high:
        raise ConfigError(f"{path}: {value} above maximum {high}")
    return float(value)


def _merge(section: str, user: dict) -> dict:
    base = dict(DEFAULTS[section])
    for key, value in user.items():
        if key not in base:
            raise ConfigError(f"{section}.{key}: unknown key")
        base[key] = value
    return base


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario: typed objects ready for the pipeline modules."""

    source: SourceParams
    eraser: EraserSpec
    qudit_enabled: bool
    qudit_dimension: int
    qudit_mode: int
    noise: NoiseSpec
    acquisition: AcquisitionSpec
    geometry: OpticsGeometry
    output_directory: str
    output_formats: tuple
    raw: dict = field(repr=False, default_factory=dict)


def _normalized_pair(u, v, path):
    norm = math.hypot(u, v)
    if abs(norm - 1.0) > 1e-6:
        raise ConfigError(f"{path}: coefficients ({u}, {v}) are not normalized")
    return u / norm, v / norm


def parse_config(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level: expected an object")
    for key in data:
        if key not in DEFAULTS:
            raise ConfigError(f"{key}: unknown section")

    src = _merge("source", data.get("source", {}))
    a = _require_number(src["a"], "source.a", 0.0, 1.0)
    b = _require_number(src["b"], "source.b", 0.0, 1.0)
    c = _require_number(src["c"], "source.c", 0.0, 1.0)
    d = _require_number(src["d"], "source.d", 0.0, 1.0)
    phase_pol = _require_number(src["phase_pol"], "source.phase_pol")
    phase_spatial = _require_number(src["phase_spatial"], "source.phase_spatial")
    a, b = _normalized_pair(a, b, "source.a/b")
    c, d = _normalized_pair(c, d, "source.c/d")
    source = SourceParams(a=a, b=b * complex(math.cos(phase_pol), math.sin(phase_pol)),
                          c=c, d=d * complex(math.cos(phase_spatial), math.sin(phase_spatial)))

    ers = _merge("eraser", data.get("eraser", {}))
    variant = ers["variant"]
    if variant not in ("irreversible", "reversible"):
        raise ConfigError(f"eraser.variant: unknown variant {variant!r}")
    projector = None
    if variant == "irreversible":
        angle = ers["projector_angle_deg"]
        circ = ers["circular"]
        if angle is not None and circ is not None:
            raise ConfigError("eraser: give projector_angle_deg or circular, not both")
        if angle is not None:
            angle = _require_number(angle, "eraser.projector_angle_deg", -180.0, 180.0)
            projector = Projector.from_vector(
                linear_polarizer_vector(math.radians(angle)), name=f"lin{angle:g}"
            )
        elif circ in ("L", "R"):
            projector = Projector.from_vector(KET_L if circ == "L" else KET_R, name=circ)
        else:
            raise ConfigError(f"eraser.circular: expected 'L' or 'R', got {circ!r}")
    filter_mode = ers["idler_filter_mode"]
    if filter_mode is not None and (not isinstance(filter_mode, int) or filter_mode < 0):
        raise ConfigError("eraser.idler_filter_mode: expected a nonnegative integer or null")
    eraser = EraserSpec(variant=variant, erasure_projector=projector,
                        idler_spatial_filter=filter_mode)

    qud = _merge("qudit", data.get("qudit", {}))
    if not isinstance(qud["enabled"], bool):
        raise ConfigError("qudit.enabled: expected true or false")
    if not isinstance(qud["D"], int) or not isinstance(qud["j"], int):
        raise ConfigError("qudit.D/qudit.j: expected integers")
    if qud["enabled"]:
        try:
            mode_family(qud["D"])
        except ValueError as exc:
            raise ConfigError(f"qudit.D: {exc}") from exc
        if not 0 <= qud["j"] < qud["D"]:
            raise ConfigError(f"qudit.j: {qud['j']} outside [0, {qud['D']})")

    noi = _merge("noise", data.get("noise", {}))
    offsets = noi["qwp_offset_deg"]
    if not isinstance(offsets, (list, tuple)) or len(offsets) != 2:
        raise ConfigError("noise.qwp_offset_deg: expected a pair of angles")
    noise = NoiseSpec(
        qwp_offset_degrees=(_require_number(offsets[0], "noise.qwp_offset_deg[0]", -45, 45),
                            _require_number(offsets[1], "noise.qwp_offset_deg[1]", -45, 45)),
        qwp_retardance_error=_require_number(noi["retardance_error"],
                                             "noise.retardance_error", -math.pi, math.pi),
        werner_p=_require_number(noi["werner_p"], "noise.werner_p", 0.0, 1.0),
    )
    background = _require_number(noi["background_rate"], "noise.background_rate", 0.0)

    acq = _merge("acquisition", data.get("acquisition", {}))
    if not isinstance(acq["seed"], int) or isinstance(acq["seed"], bool):
        raise ConfigError("acquisition.seed: expected an integer")
    acquisition = AcquisitionSpec(
        duration=_require_number(acq["duration_s"], "acquisition.duration_s", 0.0),
        pair_rate=_require_number(acq["pair_rate_hz"], "acquisition.pair_rate_hz", 0.0),
        background_rate=background,
        seed=acq["seed"],
    )

    geo = _merge("geometry", data.get("geometry", {}))
    try:
        geometry = OpticsGeometry(
            slit_width=_require_number(geo["slit_width_um"], "geometry.slit_width_um", 1e-3) * 1e-6,
            slit_separation=_require_number(geo["separation_um"], "geometry.separation_um", 1e-3) * 1e-6,
            wavelength=_require_number(geo["wavelength_nm"], "geometry.wavelength_nm", 1e-3) * 1e-9,
            focal_length=_require_number(geo["focal_length_mm"], "geometry.focal_length_mm", 1e-3) * 1e-3,
            slit_count=qud["D"] if qud["enabled"] else 2,
            detector_slit_width=_require_number(geo["detector_slit_um"],
                                                "geometry.detector_slit_um", 1e-3) * 1e-6,
        )
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc

    out = _merge("outputs", data.get("outputs", {}))
    if not isinstance(out["directory"], str):
        raise ConfigError("outputs.directory: expected a string")
    formats = out["formats"]
    if (not isinstance(formats, (list, tuple))
            or any(f not in ("csv", "json") for f in formats)):
        raise ConfigError("outputs.formats: expected a list drawn from ['csv', 'json']")

    echo = {section: _merge(section, data.get(section, {})) for section in DEFAULTS}
    return ScenarioConfig(
        source=source,
        eraser=eraser,
        qudit_enabled=qud["enabled"],
        qudit_dimension=qud["D"],
        qudit_mode=qud["j"],
        noise=noise,
        acquisition=acquisition,
        geometry=geometry,
        output_directory=out["directory"],
        output_formats=tuple(formats),
        raw=echo,
    )


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(data)


def with_seed(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    raw = json.loads(json.dumps(config.raw))
    raw["acquisition"]["seed"] = seed
    return parse_config(raw)
