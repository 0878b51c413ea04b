"""Run configuration: YAML files with explicit units in the key names.

Every length-valued key carries its unit as a suffix (wavelength_nm,
delta_mm, ...) and is converted to meters on load.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .doe import DoeSpec
from .recon import ReconConfig
from .simulate import OpticalConfig

_UNIT_SCALE = {"nm": 1e-9, "um": 1e-6, "mm": 1e-3, "cm": 1e-2, "m": 1.0}


class ConfigError(ValueError):
    """Raised for missing or malformed configuration fields."""


def _to_meters(key: str, value):
    """Strip a unit suffix from ``key`` and scale ``value`` to meters."""
    stem, _, unit = key.rpartition("_")
    if unit not in _UNIT_SCALE:
        raise ConfigError(f"key {key!r} has no recognized unit suffix")
    scale = _UNIT_SCALE[unit]
    if isinstance(value, (list, tuple)):
        return stem, [float(v) * scale for v in value]
    return stem, float(value) * scale


def _convert_units(section: dict) -> dict:
    """Return a copy with unit-suffixed keys converted to meter values."""
    out = {}
    for key, value in section.items():
        stem, _, unit = key.rpartition("_")
        if unit in _UNIT_SCALE and stem:
            stem, value = _to_meters(key, value)
            out[stem] = value
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    optical: OpticalConfig
    doe: DoeSpec
    recon: ReconConfig
    phantom: dict               # kind + SI-unit parameters, or {"dataset": path}
    output_dir: Path
    seed: int = 0
    lloyd_iterations: int = 20
    segment_size: int | None = None
    photon_count: float | None = None
    analysis: dict = field(default_factory=dict)  # x_dif (m), eta_min, eta_max


def _require(section: dict, name: str, context: str):
    if name not in section:
        raise ConfigError(f"missing {context}.{name}")
    return section[name]


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    opt = _convert_units(_require(raw, "optical", path.name))
    pixels = opt.get("detector_pixels", 512)
    if isinstance(pixels, int):
        pixels = (pixels, pixels)
    try:
        optical = OpticalConfig(
            wavelength=_require(opt, "wavelength", "optical"),
            f1=_require(opt, "f1", "optical"),
            f2=_require(opt, "f2", "optical"),
            detector_pixels=tuple(pixels),
            detector_pitch=_require(opt, "detector_pitch", "optical"),
            delta=opt.get("delta", 0.0),
            slice_spacings=tuple(opt.get("slice_spacings", ())),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: optical: {exc}") from exc

    doe_raw = _convert_units(_require(raw, "doe", path.name))
    try:
        doe = DoeSpec(
            n_pinholes=int(_require(doe_raw, "n_pinholes", "doe")),
            pinhole_radius=_require(doe_raw, "pinhole_radius", "doe"),
            pattern_extent=_require(doe_raw, "pattern_extent", "doe"),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: doe: {exc}") from exc

    rec = raw.get("recon", {})
    try:
        recon = ReconConfig(
            max_iterations=int(rec.get("max_iterations", 300)),
            error_threshold=float(rec.get("error_threshold", 1e-6)),
            update_alpha=float(rec.get("alpha", 1.0)),
            update_beta=float(rec.get("beta", 1.0)),
            probe_update_start=int(rec.get("probe_update_start", 3)),
            beamlet_order=rec.get("beamlet_order", "sequential"),
            shuffle_seed=int(rec.get("shuffle_seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: recon: {exc}") from exc

    phantom = _convert_units(raw.get("phantom", {}))
    sim = raw.get("simulate", {})
    return RunConfig(
        optical=optical,
        doe=doe,
        recon=recon,
        phantom=phantom,
        output_dir=Path(raw.get("output_dir", "out")),
        seed=int(raw.get("seed", 0)),
        lloyd_iterations=int(sim.get("lloyd_iterations", 20)),
        segment_size=sim.get("segment_size"),
        photon_count=sim.get("photon_count"),
        analysis=_convert_units(raw.get("analysis", {})),
    )
