"""Forward model of the single-shot system.

DOE and multi-slice object in, ideal segmented diffraction dataset out.
The simulation grid equals the detector grid in pixel count; the object
plane pitch follows the lens Fourier-transform relation
pitch_obj = wavelength*f1/(N*detector_pitch), so the final far-field
transform lands exactly on the detector sampling when f1 == f2.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .doe import BeamletGeometry, DoeSpec, beamlet_slice_positions, fermat_positions, render_doe
from .field import ComplexField, ShiftSpec, far_field, invert_coordinates, isp
from .segmentation import SegmentMap, centroidal_voronoi, extract_segments


@dataclass(frozen=True)
class OpticalConfig:
    """Instrument description for the 4f single-shot system."""

    wavelength: float                 # vacuum wavelength, m
    f1: float                         # first lens focal length, m
    f2: float                         # second lens focal length, m
    detector_pixels: tuple[int, int]  # (rows, cols)
    detector_pitch: float             # m / pixel
    delta: float                      # crossover point -> first slice, m
    slice_spacings: tuple[float, ...] = ()  # between consecutive slices, m

    def __post_init__(self):
        for name in ("wavelength", "f1", "f2", "detector_pitch"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"{name} must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if any(s < 0 for s in self.slice_spacings):
            raise ValueError("slice spacings must be non-negative")
        object.__setattr__(self, "detector_pixels", tuple(int(v) for v in self.detector_pixels))
        object.__setattr__(self, "slice_spacings", tuple(float(s) for s in self.slice_spacings))

    @property
    def n_slices(self) -> int:
        return len(self.slice_spacings) + 1

    @property
    def object_pitch(self) -> float:
        """Full-field object-plane pitch (far-field conjugate of the detector)."""
        n = self.detector_pixels[0]
        return self.wavelength * self.f1 / (n * self.detector_pitch)


@dataclass
class ObjectStack:
    """Ordered complex transmission slices on a common grid."""

    slices: list[ComplexField]
    spacings: tuple[float, ...]

    def __post_init__(self):
        if not self.slices:
            raise ValueError("ObjectStack needs at least one slice")
        if len(self.spacings) != len(self.slices) - 1:
            raise ValueError("need exactly n_slices - 1 spacings")
        first = self.slices[0]
        for s in self.slices[1:]:
            if s.shape != first.shape or not math.isclose(s.pitch, first.pitch, rel_tol=1e-12):
                raise ValueError("all slices must share shape and pitch")
        self.spacings = tuple(float(s) for s in self.spacings)

    @property
    def n_slices(self) -> int:
        return len(self.slices)

    @property
    def shape(self):
        return self.slices[0].shape

    @property
    def pitch(self) -> float:
        return self.slices[0].pitch

    def product(self) -> ComplexField:
        """Pointwise product of all slices (the 2D projection)."""
        out = self.slices[0].data.copy()
        for s in self.slices[1:]:
            out = out * s.data
        return self.slices[0].with_data(out)


@dataclass
class PtychoDataset:
    """Segmented diffraction patterns plus the metadata to reconstruct."""

    patterns: list[np.ndarray]
    geometry: BeamletGeometry
    config: OpticalConfig
    segment_size: int
    segment_map_digest: str
    segment_map: SegmentMap | None = field(default=None, repr=False)

    def __post_init__(self):
        for j, p in enumerate(self.patterns):
            if p.shape != (self.segment_size, self.segment_size):
                raise ValueError(f"pattern {j} is not {self.segment_size}^2")
            if not np.all(np.isfinite(p)) or np.any(p < 0):
                raise ValueError(f"pattern {j} has negative or non-finite values")

    @property
    def n_beamlets(self) -> int:
        return len(self.patterns)


def segment_map_digest(segmap: SegmentMap) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(segmap.labels, dtype=np.int32).tobytes())
    h.update(np.ascontiguousarray(segmap.crop_centers, dtype=np.int64).tobytes())
    h.update(int(segmap.segment_size).to_bytes(4, "little"))
    return h.hexdigest()


def oversampling_ratio(spec: DoeSpec, config: OpticalConfig) -> float:
    """sigma = f*lambda/(D*dX) with D the Airy diameter 1.22*lambda*f/r_p.

    The focal length and wavelength cancel: sigma = r_p/(1.22*dX).
    """
    return spec.pinhole_radius / (1.22 * config.detector_pitch)


def illuminate_first_slice(doe: ComplexField, config: OpticalConfig) -> ComplexField:
    """Fourier transform the DOE to the crossover point, then propagate delta.

    Object-space fields are stored in the image-inverted frame, so a
    pinhole at +X walks to +X*z/f and the second Fourier stage lands its
    pattern at detector position +X.  A 4f system has exactly one net
    inversion; placing it here keeps every transverse position positive.
    """
    illum = far_field(doe, config.f1)
    illum = illum.with_data(invert_coordinates(illum.data))
    if config.delta != 0.0:
        illum = isp(illum, ShiftSpec(config.delta))
    return illum


def forward_full_field(illumination: ComplexField, obj: ObjectStack) -> ComplexField:
    """Alternate multiply-by-slice and free-space propagation; return exit wave.

    Propagation uses zero transverse shift: on the full-field grid the
    beamlet walk-off is carried by each beamlet's own tilt phase.
    """
    if illumination.shape != obj.shape or not math.isclose(
        illumination.pitch, obj.pitch, rel_tol=1e-9
    ):
        raise ValueError(
            f"illumination grid {illumination.shape}/{illumination.pitch:.4g} does not match "
            f"object grid {obj.shape}/{obj.pitch:.4g}"
        )
    psi = illumination
    for s, slice_field in enumerate(obj.slices):
        psi = psi.with_data(psi.data * slice_field.data)
        if s < obj.n_slices - 1:
            psi = isp(psi, ShiftSpec(obj.spacings[s]))
    return psi


def detector_seeds(detector_positions: np.ndarray, config: OpticalConfig) -> np.ndarray:
    """Beamlet (X, Y) meter positions -> fractional (row, col) detector pixels."""
    rows, cols = config.detector_pixels
    seeds = np.empty_like(detector_positions)
    seeds[:, 0] = rows // 2 + detector_positions[:, 1] / config.detector_pitch
    seeds[:, 1] = cols // 2 + detector_positions[:, 0] / config.detector_pitch
    return seeds


def simulate_dataset(
    doe_spec: DoeSpec,
    obj: ObjectStack,
    config: OpticalConfig,
    *,
    lloyd_iterations: int = 20,
    segment_size: int | None = None,
    photon_count: float | None = None,
    rng: np.random.Generator | None = None,
) -> PtychoDataset:
    """Full forward pipeline: DOE -> illumination -> exit wave -> segmented dataset.

    Deterministic unless ``photon_count`` enables Poisson sampling of the
    ideal patterns (mean photons per pattern; requires ``rng``).
    """
    if len(config.slice_spacings) != obj.n_slices - 1:
        raise ValueError("config slice_spacings inconsistent with object slice count")
    sigma = oversampling_ratio(doe_spec, config)
    if sigma < 1.0:
        raise ValueError(f"oversampling {sigma:.2f} < 1: diffraction patterns would alias")
    if sigma < 2.0:
        warnings.warn(f"oversampling {sigma:.2f} < 2: marginal sampling", stacklevel=2)

    doe = render_doe(doe_spec, config.detector_pixels, config.detector_pitch, config.wavelength)
    illum = illuminate_first_slice(doe, config)
    exit_wave = forward_full_field(illum, obj)
    detector = far_field(exit_wave, config.f2)
    intensity = np.abs(detector.data) ** 2

    det_pos = fermat_positions(doe_spec)
    seeds = detector_seeds(det_pos, config)
    segmap = centroidal_voronoi(seeds, config.detector_pixels,
                                iterations=lloyd_iterations, segment_size=segment_size)
    patterns = extract_segments(intensity, segmap)

    if photon_count is not None:
        if rng is None:
            raise ValueError("photon_count requires an rng")
        for j, p in enumerate(patterns):
            total = p.sum()
            if total > 0:
                scale = photon_count / total
                patterns[j] = rng.poisson(p * scale).astype(np.float64) / scale

    geometry = BeamletGeometry(
        detector_positions=det_pos,
        slice_positions=beamlet_slice_positions(
            det_pos, config.delta, config.slice_spacings, config.f2
        ),
        segment_labels=segmap.labels,
    )
    return PtychoDataset(
        patterns=patterns,
        geometry=geometry,
        config=config,
        segment_size=segmap.segment_size,
        segment_map_digest=segment_map_digest(segmap),
        segment_map=segmap,
    )
