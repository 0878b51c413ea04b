"""Fermat-spiral pinhole DOE and single-shot beamlet geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .field import ComplexField

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
# Golden angle from sqrt(2*pi/theta_g) = phi, i.e. theta_g = 2*pi/phi^2
GOLDEN_ANGLE = 2.0 * math.pi / GOLDEN_RATIO**2


@dataclass(frozen=True)
class DoeSpec:
    """Fermat-spiral pinhole array.

    n_pinholes -- number of pinholes N_p
    pinhole_radius -- radius of each circular pinhole, meters
    pattern_extent -- diameter of the spiral as imaged on the detector, meters
    """

    n_pinholes: int
    pinhole_radius: float
    pattern_extent: float
    layout: str = "fermat_spiral"

    def __post_init__(self):
        if self.n_pinholes < 1:
            raise ValueError("n_pinholes must be >= 1")
        if not (self.pinhole_radius > 0):
            raise ValueError("pinhole_radius must be positive")
        if not (self.pattern_extent > 2 * self.pinhole_radius):
            raise ValueError("pattern_extent must exceed the pinhole diameter")
        if self.layout != "fermat_spiral":
            raise ValueError(f"unsupported DOE layout {self.layout!r}")


@dataclass
class BeamletGeometry:
    """Per-beamlet detector positions and per-slice transverse positions.

    detector_positions -- (N_p, 2) array of (X, Y) in meters on the detector
    slice_positions -- (N_p, N_s, 2) array of (x, y) in meters on each slice
    segment_labels -- integer label map over detector pixels, or None until
        segmentation has run
    """

    detector_positions: np.ndarray
    slice_positions: np.ndarray
    segment_labels: np.ndarray | None = field(default=None)

    @property
    def n_beamlets(self) -> int:
        return self.detector_positions.shape[0]

    @property
    def n_slices(self) -> int:
        return self.slice_positions.shape[1]


def fermat_positions(spec: DoeSpec) -> np.ndarray:
    """Vogel-model Fermat spiral: radius (X/2)*sqrt(n/N_p), angle n*theta_g.

    Returns an (N_p, 2) array of (x, y) in meters; index 0 is at the origin.
    """
    n = np.arange(spec.n_pinholes, dtype=np.float64)
    radius = 0.5 * spec.pattern_extent * np.sqrt(n / spec.n_pinholes)
    angle = n * GOLDEN_ANGLE
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


def render_doe(spec: DoeSpec, grid_shape, pitch: float, wavelength: float) -> ComplexField:
    """Rasterize the DOE as a binary amplitude mask (unit phase).

    A pixel transmits iff its center lies inside a pinhole disk.  Grids
    that under-resolve the pinholes (radius < 2 pixels) are rejected.
    """
    if spec.pinhole_radius < 2.0 * pitch:
        raise ValueError(
            f"pinhole radius {spec.pinhole_radius:.3g} m under-resolved at "
            f"pitch {pitch:.3g} m (need radius >= 2*pitch)"
        )
    rows, cols = grid_shape
    mask = np.zeros((rows, cols), dtype=np.float64)
    r_px = spec.pinhole_radius / pitch
    for x, y in fermat_positions(spec):
        cr = rows // 2 + y / pitch
        cc = cols // 2 + x / pitch
        r0 = max(int(math.floor(cr - r_px)) - 1, 0)
        r1 = min(int(math.ceil(cr + r_px)) + 2, rows)
        c0 = max(int(math.floor(cc - r_px)) - 1, 0)
        c1 = min(int(math.ceil(cc + r_px)) + 2, cols)
        if r0 >= r1 or c0 >= c1:
            continue
        rr = np.arange(r0, r1)[:, None] - cr
        cc_off = np.arange(c0, c1)[None, :] - cc
        mask[r0:r1, c0:c1][rr**2 + cc_off**2 <= r_px**2] = 1.0
    return ComplexField(mask.astype(np.complex128), pitch, wavelength)


def beamlet_slice_positions(
    detector_positions: np.ndarray,
    delta: float,
    slice_spacings,
    f: float,
) -> np.ndarray:
    """Transverse beamlet positions on each object slice.

    First-slice position of beamlet j is (X_j*delta/f, Y_j*delta/f);
    each subsequent slice adds (X_j*dz/f, Y_j*dz/f) for its spacing dz
    (small-angle approximation: dz identical for all beamlets).
    Returns an (N_p, N_s, 2) array in meters.
    """
    if not (f > 0):
        raise ValueError("focal length must be positive")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    pos = np.asarray(detector_positions, dtype=np.float64)
    spacings = np.asarray(slice_spacings, dtype=np.float64)
    z = delta + np.concatenate([[0.0], np.cumsum(spacings)])
    # (N_p, N_s, 2) = outer product of per-beamlet direction and slice depth
    return pos[:, None, :] * (z[None, :, None] / f)


def beamlet_geometry(spec: DoeSpec, delta: float, slice_spacings, f: float) -> BeamletGeometry:
    """Convenience constructor tying the spiral to the slice positions."""
    det = fermat_positions(spec)
    return BeamletGeometry(det, beamlet_slice_positions(det, delta, slice_spacings, f))
