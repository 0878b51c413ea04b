"""Analytic design calculators for the single-shot 3D geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass


def axial_resolution(wavelength: float, f: float, x_det: float, x_dif: float) -> float:
    """Minimum resolvable slice separation: 2*lambda*f^2/(X_det*X_dif).

    With X_det == X_dif this is the paraxial depth of field of a
    high-magnification microscope.
    """
    for name, v in (("wavelength", wavelength), ("f", f), ("x_det", x_det), ("x_dif", x_dif)):
        if not (v > 0):
            raise ValueError(f"{name} must be positive")
    if x_dif > x_det:
        raise ValueError("x_dif cannot exceed x_det on a segmented detector")
    return 2.0 * wavelength * f**2 / (x_det * x_dif)


def transverse_resolution(wavelength: float, f: float, x_dif: float) -> float:
    """Object-plane pixel of one segment: lambda*f/X_dif."""
    return wavelength * f / x_dif


def overlap_fraction(beam_radius: float, center_distance: float) -> float:
    """Small-separation approximation of the two-disk overlap fraction.

    A ~ pi*r^2 - 2*r*d, so eta = max(0, 1 - 2*d/(pi*r)).
    """
    if not (beam_radius > 0):
        raise ValueError("beam_radius must be positive")
    if center_distance < 0:
        raise ValueError("center_distance must be non-negative")
    return max(0.0, 1.0 - 2.0 * center_distance / (math.pi * beam_radius))


def exact_overlap_fraction(beam_radius: float, center_distance: float) -> float:
    """Exact two-circle intersection area over the disk area."""
    r, d = beam_radius, center_distance
    if d >= 2.0 * r:
        return 0.0
    area = 2.0 * r**2 * math.acos(d / (2.0 * r)) - 0.5 * d * math.sqrt(4.0 * r**2 - d**2)
    return area / (math.pi * r**2)


def airy_radius(wavelength: float, f: float, r_p: float) -> float:
    """First dark ring of a pinhole's far-field pattern: 0.61*lambda*f/r_p."""
    return 0.61 * wavelength * f / r_p


def axial_bound(
    eta: float,
    wavelength: float,
    f: float,
    x_det: float,
    x_dif: float,
    r_p: float,
    n_pinholes: int,
) -> float:
    """Distance from the crossover point at which the beamlet overlap
    fraction falls to eta:

        z(eta) = pi * 0.61 * dz * X_dif/(2*r_p) * sqrt(N_p) * (1 - eta)

    with dz the axial resolution.
    """
    if not (0.0 <= eta <= 1.0):
        raise ValueError("eta must be in [0, 1]")
    dz = axial_resolution(wavelength, f, x_det, x_dif)
    return math.pi * 0.61 * dz * x_dif / (2.0 * r_p) * math.sqrt(n_pinholes) * (1.0 - eta)


def oversampling(f: float, wavelength: float, beam_diameter: float, pixel_pitch: float) -> float:
    """sigma = f*lambda/(D*dX)."""
    for name, v in (("f", f), ("wavelength", wavelength),
                    ("beam_diameter", beam_diameter), ("pixel_pitch", pixel_pitch)):
        if not (v > 0):
            raise ValueError(f"{name} must be positive")
    return f * wavelength / (beam_diameter * pixel_pitch)


def imaging_volume(
    wavelength: float,
    f: float,
    x_det: float,
    x_dif: float,
    r_p: float,
    n_pinholes: int,
    eta_min: float = 0.6,
    eta_max: float = 0.9,
) -> float:
    """Volume of the truncated cone between z(eta_max) and z(eta_min).

    The cone radius at height z is the beamlet-bundle half-extent
    (X_det/2)*z/f.  Returns cubic meters.
    """
    if not (eta_min < eta_max):
        raise ValueError("eta_min must be below eta_max")
    z_near = axial_bound(eta_max, wavelength, f, x_det, x_dif, r_p, n_pinholes)
    z_far = axial_bound(eta_min, wavelength, f, x_det, x_dif, r_p, n_pinholes)
    h = z_far - z_near
    r1 = 0.5 * x_det * z_near / f
    r2 = 0.5 * x_det * z_far / f
    return math.pi * h / 3.0 * (r1**2 + r1 * r2 + r2**2)


@dataclass(frozen=True)
class DesignReport:
    axial_resolution: float
    transverse_resolution: float
    axial_extent: float
    z_near: float
    z_far: float
    imaging_volume: float
    oversampling: float
    beam_radius: float
    overlap_table: tuple  # (z, eta) pairs over the usable extent

    def as_dict(self) -> dict:
        return {
            "axial_resolution_m": self.axial_resolution,
            "transverse_resolution_m": self.transverse_resolution,
            "axial_extent_m": self.axial_extent,
            "z_near_m": self.z_near,
            "z_far_m": self.z_far,
            "imaging_volume_m3": self.imaging_volume,
            "oversampling": self.oversampling,
            "beam_radius_m": self.beam_radius,
            "overlap_table": [list(row) for row in self.overlap_table],
        }


def design_report(
    wavelength: float,
    f: float,
    x_det: float,
    x_dif: float,
    r_p: float,
    n_pinholes: int,
    pixel_pitch: float,
    eta_min: float = 0.6,
    eta_max: float = 0.9,
    table_points: int = 7,
) -> DesignReport:
    """Assemble every design quantity for one instrument geometry."""
    dz = axial_resolution(wavelength, f, x_det, x_dif)
    r = airy_radius(wavelength, f, r_p)
    z_near = axial_bound(eta_max, wavelength, f, x_det, x_dif, r_p, n_pinholes)
    z_far = axial_bound(eta_min, wavelength, f, x_det, x_dif, r_p, n_pinholes)
    nn = 0.5 * x_det / math.sqrt(n_pinholes)  # nearest-neighbor pinhole spacing
    table = []
    for i in range(table_points):
        z = z_near + (z_far - z_near) * i / max(table_points - 1, 1)
        table.append((z, overlap_fraction(r, nn * z / f)))
    return DesignReport(
        axial_resolution=dz,
        transverse_resolution=transverse_resolution(wavelength, f, x_dif),
        axial_extent=z_far - z_near,
        z_near=z_near,
        z_far=z_far,
        imaging_volume=imaging_volume(wavelength, f, x_det, x_dif, r_p, n_pinholes,
                                      eta_min, eta_max),
        oversampling=oversampling(f, wavelength, 2.0 * r, pixel_pitch),
        beam_radius=r,
        overlap_table=tuple(table),
    )
