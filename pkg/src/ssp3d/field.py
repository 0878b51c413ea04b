"""Sampled complex wavefields and FFT-based propagation operators.

Conventions used throughout the package:

* spatial frequencies are in cycles/meter, ``k0 = 2*pi/wavelength``
* all DFTs are unitary (``norm="ortho"``), so Parseval holds exactly
* the inter-slice propagator (ISP) works on the unshifted spectrum;
  ``far_field`` returns a centered spectrum (zero frequency at N//2)
* evanescent frequencies are attenuated with exp(-k0*|dz|*sqrt(...))
  regardless of the propagation sign, so neither the ISP nor its
  inverse ever amplifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ShiftSpec:
    """Axial distance dz plus transverse shift (dx, dy), all in meters.

    dz may be negative (back-propagation).  Transverse shifts may be
    any real value; sub-pixel shifts are exact (carried by a linear
    phase in the frequency domain, no interpolation).
    """

    dz: float
    dx: float = 0.0
    dy: float = 0.0

    def __post_init__(self):
        for name in ("dz", "dx", "dy"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"ShiftSpec.{name} must be finite, got {v!r}")

    def reversed(self) -> "ShiftSpec":
        return ShiftSpec(-self.dz, -self.dx, -self.dy)


class ComplexField:
    """A 2D complex wavefield sampled on a square-pixel grid.

    Parameters
    ----------
    data : 2D complex array (rows x cols), row index = y, col index = x
    pitch : meters per pixel (same along both axes)
    wavelength : vacuum wavelength in meters
    """

    __slots__ = ("data", "pitch", "wavelength")

    def __init__(self, data, pitch: float, wavelength: float):
        data = np.asarray(data, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 2:
            raise ValueError(f"field must be 2D with both sides >= 2, got shape {data.shape}")
        if not (pitch > 0):
            raise ValueError(f"pitch must be positive, got {pitch!r}")
        if not (wavelength > 0):
            raise ValueError(f"wavelength must be positive, got {wavelength!r}")
        if not np.all(np.isfinite(data.view(np.float64))):
            raise ValueError("field data contains non-finite values")
        self.data = data
        self.pitch = float(pitch)
        self.wavelength = float(wavelength)

    @property
    def shape(self):
        return self.data.shape

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def energy(self) -> float:
        """Total energy: sum of |value|^2 * pitch^2."""
        return float(np.sum(np.abs(self.data) ** 2) * self.pitch**2)

    def copy(self) -> "ComplexField":
        return ComplexField(self.data.copy(), self.pitch, self.wavelength)

    def with_data(self, data) -> "ComplexField":
        return ComplexField(data, self.pitch, self.wavelength)

    def __repr__(self):
        r, c = self.data.shape
        return f"ComplexField({r}x{c}, pitch={self.pitch:.4g} m, wavelength={self.wavelength:.4g} m)"


def frequency_grid(shape, pitch: float):
    """DFT frequency grids (f_x, f_y) in cycles/meter, standard ordering.

    Zero frequency first, negative frequencies in the upper half;
    spacing 1/(N*pitch) along each axis.  f_x varies along columns,
    f_y along rows; both are returned broadcast to ``shape``.
    """
    rows, cols = shape
    fy = np.fft.fftfreq(rows, d=pitch)
    fx = np.fft.fftfreq(cols, d=pitch)
    return np.broadcast_to(fx[None, :], shape), np.broadcast_to(fy[:, None], shape)


def transfer_function(shape, pitch: float, wavelength: float, shift: ShiftSpec) -> np.ndarray:
    """Free-space angular-spectrum transfer function with transverse shift.

    H(fx, fy) = exp(i*k0*dz*sqrt(1 - (lam*fx)^2 - (lam*fy)^2))
              * exp(-2*pi*i*(fx*dx + fy*dy))

    On the evanescent band ((lam*f)^2 > 1) the square root is imaginary;
    the field is attenuated by exp(-k0*|dz|*sqrt(...)) independent of the
    sign of dz, so the operator never amplifies.
    """
    fx, fy = frequency_grid(shape, pitch)
    k0 = 2.0 * math.pi / wavelength
    s2 = (wavelength * fx) ** 2 + (wavelength * fy) ** 2
    arg = 1.0 - s2
    prop = arg >= 0.0
    phase = np.where(prop, k0 * shift.dz * np.sqrt(np.where(prop, arg, 0.0)), 0.0)
    decay = np.where(prop, 0.0, -k0 * abs(shift.dz) * np.sqrt(np.where(prop, 0.0, -arg)))
    h = np.exp(decay + 1j * phase)
    if shift.dx != 0.0 or shift.dy != 0.0:
        h = h * np.exp(-2j * math.pi * (fx * shift.dx + fy * shift.dy))
    return h


def isp(psi: ComplexField, shift: ShiftSpec) -> ComplexField:
    """Inter-slice propagator: IFFT{ FFT{psi} * H }.

    Grid, pitch and wavelength of the output equal the input; energy on
    the propagating band is conserved to floating tolerance.
    """
    h = transfer_function(psi.shape, psi.pitch, psi.wavelength, shift)
    spec = np.fft.fft2(psi.data, norm="ortho")
    return psi.with_data(np.fft.ifft2(spec * h, norm="ortho"))


def isp_inverse(psi: ComplexField, shift: ShiftSpec) -> ComplexField:
    """Inverse inter-slice propagator: IFFT{ FFT{psi} * conj(H) }.

    Exact inverse of :func:`isp` on the propagating band; on the
    evanescent band both operators attenuate (see module docstring),
    so the round trip is the identity only for band-limited fields.
    """
    h = transfer_function(psi.shape, psi.pitch, psi.wavelength, shift)
    spec = np.fft.fft2(psi.data, norm="ortho")
    return psi.with_data(np.fft.ifft2(spec * np.conj(h), norm="ortho"))


def centered_fft2(data: np.ndarray) -> np.ndarray:
    """Unitary 2D DFT with the array center as origin in both domains."""
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(data), norm="ortho"))


def centered_ifft2(data: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(data), norm="ortho"))


def far_field(psi: ComplexField, focal_length: float) -> ComplexField:
    """Lens Fourier transform: centered unitary DFT with rescaled pitch.

    The output pitch is wavelength*f/(N*input_pitch).  Requires a square
    grid (the output pitch would otherwise differ per axis).

    Note the forward-DFT kernel means a point source at +x produces a
    tilt whose :func:`isp` walk is toward -x; callers that want to work
    in the image-inverted frame should apply :func:`invert_coordinates`
    to the output.
    """
    if not (focal_length > 0):
        raise ValueError(f"focal_length must be positive, got {focal_length!r}")
    rows, cols = psi.shape
    if rows != cols:
        raise ValueError(f"far_field requires a square grid, got {rows}x{cols}")
    out_pitch = psi.wavelength * focal_length / (rows * psi.pitch)
    return ComplexField(centered_fft2(psi.data), out_pitch, psi.wavelength)


def invert_coordinates(data: np.ndarray) -> np.ndarray:
    """Point reflection about the array center (index N//2 maps to itself).

    For a centered field this negates both coordinates, i.e. re-expresses
    the field in the image-inverted frame of a lens.
    """
    return np.roll(data[::-1, ::-1], (1, 1), axis=(0, 1))
