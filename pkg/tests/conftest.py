import math

import numpy as np
import pytest

from ssp3d.doe import BeamletGeometry, beamlet_slice_positions
from ssp3d.field import ComplexField, ShiftSpec, far_field, isp
from ssp3d.recon import ReconstructionState, recon_grid_shape, window_pitch
from ssp3d.segmentation import centroidal_voronoi, extract_segments
from ssp3d.simulate import (
    ObjectStack,
    OpticalConfig,
    PtychoDataset,
    forward_full_field,
    illuminate_first_slice,
    segment_map_digest,
)


def band_limited_field(shape, pitch, wavelength, rng, cutoff=0.5):
    """Random field whose spectrum is zero outside (lam*f)^2 < cutoff^2.

    cutoff < 1 keeps it strictly inside the propagating band so the
    ISP round trip is exact.
    """
    rows, cols = shape
    fy = np.fft.fftfreq(rows, d=pitch)[:, None]
    fx = np.fft.fftfreq(cols, d=pitch)[None, :]
    keep = (wavelength * fx) ** 2 + (wavelength * fy) ** 2 < cutoff**2
    spec = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * keep
    return ComplexField(np.fft.ifft2(spec, norm="ortho"), pitch, wavelength)


def rel_rms(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2) / np.sum(np.abs(b) ** 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_transmission(shape, cutoff_bins, rng, contrast=0.3):
    """Mostly transparent slice: 1 + band-limited complex perturbation."""
    spec = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    k = [np.abs(np.fft.fftfreq(n) * n) for n in shape]
    keep = (k[0][:, None] < cutoff_bins) & (k[1][None, :] < cutoff_bins)
    fld = np.fft.ifft2(np.fft.fft2(spec) * keep)
    return 1.0 + contrast * fld / np.abs(fld).max()


def manual_single_beamlet_dataset(col_px, spacings, rng, n=256, m=128,
                                  wavelength=532e-9, focal=0.05, det_pitch=5.3e-6,
                                  pinhole_radius=32e-6, cutoff_bins=None, delta=None):
    """Simulate one off-axis pinhole end to end with an explicit crop center.

    Bypasses the Fermat layout so the beamlet column is a free parameter.
    Returns (dataset, illumination, slices).
    """
    p_win = wavelength * focal / (m * det_pitch)
    if delta is None:
        # default: first-slice position lands on an exact window-pixel multiple
        delta = p_win * focal / (64 * det_pitch)
    cfg = OpticalConfig(wavelength=wavelength, f1=focal, f2=focal,
                        detector_pixels=(n, n), detector_pitch=det_pitch,
                        delta=delta, slice_spacings=tuple(spacings))
    yy, xx = np.mgrid[0:n, 0:n]
    r_px = pinhole_radius / det_pitch
    mask = ((yy - n // 2) ** 2 + (xx - (n // 2 + col_px)) ** 2 <= r_px**2).astype(float)
    illum = illuminate_first_slice(ComplexField(mask, det_pitch, wavelength), cfg)

    if cutoff_bins is None:
        cutoff_bins = m // 4
    slices = [
        ComplexField(smooth_transmission((n, n), cutoff_bins, rng), cfg.object_pitch, wavelength)
        for _ in range(len(spacings) + 1)
    ]
    exit_wave = forward_full_field(illum, ObjectStack(slices=slices, spacings=tuple(spacings)))
    intensity = np.abs(far_field(exit_wave, focal).data) ** 2

    segmap = centroidal_voronoi(np.array([[n // 2, n // 2 + col_px]], float),
                                (n, n), iterations=0, segment_size=m)
    segmap.crop_centers[0] = [n // 2, n // 2 + col_px]
    patterns = extract_segments(intensity, segmap)
    det_pos = np.array([[col_px * det_pitch, 0.0]])
    geometry = BeamletGeometry(det_pos,
                               beamlet_slice_positions(det_pos, delta, tuple(spacings), focal),
                               segmap.labels)
    dataset = PtychoDataset(patterns=patterns, geometry=geometry, config=cfg,
                            segment_size=m, segment_map_digest=segment_map_digest(segmap),
                            segment_map=segmap)
    return dataset, illum, slices


def decimated_truth_state(dataset, illum, slices):
    """Windowed ground-truth state equivalent to a full-field simulation.

    The recon-grid slices are point samples of the full slices on the
    window-pitch lattice (wrapped, matching the periodic full-field DFT);
    the probe is the demodulated illumination window around the first
    slice position, un-shifted by the sub-pixel window residual.
    """
    cfg = dataset.config
    n = cfg.detector_pixels[0]
    m = dataset.segment_size
    p_obj = cfg.object_pitch
    p_win = window_pitch(dataset)
    k = int(round(p_win / p_obj))
    big = recon_grid_shape(dataset)[0]
    off = big // 2
    lattice = (n // 2 + k * (np.arange(big) - off)) % n
    truth = [ComplexField(s.data[np.ix_(lattice, lattice)].astype(complex), p_win, cfg.wavelength)
             for s in slices]

    cr, cc = dataset.segment_map.crop_centers[0]
    x = (np.arange(n) - n // 2)[None, :] * p_obj
    y = (np.arange(n) - n // 2)[:, None] * p_obj
    demod = illum.data * np.exp(
        -2j * math.pi * (x * (cc - n // 2) / (n * p_obj) + y * (cr - n // 2) / (n * p_obj))
    )
    pos = dataset.geometry.slice_positions[0, 0]
    ci = int(round(off + pos[1] / p_win))
    cj = int(round(off + pos[0] / p_win))
    frac_y = (off + pos[1] / p_win) - ci
    frac_x = (off + pos[0] / p_win) - cj
    ur = (n // 2 + k * (ci - m // 2 + np.arange(m) - off)) % n
    uc = (n // 2 + k * (cj - m // 2 + np.arange(m) - off)) % n
    probe = ComplexField(demod[np.ix_(ur, uc)], p_win, cfg.wavelength)
    if frac_x != 0.0 or frac_y != 0.0:
        probe = isp(probe, ShiftSpec(0.0, -frac_x * p_win, -frac_y * p_win))
    return ReconstructionState(
        probe=probe,
        object=ObjectStack(slices=[t.with_data(t.data.copy()) for t in truth],
                           spacings=tuple(cfg.slice_spacings)),
    )
