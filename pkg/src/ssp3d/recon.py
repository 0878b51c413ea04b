"""Shifted multi-slice reconstruction for the single-shot geometry.

Per-beamlet windows of the object slices are swept forward with the
inter-slice propagator (window positions follow the beamlet walk-off;
the sub-pixel remainder of each position rides in the propagator's
linear phase), constrained to the measured diffraction magnitudes, and
swept backward with PIE-style object/probe updates.

The windowed grids live at pitch wavelength*f2/(segment_size*detector_pitch),
which makes the modulus constraint a plain unitary DFT with no resampling.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .field import (
    ComplexField,
    ShiftSpec,
    centered_fft2,
    centered_ifft2,
    transfer_function,
)
from .simulate import ObjectStack, PtychoDataset


@dataclass(frozen=True)
class ReconConfig:
    max_iterations: int = 300
    error_threshold: float = 1e-6     # stop when |DEC change| drops below this
    update_alpha: float = 1.0         # object step
    update_beta: float = 1.0          # probe step
    probe_update_start: int = 3       # first iteration that replaces the probe
    beamlet_order: str = "sequential"  # or "shuffled"
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        for name in ("update_alpha", "update_beta"):
            v = getattr(self, name)
            if not (0.0 < v <= 2.0):
                raise ValueError(f"{name} must be in (0, 2]")
        if self.beamlet_order not in ("sequential", "shuffled"):
            raise ValueError("beamlet_order must be 'sequential' or 'shuffled'")


@dataclass
class ReconstructionState:
    probe: ComplexField
    object: ObjectStack
    iteration: int = 0
    error_history: list = field(default_factory=list)  # (iteration, dec, oec or None)


def window_pitch(dataset: PtychoDataset) -> float:
    """Object-plane pitch of the windowed grids: lambda*f2/X_dif."""
    cfg = dataset.config
    return cfg.wavelength * cfg.f2 / (dataset.segment_size * cfg.detector_pitch)


def recon_grid_shape(dataset: PtychoDataset, margin: int = 4) -> tuple[int, int]:
    """Square grid large enough to hold every beamlet window at every slice."""
    pitch = window_pitch(dataset)
    reach = np.max(np.abs(dataset.geometry.slice_positions)) if dataset.geometry.slice_positions.size else 0.0
    r = dataset.segment_size + 2 * (int(math.ceil(reach / pitch)) + margin)
    r += r % 2
    return (r, r)


def init_probe(segments, pitch: float, wavelength: float) -> ComplexField:
    """Probe guess: mean over beamlets of the inverse DFT of each segment.

    Real-valued segments are treated as intensities (amplitude = sqrt(I),
    zero phase); complex segments are used as amplitudes directly.  The
    result is scaled so the probe energy matches the mean segment energy.
    """
    if len(segments) == 0:
        raise ValueError("init_probe needs at least one segment")
    acc = None
    energy = 0.0
    for seg in segments:
        seg = np.asarray(seg)
        if np.iscomplexobj(seg):
            amp = seg.astype(np.complex128)
        else:
            amp = np.sqrt(np.clip(seg, 0.0, None)).astype(np.complex128)
        energy += float(np.sum(np.abs(amp) ** 2))
        term = centered_ifft2(amp)
        acc = term if acc is None else acc + term
    mean = acc / len(segments)
    target = energy / len(segments)
    norm = float(np.sum(np.abs(mean) ** 2))
    if norm == 0.0 or target == 0.0:
        warnings.warn("all-zero segments: probe initialized to zero", stacklevel=2)
        return ComplexField(np.zeros_like(mean) + 0j, pitch, wavelength)
    return ComplexField(mean * math.sqrt(target / norm), pitch, wavelength)


def init_object(n_slices: int, shape, pitch: float, wavelength: float, spacings) -> ObjectStack:
    """Free space at every slice (all ones)."""
    ones = np.ones(shape, dtype=np.complex128)
    return ObjectStack(
        slices=[ComplexField(ones.copy(), pitch, wavelength) for _ in range(n_slices)],
        spacings=tuple(spacings),
    )


def _modulus_raw(exit_data: np.ndarray, measured: np.ndarray) -> np.ndarray:
    spec = centered_fft2(exit_data)
    mag = np.abs(spec)
    eps = 1e-12 * mag.max()
    phase = np.where(mag > eps, spec / np.where(mag > eps, mag, 1.0), 1.0 + 0j)
    return centered_ifft2(np.sqrt(measured) * phase)


def modulus_constraint(exit_wave: ComplexField, measured: np.ndarray) -> ComplexField:
    """Replace Fourier magnitudes with sqrt(measured), keep phases.

    Where the model spectrum is degenerate (|spectrum| below 1e-12 of its
    peak) the phase factor is taken as 1.
    """
    measured = np.asarray(measured, dtype=np.float64)
    if measured.shape != exit_wave.shape:
        raise ValueError("measured shape does not match exit wave")
    if np.any(measured < 0):
        raise ValueError("measured intensity must be non-negative")
    return exit_wave.with_data(_modulus_raw(exit_wave.data, measured))


def pie_update(
    object_window: np.ndarray,
    psi_in: np.ndarray,
    psi_exit_old: np.ndarray,
    psi_exit_new: np.ndarray,
    alpha: float,
    beta: float,
    update_probe: bool,
):
    """ePIE-style joint update from one exit-wave correction.

    Returns (object_window', psi_in').  The object step is skipped with a
    warning when the window is unilluminated (max |psi_in|^2 == 0).
    """
    dpsi = psi_exit_new - psi_exit_old
    denom_obj = float(np.max(np.abs(psi_in) ** 2))
    if denom_obj == 0.0:
        warnings.warn("unilluminated window: object update skipped", stacklevel=2)
        obj_new = object_window.copy()
    else:
        obj_new = object_window + alpha * np.conj(psi_in) * dpsi / denom_obj
    if update_probe:
        denom_probe = float(np.max(np.abs(object_window) ** 2))
        if denom_probe == 0.0:
            psi_new = psi_in.copy()
        else:
            psi_new = psi_in + beta * np.conj(object_window) * dpsi / denom_probe
    else:
        psi_new = psi_in
    return obj_new, psi_new


def _isp_raw(data, pitch, wavelength, shift: ShiftSpec, inverse=False):
    h = transfer_function(data.shape, pitch, wavelength, shift)
    if inverse:
        h = np.conj(h)
    return np.fft.ifft2(np.fft.fft2(data, norm="ortho") * h, norm="ortho")


def _window_plan(state: ReconstructionState, dataset: PtychoDataset, j: int):
    """Integer window bounds and sub-pixel residuals for beamlet j.

    Returns (bounds, frac_m) where bounds[s] = (r0, r1, c0, c1) into the
    full object grid and frac_m[s] = (dx, dy) meters of sub-pixel remainder.
    """
    m = dataset.segment_size
    pitch = state.probe.pitch
    rows, cols = state.object.shape
    pos = dataset.geometry.slice_positions[j]  # (N_s, 2) of (x, y) meters
    bounds, frac_m = [], []
    for s in range(pos.shape[0]):
        crow = rows // 2 + pos[s, 1] / pitch
        ccol = cols // 2 + pos[s, 0] / pitch
        ir, ic = int(round(crow)), int(round(ccol))
        r0, c0 = ir - m // 2, ic - m // 2
        if r0 < 0 or c0 < 0 or r0 + m > rows or c0 + m > cols:
            raise ValueError(
                f"window for beamlet {j} at slice {s} falls outside the object grid"
            )
        bounds.append((r0, r0 + m, c0, c0 + m))
        frac_m.append(((ccol - ic) * pitch, (crow - ir) * pitch))
    return bounds, frac_m


def _forward_sweep(state: ReconstructionState, dataset: PtychoDataset, j: int):
    """Forward model for one beamlet: incident/exit waves at every slice.

    Returns (psi_in, psi_exit, windows, bounds, shifts) where shifts[s] is
    the ISP ShiftSpec used for the transition s -> s+1.
    """
    bounds, frac_m = _window_plan(state, dataset, j)
    pitch = state.probe.pitch
    lam = state.probe.wavelength
    spacings = state.object.spacings
    n_slices = len(bounds)

    psi = state.probe.data
    if frac_m[0] != (0.0, 0.0):
        psi = _isp_raw(psi, pitch, lam, ShiftSpec(0.0, frac_m[0][0], frac_m[0][1]))
    psi_in, psi_exit, windows, shifts = [], [], [], []
    for s in range(n_slices):
        r0, r1, c0, c1 = bounds[s]
        window = state.object.slices[s].data[r0:r1, c0:c1]
        psi_in.append(psi)
        windows.append(window)
        psi_exit.append(psi * window)
        if s < n_slices - 1:
            shift = ShiftSpec(
                spacings[s],
                frac_m[s + 1][0] - frac_m[s][0],
                frac_m[s + 1][1] - frac_m[s][1],
            )
            shifts.append(shift)
            psi = _isp_raw(psi_exit[s], pitch, lam, shift)
    return psi_in, psi_exit, windows, bounds, shifts, frac_m


def beamlet_pass(
    state: ReconstructionState,
    dataset: PtychoDataset,
    beamlet_j: int,
    config: ReconConfig,
    *,
    update_probe: bool = True,
) -> ReconstructionState:
    """One forward/constraint/backward sweep for a single beamlet.

    Mutates and returns ``state``.  The incident wave is updated at every
    slice (it carries the correction backward, as in multi-slice PIE);
    ``update_probe`` gates only whether the slice-1 incident wave replaces
    the stored probe.
    """
    psi_in, psi_exit, windows, bounds, shifts, frac_m = _forward_sweep(state, dataset, beamlet_j)
    pitch = state.probe.pitch
    lam = state.probe.wavelength
    n_slices = len(bounds)

    psi_exit_new = _modulus_raw(psi_exit[-1], dataset.patterns[beamlet_j])
    for s in range(n_slices - 1, -1, -1):
        obj_new, psi_in_new = pie_update(
            windows[s],
            psi_in[s],
            psi_exit[s],
            psi_exit_new,
            config.update_alpha,
            config.update_beta,
            update_probe=(s > 0 or update_probe),
        )
        r0, r1, c0, c1 = bounds[s]
        state.object.slices[s].data[r0:r1, c0:c1] = obj_new
        if s > 0:
            psi_exit_new = _isp_raw(psi_in_new, pitch, lam, shifts[s - 1], inverse=True)
        elif update_probe:
            probe = psi_in_new
            if frac_m[0] != (0.0, 0.0):
                probe = _isp_raw(probe, pitch, lam, ShiftSpec(0.0, -frac_m[0][0], -frac_m[0][1]))
            state.probe = state.probe.with_data(probe)
    return state


def model_intensities(state: ReconstructionState, dataset: PtychoDataset) -> list[np.ndarray]:
    """Far-field intensities predicted by the current state, per beamlet."""
    out = []
    for j in range(dataset.n_beamlets):
        _, psi_exit, _, _, _, _ = _forward_sweep(state, dataset, j)
        out.append(np.abs(centered_fft2(psi_exit[-1])) ** 2)
    return out


def dec(state: ReconstructionState, dataset: PtychoDataset) -> float:
    """Diffraction error complement: 1 - RMS intensity difference.

    Model and measured stacks are each normalized to unit mean intensity
    before differencing.
    """
    model = np.stack(model_intensities(state, dataset))
    meas = np.stack(dataset.patterns)
    m_mean, d_mean = model.mean(), meas.mean()
    if m_mean > 0:
        model = model / m_mean
    if d_mean > 0:
        meas = meas / d_mean
    return 1.0 - float(np.sqrt(np.mean((model - meas) ** 2)))


def oec(recon: ObjectStack, truth: ObjectStack) -> float:
    """Object error complement: 1 - RMS amplitude difference.

    Each reconstructed slice amplitude is first scaled by the
    least-squares scalar against the truth amplitude (removes the global
    probe/object amplitude ambiguity).
    """
    if recon.n_slices != truth.n_slices:
        raise ValueError("slice count mismatch")
    sq_sum = 0.0
    count = 0
    for r, t in zip(recon.slices, truth.slices):
        if r.shape != t.shape:
            raise ValueError(f"slice shape mismatch: {r.shape} vs {t.shape}")
        ra, ta = np.abs(r.data), np.abs(t.data)
        denom = float(np.sum(ra * ra))
        scale = float(np.sum(ra * ta)) / denom if denom > 0 else 1.0
        sq_sum += float(np.sum((scale * ra - ta) ** 2))
        count += ra.size
    return 1.0 - math.sqrt(sq_sum / count)


def reconstruct(
    dataset: PtychoDataset,
    n_slices: int,
    config: ReconConfig = ReconConfig(),
    truth: ObjectStack | None = None,
    *,
    probe: ComplexField | None = None,
    doe_segments=None,
) -> ReconstructionState:
    """Run beamlet passes over all beamlets per iteration until converged.

    The probe is taken from ``probe`` if given, else initialized from
    ``doe_segments`` (segmented DOE images recorded without the object),
    else from the measured patterns themselves (adequate for mostly
    transparent objects).
    """
    if dataset.geometry.n_slices != n_slices:
        raise ValueError(
            f"n_slices = {n_slices} but geometry carries {dataset.geometry.n_slices} slices"
        )
    if len(dataset.config.slice_spacings) != n_slices - 1:
        raise ValueError("config slice_spacings inconsistent with n_slices")

    pitch = window_pitch(dataset)
    lam = dataset.config.wavelength
    if probe is None:
        seeds = doe_segments if doe_segments is not None else dataset.patterns
        probe = init_probe(seeds, pitch, lam)
    obj = init_object(n_slices, recon_grid_shape(dataset), pitch, lam,
                      dataset.config.slice_spacings)
    state = ReconstructionState(probe=probe, object=obj)

    order = np.arange(dataset.n_beamlets)
    rng = np.random.default_rng(config.shuffle_seed)
    prev_dec = None
    for it in range(1, config.max_iterations + 1):
        if config.beamlet_order == "shuffled":
            order = rng.permutation(dataset.n_beamlets)
        allow_probe = it >= config.probe_update_start
        for j in order:
            beamlet_pass(state, dataset, int(j), config, update_probe=allow_probe)
        state.iteration = it
        d = dec(state, dataset)
        entry = (it, d, oec(state.object, truth) if truth is not None else None)
        state.error_history.append(entry)
        if prev_dec is not None and abs(d - prev_dec) < config.error_threshold:
            break
        prev_dec = d
    return state
