"""Procedural multi-slice phantom objects for simulation and testing."""

from __future__ import annotations

import math

import numpy as np

from .field import ComplexField
from .simulate import ObjectStack

PHANTOM_KINDS = ("hair_cross", "broken_loop", "bar_pair", "disk_stack")


def _coords(shape, pitch):
    """Physical (x, y) meter grids with the origin at the array center."""
    rows, cols = shape
    y = (np.arange(rows) - rows // 2)[:, None] * pitch
    x = (np.arange(cols) - cols // 2)[None, :] * pitch
    return x, y


def _check_feature(size_m: float, pitch: float, name: str):
    if size_m < 2.0 * pitch:
        raise ValueError(
            f"{name} = {size_m:.3g} m is smaller than 2 object-plane pixels "
            f"(pitch {pitch:.3g} m)"
        )


def _slice(mask: np.ndarray, pitch, wavelength, transmission: complex) -> ComplexField:
    data = np.ones(mask.shape, dtype=np.complex128)
    data[mask] = transmission
    return ComplexField(data, pitch, wavelength)


def make_phantom(kind: str, params: dict) -> ObjectStack:
    """Deterministic test objects.

    Common params: grid_shape (rows, cols), pitch and wavelength in meters,
    optional transmission (complex value inside features, default 0 = opaque).

    hair_cross -- bar_width, separation: opaque vertical bar on slice 1,
        horizontal bar on slice 2.
    broken_loop -- radius, thickness, spacings (2 values): three 120-degree
        arcs, one per slice, whose 2D projection is the full ring.
    bar_pair -- bar_width, bar_gap, n_bars, separation: n_bars vertical bars
        on slice 1, horizontal on slice 2.
    disk_stack -- radius, n_slices, spacing: one centered disk per slice.
    """
    if kind not in PHANTOM_KINDS:
        raise ValueError(f"unknown phantom kind {kind!r}; choose one of {PHANTOM_KINDS}")
    shape = tuple(params["grid_shape"])
    pitch = float(params["pitch"])
    wavelength = float(params["wavelength"])
    t = complex(params.get("transmission", 0.0))
    x, y = _coords(shape, pitch)

    if kind == "hair_cross":
        w = float(params["bar_width"])
        _check_feature(w, pitch, "bar_width")
        masks = [np.abs(x) < w / 2, np.abs(y) < w / 2]
        spacings = (float(params["separation"]),)

    elif kind == "broken_loop":
        radius = float(params["radius"])
        thickness = float(params["thickness"])
        _check_feature(thickness, pitch, "thickness")
        _check_feature(radius, pitch, "radius")
        r = np.hypot(x, y)
        ring = np.abs(r - radius) < thickness / 2
        theta = np.mod(np.arctan2(y, x), 2 * math.pi)
        masks = []
        for s in range(3):
            lo, hi = s * 2 * math.pi / 3, (s + 1) * 2 * math.pi / 3
            masks.append(ring & (theta >= lo) & (theta < hi))
        spacings = tuple(float(v) for v in params["spacings"])
        if len(spacings) != 2:
            raise ValueError("broken_loop needs exactly 2 spacings")

    elif kind == "bar_pair":
        w = float(params["bar_width"])
        gap = float(params["bar_gap"])
        n_bars = int(params.get("n_bars", 3))
        _check_feature(w, pitch, "bar_width")
        offsets = (np.arange(n_bars) - (n_bars - 1) / 2) * gap
        vert = np.zeros(shape, dtype=bool)
        horiz = np.zeros(shape, dtype=bool)
        for o in offsets:
            vert |= np.abs(x - o) < w / 2
            horiz |= np.abs(y - o) < w / 2
        masks = [vert, horiz]
        spacings = (float(params["separation"]),)

    else:  # disk_stack
        radius = float(params["radius"])
        _check_feature(radius, pitch, "radius")
        n_slices = int(params.get("n_slices", 2))
        disk = np.hypot(x, y) < radius
        masks = [disk] * n_slices
        spacings = (float(params["spacing"]),) * (n_slices - 1)

    masks = [np.broadcast_to(m, shape).copy() for m in masks]
    slices = [_slice(m, pitch, wavelength, t) for m in masks]
    return ObjectStack(slices=slices, spacings=spacings)


def phantom_masks(kind: str, params: dict) -> list[np.ndarray]:
    """Boolean feature masks per slice (truth masks for correlation tests)."""
    stack = make_phantom(kind, params)
    return [np.abs(s.data - 1.0) > 1e-9 for s in stack.slices]
