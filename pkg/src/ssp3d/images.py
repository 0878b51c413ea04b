"""Deterministic PNG emitters for fields, slices and diffraction previews."""

from __future__ import annotations

import colorsys
import math

import numpy as np
from PIL import Image


def save_grayscale(data: np.ndarray, path) -> None:
    """Amplitude-style image: linear map of [0, max] to [0, 255]."""
    arr = np.abs(np.asarray(data)).astype(np.float64)
    peak = arr.max()
    if peak > 0:
        arr = arr / peak
    Image.fromarray((arr * 255.0).round().astype(np.uint8), mode="L").save(path)


def save_log_intensity(intensity: np.ndarray, path, dynamic_range: float = 1e4) -> None:
    """Diffraction preview: log-scaled relative to the pattern peak."""
    arr = np.asarray(intensity, dtype=np.float64)
    peak = arr.max()
    if peak <= 0:
        save_grayscale(arr, path)
        return
    scaled = np.log1p(arr / peak * dynamic_range) / math.log1p(dynamic_range)
    Image.fromarray((scaled * 255.0).round().astype(np.uint8), mode="L").save(path)


def save_phase(data: np.ndarray, path) -> None:
    """Phase image on a cyclic hue wheel; phase 0 maps to red."""
    phase = np.angle(np.asarray(data, dtype=np.complex128))
    hue = np.mod(phase, 2.0 * math.pi) / (2.0 * math.pi)
    lut = np.array(
        [colorsys.hsv_to_rgb(h / 256.0, 1.0, 1.0) for h in range(256)], dtype=np.float64
    )
    idx = np.clip((hue * 256.0).astype(np.int64), 0, 255)
    rgb = (lut[idx] * 255.0).round().astype(np.uint8)
    Image.fromarray(rgb, mode="RGB").save(path)
