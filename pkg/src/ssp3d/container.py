"""Binary dataset container: segmented intensities plus reconstruction metadata.

Layout (all little-endian):

    magic   6 bytes  b"3DSSP\\0"
    version u16      currently 1
    f64     wavelength, f1, f2, detector_pitch, delta
    u32     n_beamlets, n_slices, segment_size, detector_rows, detector_cols
    f64[n_slices - 1]        slice spacings
    f64[n_beamlets * 2]      beamlet detector positions, (x, y) pairs
    32 bytes                 segment-map sha256 digest
    f64[n_beamlets * segment_size^2]   patterns, row-major

The detector shape is carried so readers can validate the digest against
a re-run segmentation.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .doe import BeamletGeometry, beamlet_slice_positions
from .simulate import OpticalConfig, PtychoDataset

MAGIC = b"3DSSP\0"
VERSION = 1


class DataFormatError(ValueError):
    """Raised for unreadable or corrupt dataset containers."""


def write_dataset(dataset: PtychoDataset, path) -> None:
    cfg = dataset.config
    n_p = dataset.n_beamlets
    n_s = cfg.n_slices
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<5d", cfg.wavelength, cfg.f1, cfg.f2,
                             cfg.detector_pitch, cfg.delta))
        fh.write(struct.pack("<5I", n_p, n_s, dataset.segment_size,
                             cfg.detector_pixels[0], cfg.detector_pixels[1]))
        fh.write(np.asarray(cfg.slice_spacings, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.geometry.detector_positions,
                                      dtype="<f8").tobytes())
        fh.write(bytes.fromhex(dataset.segment_map_digest))
        for p in dataset.patterns:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise DataFormatError(f"truncated container: {what} at offset {fh.tell() - len(buf)}")
    return buf


def read_dataset(path) -> PtychoDataset:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(MAGIC), "magic")
        if magic != MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r} at offset 0")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
        if version != VERSION:
            raise DataFormatError(f"{path}: unknown format version {version}")
        wavelength, f1, f2, pitch, delta = struct.unpack("<5d", _read_exact(fh, 40, "header"))
        n_p, n_s, seg, rows, cols = struct.unpack("<5I", _read_exact(fh, 20, "counts"))
        if n_p < 1 or n_s < 1 or seg < 2:
            raise DataFormatError(f"{path}: implausible counts (N_p={n_p}, N_s={n_s}, seg={seg})")
        spacings = np.frombuffer(_read_exact(fh, 8 * (n_s - 1), "spacings"), dtype="<f8")
        pos = np.frombuffer(
            _read_exact(fh, 16 * n_p, "detector positions"), dtype="<f8"
        ).reshape(n_p, 2).copy()
        digest = _read_exact(fh, 32, "digest").hex()
        patterns = []
        for j in range(n_p):
            buf = _read_exact(fh, 8 * seg * seg, f"pattern {j}")
            patterns.append(np.frombuffer(buf, dtype="<f8").reshape(seg, seg).copy())
        if fh.read(1):
            raise DataFormatError(f"{path}: trailing bytes after pattern payload")

    config = OpticalConfig(
        wavelength=wavelength, f1=f1, f2=f2,
        detector_pixels=(rows, cols), detector_pitch=pitch,
        delta=delta, slice_spacings=tuple(spacings),
    )
    geometry = BeamletGeometry(
        detector_positions=pos,
        slice_positions=beamlet_slice_positions(pos, delta, spacings, f2),
    )
    return PtychoDataset(
        patterns=patterns, geometry=geometry, config=config,
        segment_size=int(seg), segment_map_digest=digest,
    )
