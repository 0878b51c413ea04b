"""Centroidal Voronoi detector segmentation and per-beamlet extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SegmentMap:
    """Assignment of detector pixels to beamlets plus square crop windows.

    labels -- int32 array over detector pixels; -1 = unassigned
    segment_size -- side (pixels) of the square crop, common to all beamlets
    crop_centers -- (N_p, 2) int array of (row, col) crop centers
    """

    labels: np.ndarray
    segment_size: int
    crop_centers: np.ndarray

    @property
    def n_segments(self) -> int:
        return self.crop_centers.shape[0]


def _nearest_labels(shape, seeds: np.ndarray, block: int = 64) -> np.ndarray:
    """Label each pixel with the index of its nearest seed (Euclidean).

    Ties go to the lower seed index (argmin keeps the first minimum).
    Processed in row blocks to bound memory on large detectors.
    """
    rows, cols = shape
    labels = np.empty((rows, cols), dtype=np.int32)
    c = np.arange(cols, dtype=np.float64)
    for r0 in range(0, rows, block):
        r1 = min(r0 + block, rows)
        r = np.arange(r0, r1, dtype=np.float64)
        # (n_seeds, block, cols) squared distances
        d2 = (r[None, :, None] - seeds[:, 0, None, None]) ** 2 + (
            c[None, None, :] - seeds[:, 1, None, None]
        ) ** 2
        labels[r0:r1] = np.argmin(d2, axis=0)
    return labels


def _centroids(labels: np.ndarray, n: int, fallback: np.ndarray) -> np.ndarray:
    """Mean (row, col) per region; empty regions keep their previous seed."""
    rows, cols = labels.shape
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=n).astype(np.float64)
    rr = np.bincount(flat, weights=np.repeat(np.arange(rows), cols), minlength=n)
    cc = np.bincount(flat, weights=np.tile(np.arange(cols), rows), minlength=n)
    out = fallback.astype(np.float64).copy()
    nonempty = counts > 0
    out[nonempty, 0] = rr[nonempty] / counts[nonempty]
    out[nonempty, 1] = cc[nonempty] / counts[nonempty]
    return out


def _max_square_size(centers: np.ndarray, shape) -> int:
    """Largest even side such that squares at the centers are disjoint
    and fully inside the detector."""
    rows, cols = shape
    n = centers.shape[0]
    limit = min(rows, cols)
    for i in range(n):
        cr, cc = centers[i]
        limit = min(limit, 2 * cr, 2 * (rows - cr), 2 * cc, 2 * (cols - cc))
        for j in range(i + 1, n):
            linf = max(abs(cr - centers[j, 0]), abs(cc - centers[j, 1]))
            limit = min(limit, linf)
    size = int(limit)
    return size - (size % 2)


def centroidal_voronoi(seeds, detector_shape, iterations: int = 20,
                       segment_size: int | None = None) -> SegmentMap:
    """Lloyd's algorithm on the detector pixel grid.

    Each pixel is assigned to its nearest seed, each seed is replaced by
    its region centroid, repeated ``iterations`` times; the final
    assignment is returned with the final seeds (rounded to pixels) as
    crop centers.  ``iterations=0`` gives the plain Voronoi partition of
    the seeds with the crops centered on the seeds themselves, so the
    crop windows stay on the beamlet patterns.

    segment_size defaults to the largest even square that keeps all
    crops disjoint and in-bounds.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=np.float64))
    if seeds.ndim != 2 or seeds.shape[1] != 2:
        raise ValueError("seeds must be an (n, 2) array of (row, col)")
    n = seeds.shape[0]
    if len(np.unique(seeds, axis=0)) != n:
        raise ValueError("duplicate seeds")
    rows, cols = detector_shape
    if np.any(seeds[:, 0] < 0) or np.any(seeds[:, 0] > rows - 1) or \
       np.any(seeds[:, 1] < 0) or np.any(seeds[:, 1] > cols - 1):
        raise ValueError("seeds must lie inside the detector")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")

    sites = seeds.copy()
    labels = _nearest_labels(detector_shape, sites)
    for _ in range(iterations):
        sites = _centroids(labels, n, sites)
        labels = _nearest_labels(detector_shape, sites)

    centers = np.rint(sites).astype(np.int64)
    if segment_size is None:
        segment_size = _max_square_size(centers, detector_shape)
        if segment_size < 2:
            raise ValueError("no usable segment size: crop centers too close or too near an edge")
    return SegmentMap(labels=labels, segment_size=int(segment_size), crop_centers=centers)


def crop_bounds(segmap: SegmentMap, j: int):
    """Half-open (r0, r1, c0, c1) bounds of beamlet j's crop window."""
    half = segmap.segment_size // 2
    cr, cc = segmap.crop_centers[j]
    return cr - half, cr - half + segmap.segment_size, cc - half, cc - half + segmap.segment_size


def extract_segments(intensity: np.ndarray, segmap: SegmentMap) -> list[np.ndarray]:
    """Square per-beamlet crops with pixels owned by other beamlets zeroed.

    Raises if any crop extends past the detector edge, naming the beamlet.
    """
    intensity = np.asarray(intensity, dtype=np.float64)
    if intensity.shape != segmap.labels.shape:
        raise ValueError(
            f"intensity shape {intensity.shape} != detector shape {segmap.labels.shape}"
        )
    if np.any(intensity < 0):
        raise ValueError("intensity must be non-negative")
    rows, cols = intensity.shape
    out = []
    for j in range(segmap.n_segments):
        r0, r1, c0, c1 = crop_bounds(segmap, j)
        if r0 < 0 or c0 < 0 or r1 > rows or c1 > cols:
            raise ValueError(f"crop for beamlet {j} extends past the detector edge")
        crop = intensity[r0:r1, c0:c1].copy()
        owner = segmap.labels[r0:r1, c0:c1]
        crop[(owner != j) & (owner >= 0)] = 0.0
        out.append(crop)
    return out


def within_region_ssd(labels: np.ndarray, centers: np.ndarray) -> float:
    """Total squared pixel-to-center distance; Lloyd never increases it."""
    rows, cols = labels.shape
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    cr = centers[labels, 0]
    ccen = centers[labels, 1]
    return float(np.sum((rr - cr) ** 2 + (cc - ccen) ** 2))
