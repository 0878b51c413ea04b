"""Simulation and reconstruction engine for 3D single-shot ptychography.

Models the full single-shot optical system (Fermat-spiral pinhole DOE,
4f relay, segmented detector) to generate multi-slice diffraction
datasets, and reconstructs complex object slices with a shifted
multi-slice phase-retrieval algorithm.  Also provides the analytic
design calculators (axial resolution, overlap, imaging volume) and the
OEC/DEC quality metrics.
"""

from .doe import BeamletGeometry, DoeSpec, beamlet_slice_positions, fermat_positions, render_doe
from .field import ComplexField, ShiftSpec, far_field, frequency_grid, isp, isp_inverse, transfer_function
from .phantoms import make_phantom
from .recon import (
    ReconConfig,
    ReconstructionState,
    beamlet_pass,
    dec,
    init_object,
    init_probe,
    modulus_constraint,
    oec,
    pie_update,
    reconstruct,
)
from .segmentation import SegmentMap, centroidal_voronoi, extract_segments
from .simulate import (
    ObjectStack,
    OpticalConfig,
    PtychoDataset,
    forward_full_field,
    illuminate_first_slice,
    simulate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "BeamletGeometry", "ComplexField", "DoeSpec", "ObjectStack", "OpticalConfig",
    "PtychoDataset", "ReconConfig", "ReconstructionState", "SegmentMap", "ShiftSpec",
    "beamlet_pass", "beamlet_slice_positions", "centroidal_voronoi", "dec",
    "extract_segments", "far_field", "fermat_positions", "forward_full_field",
    "frequency_grid", "illuminate_first_slice", "init_object", "init_probe", "isp",
    "isp_inverse", "make_phantom", "modulus_constraint", "oec", "pie_update",
    "reconstruct", "render_doe", "simulate_dataset", "transfer_function",
]
