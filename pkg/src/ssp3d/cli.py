"""Command-line driver: simulate, reconstruct, sweep-separation, analyze, segment.

Exit codes: 0 ok, 1 usage error, 2 data/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import design
from .config import ConfigError, RunConfig, load_run_config
from .container import DataFormatError, read_dataset, write_dataset
from .field import ComplexField
from .images import save_grayscale, save_log_intensity, save_phase
from .phantoms import make_phantom
from .recon import ReconConfig, dec, oec, recon_grid_shape, reconstruct, window_pitch
from .simulate import ObjectStack, OpticalConfig, PtychoDataset, simulate_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _output_dir(run: RunConfig, override) -> Path:
    out = Path(override) if override else Path(os.environ.get("SSP3D_OUTPUT_DIR", run.output_dir))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _phantom_on_grid(run: RunConfig, shape, pitch: float) -> ObjectStack:
    params = dict(run.phantom)
    kind = params.pop("kind", None)
    if kind is None:
        raise ConfigError("phantom.kind is required")
    params.update(grid_shape=shape, pitch=pitch, wavelength=run.optical.wavelength)
    # slice separations default to the instrument's slice spacings so a
    # single optical setting drives both simulation and phantom geometry
    sp = run.optical.slice_spacings
    if sp:
        params.setdefault("separation", sp[0])
        params.setdefault("spacing", sp[0])
        params.setdefault("spacings", list(sp))
    try:
        stack = make_phantom(kind, params)
    except KeyError as exc:
        raise ConfigError(f"phantom: missing parameter {exc.args[0]!r}") from exc
    if stack.spacings != sp:
        raise ConfigError(
            f"phantom slice separations {stack.spacings} conflict with "
            f"optical.slice_spacings {sp}"
        )
    return stack


def _empty_object(run: RunConfig, shape, pitch: float) -> ObjectStack:
    ones = np.ones(shape, dtype=np.complex128)
    n = run.optical.n_slices
    return ObjectStack(
        slices=[ComplexField(ones.copy(), pitch, run.optical.wavelength) for _ in range(n)],
        spacings=run.optical.slice_spacings,
    )


def _simulate_pair(run: RunConfig, obj: ObjectStack | None = None):
    """Simulate the dataset plus the object-free DOE reference dataset."""
    shape = run.optical.detector_pixels
    pitch = run.optical.object_pitch
    if obj is None:
        obj = _phantom_on_grid(run, shape, pitch)
    rng = np.random.default_rng(run.seed) if run.photon_count else None
    dataset = simulate_dataset(
        run.doe, obj, run.optical,
        lloyd_iterations=run.lloyd_iterations, segment_size=run.segment_size,
        photon_count=run.photon_count, rng=rng,
    )
    reference = simulate_dataset(
        run.doe, _empty_object(run, shape, pitch), run.optical,
        lloyd_iterations=run.lloyd_iterations, segment_size=dataset.segment_size,
    )
    return dataset, reference, obj


def cmd_simulate(args) -> int:
    run = load_run_config(args.config)
    out = _output_dir(run, args.output_dir)
    dataset, reference, obj = _simulate_pair(run)
    write_dataset(dataset, out / "dataset.3dssp")
    write_dataset(reference, out / "doe_reference.3dssp")
    for j, p in enumerate(dataset.patterns):
        save_log_intensity(p, out / f"segment_{j:03d}.png")
    for s, sl in enumerate(obj.slices):
        save_grayscale(sl.data, out / f"phantom_slice_{s}_amplitude.png")
    print(f"wrote {dataset.n_beamlets} patterns of {dataset.segment_size}^2 px to {out}")
    return EXIT_OK


def _truth_for(dataset: PtychoDataset, run: RunConfig) -> ObjectStack:
    return _phantom_on_grid(run, recon_grid_shape(dataset), window_pitch(dataset))


def _write_history(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        has_oec = any(h[2] is not None for h in history)
        writer.writerow(["iteration", "dec"] + (["oec"] if has_oec else []))
        for it, d, o in history:
            writer.writerow([it, f"{d:.8g}"] + ([f"{o:.8g}"] if has_oec else []))


def cmd_reconstruct(args) -> int:
    dataset = read_dataset(args.dataset)
    doe_segments = None
    if args.probe_from:
        ref = read_dataset(args.probe_from)
        if ref.segment_size != dataset.segment_size:
            raise DataFormatError("probe reference segment size does not match dataset")
        doe_segments = ref.patterns
    truth = None
    run = None
    if args.truth_config:
        run = load_run_config(args.truth_config)
        truth = _truth_for(dataset, run)
    cfg = ReconConfig(
        max_iterations=args.iterations,
        update_alpha=args.alpha,
        update_beta=args.beta,
        probe_update_start=args.probe_update_start,
    )
    out = Path(args.output_dir or os.environ.get("SSP3D_OUTPUT_DIR", "out"))
    out.mkdir(parents=True, exist_ok=True)
    state = reconstruct(dataset, dataset.geometry.n_slices, cfg,
                        truth=truth, doe_segments=doe_segments)
    for s, sl in enumerate(state.object.slices):
        save_grayscale(sl.data, out / f"slice_{s}_amplitude.png")
        save_phase(sl.data, out / f"slice_{s}_phase.png")
    save_grayscale(state.probe.data, out / "probe_amplitude.png")
    _write_history(out / "errors.csv", state.error_history)
    final = state.error_history[-1] if state.error_history else (0, float("nan"), None)
    print(f"{state.iteration} iterations, final DEC = {final[1]:.6g}" +
          (f", OEC = {final[2]:.6g}" if final[2] is not None else ""))
    return EXIT_OK


def _sweep_one(payload):
    run, separation = payload
    optical = OpticalConfig(
        wavelength=run.optical.wavelength, f1=run.optical.f1, f2=run.optical.f2,
        detector_pixels=run.optical.detector_pixels,
        detector_pitch=run.optical.detector_pitch,
        delta=run.optical.delta,
        slice_spacings=(separation,) * (run.optical.n_slices - 1),
    )
    swept = RunConfig(
        optical=optical, doe=run.doe, recon=run.recon, phantom=run.phantom,
        output_dir=run.output_dir, seed=run.seed,
        lloyd_iterations=run.lloyd_iterations, segment_size=run.segment_size,
        photon_count=run.photon_count, analysis=run.analysis,
    )
    dataset, reference, _ = _simulate_pair(swept)
    truth = _truth_for(dataset, swept)
    state = reconstruct(dataset, optical.n_slices, run.recon,
                        truth=truth, doe_segments=reference.patterns)
    return separation, oec(state.object, truth), dec(state, dataset)


def cmd_sweep(args) -> int:
    run = load_run_config(args.config)
    separations = [float(s) * 1e-6 for s in args.separations_um.split(",")]
    if len(separations) < 2:
        raise ConfigError("sweep needs at least 2 separations")
    out = _output_dir(run, args.output_dir)

    jobs = [(run, s) for s in separations]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]

    decs = np.array([r[2] for r in results])
    span = decs.max() - decs.min()
    norm = (decs - decs.min()) / span if span > 0 else np.ones_like(decs)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["separation_m", "oec", "dec", "dec_normalized"])
        for (sep, o, d), dn in zip(results, norm):
            writer.writerow([f"{sep:.8g}", f"{o:.8g}", f"{d:.8g}", f"{dn:.8g}"])

    seg = run.segment_size
    x_dif = run.analysis.get(
        "x_dif",
        (seg * run.optical.detector_pitch) if seg else
        run.doe.pattern_extent / math.sqrt(run.doe.n_pinholes),
    )
    dz = design.axial_resolution(run.optical.wavelength, run.optical.f2,
                                 run.doe.pattern_extent, x_dif)
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    seps_um = [s * 1e6 for s, _, _ in results]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].plot(seps_um, [o for _, o, _ in results], "o-")
    axes[0].set_xlabel("slice separation (um)")
    axes[0].set_ylabel("final OEC")
    axes[1].plot(seps_um, norm, "o-")
    axes[1].set_xlabel("slice separation (um)")
    axes[1].set_ylabel("normalized DEC")
    for ax in axes:
        ax.axvline(dz * 1e6, color="r", linestyle="--", label="axial resolution")
        ax.legend()
    fig.tight_layout()
    fig.savefig(out / "sweep.png", dpi=120)
    print(f"wrote sweep of {len(results)} separations to {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    run = load_run_config(args.config)
    x_det = run.doe.pattern_extent
    x_dif = run.analysis.get("x_dif", x_det / math.sqrt(run.doe.n_pinholes))
    report = design.design_report(
        wavelength=run.optical.wavelength,
        f=run.optical.f2,
        x_det=x_det,
        x_dif=x_dif,
        r_p=run.doe.pinhole_radius,
        n_pinholes=run.doe.n_pinholes,
        pixel_pitch=run.optical.detector_pitch,
        eta_min=run.analysis.get("eta_min", 0.6),
        eta_max=run.analysis.get("eta_max", 0.9),
    )
    if args.json:
        print(json.dumps(report.as_dict(), indent=2))
    else:
        print(f"axial resolution       {report.axial_resolution * 1e6:10.1f} um")
        print(f"transverse resolution  {report.transverse_resolution * 1e6:10.2f} um")
        print(f"axial extent           {report.axial_extent * 1e2:10.3f} cm"
              f"  (z = {report.z_near * 1e3:.2f} .. {report.z_far * 1e3:.2f} mm)")
        print(f"imaging volume         {report.imaging_volume * 1e9:10.1f} mm^3")
        print(f"oversampling           {report.oversampling:10.2f}")
        print(f"beam radius            {report.beam_radius * 1e6:10.1f} um")
        print("overlap vs z:")
        for z, eta in report.overlap_table:
            print(f"    z = {z * 1e3:8.2f} mm   eta = {eta:.3f}")
    if report.oversampling < 2.0:
        print(f"warning: oversampling {report.oversampling:.2f} < 2", file=sys.stderr)
        if args.strict:
            return EXIT_DATA
    return EXIT_OK


def cmd_segment(args) -> int:
    from .segmentation import centroidal_voronoi

    image = np.load(args.image)
    seeds = np.loadtxt(args.seeds, delimiter=",", ndmin=2)
    segmap = centroidal_voronoi(seeds, image.shape, iterations=args.iterations)
    out = Path(args.output_dir or "out")
    out.mkdir(parents=True, exist_ok=True)
    np.save(out / "labels.npy", segmap.labels)
    np.savetxt(out / "crop_centers.csv", segmap.crop_centers, fmt="%d", delimiter=",")
    save_grayscale(segmap.labels.astype(np.float64) + 1.0, out / "labels.png")
    print(f"{segmap.n_segments} segments, crop size {segmap.segment_size} px -> {out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="ssp3d", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a segmented diffraction dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct slices from a dataset file")
    p.add_argument("dataset")
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--probe-update-start", type=int, default=3)
    p.add_argument("--probe-from", help="object-free reference dataset for the probe guess")
    p.add_argument("--truth-config", help="config whose phantom provides ground truth (adds OEC)")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sweep-separation", help="simulate + reconstruct over slice separations")
    p.add_argument("--config", required=True)
    p.add_argument("--separations-um", required=True,
                   help="comma-separated slice separations in micrometers")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="print the analytic design report")
    p.add_argument("--config", required=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("segment", help="segment a raw detector image (.npy) from a seed list")
    p.add_argument("--image", required=True)
    p.add_argument("--seeds", required=True, help="CSV of row,col seed positions")
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_segment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, DataFormatError, FileNotFoundError) as exc:
        print(f"ssp3d: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"ssp3d: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ArithmeticError as exc:
        print(f"ssp3d: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
