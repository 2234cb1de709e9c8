"""Operator command line: generate datasets, render fields, validate, inspect.

Exit codes: 0 success, 1 validation-suite failure, 2 configuration error,
3 I/O or data-format error. Progress and logs go to stderr; results go to
stdout (single-line JSON with --json).
"""

import argparse
import itertools
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import datagen, gridio
from .container import ContainerFormatError
from .datagen import DatasetConfig, GenerationError, add_awgn, read_dataset
from .emcore import (
    BasisLayout,
    PhysicsConstants,
    TransmitterConfig,
    assemble,
    incident_field,
    received_vector,
    render_field_grid,
    solve_currents,
    total_field,
)
from .geometry import (
    DoiConfig,
    IdxFormatError,
    ShapePrimitive,
    build_scene,
    sample_shape,
    scene_random_shapes,
)
from .reference import disc_series_reference

logger = logging.getLogger(__name__)

MNIST_PATH_ENV = "RFSCAT_MNIST_PATH"

EXIT_OK = 0
EXIT_SUITE_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3

# three conductors of side/diameter 1.2 wavelengths, used by render-field
BUILTIN_SCENES = {
    "fig2": {
        "shapes": [
            {"kind": "square", "center_wavelengths": [-2.2, 1.6], "size_wavelengths": 1.2},
            {"kind": "disc", "center_wavelengths": [1.9, 1.9], "size_wavelengths": 1.2},
            {"kind": "disc", "center_wavelengths": [0.2, -2.1], "size_wavelengths": 1.2},
        ]
    },
}


class CliConfigError(ValueError):
    pass


def _emit(payload: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(payload, sort_keys=True))
    else:
        for key, value in payload.items():
            print(f"{key}: {value}")


def _progress(total: int):
    done = {"n": 0}

    def tick(_index: int) -> None:
        done["n"] += 1
        if done["n"] % 25 == 0 or done["n"] == total:
            end = "\n" if done["n"] == total else ""
            print(f"\r{done['n']}/{total} records", end=end, file=sys.stderr)

    return tick


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------
def cmd_generate(args) -> int:
    mnist_path = args.mnist_path or os.environ.get(MNIST_PATH_ENV)
    if args.recipe == "mnist" and not mnist_path:
        raise CliConfigError(f"mnist recipe needs --mnist-path or ${MNIST_PATH_ENV}")
    config = DatasetConfig(
        recipe=args.recipe,
        count=args.count,
        n_receivers=args.nr,
        master_seed=args.seed,
        wavelength=args.wavelength,
        test_fraction=args.test_fraction,
        image_height=args.image_size,
        image_width=args.image_size,
    )
    logger.info("resolved config: %s", config)
    t0 = time.perf_counter()
    manifest = datagen.generate(
        config,
        args.out,
        mnist_source=mnist_path if args.recipe == "mnist" else None,
        workers=args.threads,
        progress=_progress(config.count),
    )
    elapsed = time.perf_counter() - t0
    _, records = read_dataset(args.out)
    mean_points = float(np.mean([r.point_count for r in records]))
    _emit(
        {
            "out": str(args.out),
            "records": manifest["record_count"],
            "skipped": len(manifest["skipped"]),
            "mean_point_count": round(mean_points, 2),
            "seconds": round(elapsed, 2),
        },
        args.json,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# render-field
# ---------------------------------------------------------------------------
def _load_scene_spec(args) -> dict:
    if args.builtin:
        return BUILTIN_SCENES[args.builtin]
    with open(args.scene_spec, "r", encoding="utf-8") as f:
        spec = json.load(f)
    if "shapes" not in spec or not isinstance(spec["shapes"], list):
        raise CliConfigError("scene spec must contain a 'shapes' list")
    return spec


def scene_from_spec(spec: dict, doi: DoiConfig):
    """Build a scene from a wavelength-portable shape spec."""
    shapes = []
    for entry in spec["shapes"]:
        try:
            shapes.append(
                ShapePrimitive(
                    kind=entry["kind"],
                    center=np.asarray(entry["center_wavelengths"], dtype=np.float64)
                    * doi.wavelength,
                    size=float(entry["size_wavelengths"]) * doi.wavelength,
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise CliConfigError(f"bad scene spec entry {entry!r}: {exc}") from exc
    return build_scene(doi, shapes)


def cmd_render_field(args) -> int:
    if args.grid_res < 2:
        raise CliConfigError("--grid-res must be >= 2")
    spec = _load_scene_spec(args)
    doi = DoiConfig(wavelength=args.wavelength)
    scene = scene_from_spec(spec, doi)
    constants = PhysicsConstants(wavelength=args.wavelength)
    tx = TransmitterConfig.default(args.wavelength)
    op = assemble(BasisLayout.from_scene(scene), constants)
    sol = solve_currents(op, tx)
    raster = render_field_grid(op, sol, tx, args.grid_res, 2.0 * doi.radius)
    pgm_path = Path(f"{args.out}.pgm")
    raw_path = Path(f"{args.out}.f64")
    gridio.write_pgm(pgm_path, raster.values)
    gridio.write_field_grid(raw_path, raster)
    _emit(
        {
            "pgm": str(pgm_path),
            "raw": str(raw_path),
            "grid_res": args.grid_res,
            "scene_points": scene.point_count,
            "field_max": float(raster.values.max()),
        },
        args.json,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------
def _suite_cylinder(wavelength: float) -> dict:
    constants = PhysicsConstants(wavelength=wavelength)
    tx = TransmitterConfig.default(wavelength)
    rx = datagen.place_receivers(64, 5.0 * wavelength)
    errors = {}
    for divisor in (20, 40):
        doi = DoiConfig(wavelength=wavelength, sample_resolution=wavelength / divisor)
        disc = ShapePrimitive(kind="disc", center=np.zeros(2), size=2.0 * wavelength)
        pts = sample_shape(disc, doi)
        op = assemble(
            BasisLayout(centers=pts, pulse_width=doi.sample_resolution), constants
        )
        sol = solve_currents(op, tx)
        e = received_vector(op, sol, tx, rx)
        ref = disc_series_reference(wavelength, rx, tx, constants)
        errors[divisor] = float(np.linalg.norm(e - ref) / np.linalg.norm(ref))
    passed = errors[20] <= 0.05 and errors[40] < errors[20]
    return {
        "suite": "cylinder",
        "rel_l2_error_lambda20": round(errors[20], 5),
        "rel_l2_error_lambda40": round(errors[40], 5),
        "passed": passed,
    }


def _suite_residual(wavelength: float, n_scenes: int = 5) -> dict:
    constants = PhysicsConstants(wavelength=wavelength)
    tx = TransmitterConfig.default(wavelength)
    doi = DoiConfig(wavelength=wavelength)
    worst = 0.0
    for seed in range(n_scenes):
        scene = scene_random_shapes(seed, doi)
        op = assemble(BasisLayout.from_scene(scene), constants)
        sol = solve_currents(op, tx)
        et = incident_field(op.layout.centers, tx, constants)
        er = total_field(op.layout.centers, op, sol, tx)
        worst = max(worst, float(np.max(np.abs(er)) / np.max(np.abs(et))))
    passed = worst <= 1e-8
    return {
        "suite": "residual",
        "max_boundary_residual": f"{worst:.3e}",
        "scenes": n_scenes,
        "passed": passed,
    }


def _suite_noise() -> dict:
    rng = np.random.default_rng(7)
    e = rng.normal(size=100_000) + 1j * rng.normal(size=100_000)
    results = {}
    ok = True
    for snr_db in (0, 10, 20, 30):
        noisy = add_awgn(e, snr_db, noise_seed=snr_db + 1)
        noise = noisy - e
        measured = 10.0 * np.log10(
            np.mean(np.abs(e) ** 2) / np.mean(np.abs(noise) ** 2)
        )
        results[f"snr_{snr_db}db"] = round(float(measured), 3)
        ok = ok and bool(abs(measured - snr_db) <= 0.1)
    results.update({"suite": "noise", "passed": ok})
    return results


def cmd_validate(args) -> int:
    suites = {
        "cylinder": lambda: _suite_cylinder(args.wavelength),
        "residual": lambda: _suite_residual(args.wavelength),
        "noise": _suite_noise,
    }
    report = suites[args.suite]()
    _emit(report, args.json)
    return EXIT_OK if report["passed"] else EXIT_SUITE_FAILED


# ---------------------------------------------------------------------------
# inspect
# ---------------------------------------------------------------------------
def cmd_inspect(args) -> int:
    manifest, records = read_dataset(args.infile)
    payload = {
        "records": manifest["record_count"],
        "n_receivers": manifest["n_receivers"],
        "wavelength": manifest["wavelength"],
        "recipe": manifest["recipe"],
        "image_size": f"{manifest['image_height']}x{manifest['image_width']}",
    }
    if args.index is not None:
        if not 0 <= args.index < manifest["record_count"]:
            raise CliConfigError(
                f"--index {args.index} out of range [0, {manifest['record_count']})"
            )
        record = next(itertools.islice(records, args.index, None))
        payload.update(
            {
                "index": record.index,
                "split": record.split,
                "point_count": record.point_count,
                "e_mean_mag": float(np.mean(np.abs(record.e))),
            }
        )
        if args.dump_prefix:
            target_path = f"{args.dump_prefix}-target.pgm"
            emag_path = f"{args.dump_prefix}-emag.pgm"
            gridio.write_pgm(target_path, record.target.values)
            gridio.write_pgm(emag_path, np.abs(record.e)[None, :])
            payload.update({"target_pgm": target_path, "emag_pgm": emag_path})
    _emit(payload, args.json)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfscat",
        description="2D RF imaging forward solver and dataset factory",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="produce a dataset container")
    gen.add_argument("--recipe", choices=datagen.RECIPES, required=True)
    gen.add_argument("--count", type=int, default=10_000)
    gen.add_argument("--nr", type=int, default=64, help="receiver count")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--mnist-path", default=None)
    gen.add_argument("--wavelength", type=float, default=0.125)
    gen.add_argument("--test-fraction", type=float, default=0.2)
    gen.add_argument(
        "--image-size", type=int, default=None,
        help="square target raster size (default: 28 mnist, 128 shapes)",
    )
    gen.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    gen.add_argument("--json", action="store_true")
    gen.set_defaults(func=cmd_generate)

    ren = sub.add_parser("render-field", help="render |E_r| over the domain")
    group = ren.add_mutually_exclusive_group(required=True)
    group.add_argument("--scene-spec", help="JSON shape spec path")
    group.add_argument("--builtin", choices=sorted(BUILTIN_SCENES))
    ren.add_argument("--grid-res", type=int, default=256)
    ren.add_argument("--out", required=True, help="output path prefix")
    ren.add_argument("--wavelength", type=float, default=0.125)
    ren.add_argument("--json", action="store_true")
    ren.set_defaults(func=cmd_render_field)

    val = sub.add_parser("validate", help="run physics validation suites")
    val.add_argument("--suite", choices=("cylinder", "residual", "noise"), required=True)
    val.add_argument("--wavelength", type=float, default=0.125)
    val.add_argument("--json", action="store_true")
    val.set_defaults(func=cmd_validate)

    ins = sub.add_parser("inspect", help="summarize a dataset container")
    ins.add_argument("--in", dest="infile", required=True)
    ins.add_argument("--index", type=int, default=None)
    ins.add_argument("--dump-prefix", default=None)
    ins.add_argument("--json", action="store_true")
    ins.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContainerFormatError, IdxFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
