"""Reproducible dataset production: receivers, forward solves, AWGN, I/O.

A dataset is a function of (DatasetConfig, MNIST source bytes) only: every
record derives its RNG stream and train/test split from a hash of
(master_seed, record index), so containers are byte-identical across runs
and split assignments never change when the record count grows. Containers
store noise-free received vectors; AWGN is injected at read/training time.
"""

import hashlib
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from . import container as cformat
from .emcore import (
    BasisLayout,
    PhysicsConstants,
    TransmitterConfig,
    assemble,
    incident_field,
    received_vector,
    solve_currents,
)
from .geometry import (
    DoiConfig,
    ImageRaster,
    Scene,
    ShapePrimitive,
    build_scene,
    load_mnist_idx,
    rasterize,
    scene_from_mnist,
    scene_random_shapes,
)

logger = logging.getLogger(__name__)

RECIPES = ("mnist", "shapes")
# shapes scenes are sampled on a sqrt(2)-coarser lattice than the geometry
# default; this pitch reproduces the target mean point count (~650) for
# shape sizes in [wl, 1.2*wl]
SHAPES_PITCH_FACTOR = float(np.sqrt(2.0))
MAX_SKIP_FRACTION = 0.01


class GenerationError(RuntimeError):
    """Raised when dataset generation cannot proceed or skips too much."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ReceiverArray:
    """Equally spaced receivers on the circle of the DoI radius."""

    count: int
    positions: np.ndarray  # (count, 2)
    tx: TransmitterConfig


@dataclass
class DatasetConfig:
    """Recipe and physics parameters for one dataset container."""

    recipe: str
    count: int = 10_000
    test_fraction: float = 0.2
    n_receivers: int = 64
    master_seed: int = 0
    wavelength: float = 0.125
    image_height: Optional[int] = None
    image_width: Optional[int] = None
    mnist_threshold: int = 128

    def __post_init__(self):
        if self.recipe not in RECIPES:
            raise ValueError(f"unknown recipe {self.recipe!r}")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.n_receivers < 1:
            raise ValueError("n_receivers must be >= 1")
        default_hw = 28 if self.recipe == "mnist" else 128
        if self.image_height is None:
            self.image_height = default_hw
        if self.image_width is None:
            self.image_width = default_hw

    def doi(self) -> DoiConfig:
        wl = self.wavelength
        pitch = wl / 20.0
        if self.recipe == "shapes":
            pitch *= SHAPES_PITCH_FACTOR
        return DoiConfig(wavelength=wl, sample_resolution=pitch)

    def constants(self) -> PhysicsConstants:
        return PhysicsConstants(wavelength=self.wavelength)

    def transmitter(self) -> TransmitterConfig:
        return TransmitterConfig.default(self.wavelength)

    def receivers(self) -> ReceiverArray:
        return ReceiverArray(
            count=self.n_receivers,
            positions=place_receivers(self.n_receivers, self.doi().radius),
            tx=self.transmitter(),
        )


@dataclass
class DatasetRecord:
    """One stored sample: received fields, incident fields, binary target."""

    index: int
    e: np.ndarray  # (N_r,) complex128, noise-free
    e_incident: np.ndarray  # (N_r,) complex128
    target: ImageRaster
    scene_meta: dict
    point_count: int
    split: str  # "train" | "test"


# ---------------------------------------------------------------------------
# Receivers and noise
# ---------------------------------------------------------------------------
def place_receivers(n_receivers: int, radius: float) -> np.ndarray:
    """Positions r_k = radius * (cos(2 pi k / N_r), sin(2 pi k / N_r))."""
    if n_receivers < 1:
        raise ValueError("n_receivers must be >= 1")
    angles = 2.0 * np.pi * np.arange(n_receivers) / n_receivers
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def add_awgn(e: np.ndarray, snr_db: float, noise_seed: int) -> np.ndarray:
    """Add circularly-symmetric complex white Gaussian noise at a target SNR.

    Per-component noise power is sigma^2 = P / 10^(snr_db/10) where P is the
    mean |e_k|^2 over the vector, split evenly between real and imaginary
    parts. ``snr_db = inf`` returns the input unchanged.
    """
    e = np.asarray(e, dtype=np.complex128)
    if e.size == 0:
        raise ValueError("received vector must be non-empty")
    if np.isinf(snr_db):
        return e.copy()
    power = float(np.mean(np.abs(e) ** 2))
    sigma2 = power / (10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(noise_seed)
    scale = np.sqrt(sigma2 / 2.0)
    noise = rng.normal(0.0, scale, e.shape) + 1j * rng.normal(0.0, scale, e.shape)
    return e + noise


# ---------------------------------------------------------------------------
# Per-record derivation
# ---------------------------------------------------------------------------
def _derive_u64(tag: str, master_seed: int, index: int) -> int:
    digest = hashlib.sha256(f"rfscat:{tag}:{master_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def record_seed(master_seed: int, index: int) -> int:
    return _derive_u64("record", master_seed, index)


def record_split(master_seed: int, index: int, test_fraction: float) -> str:
    u = _derive_u64("split", master_seed, index) / 2.0**64
    return "test" if u < test_fraction else "train"


def scene_from_meta(meta: dict, doi: DoiConfig) -> Scene:
    """Rebuild a shapes-recipe scene from its stored metadata."""
    if meta.get("recipe") != "shapes":
        raise ValueError("only shapes-recipe scenes can be rebuilt from metadata")
    shapes = [
        ShapePrimitive(kind=s["kind"], center=np.array(s["center"]), size=s["size"])
        for s in meta["shapes"]
    ]
    return build_scene(doi, shapes)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------
_WORKER_CONFIG: Optional[DatasetConfig] = None
_WORKER_MNIST: Optional[np.ndarray] = None


def _init_worker(config: DatasetConfig, mnist_source) -> None:
    global _WORKER_CONFIG, _WORKER_MNIST
    _WORKER_CONFIG = config
    _WORKER_MNIST = load_mnist_idx(mnist_source) if mnist_source else None


def _solve_record_scene(config: DatasetConfig, scene: Scene):
    """Forward-solve one scene; returns (e, e_incident, target)."""
    constants = config.constants()
    tx = config.transmitter()
    rx = config.receivers()
    e_inc = incident_field(rx.positions, tx, constants)
    if scene.point_count:
        op = assemble(BasisLayout.from_scene(scene), constants)
        sol = solve_currents(op, tx)
        e = received_vector(op, sol, tx, rx)
    else:
        e = e_inc.copy()
    target = rasterize(scene, config.image_height, config.image_width)
    return e, e_inc, target


def _make_record(index: int) -> Tuple:
    config = _WORKER_CONFIG
    seed = record_seed(config.master_seed, index)
    try:
        if config.recipe == "mnist":
            rng = np.random.default_rng(seed)
            digit_index = int(rng.integers(0, len(_WORKER_MNIST)))
            scene = scene_from_mnist(
                _WORKER_MNIST[digit_index],
                config.doi(),
                threshold=config.mnist_threshold,
            )
            scene_meta = {
                "recipe": "mnist",
                "digit_index": digit_index,
                "threshold": config.mnist_threshold,
            }
        else:
            scene = scene_random_shapes(seed, config.doi())
            scene_meta = {
                "recipe": "shapes",
                "shapes": [
                    {
                        "kind": s.kind,
                        "center": [float(s.center[0]), float(s.center[1])],
                        "size": float(s.size),
                    }
                    for s in scene.shapes
                ],
            }
        e, e_inc, target = _solve_record_scene(config, scene)
        meta = {
            "index": index,
            "split": record_split(config.master_seed, index, config.test_fraction),
            "point_count": scene.point_count,
            "record_seed": seed,
            "scene": scene_meta,
        }
        payload = cformat.encode_record(e, e_inc, target.values)
        return ("ok", index, payload, meta)
    except Exception as exc:  # deterministic per index; recorded and skipped
        return ("skip", index, None, f"{type(exc).__name__}: {exc}")


def _generator_self_check(config: DatasetConfig) -> None:
    """Blank-scene control: with no scatterers, e must equal e_incident."""
    empty = Scene(doi=config.doi(), shapes=[], points=np.empty((0, 2)))
    e, e_inc, _ = _solve_record_scene(config, empty)
    if not np.array_equal(e, e_inc):
        raise GenerationError("self-check failed: blank scene does not reproduce "
                              "the incident field at the receivers")


def generate(
    config: DatasetConfig,
    out_dir,
    mnist_source=None,
    workers: int = 1,
    progress=None,
) -> dict:
    """Produce a dataset container on disk; returns the manifest.

    Records are generated in parallel across indices (``workers`` processes)
    and committed in index order, so output bytes do not depend on worker
    count. Individual record failures are recorded and skipped up to a 1%
    budget; beyond that generation aborts without writing a manifest.
    """
    if config.recipe == "mnist":
        if mnist_source is None:
            raise GenerationError("mnist recipe requires an MNIST IDX source path")
        mnist_source = os.fspath(mnist_source)
    _generator_self_check(config)
    rx = config.receivers()
    header = {
        "recipe": config.recipe,
        "count": config.count,
        "wavelength": config.wavelength,
        "doi_radius": config.doi().radius,
        "sample_resolution": config.doi().sample_resolution,
        "tx_position": [float(v) for v in config.transmitter().position],
        "n_receivers": config.n_receivers,
        "receiver_positions": [[float(x), float(y)] for x, y in rx.positions],
        "image_height": config.image_height,
        "image_width": config.image_width,
        "master_seed": config.master_seed,
        "test_fraction": config.test_fraction,
        "mnist_threshold": config.mnist_threshold if config.recipe == "mnist" else None,
    }
    writer = cformat.ContainerWriter(out_dir, header)
    max_skips = max(1, int(MAX_SKIP_FRACTION * config.count))
    skipped = 0

    def consume(results) -> None:
        nonlocal skipped
        for status, index, payload, info in results:
            if status == "ok":
                writer.append(index, payload, info)
            else:
                skipped += 1
                logger.warning("record %d skipped: %s", index, info)
                writer.skip(index, info)
                if skipped > max_skips:
                    raise GenerationError(
                        f"skipped {skipped} records (> {max_skips} allowed)"
                    )
            if progress is not None:
                progress(index)

    if workers <= 1:
        _init_worker(config, mnist_source)
        consume(map(_make_record, range(config.count)))
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(config, mnist_source),
        ) as pool:
            consume(pool.map(_make_record, range(config.count), chunksize=4))

    manifest = writer.close()
    logger.info(
        "wrote %d records (%d skipped) to %s",
        manifest["record_count"], skipped, out_dir,
    )
    return manifest


# ---------------------------------------------------------------------------
# Reading
# ---------------------------------------------------------------------------
def receiver_subsample_indices(n_receivers: int, keep: int) -> np.ndarray:
    """Indices k * (N_r / keep) selecting an equally spaced receiver subset."""
    if keep < 1 or keep > n_receivers or n_receivers % keep != 0:
        raise ValueError(
            f"receiver filter {keep} must divide the stored count {n_receivers}"
        )
    return np.arange(keep) * (n_receivers // keep)


def read_dataset(
    container_dir, receiver_count: Optional[int] = None
) -> Tuple[dict, Iterator[DatasetRecord]]:
    """Open a container; returns (manifest, lazy record iterator).

    ``receiver_count`` selects an equally spaced receiver subset (must divide
    the stored count), enabling receiver sweeps from one master dataset.
    """
    manifest = cformat.read_manifest(container_dir)
    metas = cformat.read_meta(container_dir, manifest)
    n_r = manifest["n_receivers"]
    sel = (
        receiver_subsample_indices(n_r, receiver_count)
        if receiver_count is not None
        else None
    )

    def records() -> Iterator[DatasetRecord]:
        raw = cformat.iter_chunk_records(container_dir, manifest)
        for meta, payload in zip(metas, raw):
            e, e_inc, target = cformat.decode_record(
                payload, n_r, manifest["image_height"], manifest["image_width"]
            )
            if sel is not None:
                e, e_inc = e[sel], e_inc[sel]
            yield DatasetRecord(
                index=meta["index"],
                e=e,
                e_incident=e_inc,
                target=ImageRaster(
                    values=target, extent=2.0 * manifest["doi_radius"]
                ),
                scene_meta=meta["scene"],
                point_count=meta["point_count"],
                split=meta["split"],
            )

    return manifest, records()
