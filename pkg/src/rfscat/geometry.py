"""Scene construction and rasterization for the 2D imaging domain.

A scene is a set of discrete scatterer points produced by sampling shape
primitives (discs, axis-aligned squares, or pixel masks such as thresholded
MNIST digits) on a regular lattice inside a square domain of interest (DoI)
centered at the origin.

Sampling conventions
--------------------
    disc / square : lattice anchored at the shape center (the center itself
                    is a lattice point); a point belongs to the shape if it
                    lies inside or on the closed boundary.
    pixel_mask    : lattice anchored at the mask center and offset by half a
                    pitch, so points sit strictly inside pixel cells. A cell
                    of physical size 2*pitch therefore contains exactly a
                    2x2 patch of points.

Rasterization uses half-open pixels (left/top edge inclusive, right/bottom
exclusive) with the final row/column closed, over the DoI bounding square.
"""

import gzip
import logging
import struct
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803

# boundary-inclusion slack for closed shapes (relative)
_BOUNDARY_TOL = 1e-12


class SceneGenerationError(RuntimeError):
    """Raised when random scene placement exhausts its retry budget."""


class IdxFormatError(ValueError):
    """Raised for malformed IDX image files."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------
@dataclass
class DoiConfig:
    """Domain-of-interest geometry.

    Attributes
    ----------
    wavelength : float
        Operating wavelength [m].
    radius : float
        Half-side of the DoI bounding square [m]; defaults to 5 wavelengths.
    sample_resolution : float
        Lattice pitch used when sampling shapes [m]; defaults to
        wavelength / 20.
    """

    wavelength: float
    radius: Optional[float] = None
    sample_resolution: Optional[float] = None

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be > 0")
        if self.radius is None:
            self.radius = 5.0 * self.wavelength
        if self.sample_resolution is None:
            self.sample_resolution = self.wavelength / 20.0
        if self.radius <= 0:
            raise ValueError("radius must be > 0")
        if not 0 < self.sample_resolution < self.radius:
            raise ValueError("sample_resolution must be in (0, radius)")


@dataclass
class ShapePrimitive:
    """One scatterer shape.

    Attributes
    ----------
    kind : str
        One of "disc", "square", "pixel_mask".
    center : np.ndarray, shape (2,)
        Shape center [m].
    size : float
        Disc diameter or square width [m]; for pixel_mask, the physical
        size of one mask cell [m].
    mask : np.ndarray, bool, shape (R, C), optional
        Lit-cell grid (pixel_mask only; row 0 is the top row).
    """

    kind: str
    center: np.ndarray
    size: float
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("disc", "square", "pixel_mask"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        self.center = np.asarray(self.center, dtype=np.float64).reshape(2)
        if self.size <= 0:
            raise ValueError("size must be > 0")
        if self.kind == "pixel_mask":
            if self.mask is None:
                raise ValueError("pixel_mask requires a mask")
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.ndim != 2:
                raise ValueError("mask must be 2D")
        elif self.mask is not None:
            raise ValueError("mask is only valid for pixel_mask shapes")

    @property
    def circumradius(self) -> float:
        """Radius of the smallest origin-centered circle containing the shape."""
        if self.kind == "disc":
            return self.size / 2.0
        if self.kind == "square":
            return self.size * np.sqrt(2.0) / 2.0
        rows, cols = self.mask.shape
        half = 0.5 * self.size * np.array([cols, rows])
        return float(np.hypot(half[0], half[1]))

    def half_extent(self) -> np.ndarray:
        """Half width/height of the axis-aligned bounding box, shape (2,)."""
        if self.kind == "disc":
            return np.array([self.size / 2.0, self.size / 2.0])
        if self.kind == "square":
            return np.array([self.size / 2.0, self.size / 2.0])
        rows, cols = self.mask.shape
        return 0.5 * self.size * np.array([cols, rows], dtype=np.float64)


@dataclass
class Scene:
    """A sampled scatterer configuration inside a DoI.

    ``points`` is deterministic given (shapes, doi): shapes are sampled in
    list order, each on its own center-anchored lattice.
    """

    doi: DoiConfig
    shapes: List[ShapePrimitive]
    points: np.ndarray  # (N, 2) float64

    @property
    def point_count(self) -> int:
        return len(self.points)

    def validate(self) -> None:
        """Check containment and minimum point spacing. Raises ValueError."""
        if len(self.points):
            if np.max(np.abs(self.points)) > self.doi.radius:
                raise ValueError("scene point outside the DoI bounding square")
            from scipy.spatial import cKDTree

            tree = cKDTree(self.points)
            d, _ = tree.query(self.points, k=2)
            min_gap = float(d[:, 1].min()) if len(self.points) > 1 else np.inf
            if min_gap < self.doi.sample_resolution * (1 - 1e-9):
                raise ValueError(
                    f"point spacing {min_gap:.3e} below lattice pitch "
                    f"{self.doi.sample_resolution:.3e}"
                )


@dataclass
class ImageRaster:
    """H x W image covering a physical square of side ``extent``.

    Pixel (0, 0) maps to the top-left corner of the covered square. Target
    rasters are uint8 with values in {0, 1}; field/prediction rasters are
    float64.
    """

    values: np.ndarray
    extent: float

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("raster values must be 2D")
        if self.extent <= 0:
            raise ValueError("extent must be > 0")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


# ---------------------------------------------------------------------------
# Shape sampling
# ---------------------------------------------------------------------------
def _check_inside_doi(shape: ShapePrimitive, doi: DoiConfig) -> None:
    hx, hy = shape.half_extent()
    if (
        abs(shape.center[0]) + hx > doi.radius + _BOUNDARY_TOL
        or abs(shape.center[1]) + hy > doi.radius + _BOUNDARY_TOL
    ):
        raise ValueError("shape extends outside the DoI bounding square")


def _centered_lattice(half_span: float, pitch: float) -> np.ndarray:
    """1D lattice i*pitch, i integer, covering [-half_span, half_span]."""
    n = int(np.floor(half_span / pitch * (1 + _BOUNDARY_TOL)))
    return np.arange(-n, n + 1, dtype=np.float64) * pitch


def sample_shape(shape: ShapePrimitive, doi: DoiConfig) -> np.ndarray:
    """Sample all lattice points covered by one shape.

    Returns points in deterministic row-major lattice order, shape (K, 2).
    """
    _check_inside_doi(shape, doi)
    h = doi.sample_resolution
    cx, cy = shape.center

    if shape.kind == "disc":
        r = shape.size / 2.0
        axis = _centered_lattice(r, h)
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        keep = X * X + Y * Y <= r * r * (1 + 2 * _BOUNDARY_TOL)
        return np.column_stack([X[keep] + cx, Y[keep] + cy])

    if shape.kind == "square":
        half = shape.size / 2.0
        axis = _centered_lattice(half, h)
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        return np.column_stack([X.ravel() + cx, Y.ravel() + cy])

    # pixel_mask: half-pitch offset lattice over the mask extent, keep points
    # whose containing cell is lit
    rows, cols = shape.mask.shape
    cell = shape.size
    half_w = 0.5 * cols * cell
    half_h = 0.5 * rows * cell
    nx = int(np.floor(2 * half_w / h - 0.5 + _BOUNDARY_TOL)) + 1
    ny = int(np.floor(2 * half_h / h - 0.5 + _BOUNDARY_TOL)) + 1
    xs = -half_w + (np.arange(nx) + 0.5) * h  # (nx,) relative to center
    ys = -half_h + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    col = np.floor((X + half_w) / cell).astype(np.int64)
    row = np.floor((half_h - Y) / cell).astype(np.int64)
    np.clip(col, 0, cols - 1, out=col)
    np.clip(row, 0, rows - 1, out=row)
    keep = shape.mask[row, col]
    return np.column_stack([X[keep] + cx, Y[keep] + cy])


def build_scene(doi: DoiConfig, shapes: List[ShapePrimitive]) -> Scene:
    """Sample every shape in list order and collect the points into a Scene."""
    parts = [sample_shape(s, doi) for s in shapes]
    points = np.vstack(parts) if parts else np.empty((0, 2), dtype=np.float64)
    return Scene(doi=doi, shapes=list(shapes), points=points)


# ---------------------------------------------------------------------------
# Scene constructors
# ---------------------------------------------------------------------------
def scene_from_mnist(
    digit_image: np.ndarray,
    doi: DoiConfig,
    pixel_size: Optional[float] = None,
    threshold: int = 128,
) -> Scene:
    """Build a scene from one grayscale digit image centered on the origin.

    Pixels with value >= threshold become lit cells of physical size
    ``pixel_size`` (default 0.1 wavelength) and the lit-cell union is sampled
    at the DoI lattice pitch.
    """
    digit = np.asarray(digit_image)
    if digit.ndim != 2:
        raise ValueError("digit image must be 2D")
    if not 0 < threshold <= 255:
        raise ValueError("threshold must be in (0, 255]")
    if pixel_size is None:
        pixel_size = 0.1 * doi.wavelength
    mask = digit.astype(np.float64) >= threshold
    if not mask.any():
        return Scene(doi=doi, shapes=[], points=np.empty((0, 2)))
    prim = ShapePrimitive(
        kind="pixel_mask",
        center=np.zeros(2),
        size=pixel_size,
        mask=mask,
    )
    return build_scene(doi, [prim])


def _boundary_separation(a: ShapePrimitive, b: ShapePrimitive) -> float:
    """Euclidean gap between two disc/square boundaries (<= 0 if touching)."""
    if a.kind == "disc" and b.kind == "disc":
        return float(np.linalg.norm(a.center - b.center)) - (a.size + b.size) / 2.0
    if a.kind == "square" and b.kind == "square":
        gap = np.abs(a.center - b.center) - (a.size + b.size) / 2.0
        if np.all(gap < 0):
            return float(gap.max())
        return float(np.hypot(max(gap[0], 0.0), max(gap[1], 0.0)))
    if a.kind == "square":
        a, b = b, a
    # now a = disc, b = square
    d = np.maximum(np.abs(a.center - b.center) - b.size / 2.0, 0.0)
    return float(np.hypot(d[0], d[1])) - a.size / 2.0


def scene_random_shapes(
    rng_seed: int,
    doi: DoiConfig,
    max_tries_per_shape: int = 200,
) -> Scene:
    """Random scene of one square and two discs, sizes U[wl, 1.2*wl].

    Centers are uniform over positions keeping each shape fully inside the
    inscribed DoI disk; overlapping placements are rejection-resampled with
    shapes kept at least one lattice pitch apart. Deterministic given seed.
    """
    rng = np.random.default_rng(rng_seed)
    wl = doi.wavelength
    margin = doi.sample_resolution
    placed: List[ShapePrimitive] = []
    for kind in ("square", "disc", "disc"):
        size = float(rng.uniform(wl, 1.2 * wl))
        circum = size * (np.sqrt(2.0) / 2.0 if kind == "square" else 0.5)
        max_r = doi.radius - circum
        if max_r <= 0:
            raise SceneGenerationError("shape does not fit inside the DoI disk")
        for _ in range(max_tries_per_shape):
            r = max_r * np.sqrt(rng.uniform())
            theta = rng.uniform(0.0, 2.0 * np.pi)
            cand = ShapePrimitive(
                kind=kind,
                center=r * np.array([np.cos(theta), np.sin(theta)]),
                size=size,
            )
            if all(_boundary_separation(cand, p) >= margin for p in placed):
                placed.append(cand)
                break
        else:
            raise SceneGenerationError(
                f"could not place {kind} after {max_tries_per_shape} tries "
                f"(seed {rng_seed})"
            )
    return build_scene(doi, placed)


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------
def rasterize(scene: Scene, height: int, width: int) -> ImageRaster:
    """Binary image of the scene over the DoI bounding square.

    A pixel is 1 iff at least one scene point falls inside it. Pixels are
    half-open (left/top edges inclusive) with the final row/column closed.
    """
    if height < 1 or width < 1:
        raise ValueError("raster dimensions must be >= 1")
    rho = scene.doi.radius
    side = 2.0 * rho
    values = np.zeros((height, width), dtype=np.uint8)
    if len(scene.points):
        pts = scene.points
        if np.max(np.abs(pts)) > rho + _BOUNDARY_TOL * rho:
            raise ValueError("scene point outside the DoI bounding square")
        col = np.floor((pts[:, 0] + rho) / side * width).astype(np.int64)
        row = np.floor((rho - pts[:, 1]) / side * height).astype(np.int64)
        np.clip(col, 0, width - 1, out=col)
        np.clip(row, 0, height - 1, out=row)
        values[row, col] = 1
    return ImageRaster(values=values, extent=side)


# ---------------------------------------------------------------------------
# MNIST IDX ingestion
# ---------------------------------------------------------------------------
def load_mnist_idx(path) -> np.ndarray:
    """Load a big-endian IDX image file; returns uint8 array (count, 28, 28).

    Transparently decompresses gzip. Raises IdxFormatError on bad magic,
    wrong dimensions, or truncation.
    """
    with open(path, "rb") as raw:
        head = raw.read(2)
        raw.seek(0)
        opener = gzip.open if head == b"\x1f\x8b" else (lambda f: f)
        with opener(raw) as f:
            header = f.read(16)
            if len(header) != 16:
                raise IdxFormatError(f"{path}: truncated IDX header")
            magic, count, rows, cols = struct.unpack(">IIII", header)
            if magic != IDX_IMAGES_MAGIC:
                raise IdxFormatError(
                    f"{path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
                )
            if (rows, cols) != (28, 28):
                raise IdxFormatError(
                    f"{path}: expected 28x28 images, found {rows}x{cols}"
                )
            data = f.read(count * rows * cols)
            if len(data) != count * rows * cols:
                raise IdxFormatError(
                    f"{path}: truncated pixel data "
                    f"({len(data)} of {count * rows * cols} bytes)"
                )
    images = np.frombuffer(data, dtype=np.uint8).reshape(count, rows, cols)
    logger.debug("loaded %d images from %s", count, path)
    return images
