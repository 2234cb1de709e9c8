"""2D TMz forward scattering model: moment-matrix assembly and field solve.

Formulation
-----------
Scatterers are perfect electric conductors represented by pulse basis
functions of width w on the scene's sampling lattice. With the outgoing 2D
Green's function

    G(p, s) = -(i/4) H_0^(2)(k0 |p - s|)

and the transmitter field

    E_t(p) = E0 exp(-i k . (p - p_t)) / (4 pi |p - p_t|),

point matching at the basis centers yields the dense linear system
M a = e_t with

    M[i, n] = integral over cell n of G(s_i, s) ds,
    e_t[i]  = -E_t(s_i),

after which the total field anywhere is

    E_r(p) = sum_n a_n * cell_integral(p, s_n) + E_t(p).

Cell integration scheme
-----------------------
    |p - c| >  3w : midpoint rule, G(p, c) * w^2
    |p - c| <= 3w : 5x5 tensor Gauss-Legendre quadrature over the cell
    p == c        : closed form over the equal-area disc of radius
                    a = w/sqrt(pi):
                    (-i/4) [ (2 pi a / k0) H_1^(2)(k0 a) - 4 i / k0^2 ]

Assembly is vectorized over row blocks; the matrix is exactly symmetric
(entries depend only on center distance, and near-pair values are mirrored).
A ForwardOperator is immutable after construction and safe to share across
threads; solves against its factorization are read-only.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from . import specfun
from .geometry import ImageRaster, Scene

logger = logging.getLogger(__name__)

# far/near switch distance in pulse widths
NEAR_DISTANCE_CELLS: float = 3.0
# tensor Gauss-Legendre order for near cells
QUAD_ORDER: int = 5
# row-block size cap for pairwise-distance working memory
_BLOCK_ELEMENTS: int = 4_000_000

_GL_X, _GL_W = np.polynomial.legendre.leggauss(QUAD_ORDER)
_GL_XY = np.stack(np.meshgrid(_GL_X, _GL_X, indexing="ij"), axis=-1).reshape(-1, 2)
_GL_WW = np.outer(_GL_W, _GL_W).ravel()  # (QUAD_ORDER^2,)


class FactorizationError(RuntimeError):
    """Raised when the moment matrix cannot be factorized."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PhysicsConstants:
    """Wave parameters: wavelength [m] and transmit amplitude (arbitrary units)."""

    wavelength: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be > 0")

    @property
    def wavenumber(self) -> float:
        """Free-space wavenumber k0 = 2*pi/wavelength [rad/m]."""
        return 2.0 * np.pi / self.wavelength


@dataclass(frozen=True)
class TransmitterConfig:
    """Transmitter position [m]; must lie outside the imaging domain."""

    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=np.float64).reshape(2)
        )
        if np.linalg.norm(self.position) == 0:
            raise ValueError("transmitter cannot sit at the origin")

    @staticmethod
    def default(wavelength: float) -> "TransmitterConfig":
        """Standard placement 20 wavelengths from the origin on the +x axis."""
        return TransmitterConfig(position=np.array([20.0 * wavelength, 0.0]))

    def wave_vector(self, constants: PhysicsConstants) -> np.ndarray:
        """Wave vector of magnitude k0 pointing from the TX toward the origin."""
        direction = -self.position / np.linalg.norm(self.position)
        return constants.wavenumber * direction


@dataclass(frozen=True)
class BasisLayout:
    """Pulse basis placement: cell centers (N, 2) and common pulse width [m]."""

    centers: np.ndarray
    pulse_width: float

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "centers", centers)
        if self.pulse_width <= 0:
            raise ValueError("pulse_width must be > 0")

    @property
    def count(self) -> int:
        return len(self.centers)

    @staticmethod
    def from_scene(scene: Scene) -> "BasisLayout":
        """Pulses of one lattice pitch centered on the scene points."""
        return BasisLayout(
            centers=scene.points, pulse_width=scene.doi.sample_resolution
        )

    def validate(self) -> None:
        """Check pulse supports are pairwise non-overlapping."""
        if self.count < 2:
            return
        from scipy.spatial import cKDTree

        d, _ = cKDTree(self.centers).query(self.centers, k=2)
        min_gap = float(d[:, 1].min())
        if min_gap < self.pulse_width * (1 - 1e-9):
            raise ValueError(
                f"pulse supports overlap: min center spacing {min_gap:.3e} "
                f"< width {self.pulse_width:.3e}"
            )


@dataclass(frozen=True)
class ForwardOperator:
    """Assembled moment matrix with its LU factorization, bound to a layout."""

    layout: BasisLayout
    constants: PhysicsConstants
    matrix: np.ndarray  # (N, N) complex128
    _lu: tuple

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve M x = rhs against the stored factorization."""
        if self.layout.count == 0:
            return np.zeros(0, dtype=np.complex128)
        return lu_solve(self._lu, rhs)


@dataclass(frozen=True)
class CurrentSolution:
    """Pulse coefficients solving the boundary condition for one transmitter."""

    coefficients: np.ndarray  # (N,) complex128


# ---------------------------------------------------------------------------
# Fields and kernels
# ---------------------------------------------------------------------------
def incident_field(points, tx: TransmitterConfig, constants: PhysicsConstants):
    """Transmitter field at one or many points.

    E_t(p) = E0 exp(-i k . (p - p_t)) / (4 pi |p - p_t|) with k of magnitude
    k0 directed from the TX toward the origin. Raises ValueError at p == p_t.
    """
    pts = np.asarray(points, dtype=np.float64)
    scalar = pts.ndim == 1
    pts = pts.reshape(-1, 2)
    diff = pts - tx.position[None, :]  # (P, 2)
    dist = np.hypot(diff[:, 0], diff[:, 1])  # (P,)
    if np.any(dist == 0.0):
        raise ValueError("incident field is singular at the transmitter position")
    kvec = tx.wave_vector(constants)
    vals = constants.amplitude * np.exp(-1j * (diff @ kvec)) / (4.0 * np.pi * dist)
    return vals[0] if scalar else vals


def greens(p, s, constants: PhysicsConstants):
    """Outgoing 2D Green's function -(i/4) H_0^(2)(k0 |p - s|).

    Broadcasts over leading dimensions. Raises ValueError for coincident
    points; self-cell interactions must go through cell_integral.
    """
    pa = np.asarray(p, dtype=np.float64)
    sa = np.asarray(s, dtype=np.float64)
    diff = pa - sa
    dist = np.hypot(diff[..., 0], diff[..., 1])
    if np.any(dist == 0.0):
        raise ValueError("Green's function is singular at p == s")
    return _greens_distance(dist, constants)


def _greens_distance(dist, constants: PhysicsConstants):
    return -0.25j * specfun.hankel2_0(constants.wavenumber * dist)


def self_cell_integral(pulse_width: float, constants: PhysicsConstants) -> complex:
    """Closed-form integral of G over a cell observed from its own center.

    Exact integral over the disc of radius a = w/sqrt(pi) with the same area
    as the cell:  (-i/4) [ (2 pi a / k0) H_1^(2)(k0 a) - 4 i / k0^2 ].
    """
    k0 = constants.wavenumber
    a = pulse_width / np.sqrt(np.pi)
    return complex(
        -0.25j * ((2.0 * np.pi * a / k0) * specfun.hankel2_1(k0 * a) - 4.0j / k0**2)
    )


def _near_cell_quadrature(obs, centers, pulse_width, constants):
    """5x5 Gauss-Legendre cell integrals for paired (obs[i], centers[i])."""
    w = pulse_width
    nodes = centers[:, None, :] + (0.5 * w) * _GL_XY[None, :, :]  # (K, Q, 2)
    diff = obs[:, None, :] - nodes  # (K, Q, 2)
    dist = np.hypot(diff[..., 0], diff[..., 1])  # (K, Q)
    # grid points can land arbitrarily close to a quadrature node when the
    # observation sits inside the cell; keep the kernel finite
    np.maximum(dist, 1e-14 * w, out=dist)
    weights = _GL_WW * (0.25 * w * w)  # (Q,)
    return _greens_distance(dist, constants) @ weights  # (K,)


def cell_integrals(
    obs_points,
    centers,
    pulse_width: float,
    constants: PhysicsConstants,
) -> np.ndarray:
    """Integrals of G over every cell, for every observation point.

    Returns a (P, N) complex matrix using the far/near/self scheme described
    in the module docstring. Memory-bounded by row blocking.
    """
    obs = np.asarray(obs_points, dtype=np.float64).reshape(-1, 2)
    cen = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    P, N = len(obs), len(cen)
    w = pulse_width
    out = np.empty((P, N), dtype=np.complex128)
    if N == 0 or P == 0:
        return out
    block = max(1, _BLOCK_ELEMENTS // max(N, 1))
    for start in range(0, P, block):
        stop = min(start + block, P)
        diff = obs[start:stop, None, :] - cen[None, :, :]  # (B, N, 2)
        dist = np.hypot(diff[..., 0], diff[..., 1])  # (B, N)
        vals = _greens_distance(np.maximum(dist, 1e-14 * w), constants) * (w * w)
        near = dist <= NEAR_DISTANCE_CELLS * w
        if np.any(near):
            self_mask = dist <= 1e-12 * w
            quad_mask = near & ~self_mask
            io, ic = np.nonzero(quad_mask)
            if len(io):
                vals[io, ic] = _near_cell_quadrature(
                    obs[start + io], cen[ic], w, constants
                )
            vals[self_mask] = self_cell_integral(w, constants)
        out[start:stop] = vals
    return out


def cell_integral(
    observation,
    cell_center,
    pulse_width: float,
    constants: PhysicsConstants,
) -> complex:
    """Integral of G over one cell from one observation point."""
    return complex(
        cell_integrals(
            np.asarray(observation, dtype=np.float64).reshape(1, 2),
            np.asarray(cell_center, dtype=np.float64).reshape(1, 2),
            pulse_width,
            constants,
        )[0, 0]
    )


# ---------------------------------------------------------------------------
# Assembly and solve
# ---------------------------------------------------------------------------
def assemble(layout: BasisLayout, constants: PhysicsConstants) -> ForwardOperator:
    """Assemble and factorize the moment matrix for a basis layout.

    The matrix is exactly symmetric: far entries depend only on the
    (symmetric) center distance and near-pair quadrature values are assigned
    to both (i, n) and (n, i).
    """
    cen = layout.centers
    N = layout.count
    w = layout.pulse_width
    M = np.empty((N, N), dtype=np.complex128)
    near_i: list = []
    near_j: list = []
    block = max(1, _BLOCK_ELEMENTS // max(N, 1))
    for start in range(0, N, block):
        stop = min(start + block, N)
        diff = cen[start:stop, None, :] - cen[None, :, :]  # (B, N, 2)
        dist = np.hypot(diff[..., 0], diff[..., 1])  # (B, N)
        M[start:stop] = _greens_distance(np.maximum(dist, 1e-14 * w), constants) * (
            w * w
        )
        bi, bj = np.nonzero(dist <= NEAR_DISTANCE_CELLS * w)
        bi += start
        keep = bi < bj  # strict upper triangle; mirrored below
        near_i.append(bi[keep])
        near_j.append(bj[keep])
    iu = np.concatenate(near_i) if near_i else np.empty(0, dtype=np.int64)
    ju = np.concatenate(near_j) if near_j else np.empty(0, dtype=np.int64)
    if len(iu):
        vals = _near_cell_quadrature(cen[iu], cen[ju], w, constants)
        M[iu, ju] = vals
        M[ju, iu] = vals
    if N:
        M.flat[:: N + 1] = self_cell_integral(w, constants)
    if not np.all(np.isfinite(M)):
        raise FactorizationError("moment matrix contains non-finite entries")

    if N == 0:
        lu = (np.empty((0, 0), dtype=np.complex128), np.empty(0, dtype=np.int32))
    else:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            lu = lu_factor(M, check_finite=False)
        pivots = np.abs(np.diagonal(lu[0]))
        if pivots.min() == 0.0 or not np.all(np.isfinite(pivots)):
            cond_proxy = float(pivots.max() / max(pivots.min(), 1e-300))
            raise FactorizationError(
                f"moment matrix is numerically singular "
                f"(pivot-ratio condition estimate {cond_proxy:.2e})"
            )
    logger.debug("assembled operator: N=%d, pulse width %.4e m", N, w)
    return ForwardOperator(layout=layout, constants=constants, matrix=M, _lu=lu)


def solve_currents_from_incident(
    op: ForwardOperator, incident_at_centers: np.ndarray
) -> CurrentSolution:
    """Solve M a = -field for an arbitrary excitation sampled at the centers."""
    rhs = -np.asarray(incident_at_centers, dtype=np.complex128).reshape(-1)
    if len(rhs) != op.layout.count:
        raise ValueError("excitation length does not match basis count")
    return CurrentSolution(coefficients=op.solve(rhs))


def solve_currents(op: ForwardOperator, tx: TransmitterConfig) -> CurrentSolution:
    """Solve for the pulse coefficients enforcing zero total field on the scatterer."""
    if op.layout.count == 0:
        return CurrentSolution(coefficients=np.zeros(0, dtype=np.complex128))
    et = incident_field(op.layout.centers, tx, op.constants)
    return solve_currents_from_incident(op, et)


def total_field(
    points,
    op: ForwardOperator,
    sol: CurrentSolution,
    tx: TransmitterConfig,
):
    """Total field E_r at one or many points: scattered sum plus incident."""
    pts = np.asarray(points, dtype=np.float64)
    scalar = pts.ndim == 1
    pts = pts.reshape(-1, 2)
    field = incident_field(pts, tx, op.constants).astype(np.complex128)
    if op.layout.count:
        field += cell_integrals(
            pts, op.layout.centers, op.layout.pulse_width, op.constants
        ) @ sol.coefficients
    return field[0] if scalar else field


def received_vector(
    op: ForwardOperator,
    sol: CurrentSolution,
    tx: TransmitterConfig,
    receivers,
) -> np.ndarray:
    """Total field at each receiver, in array order.

    ``receivers`` is an (N_r, 2) position array or any object exposing a
    ``positions`` attribute with that shape.
    """
    positions = getattr(receivers, "positions", receivers)
    return total_field(np.asarray(positions, dtype=np.float64), op, sol, tx)


def render_field_grid(
    op: ForwardOperator,
    sol: CurrentSolution,
    tx: TransmitterConfig,
    grid_res: int,
    extent: float,
) -> ImageRaster:
    """Magnitude of the total field sampled at pixel centers over a square.

    The square of side ``extent`` is centered at the origin; points inside
    pulse supports are evaluated through the near/self quadrature rules.
    """
    if grid_res < 2:
        raise ValueError("grid_res must be >= 2")
    step = extent / grid_res
    xs = -extent / 2.0 + (np.arange(grid_res) + 0.5) * step
    ys = extent / 2.0 - (np.arange(grid_res) + 0.5) * step
    X, Y = np.meshgrid(xs, ys)  # row-major: row 0 at the top
    pts = np.column_stack([X.ravel(), Y.ravel()])  # (grid_res^2, 2)
    mags = np.abs(total_field(pts, op, sol, tx)).reshape(grid_res, grid_res)
    return ImageRaster(values=mags, extent=extent)
