"""Independent reference solutions used to validate the forward model.

These implementations deliberately avoid the solver's code paths: the
cylinder solution uses a separation-of-variables series with arbitrary-order
Hankel functions (AMOS routines via scipy.special.hankel2, not the Cephes
order-0/1 kernels) and the quadrature oracles use scipy's adaptive
integrators.
"""

import numpy as np
from scipy import special as _sp
from scipy.integrate import quad

from .emcore import PhysicsConstants, TransmitterConfig, incident_field


def disc_series_reference(
    radius: float,
    eval_points: np.ndarray,
    tx: TransmitterConfig,
    constants: PhysicsConstants,
    n_terms: int = 60,
    n_boundary_samples: int = 8192,
) -> np.ndarray:
    """Total field outside a perfectly conducting disc, by modal series.

    The scattered field is the unique outgoing solution of the exterior
    Dirichlet problem with boundary data -E_t on the disc of the given
    radius centered at the origin:

        E_s(r, theta) = sum_n c_n H_n^(2)(k0 r) exp(i n theta),
        c_n = -b_n / H_n^(2)(k0 a),

    where b_n are Fourier coefficients of E_t on the disc boundary,
    computed by FFT. Evaluation points must satisfy |p| >= radius.
    """
    pts = np.asarray(eval_points, dtype=np.float64).reshape(-1, 2)
    r = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(r < radius * (1 - 1e-12)):
        raise ValueError("series reference is valid outside the disc only")
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    k0 = constants.wavenumber

    angles = 2.0 * np.pi * np.arange(n_boundary_samples) / n_boundary_samples
    boundary = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    b = np.fft.fft(incident_field(boundary, tx, constants)) / n_boundary_samples

    total = incident_field(pts, tx, constants).astype(np.complex128)
    for n in range(-n_terms, n_terms + 1):
        # H_{-n}^{(2)} = (-1)^n H_n^{(2)}
        sign = (-1.0) ** (-n) if n < 0 else 1.0
        h_a = sign * _sp.hankel2(abs(n), k0 * radius)
        h_r = sign * _sp.hankel2(abs(n), k0 * r)
        total += -(b[n % n_boundary_samples] / h_a) * h_r * np.exp(1j * n * theta)
    return total


def self_term_adaptive(
    pulse_width: float, constants: PhysicsConstants
) -> complex:
    """Integral of G over the equal-area disc, by adaptive polar quadrature.

    In polar coordinates the r Jacobian removes the logarithmic singularity
    of the kernel at the origin, so plain adaptive quadrature converges.
    """
    k0 = constants.wavenumber
    a = pulse_width / np.sqrt(np.pi)

    def re_part(r):
        return -0.25 * _sp.y0(k0 * r) * r

    def im_part(r):
        return -0.25 * _sp.j0(k0 * r) * r

    re = quad(re_part, 0.0, a, epsabs=1e-16, epsrel=1e-12)[0]
    im = quad(im_part, 0.0, a, epsabs=1e-16, epsrel=1e-12)[0]
    return complex(2.0 * np.pi * re, 2.0 * np.pi * im)


def cell_integral_adaptive(
    observation: np.ndarray,
    cell_center: np.ndarray,
    pulse_width: float,
    constants: PhysicsConstants,
) -> complex:
    """Integral of G over one square cell, by nested adaptive quadrature.

    Valid for observation points outside the cell (the kernel is smooth on
    the integration domain there).
    """
    obs = np.asarray(observation, dtype=np.float64).reshape(2)
    cen = np.asarray(cell_center, dtype=np.float64).reshape(2)
    half = pulse_width / 2.0
    k0 = constants.wavenumber

    def kernel(y, x, part):
        r = np.hypot(obs[0] - (cen[0] + x), obs[1] - (cen[1] + y))
        h = _sp.j0(k0 * r) - 1j * _sp.y0(k0 * r)
        val = -0.25j * h
        return val.real if part == "re" else val.imag

    def inner(x, part):
        return quad(kernel, -half, half, args=(x, part), epsabs=1e-14, epsrel=1e-11)[0]

    re = quad(inner, -half, half, args=("re",), epsabs=1e-14, epsrel=1e-11)[0]
    im = quad(inner, -half, half, args=("im",), epsabs=1e-14, epsrel=1e-11)[0]
    return complex(re, im)
