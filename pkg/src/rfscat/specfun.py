"""Bessel and Hankel special functions of orders 0 and 1.

Thin validated wrappers over the Cephes routines in scipy.special, plus the
outgoing-wave Hankel functions of the second kind

    H_0^(2)(x) = J_0(x) - i Y_0(x)
    H_1^(2)(x) = J_1(x) - i Y_1(x)

which are the only transcendental kernels the 2D TMz scattering physics
needs. All functions accept scalars or arrays of positive reals and raise
``ValueError`` for non-positive or non-finite arguments.
"""

import numpy as np
from scipy import special as _sp

__all__ = [
    "bessel_j0",
    "bessel_y0",
    "bessel_j1",
    "bessel_y1",
    "hankel2_0",
    "hankel2_1",
]


def _validated(x):
    """Convert to float array, enforcing x > 0 and finiteness."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("argument must be finite")
    if np.any(arr <= 0.0):
        raise ValueError("argument must be > 0")
    return arr


def _as_output(arr, x):
    # scalar in -> scalar out
    if np.isscalar(x) or np.ndim(x) == 0:
        return arr[()]
    return arr


def bessel_j0(x):
    """Bessel function of the first kind, order 0, for x > 0."""
    return _as_output(_sp.j0(_validated(x)), x)


def bessel_y0(x):
    """Bessel function of the second kind, order 0, for x > 0."""
    return _as_output(_sp.y0(_validated(x)), x)


def bessel_j1(x):
    """Bessel function of the first kind, order 1, for x > 0."""
    return _as_output(_sp.j1(_validated(x)), x)


def bessel_y1(x):
    """Bessel function of the second kind, order 1, for x > 0."""
    return _as_output(_sp.y1(_validated(x)), x)


def hankel2_0(x):
    """Hankel function of the second kind, order 0: J0(x) - i*Y0(x)."""
    arr = _validated(x)
    return _as_output(_sp.j0(arr) - 1j * _sp.y0(arr), x)


def hankel2_1(x):
    """Hankel function of the second kind, order 1: J1(x) - i*Y1(x)."""
    arr = _validated(x)
    return _as_output(_sp.j1(arr) - 1j * _sp.y1(arr), x)
