#!/usr/bin/env python3
"""Generate high-precision Bessel reference vectors for the specfun tests.

Evaluates J0, Y0, J1, Y1 with mpmath at 50 significant digits on a
log-spaced argument grid and prints a Python literal ready to paste into
tests/test_specfun.py. Run offline; the test suite ships the frozen output
and does not depend on mpmath.
"""

import mpmath as mp

mp.mp.dps = 50


def row(x):
    xm = mp.mpf(x)
    return (
        float(xm),
        float(mp.besselj(0, xm)),
        float(mp.bessely(0, xm)),
        float(mp.besselj(1, xm)),
        float(mp.bessely(1, xm)),
    )


def main():
    xs = [mp.mpf(10) ** (mp.mpf(-3) + 6 * mp.mpf(i) / 19) for i in range(20)]
    print("# (x, j0, y0, j1, y1) generated by tools/gen_specfun_vectors.py")
    print("REFERENCE_TABLE = [")
    for x in xs:
        r = row(x)
        print("    (%.17e, %.17e, %.17e, %.17e, %.17e)," % r)
    print("]")
    print()
    r = row(1.0)
    print("# values at x = 1 for kernel composition checks")
    print("REF_AT_ONE = (%.17e, %.17e, %.17e, %.17e, %.17e)" % r)
    print()
    root = mp.findroot(lambda t: mp.besselj(0, t), mp.mpf("2.405"))
    print("# first positive root of J0")
    print('J0_FIRST_ROOT = float("%s")' % mp.nstr(root, 17))


if __name__ == "__main__":
    main()
