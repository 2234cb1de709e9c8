"""Special-function accuracy against frozen arbitrary-precision vectors."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfscat import specfun

# (x, j0, y0, j1, y1) generated by tools/gen_specfun_vectors.py (mpmath, 50 dps)
REFERENCE_TABLE = [
    (1.00000000000000002e-03, 9.99999750000015619e-01, -4.47141661137592283e+00, 4.99999937500002645e-04, -6.36622167231139429e+02),
    (2.06913808111478968e-03, 9.99998929667186731e-01, -4.00850622252013711e+00, 1.03456848689074954e-03, -3.07678371227268997e+02),
    (4.28133239871939398e-03, 9.99995417553472654e-01, -3.54558533550960497e+00, 2.14066129461362806e-03, -1.48704918326253704e+02),
    (8.85866790410082608e-03, 9.99980381096967297e-01, -3.08262483739762283e+00, 4.42929050264272497e-03, -7.18791161947469135e+01),
    (1.83298071083243599e-02, 9.99916006306635685e-01, -2.61951759485292124e+00, 9.16451865441860608e-03, -3.47583211748068948e+01),
    (3.79269019073224939e-02, 9.99640419856918760e-01, -2.15587993989349913e+00, 1.89600414112814711e-02, -1.68323691082554667e+01),
    (7.84759970351461278e-02, 9.98460971978810230e-01, -1.69039105793639099e+00, 3.92078004535028266e-02, -8.19116946794575895e+00),
    (1.62377673918872173e-01, 9.93419227188245602e-01, -1.21878363471425777e+00, 8.09215474912928917e-02, -4.04586223740854134e+00),
    (3.35981828628378221e-01, 9.71977534947142452e-01, -7.28861869345507563e-01, 1.65631606064741810e-01, -2.07363510658289663e+00),
    (6.95192796177560579e-01, 8.82777682330092572e-01, -1.95984542404751022e-01, 3.27016160347546492e-01, -1.10994622156991984e+00),
    (1.43844988828766285e+00, 5.45888161955518703e-01, 3.55817849413104459e-01, 5.48566930824441523e-01, -4.53176293808691955e-01),
    (2.97635144163131837e+00, -2.51929772810636332e-01, 3.84452145084556052e-01, 3.47831349471865447e-01, 3.18216326456920717e-01),
    (6.15848211066026341e+00, 1.91873038297434906e-01, -2.57352617006363749e-01, -2.42687115343350135e-01, -2.13248687379650220e-01),
    (1.27427498570313382e+01, 1.82001445106277637e-01, -1.29602367805867008e-01, -1.22570619188036883e-01, -1.87217903015747061e-01),
    (2.63665089873035825e+01, 1.40332426311807895e-01, 6.66895405625417409e-02, 6.93617395229299549e-02, -1.39093391530720978e-01),
    (5.45559478116851935e+01, -1.01051791888140008e-01, -3.81728068915303392e-02, -3.91004614432467340e-02, 1.00706212870181833e-01),
    (1.12883789168468908e+02, 4.05717664331624664e-02, -6.31939838807444032e-02, -6.30149013283205633e-02, -4.08520661413776381e-02),
    (2.33572146909012218e+02, 4.97446091857321332e-02, 1.58445091225064977e-02, 1.59510315403599452e-02, -4.97108055088979761e-02),
    (4.83293023857175342e+02, 9.78196153615090887e-03, -3.49509189830018024e-02, -3.49408175837099197e-02, -9.81812587111155488e-03),
    (1.00000000000000000e+03, 2.47866861524201759e-02, 4.71591797762281346e-03, 4.72831190708952395e-03, -2.47843312923517779e-02),
]

# values at x = 1 (same generator), used by the Green's function tests too
REF_AT_ONE = (1.0, 7.65197686557966605e-01, 8.82569642156769557e-02,
              4.40050585744933498e-01, -7.81212821300288685e-01)

J0_FIRST_ROOT = 2.4048255576957728

ALL_FUNCS = [
    specfun.bessel_j0,
    specfun.bessel_y0,
    specfun.bessel_j1,
    specfun.bessel_y1,
    specfun.hankel2_0,
    specfun.hankel2_1,
]

log_x = st.floats(min_value=1e-3, max_value=1e3)


@pytest.mark.parametrize("x,j0,y0,j1,y1", REFERENCE_TABLE)
def test_bessel_reference_values(x, j0, y0, j1, y1):
    assert abs(specfun.bessel_j0(x) - j0) <= 1e-10 * abs(j0)
    assert abs(specfun.bessel_y0(x) - y0) <= 1e-10 * abs(y0)
    assert abs(specfun.bessel_j1(x) - j1) <= 1e-10 * abs(j1)
    assert abs(specfun.bessel_y1(x) - y1) <= 1e-10 * abs(y1)


@pytest.mark.parametrize("x,j0,y0,j1,y1", REFERENCE_TABLE)
def test_hankel_reference_values(x, j0, y0, j1, y1):
    ref0 = j0 - 1j * y0
    ref1 = j1 - 1j * y1
    assert abs(specfun.hankel2_0(x) - ref0) <= 1e-10 * abs(ref0)
    assert abs(specfun.hankel2_1(x) - ref1) <= 1e-10 * abs(ref1)


def test_j0_small_argument_limit():
    assert 1 - 1e-12 <= specfun.bessel_j0(1e-8) <= 1.0


def test_j0_first_root():
    assert abs(specfun.bessel_j0(J0_FIRST_ROOT)) <= 1e-10


def test_y0_log_singularity_sign():
    assert specfun.bessel_y0(1e-4) < -5.0


def test_hankel_definitional_identity():
    for x in (0.003, 0.7, 4.2, 31.0, 800.0):
        h0 = specfun.hankel2_0(x)
        assert h0.real == specfun.bessel_j0(x)
        assert h0.imag == -specfun.bessel_y0(x)
        h1 = specfun.hankel2_1(x)
        assert h1.real == specfun.bessel_j1(x)
        assert h1.imag == -specfun.bessel_y1(x)


def test_hankel_large_argument_magnitude():
    x = 1e3
    asymptotic = np.sqrt(2.0 / (np.pi * x))
    assert abs(abs(specfun.hankel2_0(x)) - asymptotic) <= 1e-3 * asymptotic


@settings(max_examples=300, deadline=None)
@given(log_x)
def test_wronskian(x):
    lhs = specfun.bessel_j1(x) * specfun.bessel_y0(x) - specfun.bessel_j0(
        x
    ) * specfun.bessel_y1(x)
    rhs = 2.0 / (np.pi * x)
    assert abs(lhs - rhs) <= 1e-9 * rhs


@settings(max_examples=300, deadline=None)
@given(log_x)
def test_continuity_no_branch_seams(x):
    # seam metric: first-order Taylor residual between adjacent arguments,
    # scaled by the local oscillation envelope. A jump between approximation
    # regimes breaks this; smooth evolution leaves O(h^2) residue. Recurrences:
    # j0' = -j1, y0' = -y1, j1' = j0 - j1/x, y1' = y0 - y1/x.
    x2 = x * (1 + 1e-9)
    h = x2 - x
    j0, y0 = specfun.bessel_j0, specfun.bessel_y0
    j1, y1 = specfun.bessel_j1, specfun.bessel_y1
    pairs = [
        (j0, lambda t: -j1(t)),
        (y0, lambda t: -y1(t)),
        (j1, lambda t: j0(t) - j1(t) / t),
        (y1, lambda t: y0(t) - y1(t) / t),
        (specfun.hankel2_0, lambda t: -specfun.hankel2_1(t)),
    ]
    envelope = max(np.sqrt(2.0 / (np.pi * x)), abs(y0(x)), abs(y1(x)))
    for f, deriv in pairs:
        residual = abs(f(x2) - f(x) - deriv(x) * h)
        assert residual <= 1e-6 * envelope


@pytest.mark.parametrize("func", ALL_FUNCS)
@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_domain_errors(func, bad):
    with pytest.raises(ValueError):
        func(bad)


def test_vectorized_and_scalar_forms():
    xs = np.array([0.5, 1.0, 2.0])
    vec = specfun.bessel_j0(xs)
    assert vec.shape == (3,)
    assert vec[1] == specfun.bessel_j0(1.0)
    assert isinstance(specfun.hankel2_0(1.0), complex)
    with pytest.raises(ValueError):
        specfun.bessel_j0(np.array([1.0, -2.0]))
