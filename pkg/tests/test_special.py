import math

import mpmath
import numpy as np
import pytest

from onebit_radar.special import SeriesDivergenceError, double_factorial, hyp1f1, hyp_pfq


@pytest.mark.parametrize("a,b,x", [
    ([0.5], [2], -0.3), ([1.5], [4], -12.0), ([2.5], [6], -80.0),
    ([2.0, 2.5, 1.5], [1, 4, 4], -3.0), ([2.0, 2.5, 1.5], [1, 4, 4], -40.0),
    ([3.0, 3.5, 2.5], [3, 3, 6], -25.0), ([1.0], [3], 5.0),
])
def test_hyp_pfq_matches_mpmath(a, b, x):
    ref = float(mpmath.hyper(a, b, x, maxterms=10**6))
    got = hyp_pfq(a, b, x)
    assert got == pytest.approx(ref, rel=1e-10, abs=1e-14 * max(1.0, abs(ref)))


def test_hyp_pfq_terminating_and_zero():
    # a = -2 terminates: 1 + (-2)(x)/1 + (-2)(-1) x^2 / (1*2 * 2!) ...
    assert hyp_pfq([-2], [1], 0.5) == pytest.approx(float(mpmath.hyp1f1(-2, 1, 0.5)), rel=1e-14)
    assert hyp_pfq([0.5], [2], 0.0) == 1.0


def test_hyp1f1_kummer_identity():
    # Kummer: 1F1(a; b; x) = e^x 1F1(b - a; b; -x)
    for a, b, x in [(0.5, 2, 3.0), (1.5, 4, -7.0), (2.5, 6, 10.0)]:
        assert hyp1f1(a, b, x) == pytest.approx(math.exp(x) * hyp1f1(b - a, b, -x), rel=1e-11)


def test_hyp_pfq_divergence_reported():
    with pytest.raises(SeriesDivergenceError) as ei:
        hyp_pfq([1.0, 1.0, 1.0], [2.0], 0.5, max_terms=20)
    assert ei.value.terms == 20


def test_hyp_pfq_rejects_bad_lower_parameter():
    with pytest.raises(ValueError):
        hyp_pfq([1.0], [-2], 0.1)


def test_double_factorial():
    assert [double_factorial(n) for n in (-1, 0, 1, 2, 3, 5, 7, 8)] == [1, 1, 1, 2, 3, 15, 105, 384]
    assert np.isclose(double_factorial(9), 945)
