"""Special-function accuracy against independent oracles.

Two oracle families: a from-scratch Maclaurin series evaluated with
``math.fsum`` (independent of the package's positive-term series /
continued-fraction code paths) and mpmath at 30 significant digits.
"""

import math

import mpmath
import numpy as np
import pytest

from softsil import special
from softsil.errors import NumericError

mpmath.mp.dps = 30


def erf_series_oracle(x):
    """Alternating Maclaurin series with compensated summation.

    erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1)); reliable in
    double precision for |x| <= 2.5.
    """
    terms = []
    term = x
    n = 0
    while abs(term) > 1e-22:
        terms.append(term / (2 * n + 1))
        n += 1
        term = -term * x * x / n
        if n > 200:
            break
    return 2.0 / math.sqrt(math.pi) * math.fsum(terms)


class TestErf:
    def test_odd_and_zero(self):
        assert special.erf(0.0) == 0.0
        xs = np.linspace(0.1, 5.0, 50)
        np.testing.assert_allclose(special.erf(-xs), -special.erf(xs),
                                   rtol=0, atol=0)

    def test_saturation(self):
        assert abs(special.erf(6.0) - 1.0) < 1e-12
        assert abs(special.erf(-6.0) + 1.0) < 1e-12

    def test_against_series_oracle(self):
        for x in np.linspace(-2.4, 2.4, 97):
            assert abs(special.erf(float(x)) - erf_series_oracle(float(x))) < 1e-13

    def test_against_mpmath(self):
        xs = np.concatenate([np.linspace(-6, 6, 241), [-25.0, 25.0]])
        for x in xs:
            ref = float(mpmath.erf(float(x)))
            assert abs(special.erf(float(x)) - ref) <= 1e-10

    def test_erfc_relative_accuracy(self):
        for x in np.logspace(-3, 1.3, 50):
            ref = float(mpmath.erfc(float(x)))
            assert abs(special.erfc(float(x)) - ref) <= 1e-10 * ref

    def test_vectorized(self):
        out = special.erf(np.array([[0.0, 1.0], [-1.0, 2.0]]))
        assert out.shape == (2, 2)
        assert out[0, 0] == 0.0


class TestLGamma:
    def test_against_stdlib(self):
        for p in np.logspace(-2, 2.3, 80):
            ref = math.lgamma(float(p))
            assert abs(special.lgamma(float(p)) - ref) <= 1e-11 * max(1.0, abs(ref))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            special.lgamma(0.0)


class TestLowerIncompleteGamma:
    # documented ranges: p in [0.05, 100], x in [0, 1e3]
    P_GRID = (0.05, 0.3, 0.5, 1.0, 2.0, 3.5, 10.0, 50.0, 100.0)

    def test_against_mpmath(self):
        worst = 0.0
        for p in self.P_GRID:
            for x in np.logspace(-8, 3, 40):
                mine = special.lower_incomplete_gamma(p, float(x))
                ref = float(mpmath.gammainc(p, 0, float(x), regularized=True))
                if ref > 1e-290:
                    worst = max(worst, abs(mine - ref) / ref)
        assert worst <= 1e-10

    def test_boundaries(self):
        assert special.lower_incomplete_gamma(0.5, 0.0) == 0.0
        assert abs(special.lower_incomplete_gamma(1.0, 800.0) - 1.0) < 1e-14

    def test_erf_identity(self):
        # gamma(1/2, x) / Gamma(1/2) == erf(sqrt(x)): cross-check of the two
        # independent in-package code paths
        for x in np.linspace(0.01, 9.0, 60):
            lhs = special.lower_incomplete_gamma(0.5, float(x))
            rhs = special.erf(math.sqrt(x))
            assert abs(lhs - rhs) <= 1e-10
        assert abs(special.lower_incomplete_gamma(0.5, 1.0)
                   - 0.8427007929497149) < 1e-10

    def test_unregularized(self):
        val = special.lower_incomplete_gamma(3.0, 2.5, regularized=False)
        ref = float(mpmath.gammainc(3.0, 0, 2.5))
        assert abs(val - ref) <= 1e-10 * ref

    def test_input_validation(self):
        with pytest.raises(ValueError):
            special.lower_incomplete_gamma(-1.0, 2.0)
        with pytest.raises(ValueError):
            special.lower_incomplete_gamma(1.0, -2.0)

    def test_iteration_cap(self):
        with pytest.raises(NumericError):
            special.lower_incomplete_gamma(0.5, 0.4, max_iter=2)


class TestNormalCdf:
    def test_values(self):
        assert abs(special.normal_cdf(0.0) - 0.5) < 1e-15
        for z in (-3.0, -1.0, 0.5, 2.0):
            ref = float(mpmath.ncdf(z))
            assert abs(special.normal_cdf(z) - ref) < 1e-12


class TestToleranceContract:
    def test_defaults_hold(self):
        from softsil.special import SpecialFunctionTolerances, verify_tolerances
        erf_err, gamma_err = verify_tolerances(SpecialFunctionTolerances())
        assert erf_err <= 1e-10
        assert gamma_err <= 1e-10

    def test_rejects_loose_tolerances(self):
        from softsil.errors import ConfigurationError
        from softsil.special import SpecialFunctionTolerances
        with pytest.raises(ConfigurationError):
            SpecialFunctionTolerances(erf_abs_tol=1e-6)
