#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
Test the special functions.
"""

import math
import unittest

import numpy as np
from scipy import special

from polyens.numerics import PreconditionError
from polyens.specfun import (
    bessel_i_reg,
    factorial,
    hermite_monic,
    hermite_monic_coefficients,
    laguerre_monic,
    laguerre_monic_coefficients,
    log_gamma,
)


class TestPolynomials(unittest.TestCase):
    """Monic Hermite and Laguerre polynomials."""

    def test_hermite(self):
        """Low degrees and the recurrence."""
        self.assertEqual(hermite_monic(0, 3.7), 1.0)
        self.assertEqual(hermite_monic(1, 0.4), 0.4)
        self.assertAlmostEqual(hermite_monic(2, 1.5), 1.5**2 - 0.5, places=14)
        self.assertAlmostEqual(hermite_monic(3, 2.0), 5.0, places=14)
        z = np.array([0.3, -1.2 + 0.5j])
        physicists = np.polynomial.hermite.hermval(z, [0] * 6 + [1])
        np.testing.assert_allclose(hermite_monic(6, z), physicists / 2**6, rtol=1e-13)
        with self.assertRaises(PreconditionError):
            hermite_monic(-1, 0.0)

    def test_laguerre(self):
        """Low degrees and scipy's generalised Laguerre polynomials."""
        self.assertEqual(laguerre_monic(0, 1.5, 2.0), 1.0)
        self.assertAlmostEqual(laguerre_monic(1, 1.5, 2.0), 4.5, places=14)
        self.assertAlmostEqual(laguerre_monic(3, 0.0, 2.0), 86.0, places=12)
        for nu in (0.0, 1.0, 2.5):
            for a in (0.3, 1.7):
                self.assertAlmostEqual(
                    laguerre_monic(5, nu, a) / (120 * special.eval_genlaguerre(5, nu, -a)),
                    1.0,
                    places=12,
                )
        with self.assertRaises(PreconditionError):
            laguerre_monic(2, -1.0, 0.5)

    def test_coefficients(self):
        """Coefficient lists match the evaluations."""
        np.testing.assert_allclose(hermite_monic_coefficients(3)[3], [0.0, -1.5, 0.0, 1.0])
        np.testing.assert_allclose(laguerre_monic_coefficients(2, 0.0)[2], [2.0, 4.0, 1.0])
        for k, poly in enumerate(laguerre_monic_coefficients(6, 1.5)):
            self.assertEqual(len(poly), k + 1)
            self.assertAlmostEqual(
                np.polynomial.polynomial.polyval(0.8, poly), laguerre_monic(k, 1.5, 0.8), 10
            )


class TestBessel(unittest.TestCase):
    """The regularised Bessel function."""

    def test_values(self):
        """Against scipy's I and J Bessel functions."""
        self.assertEqual(bessel_i_reg(0.0, 0.0), 1.0)
        self.assertAlmostEqual(bessel_i_reg(0.0, 1.0), special.iv(0, 2.0), places=12)
        w = 2.3
        self.assertAlmostEqual(
            bessel_i_reg(1.5, w) / (special.iv(1.5, 2 * math.sqrt(w)) * w**-0.75),
            1.0,
            places=12,
        )
        # I_nu(x) = i**-nu J_nu(i x): negative arguments give J
        self.assertAlmostEqual(bessel_i_reg(1.0, -1.0), special.jv(1, 2.0), places=12)

    def test_recurrence(self):
        """``g_{nu-1}(w) - w g_{nu+1}(w) = nu g_nu(w)``."""
        for x in (0.5, 2.0, 5.0):
            w = x**2 / 4
            for nu in range(1, 5):
                lhs = bessel_i_reg(nu - 1, w) - w * bessel_i_reg(nu + 1, w)
                rhs = nu * bessel_i_reg(nu, w)
                self.assertLess(abs(lhs - rhs) / abs(rhs), 1e-10)

    def test_arrays(self):
        """Arrays in, arrays out."""
        values = bessel_i_reg(0.5, np.array([[0.1, 2.0], [-3.0, 1j]]))
        self.assertEqual(values.shape, (2, 2))
        with self.assertRaises(PreconditionError):
            bessel_i_reg(-1.0, 1.0)


class TestGamma(unittest.TestCase):
    """Factorials and log-gamma."""

    def test_values(self):
        """Table and asymptotic values."""
        self.assertEqual(log_gamma(1), 0.0)
        self.assertAlmostEqual(log_gamma(5), math.log(24), places=14)
        self.assertAlmostEqual(log_gamma(0.5), math.log(math.sqrt(math.pi)), places=13)
        self.assertEqual(factorial(5), 120.0)
        self.assertAlmostEqual(factorial(25) / math.factorial(25), 1.0, places=12)
        with self.assertRaises(PreconditionError):
            log_gamma(0.0)
        with self.assertRaises(PreconditionError):
            factorial(-2)


if __name__ == "__main__":
    unittest.main()
