#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
Test the Monte Carlo samplers and the tensor quadrature oracle.
"""

import unittest

import numpy as np

from polyens.ensemble import equal_ratio_expectation, gue
from polyens.invertible import RatioQuery, chgue_ext, gue_ext, ratio_expectation
from polyens.numerics import PreconditionError, relative_gap
from polyens.oracle import (
    SampleBatch,
    mc_expect,
    mc_expect_ratio,
    quad_expect,
    ratio_function,
    sample_chgue_ext,
    sample_gue_ext,
)


def _trace(xs):
    return np.sum(xs, axis=-1)


class TestSampling(unittest.TestCase):
    """Reproducible matrix-model samplers."""

    def test_replay(self):
        """The same seed gives back the same batch."""
        a = (0.3, -0.7, 1.1)
        batch = sample_gue_ext(a, 5, seed=3)
        self.assertEqual(batch, sample_gue_ext(a, 5, seed=3))
        self.assertNotEqual(batch, sample_gue_ext(a, 5, seed=4))
        self.assertEqual((batch.count, batch.n), (5, 3))
        # samples are drawn independently of the batch size
        prefix = sample_gue_ext(a, 3, seed=3)
        np.testing.assert_array_equal(prefix.eigenvalues, batch.eigenvalues[:3])
        chiral = sample_chgue_ext((0.5, 1.2), 1, 4, seed=11)
        self.assertEqual(chiral, sample_chgue_ext((0.5, 1.2), 1, 4, seed=11))
        self.assertTrue(np.all(chiral.eigenvalues > 0))
        # eigenvalues are sorted
        self.assertTrue(np.all(np.diff(batch.eigenvalues, axis=1) >= 0))
        with self.assertRaises(ValueError):
            batch.eigenvalues[0, 0] = 1.0

    def test_preconditions(self):
        """Invalid seeds, counts and parameters."""
        with self.assertRaises(PreconditionError):
            sample_gue_ext((0.5,), 3, seed=-1)
        with self.assertRaises(PreconditionError):
            sample_gue_ext((0.5,), 3, seed=1 << 64)
        with self.assertRaises(PreconditionError):
            sample_gue_ext((0.5,), 0, seed=1)
        with self.assertRaises(PreconditionError):
            sample_chgue_ext((0.5,), 1.5, 3, seed=1)
        with self.assertRaises(PreconditionError):
            sample_chgue_ext((0.5, 0.0), 0, 3, seed=1)
        with self.assertRaises(PreconditionError):
            SampleBatch(np.zeros(3), 1)


class TestMonteCarlo(unittest.TestCase):
    """Sample means against exact expectations."""

    def test_traces(self):
        """``E[Tr H]`` of both matrix models."""
        a = (0.3, -0.7, 1.1)
        estimate = mc_expect(sample_gue_ext(a, 10000, seed=7), _trace)
        self.assertTrue(estimate.agrees_with(sum(a)), estimate)
        a, nu = (0.5, 1.2), 2
        estimate = mc_expect(sample_chgue_ext(a, nu, 10000, seed=7), _trace)
        self.assertTrue(estimate.agrees_with(sum(a) + 2 * (2 + nu)), estimate)
        self.assertEqual(estimate.count, 10000)

    def test_ratio(self):
        """A ratio of characteristic polynomials against the residue formula."""
        a = (0.3, -0.7)
        zs, ys = (0.4,), (0.2 + 1.5j,)
        estimate = mc_expect_ratio(sample_gue_ext(a, 20000, seed=5), zs, ys)
        exact = ratio_expectation(gue_ext(a), RatioQuery(zs, ys)).value
        self.assertTrue(estimate.agrees_with(exact, sigmas=4.0), (estimate, exact))

    def test_chiral_ratio(self):
        """The chiral matrix model against the residue formula."""
        a, nu = (0.5, 1.2, 2.0), 1
        zs, ys = (0.5, 1.5 + 0.5j), (1.0 + 2.0j,)
        estimate = mc_expect_ratio(sample_chgue_ext(a, nu, 10000, seed=13), zs, ys)
        exact = ratio_expectation(chgue_ext(a, nu=nu), RatioQuery(zs, ys)).value
        self.assertTrue(estimate.agrees_with(exact, sigmas=4.0), (estimate, exact))

    def test_equal_ratio(self):
        """Two over two points: the determinantal formula against the matrix model."""
        a = (0.3, -0.7, 1.1)
        zs, ys = (0.4, -0.3 + 0.1j), (0.2 + 1.2j, 1.1 - 1.0j)
        estimate = mc_expect_ratio(sample_gue_ext(a, 10000, seed=29), zs, ys)
        exact = equal_ratio_expectation(gue_ext(a), zs, ys)
        self.assertTrue(estimate.agrees_with(exact, sigmas=4.0), (estimate, exact))

    def test_estimator_preconditions(self):
        """Estimators need two samples and one value per sample."""
        with self.assertRaises(PreconditionError):
            mc_expect(sample_gue_ext((0.5,), 1, seed=1), _trace)
        batch = sample_gue_ext((0.5, 0.1), 4, seed=1)
        with self.assertRaises(PreconditionError):
            mc_expect(batch, lambda xs: xs)
        with self.assertRaises(PreconditionError):
            ratio_function((0.1,), (0.5,))

    def test_ratio_function(self):
        """The symmetric function evaluated on a single point set."""
        ratio = ratio_function((1.0, 2.0), (1j,))
        xs = np.array([[0.5, -0.5]])
        expected = (0.5 * 1.5) * (1.5 * 2.5) / ((1j - 0.5) * (1j + 0.5))
        self.assertAlmostEqual(ratio(xs)[0], expected, places=14)


class TestQuadrature(unittest.TestCase):
    """The tensor-product quadrature."""

    def test_normalisation(self):
        """``E[1] = 1``."""
        for ens in (gue(2), gue_ext((0.3, -0.7, 1.1)), chgue_ext((0.5, 1.2), nu=1.0)):
            result = quad_expect(ens, lambda xs: np.ones(len(xs)))
            self.assertAlmostEqual(result.value, 1.0, places=10)

    def test_schur(self):
        """Schur expectations of the two points Gaussian ensemble."""
        ens = gue(2)
        self.assertAlmostEqual(
            quad_expect(ens, lambda xs: xs[:, 0] * xs[:, 1]).value, -0.5, places=10
        )
        square = quad_expect(ens, lambda xs: xs[:, 0] ** 2 + xs[:, 0] * xs[:, 1] + xs[:, 1] ** 2)
        self.assertAlmostEqual(square.value, 1.5, places=10)

    def test_ratios(self):
        """Ratios against the residue formula, away from the real axis."""
        cases = (
            (gue_ext((0.3, -0.7)), (0.4,), (0.2 + 1.2j,)),
            (gue_ext((0.3, -0.7, 1.1)), (0.4, -0.2 + 0.3j), (1.0 + 1.0j,)),
            (chgue_ext((0.5, 1.2), nu=1.0), (0.5,), (1.0 + 2.0j,)),
            # (M, L) = (0, 1), (2, 1) and (2, 2)
            (gue_ext((0.3, -0.7)), (), (0.2 + 1.2j,)),
            (gue_ext((0.3, -0.7)), (0.4, -0.2 + 0.3j), (0.5 + 1.0j,)),
            (gue_ext((0.3, -0.7)), (0.4, -0.5), (0.2 + 1.2j, -0.3 - 1.0j)),
            (chgue_ext((0.5, 1.2), nu=0.0), (0.5, 1.5), (1.0 + 2.0j, 0.5 - 1.5j)),
            (chgue_ext((0.5, 1.2, 2.0), nu=1.0), (0.5,), (1.0 + 2.0j,)),
            (chgue_ext((0.5, 1.2, 2.0), nu=1.0), (0.5, 2.5), ()),
        )
        for ens, zs, ys in cases:
            quad = quad_expect(ens, ratio_function(zs, ys)).value
            exact = ratio_expectation(ens, RatioQuery(zs, ys)).value
            self.assertLess(relative_gap(quad, exact), 1e-6, ens)

    def test_size_limit(self):
        """Four points and more are refused."""
        with self.assertRaises(PreconditionError):
            quad_expect(gue(4), lambda xs: np.ones(len(xs)))


if __name__ == "__main__":
    unittest.main()
