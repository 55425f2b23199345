#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
Test invertible ensembles: inversion identities, ratios and kernels.
"""

import itertools
import math
import unittest

import numpy as np

from polyens.ensemble import (
    YoungDiagram,
    equal_ratio_expectation,
    giambelli_check,
    h_determinant,
    inverse_expectation,
)
from polyens.invertible import (
    CertificationError,
    ChGueExtEnsemble,
    GueExtEnsemble,
    RatioQuery,
    chgue_ext,
    correlation_function,
    get_ensemble,
    gue_ext,
    inverse_transform,
    kernel,
    kernel_trace,
    product_expectation,
    ratio_expectation,
    ratio_m_plus_one_over_one,
    residue_sum,
)
from polyens.numerics import (
    ConvergenceError,
    PreconditionError,
    compensated_sum,
    gauss_rule,
    relative_gap,
)
from polyens.specfun import hermite_monic
from polyens.vandermonde import CoincidentPointsError

_SQRT_PI = math.sqrt(math.pi)

_GUE_A = (0.3, -0.7, 1.1)
_CHGUE_A = (0.5, 1.2, 2.0)


def _gaussian_pi(k, a):
    value = (-1j) ** k * hermite_monic(k, 1j * np.asarray(a))
    return np.real(value) if np.isrealobj(a) else value


def _custom_gaussian(a, pi=_gaussian_pi, **kwargs):
    reference = gue_ext(a)
    return get_ensemble(
        "custom",
        a=a,
        phi_a=lambda b, x: np.exp(-((x - b) ** 2)) / _SQRT_PI,
        pi=pi,
        inverse_kernel=reference.inverse_kernel,
        aux_path=reference.aux_path,
        **kwargs,
    )


class TestConstruction(unittest.TestCase):
    """Building and certifying ensembles."""

    def test_factory(self):
        """The factory and its refusals."""
        self.assertIsInstance(get_ensemble("gue_ext", a=_GUE_A), GueExtEnsemble)
        ens = get_ensemble("chgue_ext", a=_CHGUE_A, nu=1.0)
        self.assertIsInstance(ens, ChGueExtEnsemble)
        self.assertEqual(ens.nu, 1.0)
        self.assertEqual(ens.n, 3)
        self.assertIn("certification", ens._cache)
        with self.assertRaises(ValueError):
            get_ensemble("goe_ext", a=_GUE_A)

    def test_preconditions(self):
        """Invalid parameters."""
        with self.assertRaises(CoincidentPointsError):
            gue_ext([0.5, 0.5])
        with self.assertRaises(PreconditionError):
            gue_ext([])
        with self.assertRaises(PreconditionError):
            chgue_ext([0.5, -1.0])
        with self.assertRaises(PreconditionError):
            chgue_ext([0.5, 1.0], nu=-1.0)
        with self.assertRaises(ValueError):
            ens = gue_ext(_GUE_A)
            ens.a[0] = 3.0
        self.assertEqual(gue_ext(_GUE_A).a[0], 0.3)

    def test_custom(self):
        """A user-defined copy of the Gaussian ensemble, and a broken one."""
        ens = _custom_gaussian(_GUE_A)
        self.assertEqual(ens.kind, "custom")
        query = RatioQuery((0.4,), (0.1 + 0.8j,))
        self.assertLess(
            relative_gap(
                ratio_expectation(ens, query).value,
                ratio_expectation(gue_ext(_GUE_A), query).value,
            ),
            1e-8,
        )
        # F divided by the contour weight, supplied or derived from the path
        reduced = _custom_gaussian(
            _GUE_A, reduced_inverse_kernel=gue_ext(_GUE_A).reduced_inverse_kernel
        )
        for custom in (ens, reduced):
            self.assertLess(
                relative_gap(
                    custom.aux_moments([0.4 + 0.3j], 6, "quadrature").value,
                    gue_ext(_GUE_A).aux_moments([0.4 + 0.3j], 6, "quadrature").value,
                ),
                1e-10,
            )
        # orthogonal monic Hermite polynomials are not the moments of exp(-(x-a)**2)
        with self.assertRaises(CertificationError):
            _custom_gaussian(_GUE_A, pi=lambda k, a: hermite_monic(k, a))

    def test_aux_paths(self):
        """The auxiliary contours drive the inverse transform quadratures."""
        ens = gue_ext(_GUE_A, nodes=64)
        self.assertEqual(ens.aux_path.kind, "imaginary-axis")
        self.assertEqual(ens.aux_nodes, 64)
        nodes, coefs = ens.aux_rule([0.3, 0.5j], 2)
        self.assertEqual(coefs.shape, (2, 128))
        np.testing.assert_allclose(nodes, 1j * gauss_rule("hermite", 128).nodes)
        chiral = chgue_ext(_CHGUE_A, nu=1.5)
        self.assertEqual(chiral.aux_path.kind, "negative-half-line")
        self.assertEqual(chiral.aux_path.alpha, 1.5)
        self.assertEqual(chiral.aux_nodes, 200)
        nodes, _ = chiral.aux_rule([0.3])
        self.assertTrue(np.all(nodes.real < 0))


class TestInversion(unittest.TestCase):
    """Both inversion identities and the partition function."""

    def test_gaussian_moments(self):
        """``int x**k phi(a, x) dx = pi_k(a)``."""
        ens = gue_ext(_GUE_A)
        moments = ens.moment_matrix(8)
        expected = np.array([ens.pi(k, ens.a) for k in range(9)])
        self.assertLess(relative_gap(moments, expected), 1e-10)
        self.assertAlmostEqual(ens.pi(2, 0.7), 0.7**2 + 0.5, places=14)
        self.assertAlmostEqual(ens.pi(3, -1.3), (-1.3) ** 3 + 1.5 * -1.3, places=13)

    def test_chiral_moments(self):
        """Same for the chiral ensemble."""
        for nu in (0.0, 1.0, 2.5):
            ens = chgue_ext((0.3, 1.7), nu=nu)
            moments = ens.moment_matrix(8)
            expected = np.array([ens.pi(k, ens.a) for k in range(9)])
            scale = np.maximum(np.abs(expected), 1.0)
            self.assertLess(np.max(np.abs(moments - expected) / scale), 1e-8, nu)

    def test_inverse_transforms(self):
        """``int_I' F(s, z) pi_k(s) ds = z**k``."""
        z = 0.7 + 0.2j
        for ens in (gue_ext(_GUE_A), chgue_ext(_CHGUE_A, nu=1.5)):
            coefficients = ens.pi_coefficients(8)
            quadrature = ens.aux_moments([z], 8, "quadrature").value
            transforms = quadrature @ coefficients
            self.assertLess(relative_gap(transforms[0], z ** np.arange(9)), 1e-8, ens)
            exact = ens.aux_moments([z], 8, "monic_basis")
            self.assertEqual(exact.gap, 0.0)
            self.assertLess(relative_gap(exact.value, quadrature), 1e-8, ens)
            self.assertLess(
                relative_gap(exact.value[0] @ coefficients, z ** np.arange(9)), 1e-7, ens
            )
        # pi_1(s) = s, pi_2(s) = s**2 + 1/2 and, for the chiral ensemble, pi_1(s) = s + nu + 1
        np.testing.assert_allclose(
            gue_ext(_GUE_A).aux_moments([z], 2, "monic_basis").value[0],
            [1.0, z, z**2 - 0.5],
            rtol=1e-14,
        )
        np.testing.assert_allclose(
            chgue_ext(_CHGUE_A, nu=1.5).aux_moments([z], 1, "monic_basis").value[0],
            [1.0, z - 2.5],
            rtol=1e-14,
        )
        ens = gue_ext(_GUE_A)
        # pi_2(s) = s**2 + 1/2
        for method in ("quadrature", "monic_basis", "auto"):
            result = inverse_transform(ens, 0.5 + 0.1j, [0.5, 0.0, 1.0], method)
            self.assertAlmostEqual(result.value, (0.5 + 0.1j) ** 2, places=10)
        with self.assertRaises(PreconditionError):
            ens.aux_moments([z], 2, "guess")

    def test_partition_function(self):
        """``Z_N = N! Delta_N(a)`` up to N = 5."""
        gaussian = (0.9, 0.4, -0.2, -0.6, 1.3)
        chiral = (0.3, 0.8, 1.4, 2.0, 2.7)
        for n in range(1, 6):
            for ens in (gue_ext(gaussian[:n]), chgue_ext(chiral[:n], nu=0.5)):
                closed = ens.partition_function_closed_form()
                self.assertLess(abs(ens.partition_function() - closed) / abs(closed), 1e-8, ens)
        self.assertAlmostEqual(gue_ext([0.5, -0.5]).partition_function_closed_form(), 2.0)
        self.assertEqual(gue_ext([0.5]).partition_function_closed_form(), 1.0)

    def test_residues(self):
        """Residue sums, exact and along a circle."""
        ens = gue_ext(_GUE_A)
        for residues in ("exact", "circle"):
            self.assertAlmostEqual(
                residue_sum(ens, lambda u: u**2, residues).value, 1.0, places=10
            )
            self.assertAlmostEqual(
                residue_sum(ens, lambda u: np.ones_like(u), residues).value, 0.0, places=10
            )
        with self.assertRaises(PreconditionError):
            residue_sum(ens, np.exp, "guess")


class TestRatios(unittest.TestCase):
    """Expectations of products and ratios of characteristic polynomials."""

    def test_queries(self):
        """Query validation."""
        query = RatioQuery([0.1, 0.2], 1j)
        self.assertEqual((query.m, query.l), (2, 1))
        with self.assertRaises(PreconditionError):
            RatioQuery((), (0.5,))
        with self.assertRaises(CoincidentPointsError):
            RatioQuery((1j,), (1j,))
        with self.assertRaises(CoincidentPointsError):
            RatioQuery((0.1, 0.1), ())
        with self.assertRaises(PreconditionError):
            ratio_expectation(gue_ext([0.5]), RatioQuery((), (1j, 2j)))

    def test_empty(self):
        """An empty ratio is 1."""
        self.assertEqual(ratio_expectation(gue_ext(_GUE_A), RatioQuery()).value, 1.0)

    def test_products(self):
        """``E[D(z)]`` against closed forms."""
        ens = gue_ext([0.5, -0.5])
        # E[det(z - A - W)] = (z - a_1)(z - a_2) - E|w_12|**2
        expected = 0.8**2 - 0.25 - 0.5
        self.assertAlmostEqual(product_expectation(ens, [0.8]).value, expected, places=10)
        self.assertAlmostEqual(
            ratio_expectation(ens, RatioQuery((0.8,))).value, expected, places=10
        )
        self.assertAlmostEqual(
            product_expectation(ens, [0.8], "monic_basis").value, expected, places=12
        )
        # a vanishing source gives back the monic Hermite polynomial
        eps = 1e-3
        vanishing = gue_ext([eps, -eps])
        self.assertAlmostEqual(
            product_expectation(vanishing, [0.8]).value, hermite_monic(2, 0.8) - eps**2, 10
        )
        zs = [0.3, -0.4 + 0.2j]
        self.assertLess(
            relative_gap(
                product_expectation(ens, zs).value, ratio_expectation(ens, RatioQuery(zs)).value
            ),
            1e-10,
        )
        self.assertEqual(product_expectation(ens, []).value, 1.0)

    def test_far_points(self):
        """Far from the origin the contour quadrature fails its gate and the
        default strategy switches to the monic basis."""
        ens = gue_ext([0.5, -0.5])
        with self.assertRaises(ConvergenceError):
            product_expectation(ens, [6.0], "quadrature")
        for method in (None, "auto", "monic_basis"):
            result = product_expectation(ens, [6.0], method)
            self.assertAlmostEqual(result.value, 36.0 - 0.75, places=9)
            self.assertEqual(result.gap, 0.0)
        chiral = chgue_ext([0.5, 1.2])
        query = RatioQuery((20.0,), (1.0 + 1.0j,))
        self.assertLess(
            relative_gap(
                ratio_expectation(chiral, query, "auto").value,
                ratio_expectation(chiral, query, "monic_basis").value,
            ),
            1e-8,
        )

    def test_degree(self):
        """``E[D(z)]`` is a monic polynomial of degree N: finite differences."""
        h = 0.5
        for ens in (gue_ext(_GUE_A), chgue_ext(_CHGUE_A, nu=1.0)):
            n = ens.n
            values = [product_expectation(ens, [0.2 + k * h]).value for k in range(n + 2)]
            annihilating = [(-1) ** k * math.comb(n + 1, k) for k in range(n + 2)]
            self.assertLess(abs(compensated_sum(np.multiply(annihilating, values))), 1e-6, ens)
            leading = [(-1) ** (n - k) * math.comb(n, k) for k in range(n + 1)]
            self.assertAlmostEqual(
                compensated_sum(np.multiply(leading, values[: n + 1])),
                math.factorial(n) * h**n,
                places=6,
            )

    def test_permutations(self):
        """Ratios are symmetric in the zs and in the ys."""
        cases = (
            (gue_ext(_GUE_A), (0.4, -0.3 + 0.1j, 1.5), (0.2 + 0.9j, 1.1 - 0.6j)),
            (chgue_ext(_CHGUE_A, nu=1.0), (0.4, 2.0 + 0.5j, 1.2), (1.0 + 1.5j, 0.5 - 1.0j)),
        )
        for ens, zs, ys in cases:
            reference = ratio_expectation(ens, RatioQuery(zs, ys)).value
            for zs_p, ys_p in itertools.product(
                itertools.permutations(zs), itertools.permutations(ys)
            ):
                value = ratio_expectation(ens, RatioQuery(zs_p, ys_p)).value
                self.assertLess(relative_gap(value, reference), 1e-12, (ens, zs_p, ys_p))

    def test_inverse_path(self):
        """``E[1/D(y)]``: residue formula against the general ensemble formula."""
        for ens in (gue_ext(_GUE_A), chgue_ext(_CHGUE_A, nu=1.0)):
            for y in (0.3 + 0.5j, 1.0 - 1.0j):
                value = ratio_expectation(ens, RatioQuery((), (y,))).value
                self.assertLess(relative_gap(value, inverse_expectation(ens, y)), 1e-8)

    def test_m_plus_one_over_one(self):
        """The bordered determinant path against the general formula."""
        for ens in (gue_ext(_GUE_A), chgue_ext(_CHGUE_A, nu=1.0)):
            for zs in ([0.4], [0.4, -0.3 + 0.1j], [0.4, -0.3 + 0.1j, 1.5]):
                y = 0.2 + 0.9j
                special = ratio_m_plus_one_over_one(ens, zs, y).value
                general = ratio_expectation(ens, RatioQuery(zs, (y,))).value
                self.assertLess(relative_gap(special, general), 1e-8, (ens, zs))
        with self.assertRaises(PreconditionError):
            ratio_m_plus_one_over_one(gue_ext(_GUE_A), [], 1j)

    def test_equal_ratios(self):
        """The determinantal formula built on single ratios."""
        for ens in (gue_ext(_GUE_A), chgue_ext(_CHGUE_A, nu=0.0)):
            zs, ys = [0.4, -0.3 + 0.1j], [0.2 + 0.9j, 1.1 - 0.6j]
            general = ratio_expectation(ens, RatioQuery(zs, ys)).value
            determinantal = equal_ratio_expectation(ens, zs, ys)
            self.assertLess(relative_gap(general, determinantal), 1e-7, ens)

    def test_single_ratio(self):
        """``E[D(z)/D(y)]`` tends to 1 when z approaches y."""
        ens = gue_ext(_GUE_A)
        y = 0.3 + 0.6j
        self.assertLess(abs(ens.single_ratio(y + 1e-6, y) - 1.0), 1e-4)

    def test_conjugation(self):
        """Real ensembles commute with complex conjugation."""
        ens = chgue_ext(_CHGUE_A, nu=1.0)
        zs, ys = (0.4, 2.0 + 0.5j), (1.0 + 1.5j,)
        value = ratio_expectation(ens, RatioQuery(zs, ys)).value
        mirrored = ratio_expectation(ens, RatioQuery(np.conj(zs), np.conj(ys))).value
        self.assertLess(relative_gap(np.conj(value), mirrored), 1e-9)


class TestKernel(unittest.TestCase):
    """The correlation kernel."""

    def test_single_point(self):
        """``K_1(x, y) = exp(-y**2) / sqrt(pi)`` for a vanishing source."""
        xs, ys = np.meshgrid([-1.0, 0.0, 0.7, 2.5], [-1.5, 0.0, 0.3])
        np.testing.assert_allclose(
            kernel(gue_ext([0.0]), xs, ys).value, np.exp(-(ys**2)) / _SQRT_PI, rtol=1e-10
        )

    def test_reproducing(self):
        """``int K_N(x, v) K_N(v, y) dv = K_N(x, y)``."""
        cases = (
            (gue_ext([0.5, -0.5]), gauss_rule("hermite", 128), ((0.3, -0.7), (1.1, 0.2))),
            (
                chgue_ext(_CHGUE_A, nu=1.0),
                gauss_rule("laguerre", 100, alpha=1.0),
                ((0.5, 1.5), (2.0, 0.8)),
            ),
        )
        for ens, rule, pairs in cases:
            v = rule.nodes
            for x, y in pairs:
                values = kernel(ens, x, v).value * kernel(ens, v, y).value / rule.weight(v)
                self.assertLess(
                    relative_gap(rule.integrate(values).real, kernel(ens, x, y).value),
                    1e-8,
                    (ens, x, y),
                )

    def test_singular_origin(self):
        """``phi(a, 0)`` is infinite for the chiral ensemble with nu < 0."""
        ens = chgue_ext(_CHGUE_A, nu=-0.5)
        with self.assertRaises(PreconditionError):
            kernel(ens, 0.5, 0.0)
        with self.assertRaises(PreconditionError):
            correlation_function(ens, [0.0, 1.0])
        # the polynomial side is regular at the origin
        self.assertTrue(np.isfinite(kernel(ens, 0.0, 1.0).value))
        self.assertTrue(np.isfinite(kernel(chgue_ext(_CHGUE_A, nu=0.5), 0.0, 0.0).value))

    def test_trace(self):
        """``int K_N(x, x) dx = N``."""
        for ens in (gue_ext(_GUE_A), chgue_ext(_CHGUE_A, nu=0.5), gue_ext([0.2])):
            self.assertAlmostEqual(kernel_trace(ens).value, ens.n, places=8)

    def test_density(self):
        """N-point correlation function is N! times the joint density."""
        ens = gue_ext([0.4, -0.3])
        xs = [0.2, -0.5]
        self.assertLess(
            relative_gap(correlation_function(ens, xs).value / 2.0, ens.density(xs)), 1e-10
        )
        ens = chgue_ext(_CHGUE_A, nu=1.0)
        xs = [0.5, 1.5, 3.0]
        self.assertLess(
            relative_gap(correlation_function(ens, xs).value / 6.0, ens.density(xs)), 1e-10
        )

    def test_strategies(self):
        """Residues along a circle and contour quadrature agree with the default."""
        ens = gue_ext(_GUE_A)
        xs = np.array([[-0.5], [0.8]])
        ys = np.array([[0.1, 1.2]])
        reference = kernel(ens, xs, ys).value
        self.assertEqual(reference.shape, (2, 2))
        circle = kernel(ens, xs, ys, residues="circle").value
        self.assertLess(relative_gap(circle, reference), 1e-8)
        contour = kernel(ens, xs, ys, method="quadrature").value
        self.assertLess(relative_gap(contour, reference), 1e-8)
        np.testing.assert_array_equal(kernel(ens, xs, ys, method="auto").value, reference)
        self.assertEqual(kernel_trace(ens, method="auto").gap, kernel_trace(ens).gap)
        with self.assertRaises(PreconditionError):
            kernel(chgue_ext(_CHGUE_A), -1.0, 1.0)
        with self.assertRaises(PreconditionError):
            kernel(ens, 0.0, 0.0, residues="guess")


class TestGiambelli(unittest.TestCase):
    """Giambelli compatibility of the built-in ensembles."""

    def test_diagrams(self):
        """Every diagram with at most six boxes, for N = 2, 3 and 4."""
        gaussian = (0.9, 0.4, -0.2, -0.6)
        chiral = (0.3, 0.8, 1.4, 2.0)
        for n in (2, 3, 4):
            for ens in (gue_ext(gaussian[:n]), chgue_ext(chiral[:n], nu=0.5)):
                for size in range(1, 7):
                    for diagram in YoungDiagram.partitions(size):
                        check = giambelli_check(ens, diagram)
                        self.assertLess(check.gap, 1e-8, (ens, diagram))
                        self.assertLess(check.h_gap, 1e-8, (ens, diagram))
                        # two more rows leave the h determinant unchanged
                        padded = h_determinant(ens, diagram, size=diagram.length + 2)
                        self.assertLess(
                            abs(padded - check.h_det) / max(abs(check.lhs), 1.0),
                            1e-8,
                            (ens, diagram),
                        )


if __name__ == "__main__":
    unittest.main()
