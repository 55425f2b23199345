#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
Invertible polynomial ensembles.

An invertible ensemble has ``phi_l(x) = phi(a_l, x)`` with

* ``int_I x**k phi(a, x) dx = pi_k(a)`` where ``pi_k`` is a monic polynomial
  of degree k;
* an inverse transform ``F(s, z)`` on an auxiliary contour I' such that
  ``int_I' F(s, z) pi_k(s) ds = z**k``.

For such ensembles, expectations of products and ratios of characteristic
polynomials reduce to a few integrals whose number does not depend on N
(:func:`ratio_expectation`). The contour integrals around the parameters
``a_n`` are evaluated exactly as residue sums. This module also provides the
product and "(M+1)/1" special paths and the correlation kernel.

Two ensembles are built in: the Gaussian unitary ensemble with an external
source (:func:`gue_ext`) and its chiral counterpart (:func:`chgue_ext`).
User-defined systems are created with :func:`custom`.
"""

from __future__ import annotations

import abc
import dataclasses
import itertools
import logging
import math
import typing

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as npoly

from .conf import polyens_conf
from .ensemble import DISTINCT_RTOL, Interval, PolynomialEnsemble
from .numerics import (
    ContourPath,
    Converged,
    ConvergenceError,
    PreconditionError,
    as_points,
    check_off_axis,
    compensated_dot,
    compensated_sum,
    contour_integral,
    converged,
    det,
    relative_gap,
)
from .specfun import (
    bessel_i_reg,
    factorial,
    hermite_monic,
    hermite_monic_coefficients,
    laguerre_monic,
    laguerre_monic_coefficients,
)
from .vandermonde import CoincidentPointsError, check_distinct, lagrange_weights, vandermonde

__all__ = [
    "CertificationError",
    "InvertibleEnsemble",
    "GueExtEnsemble",
    "ChGueExtEnsemble",
    "CustomInvertibleEnsemble",
    "gue_ext",
    "chgue_ext",
    "custom",
    "get_ensemble",
    "RatioQuery",
    "inverse_transform",
    "residue_sum",
    "ratio_expectation",
    "product_expectation",
    "ratio_m_plus_one_over_one",
    "kernel",
    "kernel_trace",
    "correlation_function",
]

logger = logging.getLogger(__name__)

#: Highest degree checked when an ensemble certifies itself
CERTIFY_DEGREE = 4

#: The point where the inverse transform is checked during certification
CERTIFY_POINT = 0.7 + 0.2j

#: Tolerance of the certification checks
CERTIFY_RTOL = 1e-8

_SQRT_PI = math.sqrt(math.pi)


class CertificationError(PreconditionError):
    """Raised when an ensemble fails its inversion identities."""

    pass


class InvertibleEnsemble(PolynomialEnsemble):
    """Abstract invertible ensemble with parameters ``a_1, ..., a_N``.

    Concrete classes provide the bivariate function ``phi(a, x)``
    (:meth:`phi_a`), the monic polynomials (:meth:`pi`), the inverse transform
    (:meth:`inverse_kernel`) and the contour it lives on (:attr:`aux_path`).
    The quadrature along the contour (:meth:`aux_rule`) is derived from them.
    """

    kind = "custom"

    def __init__(
        self,
        a,
        domain: Interval,
        alpha: float = 0.0,
        nodes: int = None,
        certify: bool = True,
    ):
        """
        :param a: The pairwise distinct parameters
        :param domain: The domain I
        :param alpha: The exponent of the Laguerre weight (half-line domains)
        :param nodes: The base number of quadrature nodes on I
        :param certify: Check the inversion identities up to degree
                        :data:`CERTIFY_DEGREE` right away
        """
        a = np.atleast_1d(np.asarray(a, dtype=float)).copy()
        if a.ndim != 1 or not len(a):
            raise PreconditionError("A non-empty list of parameters is expected.")
        check_distinct(a, "external source parameters", DISTINCT_RTOL)
        super().__init__(len(a), domain, alpha=alpha, nodes=nodes)
        a.setflags(write=False)
        self._a = a
        if certify:
            self.certify()

    def __repr__(self):
        return f"<{self.__class__.__name__} kind={self.kind} a={list(self._a)}>"

    @property
    def a(self) -> np.ndarray:
        """The parameters ``a_1, ..., a_N``."""
        return self._a

    @property
    def rho(self) -> np.ndarray:
        """The residue weights ``1 / prod_{n' != n} (a_n - a_n')``."""
        if "rho" not in self._cache:
            self._cache["rho"] = lagrange_weights(self._a)
        return self._cache["rho"]

    @property
    def aux_nodes(self) -> int:
        """The base number of nodes of :meth:`aux_rule`."""
        return self.aux_path.points

    @abc.abstractmethod
    def phi_a(self, a, x) -> np.ndarray:
        """The bivariate function ``phi(a, x)`` (broadcast over a and x)."""
        pass

    def reduced_phi_a(self, a, x) -> np.ndarray:
        """``phi(a, x)`` divided by the weight function of the domain's rule."""
        w = self.weight(x)
        if np.iscomplexobj(w):
            return self.phi_a(a, x) / w
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.where(w > 0, self.phi_a(a, x) / np.where(w > 0, w, 1.0), 0.0)

    def _column(self, x):
        x = as_points(x)
        return self._a.reshape((-1,) + (1,) * x.ndim), x

    def phi(self, x) -> np.ndarray:
        return self.phi_a(*self._column(x))

    def reduced_phi(self, x) -> np.ndarray:
        return self.reduced_phi_a(*self._column(x))

    @abc.abstractmethod
    def pi(self, k: int, a):
        """The monic polynomial ``pi_k`` evaluated at **a**."""
        pass

    def pi_coefficients(self, degree: int) -> np.ndarray:
        """Matrix ``C`` with ``C[i, k]`` the coefficient of ``s**i`` in ``pi_k``.

        This generic implementation interpolates :meth:`pi` at Chebyshev
        points.
        """
        points = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
        coefficients = np.zeros((degree + 1, degree + 1), dtype=complex)
        for k in range(degree + 1):
            fitted = npoly.polyfit(points, np.asarray(self.pi(k, points)).real, k)
            coefficients[: k + 1, k] = fitted
            coefficients[k, k] = 1.0
        return coefficients

    @abc.abstractmethod
    def inverse_kernel(self, s, z):
        """The inverse transform ``F(s, z)`` for ``s`` on the auxiliary contour."""
        pass

    def reduced_inverse_kernel(self, s, z):
        """``F(s, z)`` divided by the weight function of :attr:`aux_path`."""
        return self.inverse_kernel(s, z) / self.aux_path.weight(s)

    def aux_rule(self, zs, factor: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Nodes ``s_k`` on I' and weights ``c_jk`` such that
        ``int_I' F(s, z_j) p(s) ds ~ sum_k c_jk p(s_k)`` for polynomials p."""
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        nodes, weights = self.aux_path.discretize(factor, reduced=True)
        return nodes, weights * self.reduced_inverse_kernel(nodes, zs[:, np.newaxis])

    @property
    @abc.abstractmethod
    def aux_path(self) -> ContourPath:
        """The auxiliary contour I' (with its orientation)."""
        pass

    @property
    def residue_path(self) -> ContourPath:
        """A circle that encircles all the parameters ``a_n``."""
        center = 0.5 * (self._a.max() + self._a.min())
        radius = 0.5 * (self._a.max() - self._a.min()) + 1.0
        return ContourPath.circle(center, radius)

    def monic_inverse(self, degree: int) -> np.ndarray:
        """The inverse of :meth:`pi_coefficients`.

        The unit triangular system is solved on ``C[i, k] i! / k!``, whose
        entries stay of binomial size for factorial-type families.
        """
        key = ("monic_inverse", degree)
        if key not in self._cache:
            scale = np.array([factorial(i) for i in range(degree + 1)], dtype=float)
            scaled = self.pi_coefficients(degree) * scale[:, np.newaxis] / scale[np.newaxis, :]
            inverse = scipy.linalg.solve_triangular(
                scaled, np.eye(degree + 1), unit_diagonal=True
            )
            self._cache[key] = inverse * scale[np.newaxis, :] / scale[:, np.newaxis]
        return self._cache[key]

    def _aux_matrix(self, zs, degree: int, method: str, factor: int) -> np.ndarray:
        """``R[j, k] = int_I' F(s, z_j) s**k ds`` for ``k = 0..degree``."""
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        powers = np.arange(degree + 1)
        if method == "monic_basis":
            return (zs[:, np.newaxis] ** powers) @ self.monic_inverse(degree)
        if method == "quadrature":
            nodes, coefs = self.aux_rule(zs, factor)
            with np.errstate(over="ignore", invalid="ignore"):
                return compensated_dot(coefs, nodes[:, np.newaxis] ** powers)
        raise PreconditionError(f'No inverse transform strategy for method="{method:s}"')

    def aux_moments(self, zs, degree: int, method: str = None) -> Converged:
        """Gated ``int_I' F(s, z_j) s**k ds`` for ``k = 0..degree``.

        :param method: ``quadrature``, ``monic_basis`` or ``auto`` (quadrature,
                       then the monic basis if the convergence gate fails);
                       default: configuration
        """
        method = method or polyens_conf.aux_integration
        if method == "monic_basis":
            return Converged(self._aux_matrix(zs, degree, method, 1), 0.0, method)
        contour = "quadrature" if method == "auto" else method
        try:
            return converged(
                lambda factor: self._aux_matrix(zs, degree, contour, factor),
                what=f"inverse transforms of {self!r}",
            )
        except ConvergenceError as exc:
            if method != "auto":
                raise
            logger.warning(
                "%r: contour quadrature failed (gap=%.2e), switching to the monic basis",
                self,
                exc.gap,
            )
            return Converged(self._aux_matrix(zs, degree, "monic_basis", 1), 0.0, "monic_basis")

    def certify(self):
        """Check both inversion identities for degrees up to :data:`CERTIFY_DEGREE`.

        :exception CertificationError: If any identity fails.
        """
        degree = CERTIFY_DEGREE
        moments = self.moment_matrix(degree)
        expected = np.array([self.pi(k, self._a) for k in range(degree + 1)])
        coefficients = self.pi_coefficients(degree)
        transforms = self.aux_moments([CERTIFY_POINT], degree, "quadrature").value
        gaps = dict(
            moments=relative_gap(moments, expected),
            inverse=relative_gap(
                compensated_dot(transforms, coefficients), CERTIFY_POINT ** np.arange(degree + 1)
            ),
            coefficients=relative_gap(
                [npoly.polyval(CERTIFY_POINT, coefficients[:, k]) for k in range(degree + 1)],
                [self.pi(k, CERTIFY_POINT) for k in range(degree + 1)],
            ),
        )
        logger.debug("%r certification gaps: %s", self, gaps)
        failed = {k: v for k, v in gaps.items() if not v <= CERTIFY_RTOL}
        if failed:
            logger.error("%r failed its certification: %s", self, failed)
            raise CertificationError(f"{self!r} is not invertible: {failed}")
        self._cache["certification"] = gaps
        return gaps

    def partition_function_closed_form(self) -> float:
        """``Z_N = N! Delta_N(a)``."""
        return factorial(self.n) * vandermonde(self._a).real

    def single_ratio(self, z: complex, u: complex) -> complex:
        """``E[D(z) / D(u)]``."""
        return ratio_expectation(self, RatioQuery((z,), (u,))).value


class GueExtEnsemble(InvertibleEnsemble):
    """Gaussian unitary ensemble with an external source.

    * ``phi(a, x) = exp(-(x - a)**2) / sqrt(pi)`` on the real line;
    * ``pi_k(a) = (2i)**-k H_k(i a)``, the moments of a Gaussian centred on a;
    * ``F(s, z) = (i / sqrt(pi)) exp((s - z)**2)`` on the imaginary axis,
      traversed downwards.
    """

    kind = "gue_ext"

    def __init__(self, a, nodes: int = None, certify: bool = True):
        super().__init__(a, Interval(), nodes=nodes, certify=certify)

    def phi_a(self, a, x):
        return np.exp(-((np.asarray(x) - a) ** 2)) / _SQRT_PI

    def reduced_phi_a(self, a, x):
        return np.exp(2 * a * np.asarray(x) - np.asarray(a) ** 2) / _SQRT_PI

    def pi(self, k: int, a):
        value = (-1j) ** k * hermite_monic(k, 1j * np.asarray(a))
        return np.real(value) if np.isrealobj(a) else value

    def pi_coefficients(self, degree: int) -> np.ndarray:
        coefficients = np.zeros((degree + 1, degree + 1), dtype=complex)
        for k, poly in enumerate(hermite_monic_coefficients(degree)):
            # only the powers j = k mod 2 are present, so i**(j - k) is real
            coefficients[: len(poly), k] = (poly * 1j ** (np.arange(len(poly)) - k)).real
        return coefficients

    def inverse_kernel(self, s, z):
        return 1j / _SQRT_PI * np.exp((np.asarray(s) - z) ** 2)

    def reduced_inverse_kernel(self, s, z):
        # exp((s - z)**2) / exp(s**2)
        return 1j / _SQRT_PI * np.exp(z**2 - 2 * np.asarray(s) * z)

    @property
    def aux_path(self) -> ContourPath:
        return ContourPath.imaginary_axis(points=self._nodes)


class ChGueExtEnsemble(InvertibleEnsemble):
    """Chiral Gaussian unitary ensemble with an external source.

    With ``g_nu`` the entire regularised Bessel function:

    * ``phi(a, x) = x**nu exp(-(x + a)) g_nu(a x)`` on the positive half-line;
    * ``pi_k(a) = k! L_k^nu(-a)``;
    * ``F(s, z) = (-s)**nu exp(z + s) g_nu(z s)`` on the negative half-line,
      traversed from -infinity to 0.
    """

    kind = "chgue_ext"

    def __init__(self, a, nu: float = 0.0, nodes: int = None, certify: bool = True):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if np.any(a <= 0):
            raise PreconditionError(f"The parameters must be positive (got {list(a)}).")
        if not nu > -1:
            raise PreconditionError(f"nu must be > -1 (got {nu}).")
        self._nu = float(nu)
        super().__init__(a, Interval(0.0), alpha=nu, nodes=nodes, certify=certify)

    def __repr__(self):
        return f"<{self.__class__.__name__} kind={self.kind} nu={self._nu:g} a={list(self._a)}>"

    @property
    def nu(self) -> float:
        return self._nu

    def _bessel(self, a, x):
        g = bessel_i_reg(self._nu, a * x)
        if np.isrealobj(a) and np.isrealobj(x):
            g = np.real(g)
        return g

    def phi_a(self, a, x):
        x = as_points(x)
        return x**self._nu * np.exp(-(x + a)) * self._bessel(a, x)

    def reduced_phi_a(self, a, x):
        return np.exp(-np.asarray(a)) * self._bessel(a, as_points(x))

    def pi(self, k: int, a):
        return laguerre_monic(k, self._nu, a)

    def pi_coefficients(self, degree: int) -> np.ndarray:
        coefficients = np.zeros((degree + 1, degree + 1), dtype=complex)
        for k, poly in enumerate(laguerre_monic_coefficients(degree, self._nu)):
            coefficients[: len(poly), k] = poly
        return coefficients

    def inverse_kernel(self, s, z):
        s = np.asarray(s)
        return (
            np.power(-s.real, self._nu) * np.exp(z + s) * bessel_i_reg(self._nu, z * s)
        )

    def reduced_inverse_kernel(self, s, z):
        return np.exp(z) * bessel_i_reg(self._nu, z * np.asarray(s))

    @property
    def aux_path(self) -> ContourPath:
        # the (-s)**nu factor of F goes into the Laguerre weight
        return ContourPath.negative_half_line(self._nodes, alpha=self._nu)


class CustomInvertibleEnsemble(InvertibleEnsemble):
    """An invertible ensemble assembled from user-supplied callables.

    Only ``phi(a, x)``, ``pi_k(a)``, ``F(s, z)`` and the contour I' are
    mandatory. ``F`` divided by the contour's weight function
    (**reduced_inverse_kernel**) or a complete quadrature along I'
    (**aux_rule**) may be supplied when the plain ratio under or overflows.
    """

    def __init__(
        self,
        a,
        phi_a: typing.Callable,
        pi: typing.Callable,
        inverse_kernel: typing.Callable,
        aux_path: ContourPath,
        domain: Interval = Interval(),
        alpha: float = 0.0,
        reduced_phi_a: typing.Callable = None,
        reduced_inverse_kernel: typing.Callable = None,
        aux_rule: typing.Callable = None,
        nodes: int = None,
        certify: bool = True,
    ):
        self._phi_a = phi_a
        self._pi = pi
        self._inverse_kernel = inverse_kernel
        self._aux_path = aux_path
        self._reduced_phi_a = reduced_phi_a
        self._reduced_inverse_kernel = reduced_inverse_kernel
        self._aux_rule = aux_rule
        super().__init__(a, domain, alpha=alpha, nodes=nodes, certify=certify)

    def phi_a(self, a, x):
        return self._phi_a(a, as_points(x))

    def reduced_phi_a(self, a, x):
        if self._reduced_phi_a is None:
            return super().reduced_phi_a(a, x)
        return self._reduced_phi_a(a, as_points(x))

    def pi(self, k: int, a):
        return self._pi(k, a)

    def inverse_kernel(self, s, z):
        return self._inverse_kernel(s, z)

    def reduced_inverse_kernel(self, s, z):
        if self._reduced_inverse_kernel is None:
            return super().reduced_inverse_kernel(s, z)
        return self._reduced_inverse_kernel(s, z)

    def aux_rule(self, zs, factor: int = 1):
        if self._aux_rule is None:
            return super().aux_rule(zs, factor)
        nodes, coefs = self._aux_rule(np.atleast_1d(np.asarray(zs, dtype=complex)), factor)
        return np.asarray(nodes, dtype=complex), np.asarray(coefs, dtype=complex)

    @property
    def aux_path(self) -> ContourPath:
        return self._aux_path


def gue_ext(a, nodes: int = None) -> GueExtEnsemble:
    """The Gaussian unitary ensemble with external source parameters **a**."""
    return GueExtEnsemble(a, nodes=nodes)


def chgue_ext(a, nu: float = 0.0, nodes: int = None) -> ChGueExtEnsemble:
    """The chiral ensemble with positive parameters **a** and index **nu**."""
    return ChGueExtEnsemble(a, nu, nodes=nodes)


def custom(a, phi_a, pi, inverse_kernel, aux_path, **kwargs):
    """A user-defined invertible ensemble (see :class:`CustomInvertibleEnsemble`)."""
    return CustomInvertibleEnsemble(a, phi_a, pi, inverse_kernel, aux_path, **kwargs)


def get_ensemble(kind: str, **kwargs) -> InvertibleEnsemble:
    """A simple factory method for invertible ensembles."""
    logger.debug("Creating an ensemble. kind=%s. kwargs=%s", kind, kwargs)
    if kind == "gue_ext":
        return gue_ext(**kwargs)
    elif kind == "chgue_ext":
        return chgue_ext(**kwargs)
    elif kind == "custom":
        return custom(**kwargs)
    else:
        raise ValueError(f'No ensemble is available for kind="{kind:s}"')


@dataclasses.dataclass(frozen=True)
class RatioQuery:
    """Numerator points ``zs`` and denominator points ``ys`` (off the real axis)."""

    zs: tuple[complex, ...] = ()
    ys: tuple[complex, ...] = ()

    def __post_init__(self):
        zs = tuple(complex(z) for z in np.atleast_1d(self.zs))
        ys = tuple(complex(y) for y in np.atleast_1d(self.ys))
        object.__setattr__(self, "zs", zs)
        object.__setattr__(self, "ys", ys)
        check_distinct(zs, "zs", DISTINCT_RTOL)
        check_distinct(ys, "ys", DISTINCT_RTOL)
        if ys:
            check_off_axis(ys, "ys")
        for z, y in itertools.product(zs, ys):
            if abs(z - y) < DISTINCT_RTOL * max(abs(z), abs(y), 1.0):
                raise CoincidentPointsError(f"z={z} coincides with y={y}.")

    @property
    def m(self) -> int:
        return len(self.zs)

    @property
    def l(self) -> int:
        return len(self.ys)


def _shifted(poly: np.ndarray, shift: int, size: int) -> np.ndarray:
    """Coefficients of ``s**shift * poly(s)`` padded to **size**."""
    out = np.zeros(size, dtype=complex)
    out[shift : shift + len(poly)] = poly
    return out


def inverse_transform(
    ens: InvertibleEnsemble, z, poly, method: str = None
) -> Converged:
    """``int_I' F(s, z) p(s) ds`` for a polynomial p (ascending coefficients).

    :param method: ``auto``, ``quadrature`` or ``monic_basis`` (default: configuration)
    """
    poly = np.atleast_1d(np.asarray(poly, dtype=complex))
    moments = ens.aux_moments(z, len(poly) - 1, method)
    value = compensated_dot(moments.value, poly)
    return Converged(value if np.ndim(z) else complex(value[0]), moments.gap, "inverse transform")


def residue_sum(
    ens: InvertibleEnsemble, f: typing.Callable, residues: str = None
) -> Converged:
    """``(1/2 pi i) oint f(u) / prod_n (u - a_n) du`` around the parameters.

    :param f: A vectorised function, analytic inside :attr:`residue_path`
    :param residues: ``exact`` (residue sum) or ``circle`` (numerical contour)
    """
    residues = residues or polyens_conf.residues
    if residues == "exact":
        return Converged(compensated_sum(ens.rho * f(ens.a.astype(complex))), 0.0, "residues")
    if residues == "circle":
        return contour_integral(
            ens.residue_path,
            lambda u: f(u) / np.prod(u[np.newaxis, :] - ens.a[:, np.newaxis], axis=0),
        )
    raise PreconditionError(f'No residue strategy for residues="{residues:s}"')


def _check_query(ens: InvertibleEnsemble, query: RatioQuery):
    if query.l > ens.n:
        raise PreconditionError(
            f"At most N={ens.n:d} denominator points are allowed (got L={query.l:d})."
        )


def ratio_expectation(
    ens: InvertibleEnsemble, query: RatioQuery, method: str = None
) -> Converged:
    """``E[prod_m D(z_m) / prod_l D(y_l)]`` for ``L <= N``.

    The u-contours are replaced by residues at the ``a_n``; the sum over
    residue assignments then factorises over the subsets T of L parameters::

        (-1)**(L(L-1)/2) / Delta_M(z) sum_T rho(T) Delta_L(a_T) S(T) V(T)

    where ``S(T) = det[int_I' F(s, z_j) s**(M-i) prod_{n not in T} (s - a_n) ds]``
    and ``V(T) = det[int_I v**(L-i) (v/y_l)**(N-L) prod_m (z_m - v) /
    prod_j (y_j - v) phi(a_{T_l}, v) dv]``.
    """
    _check_query(ens, query)
    zs, ys = np.array(query.zs, dtype=complex), np.array(query.ys, dtype=complex)
    m, l, n = query.m, query.l, ens.n
    if not m and not l:
        return Converged(1.0 + 0j, 0.0, "empty ratio")
    method = method or polyens_conf.aux_integration
    degree = m - 1 + n - l
    sign = (-1) ** (l * (l - 1) // 2)
    subsets = list(itertools.combinations(range(n), l))
    rests = {
        subset: npoly.polyfromroots(np.delete(ens.a, list(subset))) if n > l else np.ones(1)
        for subset in subsets
    }

    gaps = [0.0]
    if m:
        aux = ens.aux_moments(zs, degree, method)
        gaps.append(aux.gap)
    if l:

        def _numerators(v):
            powers = v[np.newaxis, :] ** np.arange(l - 1, -1, -1)[:, np.newaxis]
            return powers * v ** (n - l) * np.prod(zs[:, np.newaxis] - v, axis=0)

        v_moments = ens.cauchy_moments(_numerators, ys)
        gaps.append(v_moments.gap)
    terms = []
    for subset in subsets:
        term = 1.0 + 0j
        if m:
            rows = np.array([_shifted(rests[subset], m - 1 - i, degree + 1) for i in range(m)])
            term *= det(compensated_dot(rows, aux.value.T))
        if l:
            cols = list(subset)
            term *= (
                np.prod(ens.rho[cols])
                * vandermonde(ens.a[cols])
                * det(v_moments.value[:, cols] / ys[np.newaxis, :] ** (n - l))
            )
        terms.append(term)
    result = Converged(
        sign * compensated_sum(terms) / vandermonde(zs),
        max(gaps),
        f"ratio (M={m}, L={l})",
    )
    logger.debug("%r: ratio M=%d L=%d -> %s (gap=%.2e)", ens, m, l, result.value, result.gap)
    return result


def product_expectation(ens: InvertibleEnsemble, zs, method: str = None) -> Converged:
    """``E[prod_m D(z_m)] = det[B_i(z_j)] / Delta_M(z)`` with
    ``B_i(z) = int_I' F(s, z) s**(M-i) prod_n (s - a_n) ds``."""
    zs = check_distinct(zs, "zs", DISTINCT_RTOL) if np.size(zs) else np.zeros(0, complex)
    m, n = len(zs), ens.n
    if not m:
        return Converged(1.0 + 0j, 0.0, "empty product")
    full = npoly.polyfromroots(ens.a)
    rows = np.array([_shifted(full, m - 1 - i, m + n) for i in range(m)])
    moments = ens.aux_moments(zs, m + n - 1, method)
    value = det(compensated_dot(rows, moments.value.T)) / vandermonde(zs)
    return Converged(value, moments.gap, "product")


def ratio_m_plus_one_over_one(
    ens: InvertibleEnsemble, zs, y: complex, method: str = None
) -> Converged:
    """``E[prod_{m=1}^{M+1} D(z_m) / D(y)]`` through bordered determinants.

    For each residue ``a_n``, the first row of the (M+1)x(M+1) determinant is
    ``A(z_j, a_n) = int_I' F(s, z_j) prod_{n' != n} (s - a_n') ds`` and the
    following ones ``B_i(z_j)`` (i = 1..M).
    """
    query = RatioQuery(zs, (y,))
    if not query.m:
        raise PreconditionError("At least one numerator point is needed (use the inverse path).")
    zs, y = np.array(query.zs), query.ys[0]
    m1, n = query.m, ens.n
    m = m1 - 1
    method = method or polyens_conf.aux_integration
    degree = max(m - 1 + n, n - 1)
    full = npoly.polyfromroots(ens.a)
    b_rows = [_shifted(full, m - 1 - i, degree + 1) for i in range(m)]
    a_rows = [
        _shifted(npoly.polyfromroots(np.delete(ens.a, k)) if n > 1 else np.ones(1), 0, degree + 1)
        for k in range(n)
    ]

    aux = ens.aux_moments(zs, degree, method)
    v_integrals = ens.cauchy_moments(
        lambda v: ((v / y) ** (n - 1) * np.prod(zs[:, np.newaxis] - v, axis=0))[np.newaxis],
        [y],
    )
    terms = [
        ens.rho[k]
        * det(compensated_dot(np.array([a_rows[k]] + b_rows), aux.value.T))
        * v_integrals.value[0, k]
        for k in range(n)
    ]
    return Converged(
        (-1) ** m * compensated_sum(terms) / vandermonde(zs),
        max(aux.gap, v_integrals.gap),
        "(M+1)/1 ratio",
    )


def _kernel_polynomials(ens: InvertibleEnsemble) -> np.ndarray:
    """Row n: ascending coefficients of ``P_n(x) = int_I' F(s, x) prod_{m != n} (s - a_m) ds``."""
    if "kernel_polynomials" not in ens._cache:
        n = ens.n
        inverse = ens.monic_inverse(n - 1)
        rows = []
        for k in range(n):
            p_k = npoly.polyfromroots(np.delete(ens.a, k)) if n > 1 else np.ones(1)
            rows.append(inverse @ _shifted(p_k, 0, n))
        ens._cache["kernel_polynomials"] = np.array(rows)
    return ens._cache["kernel_polynomials"]


def _kernel_values(ens, x, method, factor):
    """``P_n(x)`` for every n (shape ``(N,) + x.shape``)."""
    if method == "monic_basis":
        polys = _kernel_polynomials(ens)
        return np.array([npoly.polyval(x, p) for p in polys])
    p_rows = np.array(
        [
            npoly.polyfromroots(np.delete(ens.a, k)) if ens.n > 1 else np.ones(1)
            for k in range(ens.n)
        ]
    )
    aux = ens._aux_matrix(np.ravel(x), ens.n - 1, method, factor)
    return compensated_dot(p_rows, aux.T).reshape((ens.n,) + np.shape(x))


def kernel(
    ens: InvertibleEnsemble, x, y, method: str = "monic_basis", residues: str = None
) -> Converged:
    """The correlation kernel ``K_N(x, y) = sum_n rho_n phi(a_n, y) P_n(x)``.

    **x** and **y** are broadcast against each other. The inverse transform
    defaults to the exact monic-basis strategy: for x far from the origin,
    contour quadratures lose all accuracy.

    :param method: ``monic_basis`` (default), ``quadrature`` or ``auto`` (same
                   as ``monic_basis`` here)
    :param residues: ``exact`` (default) or ``circle`` to evaluate the
                     u-contour numerically
    """
    method = "monic_basis" if method == "auto" else method
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if not (ens.domain.contains(x) and ens.domain.contains(y)):
        raise PreconditionError(f"Kernel arguments must lie in {ens.domain}.")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        phis = ens.phi(y)
    singular = ~np.all(np.isfinite(phis), axis=0)
    if np.any(singular):
        raise PreconditionError(
            f"phi(a, y) is singular at y={sorted(set(y[singular].tolist()))} for {ens!r}."
        )
    residues = residues or polyens_conf.residues
    if residues == "circle":
        return _kernel_on_circle(ens, x, y, method)
    if residues != "exact":
        raise PreconditionError(f'No residue strategy for residues="{residues:s}"')
    weights = ens.rho.reshape((-1,) + (1,) * x.ndim)

    def _evaluate(factor):
        values = np.sum(weights * phis * _kernel_values(ens, x, method, factor), axis=0)
        return values.real

    if method == "monic_basis":
        return Converged(_evaluate(1), 0.0, "kernel")
    return converged(_evaluate, what=f"kernel of {ens!r}")


def _kernel_on_circle(ens, x, y, method) -> Converged:
    """The u-integral is computed along :attr:`residue_path`.

    ``prod(s - a) / (s - u)`` is replaced by the divided difference
    ``(prod(s - a) - prod(u - a)) / (s - u)``, a polynomial in s: the removed
    part has no pole inside the circle.
    """
    n = ens.n
    full = npoly.polyfromroots(ens.a)
    values, gaps = np.zeros(x.shape), [0.0]
    for index in np.ndindex(x.shape):
        x_i, y_i = float(x[index]), float(y[index])
        transforms = ens.aux_moments([x_i], n - 1, method).value[0]

        def _integrand(u, x_i=x_i, y_i=y_i, transforms=transforms):
            # divided difference coefficients: c_k(u) = sum_{j > k} P_j u**(j-k-1)
            c = np.array(
                [
                    sum(full[j] * u ** (j - k - 1) for j in range(k + 1, n + 1))
                    for k in range(n)
                ]
            )
            return ens.phi_a(u, y_i) * compensated_dot(transforms, c)

        result = residue_sum(ens, _integrand, "circle")
        values[index] = result.value.real
        gaps.append(result.gap)
    return Converged(values, max(gaps), "kernel (circle residues)")


def kernel_trace(ens: InvertibleEnsemble, method: str = "monic_basis") -> Converged:
    """``int_I K_N(x, x) dx`` (equal to N)."""
    method = "monic_basis" if method == "auto" else method

    def _evaluate(factor):
        rule = ens.rule(factor)
        aux_factor = 1 if method == "monic_basis" else factor
        p_values = _kernel_values(ens, rule.nodes, method, aux_factor)
        phis = np.asarray(ens.reduced_phi(rule.nodes), dtype=complex)
        diagonal = np.sum(ens.rho[:, np.newaxis] * phis * p_values, axis=0)
        return compensated_sum(rule.weights * diagonal).real

    return converged(_evaluate, what=f"kernel trace of {ens!r}")


def correlation_function(ens: InvertibleEnsemble, xs, method: str = "monic_basis") -> Converged:
    """The k-point correlation function ``det[K_N(x_i, x_j)]``.

    For k = N it is ``N!`` times the joint density.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    grid = kernel(ens, xs[:, np.newaxis], xs[np.newaxis, :], method)
    return Converged(det(grid.value).real, grid.gap, "correlation function")
