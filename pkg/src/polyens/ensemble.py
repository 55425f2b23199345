#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
General polynomial ensembles.

A polynomial ensemble of N real points has a joint density proportional to
``Delta_N(x) det[phi_l(x_k)]``. Given the functions ``phi_l`` on a domain I,
this module provides:

* the density, the generalised moments ``A_{n,m} = int x**n phi_m(x) dx`` and
  the partition function (:class:`PolynomialEnsemble`);
* Young diagrams, Frobenius coordinates and Schur polynomials
  (:class:`YoungDiagram`, :class:`FrobeniusCoords`, :func:`schur`);
* expectations of Schur polynomials, the ``h_{r,s}`` indeterminates and the
  Giambelli compatibility check (:func:`schur_expectation`,
  :func:`h_indeterminate`, :func:`giambelli_check`);
* the determinantal formula for ratios with as many numerator as
  denominator points (:func:`equal_ratio_expectation`) and the expectation
  of an inverse characteristic polynomial (:func:`inverse_expectation`).

Moments are integrated with a Gauss rule adapted to the domain (Hermite on the
real line, generalised Laguerre on a half-line, Legendre on a finite
interval) and go through the convergence gate of :mod:`polyens.numerics`.
"""

from __future__ import annotations

import abc
import dataclasses
import itertools
import logging
import math
import typing

import numpy as np

from .conf import polyens_conf
from .numerics import (
    Converged,
    ConvergenceError,
    PreconditionError,
    QuadratureRule,
    as_points,
    check_off_axis,
    compensated_dot,
    compensated_sum,
    converged,
    det,
    gauss_rule,
    invert,
    relative_gap,
)
from .specfun import factorial
from .vandermonde import CoincidentPointsError, check_distinct, vandermonde

__all__ = [
    "DegenerateEnsembleError",
    "Interval",
    "PolynomialEnsemble",
    "FunctionEnsemble",
    "gue",
    "YoungDiagram",
    "FrobeniusCoords",
    "schur",
    "schur_expectation",
    "h_indeterminate",
    "h_determinant",
    "GiambelliCheck",
    "giambelli_check",
    "equal_ratio_expectation",
    "InverseExpectation",
    "inverse_expectation",
    "inverse_expectation_forms",
    "andreief_check",
]

logger = logging.getLogger(__name__)

#: Relative separation below which ensemble inputs are considered coincident
DISTINCT_RTOL = 1e-8

#: |det G| below this fraction of the Hadamard bound means a degenerate system
DEGENERATE_RTOL = 1e-12

#: Largest accepted disagreement between the forms of the inverse expectation
FORMS_RTOL = 1e-9


class DegenerateEnsembleError(PreconditionError):
    """Raised when the moment matrix of an ensemble is singular."""

    pass


@dataclasses.dataclass(frozen=True)
class Interval:
    """The domain I of an ensemble (bounds may be infinite)."""

    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.lower < self.upper:
            raise PreconditionError(f"Empty interval [{self.lower}, {self.upper}]")
        if math.isinf(self.lower) and not math.isinf(self.upper):
            raise PreconditionError("Half-lines must be of the form [c, +inf).")

    @property
    def rule_kind(self) -> str:
        """The Gauss rule adapted to this domain."""
        if math.isinf(self.lower):
            return "hermite"
        return "laguerre" if math.isinf(self.upper) else "legendre"

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))


class PolynomialEnsemble(metaclass=abc.ABCMeta):
    """Abstract polynomial ensemble: N functions ``phi_l`` on a domain I.

    Concrete classes implement :meth:`phi`. Whenever a closed form exists,
    they should also override :meth:`reduced_phi` (``phi`` divided by the
    weight function of the domain's Gauss rule), which is what quadratures
    actually use.

    Instances are immutable once created: the cached moments only depend on
    the construction arguments.
    """

    def __init__(self, n: int, domain: Interval, alpha: float = 0.0, nodes: int = None):
        """
        :param n: The number of points N
        :param domain: The domain I
        :param alpha: The exponent of the Laguerre weight (half-line domains)
        :param nodes: The base number of quadrature nodes (default: configuration)
        """
        if n < 1:
            raise PreconditionError(f"An ensemble needs at least one point (got N={n}).")
        self._n = int(n)
        self._domain = domain
        self._alpha = float(alpha)
        self._nodes = nodes
        self._cache = dict()

    def __repr__(self):
        domain = self.domain
        return f"<{self.__class__.__name__} N={self.n:d} on [{domain.lower}, {domain.upper}]>"

    @property
    def n(self) -> int:
        """The number of points N."""
        return self._n

    @property
    def domain(self) -> Interval:
        return self._domain

    @property
    def nodes(self) -> int:
        """The base number of nodes of the domain's Gauss rule."""
        if self._nodes:
            return self._nodes
        return dict(
            hermite=polyens_conf.hermite_nodes,
            laguerre=polyens_conf.laguerre_nodes,
            legendre=polyens_conf.legendre_nodes,
        )[self.domain.rule_kind]

    def rule(self, factor: int = 1, nodes: int = None) -> QuadratureRule:
        """The domain's Gauss rule with ``factor`` times **nodes** (default: :attr:`nodes`)."""
        kind = self.domain.rule_kind
        n_nodes = (nodes or self.nodes) * factor
        if kind == "legendre":
            return gauss_rule(kind, n_nodes, interval=(self.domain.lower, self.domain.upper))
        if kind == "hermite":
            return gauss_rule(kind, n_nodes)
        rule = gauss_rule(kind, n_nodes, alpha=self._alpha)
        return QuadratureRule(
            kind,
            rule.nodes + self.domain.lower,
            rule.weights,
            self._alpha,
            (self.domain.lower, self.domain.upper),
        )

    def weight(self, x) -> np.ndarray:
        """The weight function of the domain's Gauss rule."""
        x = as_points(x)
        kind = self.domain.rule_kind
        if kind == "hermite":
            return np.exp(-(x**2))
        if kind == "laguerre":
            shifted = x - self.domain.lower
            return shifted**self._alpha * np.exp(-shifted)
        return np.ones_like(x)

    @abc.abstractmethod
    def phi(self, x) -> np.ndarray:
        """The N functions evaluated at **x** (shape ``(N,) + x.shape``)."""
        pass

    def reduced_phi(self, x) -> np.ndarray:
        """:meth:`phi` divided by :meth:`weight` (0 where the weight underflows).

        Complex points are accepted as long as :meth:`phi` continues
        analytically to them.
        """
        x = as_points(x)
        w = self.weight(x)
        if np.iscomplexobj(x):
            return self.phi(x) / w
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.where(w > 0, self.phi(x) / np.where(w > 0, w, 1.0), 0.0)

    def moments(self, max_power: int) -> Converged:
        """The gated moments ``A_{n,m}`` for ``n = 0..max_power`` (rows)."""
        if max_power < 0:
            raise PreconditionError(f"max_power must be >= 0 (got {max_power}).")
        key = ("moments", max_power)
        if key not in self._cache:

            def _evaluate(factor):
                rule = self.rule(factor)
                powers = rule.nodes[np.newaxis, :] ** np.arange(max_power + 1)[:, np.newaxis]
                return compensated_dot(
                    powers * rule.weights, np.asarray(self.reduced_phi(rule.nodes)).T
                )

            self._cache[key] = converged(_evaluate, what=f"moments of {self!r}")
            logger.debug(
                "%r: moments up to x^%d computed (gap=%.2e)",
                self,
                max_power,
                self._cache[key].gap,
            )
        return self._cache[key]

    def cauchy_moments(self, numerator: typing.Callable, ys) -> Converged:
        """Gated ``int g_i(v) phi_n(v) / prod_l (y_l - v) dv`` as an ``(I, N)`` matrix.

        **numerator** maps an array of points to the ``(I,) + shape`` values of
        entire functions ``g_i``. The poles ``y_l`` (off the real axis) are
        subtracted before the Gauss rule is applied and integrated exactly
        with the Stieltjes transform of the rule's weight.
        """
        ys = check_off_axis(ys, "Cauchy poles")
        check_distinct(ys, "Cauchy poles", DISTINCT_RTOL)
        # 1 / prod_l (y_l - v) = sum_l c_l / (y_l - v)
        fractions = [1.0 / np.prod(np.delete(ys, l) - y) for l, y in enumerate(ys)]
        at_poles = [
            np.asarray(numerator(np.array([y])), dtype=complex)[:, np.newaxis, 0]
            * self.reduced_phi(np.array([y]))[np.newaxis, :, 0]
            for y in ys
        ]

        def _evaluate(factor):
            rule = self.rule(factor)
            v = rule.nodes
            h_v = (
                np.asarray(numerator(v), dtype=complex)[:, np.newaxis, :]
                * np.asarray(self.reduced_phi(v), dtype=complex)[np.newaxis]
            )
            total = 0j
            for c_l, y, h_y in zip(fractions, ys, at_poles):
                smooth = (h_v - h_y[..., np.newaxis]) / (y - v)
                total = total + c_l * (rule.integrate(smooth) + h_y * rule.stieltjes(y))
            return total

        return converged(_evaluate, what=f"Cauchy moments of {self!r}")

    def moment_matrix(self, max_power: int) -> np.ndarray:
        """The ``(max_power + 1) x N`` matrix of the moments ``A_{n,m}``.

        Its first N rows are the generalised moment matrix G
        (``g_{k,l} = A_{k-1,l}``).
        """
        return self.moments(max_power).value.copy()

    def _checked_det(self, m: np.ndarray, what: str) -> complex:
        value = det(m)
        # Hadamard: the smaller of the row and column bounds
        bound = float(
            min(np.prod(np.linalg.norm(m, axis=0)), np.prod(np.linalg.norm(m, axis=1)))
        )
        if not abs(value) > DEGENERATE_RTOL * bound:
            logger.error("%r: singular %s", self, what)
            raise DegenerateEnsembleError(f"{self!r}: the {what:s} is singular.")
        return value

    def partition_function(self) -> complex:
        """``Z_N = N! (-1)**(N(N-1)/2) det G``."""
        if "z" not in self._cache:
            g_det = self._checked_det(self.moment_matrix(self.n - 1), "moment matrix")
            sign = (-1) ** (self.n * (self.n - 1) // 2)
            self._cache["z"] = factorial(self.n) * sign * g_det
        return self._cache["z"]

    def density(self, xs) -> float:
        """The joint density ``Delta_N(x) det[phi_l(x_k)] / Z_N``."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        if xs.shape != (self.n,):
            raise PreconditionError(f"{self.n:d} coordinates are expected (got {xs.shape}).")
        if not self.domain.contains(xs):
            raise PreconditionError(f"Some coordinates lie outside of {self.domain}.")
        value = vandermonde(xs) * det(self.phi(xs).T) / self.partition_function()
        if not np.isfinite(value):
            raise ConvergenceError(f"Non-finite density at {xs}.")
        return float(value.real)


class FunctionEnsemble(PolynomialEnsemble):
    """A polynomial ensemble built from user-supplied vectorised functions."""

    def __init__(
        self,
        phis: typing.Sequence[typing.Callable],
        domain: Interval = Interval(),
        alpha: float = 0.0,
        nodes: int = None,
        reduced: bool = False,
    ):
        """
        :param phis: The functions ``phi_1, ..., phi_N``
        :param domain: The domain I
        :param alpha: The Laguerre weight exponent on half-line domains
        :param nodes: The base number of quadrature nodes
        :param reduced: The **phis** are given relative to the weight function
                        of the domain's Gauss rule
        """
        super().__init__(len(phis), domain, alpha=alpha, nodes=nodes)
        self._phis = tuple(phis)
        self._reduced = reduced

    def _evaluate_all(self, x) -> np.ndarray:
        x = as_points(x)
        return np.array([np.broadcast_to(f(x), x.shape) for f in self._phis])

    def phi(self, x) -> np.ndarray:
        if self._reduced:
            return self._evaluate_all(x) * self.weight(x)
        return self._evaluate_all(x)

    def reduced_phi(self, x) -> np.ndarray:
        if self._reduced:
            return self._evaluate_all(x)
        return super().reduced_phi(x)


def gue(n: int, nodes: int = None) -> FunctionEnsemble:
    """The Gaussian unitary ensemble: ``phi_k(x) = x**(N-k) exp(-x**2)``."""
    return FunctionEnsemble(
        [lambda x, p=p: x**p for p in range(n - 1, -1, -1)], Interval(), nodes=nodes, reduced=True
    )


@dataclasses.dataclass(frozen=True)
class FrobeniusCoords:
    """Arms ``p`` and legs ``q`` of the diagonal boxes of a Young diagram."""

    p: tuple[int, ...] = ()
    q: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(int(v) for v in self.p))
        object.__setattr__(self, "q", tuple(int(v) for v in self.q))
        if len(self.p) != len(self.q):
            raise PreconditionError("p and q must have the same length.")
        for what in (self.p, self.q):
            if any(v < 0 for v in what) or any(b >= a for a, b in zip(what, what[1:])):
                raise PreconditionError(f"Frobenius coordinates must be decreasing: {what}")

    @property
    def d(self) -> int:
        """The number of boxes on the diagonal."""
        return len(self.p)

    def __str__(self):
        return "({:s}|{:s})".format(",".join(map(str, self.p)), ",".join(map(str, self.q)))


@dataclasses.dataclass(frozen=True)
class YoungDiagram:
    """A partition ``lambda_1 >= ... >= lambda_l > 0`` (trailing zeros are dropped)."""

    parts: tuple[int, ...] = ()

    def __post_init__(self):
        parts = tuple(int(v) for v in self.parts)
        while parts and parts[-1] == 0:
            parts = parts[:-1]
        if any(v <= 0 for v in parts) or any(b > a for a, b in zip(parts, parts[1:])):
            raise PreconditionError(f"Not a partition: {self.parts}")
        object.__setattr__(self, "parts", parts)

    def __str__(self):
        return "(" + ",".join(map(str, self.parts)) + ")"

    @property
    def length(self) -> int:
        """The number of rows l(lambda)."""
        return len(self.parts)

    @property
    def size(self) -> int:
        """The number of boxes."""
        return sum(self.parts)

    def padded(self, k: int) -> tuple[int, ...]:
        return self.parts + (0,) * (k - self.length)

    def conjugate(self) -> YoungDiagram:
        return YoungDiagram(
            tuple(sum(1 for v in self.parts if v >= j) for j in range(1, self.parts[0] + 1))
            if self.parts
            else ()
        )

    def frobenius(self) -> FrobeniusCoords:
        conj = self.conjugate().parts
        d = sum(1 for i, v in enumerate(self.parts, start=1) if v >= i)
        return FrobeniusCoords(
            tuple(self.parts[i] - i - 1 for i in range(d)),
            tuple(conj[i] - i - 1 for i in range(d)),
        )

    @classmethod
    def from_frobenius(cls, coords: FrobeniusCoords) -> YoungDiagram:
        d = coords.d
        rows = [p + i + 1 for i, p in enumerate(coords.p)]
        below = max((q + j + 1 for j, q in enumerate(coords.q)), default=0)
        for i in range(d + 1, below + 1):
            rows.append(sum(1 for j, q in enumerate(coords.q, start=1) if q + j >= i))
        return cls(tuple(rows))

    @classmethod
    def hook(cls, p: int, q: int) -> YoungDiagram:
        """The hook diagram ``(p|q)``."""
        return cls((p + 1,) + (1,) * q)

    @classmethod
    def partitions(cls, size: int) -> typing.Iterator[YoungDiagram]:
        """All the diagrams with **size** boxes, in reverse lexicographic order."""

        def _partitions(remaining, largest):
            if remaining == 0:
                yield ()
                return
            for first in range(min(remaining, largest), 0, -1):
                for rest in _partitions(remaining - first, first):
                    yield (first,) + rest

        for parts in _partitions(size, size):
            yield cls(parts)


def schur(diagram: YoungDiagram, xs) -> complex:
    """The Schur polynomial ``det[x_i**(lambda_j + N - j)] / Delta_N(x)``."""
    xs = check_distinct(xs, "Schur variables")
    n = len(xs)
    if diagram.length > n:
        return 0j
    exponents = [v + n - 1 - j for j, v in enumerate(diagram.padded(n))]
    return det(xs[:, np.newaxis] ** np.array(exponents)) / vandermonde(xs)


def _gtilde(ens: PolynomialEnsemble) -> np.ndarray:
    """``G~_{i,j} = A_{N-i,j}``."""
    return ens.moment_matrix(ens.n - 1)[::-1]


def schur_expectation(ens: PolynomialEnsemble, diagram: YoungDiagram) -> complex:
    """``E[s_lambda] = det[A_{lambda_i+N-i,j}] / det[A_{N-i,j}]`` (0 when l > N)."""
    n = ens.n
    if diagram.length > n:
        return 0j
    parts = diagram.padded(n)
    moments = ens.moment_matrix(parts[0] + n - 1)
    numerator = det(moments[[v + n - 1 - i for i, v in enumerate(parts)]])
    return numerator / ens._checked_det(_gtilde(ens), "moment matrix")


def _q_matrix(ens: PolynomialEnsemble) -> np.ndarray:
    if "q" not in ens._cache:
        ens._cache["q"] = invert(_gtilde(ens))
    return ens._cache["q"]


def h_indeterminate(ens: PolynomialEnsemble, r: int, s: int) -> complex:
    """The indeterminate ``h_{r,s}``.

    * ``sum_nu A_{N+r-s-1,nu} Q_{nu,s+1}`` for ``0 <= s <= N-1`` and ``r >= 0``
      (``Q`` being the inverse of ``G~``);
    * ``delta_{r,0}`` for ``s >= N``;
    * 0 for ``r < 0``.
    """
    if s < 0:
        raise PreconditionError(f"s must be >= 0 (got {s}).")
    if r < 0:
        return 0j
    n = ens.n
    if s >= n:
        return 1.0 + 0j if r == 0 else 0j
    row = ens.moment_matrix(n + r - 1)[n + r - s - 1]
    return compensated_sum(row * _q_matrix(ens)[:, s])


def h_determinant(ens: PolynomialEnsemble, diagram: YoungDiagram, size: int = None) -> complex:
    """``det[h_{lambda_i-i+j, j-1}]`` with ``size >= l(lambda)`` rows."""
    size = diagram.length if size is None else size
    if size < diagram.length:
        raise PreconditionError(f"size must be >= {diagram.length} (got {size}).")
    parts = diagram.padded(size)
    return det(
        np.array(
            [
                [h_indeterminate(ens, parts[i] - i + j, j) for j in range(size)]
                for i in range(size)
            ]
        )
    )


@dataclasses.dataclass(frozen=True)
class GiambelliCheck:
    """Both sides of the Giambelli identity for expectations.

    ``lhs`` is ``E[s_lambda]``, ``rhs`` the determinant of the hook
    expectations and ``h_det`` the determinant of the ``h`` indeterminates.
    The gaps are measured relative to ``max(1, |lhs|)``.
    """

    diagram: YoungDiagram
    lhs: complex
    rhs: complex
    h_det: complex
    gap: float
    h_gap: float


def giambelli_check(ens: PolynomialEnsemble, diagram: YoungDiagram) -> GiambelliCheck:
    """Compare ``E[s_lambda]`` with ``det[E[s_(p_i|q_j)]]``."""
    if not diagram.length:
        raise PreconditionError("The Giambelli check needs a non-empty diagram.")
    coords = diagram.frobenius()
    lhs = schur_expectation(ens, diagram)
    rhs = det(
        np.array(
            [
                [schur_expectation(ens, YoungDiagram.hook(p, q)) for q in coords.q]
                for p in coords.p
            ]
        )
    )
    h_det = h_determinant(ens, diagram)
    scale = max(abs(lhs), 1.0)
    return GiambelliCheck(
        diagram, lhs, rhs, h_det, abs(lhs - rhs) / scale, abs(lhs - h_det) / scale
    )


def _single_ratio_provider(ens, single_ratio):
    if single_ratio is not None:
        return single_ratio
    provider = getattr(ens, "single_ratio", None)
    if provider is None:
        raise PreconditionError(f"{ens!r} does not provide single ratios: pass one.")
    return provider


def equal_ratio_expectation(
    ens: PolynomialEnsemble,
    zs,
    us,
    single_ratio: typing.Callable[[complex, complex], complex] = None,
) -> complex:
    """``E[prod_m D(z_m) / D(u_m)]`` from single ratio expectations.

    The result is ``det[C_{ij} E[D(z_j)/D(u_i)]] / det[C_{ij}]`` with the
    Cauchy matrix ``C_{ij} = 1 / (u_i - z_j)``.

    :param single_ratio: Computes ``E[D(z) / D(u)]``; by default, the
                         ensemble's own ``single_ratio`` method is used.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    us = np.atleast_1d(np.asarray(us, dtype=complex))
    if len(zs) != len(us):
        raise PreconditionError("zs and us must have the same length.")
    if not len(zs):
        return 1.0 + 0j
    check_off_axis(us, "us")
    check_distinct(zs, "zs", DISTINCT_RTOL)
    check_distinct(us, "us", DISTINCT_RTOL)
    differences = np.subtract.outer(us, zs)
    if np.min(np.abs(differences)) < DISTINCT_RTOL * max(np.max(np.abs(differences)), 1.0):
        raise CoincidentPointsError("Some z coincides with some u.")
    single_ratio = _single_ratio_provider(ens, single_ratio)
    cauchy = 1.0 / differences
    ratios = np.array([[single_ratio(z, u) for z in zs] for u in us], dtype=complex)
    return det(cauchy * ratios) / det(cauchy)


@dataclasses.dataclass(frozen=True)
class InverseExpectation:
    """``E[1/D_N(y)]`` evaluated in three equivalent ways.

    * ``value``: ``sum_j C_{j,N} int (u/y)**(N-1) phi_j(u) / (y - u) du``;
    * ``bordered``: the same through a bordered determinant ratio;
    * ``without_factor``: the coefficient form without ``(u/y)**(N-1)``.
    """

    y: complex
    value: complex
    bordered: complex
    without_factor: complex
    gap: float
    forms_gap: float


def inverse_expectation_forms(ens: PolynomialEnsemble, y: complex) -> InverseExpectation:
    """Compute ``E[1/D_N(y)]`` (``y`` off the real axis) in its three forms.

    :exception ConvergenceError: If the forms disagree.
    """
    y = complex(check_off_axis(y, "y")[0])
    n = ens.n
    g = ens.moment_matrix(n - 1)
    coefficients = invert(g)[:, n - 1]

    transforms = ens.cauchy_moments(
        lambda u: np.stack([(u / y) ** (n - 1), np.ones_like(u)]), [y]
    )
    with_factor, plain = transforms.value
    value = compensated_sum(coefficients * with_factor)
    bordered_matrix = g.copy()
    bordered_matrix[n - 1] = with_factor
    bordered = det(bordered_matrix) / det(g)
    without_factor = compensated_sum(coefficients * plain)
    forms_gap = max(relative_gap(value, bordered), relative_gap(value, without_factor))
    if forms_gap > FORMS_RTOL:
        logger.error("Inverse expectation forms disagree at y=%s: %.2e", y, forms_gap)
        raise ConvergenceError(f"Inverse expectation forms disagree ({forms_gap:.2e}).", forms_gap)
    return InverseExpectation(y, value, bordered, without_factor, transforms.gap, forms_gap)


def inverse_expectation(ens: PolynomialEnsemble, y: complex) -> complex:
    """``E[1/D_N(y)]`` for ``y`` off the real axis."""
    return inverse_expectation_forms(ens, y).value


def andreief_check(
    psis: typing.Sequence[typing.Callable],
    phis: typing.Sequence[typing.Callable],
    rule: QuadratureRule,
) -> tuple[complex, complex, float]:
    """Compare the N-fold integral of ``det[psi_k(x_l)] det[phi_k(x_l)]`` with
    ``N! det[int psi_k phi_l]`` (N <= 3).

    Integrals are taken against the weight function of **rule**.

    :return: Both sides and their relative gap.
    """
    n = len(psis)
    if len(phis) != n or not 1 <= n <= 3:
        raise PreconditionError("Between 1 and 3 pairs of functions are expected.")
    x = rule.nodes

    def _values(functions):
        return np.array([np.broadcast_to(f(x), x.shape) for f in functions], dtype=complex)

    psi_v, phi_v = _values(psis), _values(phis)
    grid = np.array(list(itertools.product(range(len(x)), repeat=n)))
    weights = np.prod(rule.weights[grid], axis=1)
    lhs = compensated_sum(
        weights
        * np.linalg.det(np.moveaxis(psi_v[:, grid], 0, 1))
        * np.linalg.det(np.moveaxis(phi_v[:, grid], 0, 1))
    )
    rhs = factorial(n) * det(compensated_dot(psi_v * rule.weights, phi_v.T))
    return lhs, rhs, relative_gap(lhs, rhs)
