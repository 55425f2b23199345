#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
Complex dense linear algebra and one-dimensional quadrature primitives.

Every other module of the :mod:`polyens` package relies on the tools defined
here:

* :func:`det`, :func:`invert` and :func:`hermitian_eigenvalues` work on
  complex :class:`numpy.ndarray` objects (the package's ``ComplexMatrix``);
* :func:`gauss_rule` builds :class:`QuadratureRule` objects (Gauss-Legendre,
  Gauss-Hermite and generalised Gauss-Laguerre);
* :func:`contour_integral` integrates along a :class:`ContourPath`;
* :func:`converged` implements the node-doubling convergence gate that any
  quadrature based result has to pass before being returned.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import typing
import warnings

import numpy as np
import scipy.linalg
from scipy import special

from .conf import polyens_conf

__all__ = [
    "PreconditionError",
    "SingularMatrixError",
    "ConvergenceError",
    "Converged",
    "converged",
    "relative_gap",
    "check_off_axis",
    "compensated_sum",
    "compensated_dot",
    "as_points",
    "det",
    "invert",
    "hermitian_eigenvalues",
    "QuadratureRule",
    "gauss_rule",
    "ContourPath",
    "contour_integral",
]

logger = logging.getLogger(__name__)

#: Matrices with a larger 2-norm condition number are not inverted
COND_LIMIT = 1e12

#: Points closer than this (relative) to the real axis are considered real
OFF_AXIS_RTOL = 1e-10

_HERMITIAN_TOL = 1e-12


class PreconditionError(ValueError):
    """Raised whenever the inputs of an operation violate its preconditions."""

    pass


class SingularMatrixError(PreconditionError):
    """Raised when a matrix is singular or too ill-conditioned to be inverted."""

    pass


class ConvergenceError(ArithmeticError):
    """Raised when a numerical result fails its convergence gate."""

    def __init__(self, message: str, gap: float = math.inf):
        super().__init__(message)
        self.gap = gap


@dataclasses.dataclass(frozen=True)
class Converged:
    """A value that passed the node-doubling gate, with the measured gap."""

    value: typing.Any
    gap: float
    what: str = ""


def relative_gap(coarse, fine) -> float:
    """``max|fine - coarse| / max(max|fine|, 1)`` (works on scalars and arrays)."""
    coarse = np.asarray(coarse)
    fine = np.asarray(fine)
    if fine.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(fine))), 1.0)
    return float(np.max(np.abs(fine - coarse))) / scale


def converged(
    evaluate: typing.Callable[[int], typing.Any], rtol: float = None, what: str = ""
) -> Converged:
    """Evaluate a quadrature based quantity with n and 2n nodes.

    :param evaluate: Called with a node-count multiplier (1, then 2)
    :param rtol: The largest acceptable relative gap (default: configuration)
    :param what: A description used in log and error messages
    :exception ConvergenceError: If the two evaluations disagree.
    """
    if rtol is None:
        rtol = polyens_conf.gate_rtol
    coarse = evaluate(1)
    fine = evaluate(2)
    gap = relative_gap(coarse, fine)
    if not np.all(np.isfinite(fine)):
        logger.error("Non-finite value while computing %s.", what or "a quantity")
        raise ConvergenceError(f"Non-finite value while computing {what:s}.", gap)
    if gap > rtol:
        logger.error("Convergence gate failed for %s: gap=%.3e", what, gap)
        raise ConvergenceError(
            f"{what or 'quadrature'}: n/2n gap {gap:.3e} exceeds {rtol:.1e}", gap
        )
    logger.debug("Convergence gate passed for %s: gap=%.3e", what, gap)
    return Converged(fine, gap, what)


def compensated_sum(values) -> complex:
    """Correctly rounded sum, always reduced in ascending index order."""
    values = np.asarray(values, dtype=complex).ravel()
    try:
        return complex(math.fsum(values.real), math.fsum(values.imag))
    except (OverflowError, ValueError):
        # infinities and NaNs are left for the convergence gate to report
        with np.errstate(over="ignore", invalid="ignore"):
            return complex(np.sum(values))


def compensated_dot(a, b) -> typing.Union[complex, np.ndarray]:
    """``a @ b`` where each inner sum goes through :func:`compensated_sum`.

    **a** has shape ``(..., k)`` and **b** shape ``(k,)`` or ``(k, m)``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim < 1 or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise PreconditionError(f"Shapes {a.shape} and {b.shape} are not aligned.")
    rows = a.reshape((-1, a.shape[-1]))
    columns = b.reshape((b.shape[0], -1))
    out = np.empty((rows.shape[0], columns.shape[1]), dtype=complex)
    for i, j in np.ndindex(out.shape):
        out[i, j] = compensated_sum(rows[i] * columns[:, j])
    out = out.reshape(a.shape[:-1] + b.shape[1:])
    return complex(out) if out.ndim == 0 else out


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise PreconditionError(f"A square matrix is expected (got shape {m.shape}).")
    return m


def check_off_axis(points, what: str = "points") -> np.ndarray:
    """Raise :class:`PreconditionError` if some of the **points** are real."""
    points = np.atleast_1d(np.asarray(points, dtype=complex))
    for i, y in enumerate(points):
        if abs(y.imag) <= OFF_AXIS_RTOL * max(abs(y), 1.0):
            raise PreconditionError(f"The {what:s} must be off the real axis (#{i:d}={y}).")
    return points


def det(m) -> complex:
    """Determinant through a row-pivoted LU factorisation.

    The empty (0x0) matrix has determinant 1.
    """
    m = _as_square(m)
    if m.shape[0] == 0:
        return 1.0 + 0.0j
    with warnings.catch_warnings():
        # Exactly singular input: the zero pivot is what we want to see
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=True)
    swaps = int(np.count_nonzero(piv != np.arange(m.shape[0])))
    value = complex(np.prod(np.diag(lu)))
    return -value if swaps % 2 else value


def invert(m) -> np.ndarray:
    """Inverse of a well-conditioned square matrix.

    :exception SingularMatrixError: If the condition number exceeds
                                    :data:`COND_LIMIT` or if the residual
                                    ``m @ inv - 1`` is too large.
    """
    m = _as_square(m)
    if m.shape[0] == 0:
        return np.zeros((0, 0), dtype=complex)
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond >= COND_LIMIT:
        raise SingularMatrixError(f"Matrix is singular or ill-conditioned (cond={cond:.3e}).")
    result = scipy.linalg.inv(m)
    residual = float(np.max(np.abs(m @ result - np.eye(m.shape[0]))))
    if residual > max(1e-10, 100 * np.finfo(float).eps * cond):
        raise SingularMatrixError(f"Inversion residual too large ({residual:.3e}).")
    return result


def hermitian_eigenvalues(m) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix (or of a stack of them)."""
    m = np.asarray(m, dtype=complex)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise PreconditionError(f"Square matrices are expected (got shape {m.shape}).")
    scale = max(float(np.max(np.abs(m), initial=0.0)), 1.0)
    if np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2))), initial=0.0) > (
        _HERMITIAN_TOL * scale
    ):
        raise PreconditionError("The matrix is not Hermitian.")
    return np.linalg.eigvalsh(m)


@dataclasses.dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss nodes and weights for a given weight function.

    * ``legendre``: weight 1 on ``interval``;
    * ``hermite``: weight ``exp(-x**2)`` on the real line;
    * ``laguerre``: weight ``x**alpha * exp(-x)`` on the positive half-line.
    """

    kind: str
    nodes: np.ndarray
    weights: np.ndarray
    alpha: float = 0.0
    interval: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise PreconditionError("nodes and weights lengths differ.")
        if np.any(np.diff(self.nodes) <= 0):
            raise PreconditionError("Quadrature nodes must be strictly increasing.")
        if np.any(self.weights <= 0):
            raise PreconditionError("Quadrature weights must be positive.")

    def __len__(self):
        return len(self.nodes)

    def weight(self, x):
        """The weight function of the rule evaluated at **x**."""
        x = np.asarray(x)
        if self.kind == "hermite":
            return np.exp(-(x**2))
        if self.kind == "laguerre":
            shifted = x - self.interval[0]
            return shifted**self.alpha * np.exp(-shifted)
        return np.ones_like(x, dtype=float)

    def stieltjes(self, y) -> complex:
        """``integral weight(v) / (y - v) dv`` for a point **y** off the real axis.

        Gauss rules converge slowly on integrands with a pole close to the
        real axis: callers subtract the pole and add this exact value back.
        """
        y = complex(check_off_axis(y, "Stieltjes point")[0])
        if self.kind == "hermite":
            if y.imag > 0:
                return complex(-1j * np.pi * special.wofz(y))
            return complex(1j * np.pi * np.conj(special.wofz(np.conj(y))))
        if self.kind == "laguerre":
            return _laguerre_stieltjes(y - self.interval[0], self.alpha)
        lower, upper = self.interval
        return complex(np.log(y - lower) - np.log(y - upper))

    def integrate(self, values) -> typing.Union[complex, np.ndarray]:
        """Sum ``values * weights`` over the last axis.

        **values** are the integrand values at the nodes, the weight function
        being already factored out.
        """
        return compensated_dot(values, self.weights)


def gauss_rule(kind: str, n: int, alpha: float = 0.0, interval=(-1.0, 1.0)):
    """Build an n-point Gauss rule.

    The rule is exact for polynomials of degree up to ``2n - 1`` against the
    weight function. Weights that underflow to zero are discarded.

    :param kind: ``legendre``, ``hermite`` or ``laguerre``
    :param n: The number of nodes
    :param alpha: The Laguerre exponent (``alpha > -1``)
    :param interval: The Legendre integration interval
    """
    if n < 1:
        raise PreconditionError(f"At least one node is needed (got n={n}).")
    if kind == "legendre":
        lower, upper = (float(b) for b in interval)
        x, w = special.roots_legendre(n)
        x = 0.5 * (upper - lower) * x + 0.5 * (upper + lower)
        w = 0.5 * (upper - lower) * w
        interval = (lower, upper)
    elif kind == "hermite":
        x, w = special.roots_hermite(n)
        interval = (-math.inf, math.inf)
    elif kind == "laguerre":
        if alpha <= -1:
            raise PreconditionError(f"Laguerre exponent must be > -1 (got {alpha}).")
        x, w = special.roots_genlaguerre(n, alpha)
        interval = (0.0, math.inf)
    else:
        raise PreconditionError(f'No Gauss rule is available for kind="{kind:s}"')
    keep = w > 0
    logger.debug("Gauss rule kind=%s n=%d (%d non-zero weights)", kind, n, keep.sum())
    return QuadratureRule(
        kind, np.asarray(x[keep]), np.asarray(w[keep]), float(alpha), tuple(interval)
    )


_CF_START = 256
_CF_LIMIT = 1 << 20


def _laguerre_stieltjes(y: complex, alpha: float) -> complex:
    """Stieltjes transform of ``x**alpha * exp(-x)`` by its continued fraction.

    The fraction is built from the monic Laguerre recurrence and evaluated
    backwards with increasing depths until two successive depths agree.
    """

    def _evaluate(depth):
        tail = 0.0j
        for k in range(depth, 0, -1):
            tail = k * (k + alpha) / (y - (2 * k + 1 + alpha) - tail)
        return math.gamma(alpha + 1) / (y - (1 + alpha) - tail)

    depth = _CF_START
    previous = _evaluate(depth)
    while depth < _CF_LIMIT:
        depth *= 2
        current = _evaluate(depth)
        if abs(current - previous) <= 1e-14 * max(abs(current), 1e-300):
            return complex(current)
        previous = current
    raise ConvergenceError(f"Laguerre Stieltjes fraction did not converge at y={y}.")


def as_points(x) -> np.ndarray:
    """**x** as an array: complex input stays complex, anything else is float."""
    x = np.asarray(x)
    return x if np.iscomplexobj(x) else x.astype(float)


@dataclasses.dataclass(frozen=True)
class ContourPath:
    """A parametrised integration path in the complex plane.

    * ``circle``: counter-clockwise, equispaced angles; the integral includes
      the ``1/(2 pi i)`` normalisation;
    * ``imaginary-axis``: ``s = i t`` with ``t`` going from ``+inf`` to
      ``-inf`` (the axis is traversed downwards), Gauss-Hermite in ``t``;
      nodes with ``|t| > truncation`` are dropped;
    * ``negative-half-line``: from ``-inf`` to ``0``, ``s = -t`` with
      ``t > 0``, generalised Gauss-Laguerre in ``t``.

    The Gauss weight function, seen as a function of s, is :meth:`weight`.
    """

    kind: str
    points: int
    center: float = 0.0
    radius: float = 1.0
    truncation: float = math.inf
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("circle", "imaginary-axis", "negative-half-line"):
            raise PreconditionError(f'Unknown contour kind="{self.kind:s}"')
        if self.points < 8:
            raise PreconditionError(f"At least 8 points are needed (got {self.points}).")
        if self.kind == "circle" and not self.radius > 0:
            raise PreconditionError(f"The radius must be positive (got {self.radius}).")
        if self.kind == "imaginary-axis" and not self.truncation > 0:
            raise PreconditionError("The truncation must be positive.")
        if self.kind == "negative-half-line" and not self.alpha > -1:
            raise PreconditionError(f"Laguerre exponent must be > -1 (got {self.alpha}).")

    @classmethod
    def circle(cls, center: float, radius: float, points: int = None) -> ContourPath:
        return cls("circle", points or polyens_conf.circle_points, center, radius)

    @classmethod
    def imaginary_axis(cls, truncation: float = math.inf, points: int = None) -> ContourPath:
        return cls(
            "imaginary-axis", points or polyens_conf.hermite_nodes, truncation=truncation
        )

    @classmethod
    def negative_half_line(cls, points: int = None, alpha: float = 0.0) -> ContourPath:
        return cls("negative-half-line", points or polyens_conf.laguerre_nodes, alpha=alpha)

    def weight(self, s) -> np.ndarray:
        """``exp(s**2)`` on the imaginary axis, ``(-s)**alpha exp(s)`` on the
        negative half-line and 1 on circles."""
        s = np.asarray(s, dtype=complex)
        if self.kind == "imaginary-axis":
            return np.exp(s**2)
        if self.kind == "negative-half-line":
            return np.power(-s.real, self.alpha) * np.exp(s)
        return np.ones_like(s)

    def discretize(self, factor: int = 1, reduced: bool = False):
        """Nodes ``u_k`` and complex weights ``c_k`` with ``integral ~ sum c_k f(u_k)``.

        With **reduced**, the integrand is expected with :meth:`weight`
        already factored out.
        """
        points = self.points * factor
        if self.kind == "circle":
            theta = 2 * np.pi * np.arange(points) / points
            ray = self.radius * np.exp(1j * theta)
            return self.center + ray, ray / points
        if self.kind == "imaginary-axis":
            rule = gauss_rule("hermite", points)
            keep = np.abs(rule.nodes) <= self.truncation
            t, w = rule.nodes[keep], rule.weights[keep]
            # ds = i dt and the path runs towards decreasing t
            nodes, direction = 1j * t, -1j
            log_weight = -(t**2)
        else:
            rule = gauss_rule("laguerre", points, alpha=self.alpha)
            t, w = rule.nodes, rule.weights
            nodes, direction = -t.astype(complex), 1.0
            log_weight = self.alpha * np.log(t) - t
        if reduced:
            return nodes, direction * w.astype(complex)
        with np.errstate(divide="ignore"):
            return nodes, direction * np.exp(np.log(w) - log_weight).astype(complex)


def contour_integral(
    path: ContourPath,
    f: typing.Callable[[np.ndarray], np.ndarray],
    rtol: float = None,
    reduced: bool = False,
) -> Converged:
    """Integrate the vectorised function **f** along **path**.

    The result is computed with ``path.points`` and twice as many points and
    has to pass the convergence gate.

    :param reduced: **f** is given with the path's weight function factored out
    """

    def _evaluate(factor):
        nodes, coefs = path.discretize(factor, reduced)
        with np.errstate(divide="raise", over="raise", invalid="raise"):
            try:
                values = np.asarray(f(nodes), dtype=complex)
            except (FloatingPointError, ZeroDivisionError) as exc:
                raise ConvergenceError(f"Integrand evaluation failed on {path}: {exc}")
        if values.shape != nodes.shape or not np.all(np.isfinite(values)):
            raise ConvergenceError(f"Integrand evaluation failed on {path}.")
        return compensated_sum(values * coefs)

    return converged(_evaluate, rtol, what=f"{path.kind} contour integral")
