#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
Special functions of the two built-in invertible ensembles.

* monic Hermite polynomials (Gaussian ensemble with an external source);
* monic generalised Laguerre polynomials ``k! L_k^nu(-z)`` (chiral ensemble);
* the entire regularised Bessel function
  ``g_nu(w) = sum_k w**k / (k! Gamma(k + nu + 1))`` so that
  ``I_nu(2 sqrt(w)) = w**(nu/2) g_nu(w)``. Using ``g_nu`` everywhere removes
  the branch ambiguities of fractional powers.

Functions accept scalars or :class:`numpy.ndarray` arguments.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import special

from .numerics import ConvergenceError, PreconditionError

__all__ = [
    "hermite_monic",
    "hermite_monic_coefficients",
    "laguerre_monic",
    "laguerre_monic_coefficients",
    "bessel_i_reg",
    "log_gamma",
    "factorial",
]

logger = logging.getLogger(__name__)

#: Relative size of the last series term
SERIES_RTOL = 1e-16

#: Maximum number of series terms
SERIES_MAX_TERMS = 500

_FACTORIALS = tuple(math.factorial(k) for k in range(21))


def _check_order(k: int):
    if k < 0:
        raise PreconditionError(f"The polynomial degree must be >= 0 (got {k}).")


def _check_nu(nu: float):
    if not nu > -1:
        raise PreconditionError(f"nu must be > -1 (got {nu}).")


def _scalar_or_array(value, like):
    return complex(value) if np.ndim(like) == 0 else value


def hermite_monic(k: int, z):
    """The monic Hermite polynomial ``2**-k H_k(z)``.

    Evaluated with ``p_{k+1}(z) = z p_k(z) - (k/2) p_{k-1}(z)``.
    """
    _check_order(k)
    z_a = np.asarray(z, dtype=complex)
    previous, current = np.zeros_like(z_a), np.ones_like(z_a)
    for j in range(k):
        previous, current = current, z_a * current - 0.5 * j * previous
    return _scalar_or_array(current, z)


def laguerre_monic(k: int, nu: float, z):
    """The monic polynomial ``k! L_k^nu(-z)``.

    Evaluated with ``p_{k+1}(z) = (z + 2k + 1 + nu) p_k(z) - k (k + nu) p_{k-1}(z)``.
    """
    _check_order(k)
    _check_nu(nu)
    z_a = np.asarray(z, dtype=complex)
    previous, current = np.zeros_like(z_a), np.ones_like(z_a)
    for j in range(k):
        previous, current = (
            current,
            (z_a + 2 * j + 1 + nu) * current - j * (j + nu) * previous,
        )
    return _scalar_or_array(current, z)


def _monic_coefficients(k: int, step) -> list[np.ndarray]:
    previous, current = np.zeros(1), np.ones(1)
    out = [current]
    for j in range(k):
        shift, damp = step(j)
        nxt = npoly.polyadd(npoly.polymulx(current), shift * current)
        previous, current = current, npoly.polysub(nxt, damp * previous)
        out.append(current)
    return out


def hermite_monic_coefficients(k: int) -> list[np.ndarray]:
    """Ascending coefficients of the monic Hermite polynomials of degree 0 to k."""
    _check_order(k)
    return _monic_coefficients(k, lambda j: (0.0, 0.5 * j))


def laguerre_monic_coefficients(k: int, nu: float) -> list[np.ndarray]:
    """Ascending coefficients of ``j! L_j^nu(-z)`` for j = 0 to k."""
    _check_order(k)
    _check_nu(nu)
    return _monic_coefficients(k, lambda j: (2 * j + 1 + nu, j * (j + nu)))


def bessel_i_reg(nu: float, w):
    """The entire function ``g_nu(w) = sum_k w**k / (k! Gamma(k + nu + 1))``.

    :exception ConvergenceError: If the series needs more than
                                 :data:`SERIES_MAX_TERMS` terms.
    """
    _check_nu(nu)
    w_a = np.asarray(w, dtype=complex)
    term = np.full(w_a.shape, special.rgamma(nu + 1), dtype=complex)
    total = term.copy()
    for k in range(SERIES_MAX_TERMS):
        term = term * w_a / ((k + 1) * (k + 1 + nu))
        total = total + term
        if np.all(np.abs(term) <= SERIES_RTOL * np.abs(total)):
            return _scalar_or_array(total, w)
    logger.error("Bessel series did not converge (nu=%g, max|w|=%g)", nu, np.max(np.abs(w_a)))
    raise ConvergenceError(f"g_nu series did not converge in {SERIES_MAX_TERMS} terms.")


def log_gamma(x: float) -> float:
    """``log Gamma(x)`` for ``x > 0``, exact for integers up to 21."""
    if not x > 0:
        raise PreconditionError(f"log_gamma requires x > 0 (got {x}).")
    if float(x).is_integer() and x <= len(_FACTORIALS):
        return math.log(_FACTORIALS[int(x) - 1])
    return float(special.gammaln(x))


def factorial(k: int) -> float:
    """``k!`` from the table up to 20, through :func:`log_gamma` beyond."""
    _check_order(k)
    if k < len(_FACTORIALS):
        return float(_FACTORIALS[k])
    return math.exp(log_gamma(k + 1))
