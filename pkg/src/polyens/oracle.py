#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
Independent ground truth for the analytic formulas.

* Matrix-model Monte Carlo samplers for the two built-in ensembles
  (:func:`sample_gue_ext`, :func:`sample_chgue_ext`) and the associated
  estimators (:func:`mc_expect`, :func:`mc_expect_ratio`);
* a tensor-product quadrature of ``f * density`` over ``I**N`` for N <= 3
  (:func:`quad_expect`).

Random numbers come from a counter-based generator (Philox): sample ``i`` of
a batch draws from the stream keyed by the seed with its counter starting at
``i << 128``. A batch can therefore be generated in any order (or in
parallel) and replayed bit for bit.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import typing

import numpy as np

from .conf import polyens_conf
from .ensemble import PolynomialEnsemble
from .numerics import (
    Converged,
    PreconditionError,
    check_off_axis,
    compensated_sum,
    converged,
    hermitian_eigenvalues,
)

__all__ = [
    "SampleBatch",
    "McEstimate",
    "sample_gue_ext",
    "sample_chgue_ext",
    "mc_expect",
    "mc_expect_ratio",
    "ratio_function",
    "quad_expect",
]

logger = logging.getLogger(__name__)

#: Largest N handled by the tensor quadrature
QUAD_MAX_N = 3

_SEED_LIMIT = 1 << 64


@dataclasses.dataclass(frozen=True, eq=False)
class SampleBatch:
    """Eigenvalues of ``count`` independent matrices (one ascending row each)."""

    eigenvalues: np.ndarray
    seed: int

    def __post_init__(self):
        eigenvalues = np.array(self.eigenvalues, dtype=float)
        if eigenvalues.ndim != 2:
            raise PreconditionError("A (count, N) array of eigenvalues is expected.")
        eigenvalues.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eigenvalues)

    @property
    def count(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[1]

    def __eq__(self, other):
        if not isinstance(other, SampleBatch):
            return NotImplemented
        return self.seed == other.seed and np.array_equal(
            self.eigenvalues, other.eigenvalues
        )


@dataclasses.dataclass(frozen=True)
class McEstimate:
    """A sample mean with its standard error."""

    mean: complex
    std_error: float
    count: int

    def agrees_with(self, value: complex, sigmas: float = 3.0) -> bool:
        """``|mean - value| <= sigmas * std_error`` (up to rounding)."""
        slack = 1e-12 * max(abs(value), 1.0)
        return abs(self.mean - value) <= sigmas * self.std_error + slack


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < _SEED_LIMIT:
        raise PreconditionError(f"The seed must be a 64-bit unsigned integer (got {seed}).")
    return seed


def _check_count(count: int) -> int:
    if count < 1:
        raise PreconditionError(f"At least one sample is needed (got count={count}).")
    return int(count)


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    """The generator of sample **index**: Philox keyed by **seed**."""
    return np.random.Generator(np.random.Philox(key=seed, counter=index << 128))


def sample_gue_ext(a, count: int, seed: int = None) -> SampleBatch:
    """Eigenvalues of ``H = diag(a) + W``, W drawn from ``exp(-Tr W**2)``.

    Diagonal entries of W are real with variance 1/2; the real and imaginary
    parts of the off-diagonal entries have variance 1/4.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    count = _check_count(count)
    seed = _check_seed(polyens_conf.mc_seed if seed is None else seed)
    n = len(a)
    matrices = np.empty((count, n, n), dtype=complex)
    for index in range(count):
        gaussian = _sample_rng(seed, index).standard_normal((2, n, n))
        x = 0.5 * (gaussian[0] + 1j * gaussian[1])
        matrices[index] = (x + x.conj().T) / math.sqrt(2.0)
    matrices += np.diag(a)
    logger.debug("Sampled %d GUE+source matrices (N=%d, seed=%d)", count, n, seed)
    return SampleBatch(hermitian_eigenvalues(matrices), seed)


def sample_chgue_ext(a, nu: int, count: int, seed: int = None) -> SampleBatch:
    """Eigenvalues of ``X X^dagger`` with ``X = A + W`` of shape ``N x (N + nu)``.

    ``A_jj = sqrt(a_j)`` (zero elsewhere) and the entries of W are drawn from
    ``exp(-|w|**2)`` (real and imaginary parts with variance 1/2).
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if np.any(a <= 0):
        raise PreconditionError(f"The parameters must be positive (got {list(a)}).")
    if float(nu) != int(nu) or nu < 0:
        raise PreconditionError(f"The matrix model needs an integer nu >= 0 (got {nu}).")
    nu = int(nu)
    count = _check_count(count)
    seed = _check_seed(polyens_conf.mc_seed if seed is None else seed)
    n = len(a)
    shift = np.zeros((n, n + nu))
    shift[np.arange(n), np.arange(n)] = np.sqrt(a)
    products = np.empty((count, n, n), dtype=complex)
    for index in range(count):
        gaussian = _sample_rng(seed, index).standard_normal((2, n, n + nu))
        x = shift + (gaussian[0] + 1j * gaussian[1]) / math.sqrt(2.0)
        product = x @ x.conj().T
        products[index] = 0.5 * (product + product.conj().T)
    logger.debug(
        "Sampled %d chiral GUE+source matrices (N=%d, nu=%d, seed=%d)", count, n, nu, seed
    )
    return SampleBatch(hermitian_eigenvalues(products), seed)


def mc_expect(batch: SampleBatch, f: typing.Callable) -> McEstimate:
    """Sample mean and standard error of a symmetric function of the eigenvalues.

    **f** maps a ``(count, N)`` array to ``count`` values.
    """
    if batch.count < 2:
        raise PreconditionError("At least two samples are needed for a standard error.")
    values = np.asarray(f(batch.eigenvalues), dtype=complex)
    if values.shape != (batch.count,):
        raise PreconditionError(f"f must return one value per sample (got {values.shape}).")
    mean = compensated_sum(values) / batch.count
    spread = np.var(values.real, ddof=1) + np.var(values.imag, ddof=1)
    return McEstimate(mean, float(np.sqrt(spread / batch.count)), batch.count)


def ratio_function(zs, ys) -> typing.Callable[[np.ndarray], np.ndarray]:
    """The symmetric function ``prod_m D(z_m) / prod_l D(y_l)`` of the last axis."""
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    ys = np.atleast_1d(np.asarray(ys, dtype=complex))
    if len(ys):
        check_off_axis(ys, "ys")

    def _ratio(xs):
        xs = np.asarray(xs)[..., np.newaxis, :]
        numerator = np.prod(np.prod(zs[:, np.newaxis] - xs, axis=-1), axis=-1)
        denominator = np.prod(np.prod(ys[:, np.newaxis] - xs, axis=-1), axis=-1)
        return numerator / denominator

    return _ratio


def mc_expect_ratio(batch: SampleBatch, zs, ys) -> McEstimate:
    """Monte Carlo estimate of ``E[prod_m D(z_m) / prod_l D(y_l)]``."""
    return mc_expect(batch, ratio_function(zs, ys))


def quad_expect(
    ens: PolynomialEnsemble, f: typing.Callable, nodes: int = None, rtol: float = None
) -> Converged:
    """``E[f]`` by tensor-product quadrature of ``f * density`` over ``I**N``.

    **f** maps a ``(P, N)`` array of points to ``P`` values. The domain's Gauss
    rule is used on every axis with **nodes** nodes (default: the
    ``oracle_nodes`` setting), then twice as many.
    """
    n = ens.n
    if n > QUAD_MAX_N:
        raise PreconditionError(
            f"The tensor quadrature is limited to N <= {QUAD_MAX_N} (got N={n})."
        )
    nodes = nodes or polyens_conf.oracle_nodes
    norm = ens.partition_function()

    def _evaluate(factor):
        rule = ens.rule(factor, nodes)
        x, w = rule.nodes, rule.weights
        reduced = np.asarray(ens.reduced_phi(x), dtype=complex)
        size = len(x)
        rest = np.indices((size,) * (n - 1)).reshape(n - 1, -1).T if n > 1 else None
        partial = []
        # one slab per value of the first coordinate keeps memory bounded
        for first in range(size):
            if rest is None:
                grid = np.array([[first]])
            else:
                grid = np.column_stack([np.full(len(rest), first), rest])
            points = x[grid]
            weights = np.prod(w[grid], axis=1)
            dets = np.linalg.det(np.transpose(reduced[:, grid], (1, 2, 0)))
            if n > 1:
                vdm = np.prod(
                    [points[:, i] - points[:, j] for i in range(n) for j in range(i + 1, n)],
                    axis=0,
                )
            else:
                vdm = np.ones(len(points))
            values = np.asarray(f(points), dtype=complex)
            partial.append(compensated_sum(weights * vdm * dets * values))
        return compensated_sum(partial) / norm

    result = converged(_evaluate, rtol, what=f"tensor quadrature for {ens!r}")
    logger.debug("%r: tensor quadrature -> %s (gap=%.2e)", ens, result.value, result.gap)
    return result


