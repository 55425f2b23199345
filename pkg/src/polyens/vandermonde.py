#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
Vandermonde products and the related exact identities.

The Vandermonde product is ``Delta_N(x) = prod_{i<j} (x_i - x_j)``, with
``Delta_0 = Delta_1 = 1``. It is always evaluated as an explicit product.
Coincident points give 0; they are rejected (see :func:`check_distinct`)
wherever a Vandermonde product ends up in a denominator.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import typing

import numpy as np

from .numerics import PreconditionError, compensated_sum

__all__ = [
    "CoincidentPointsError",
    "IndexSet",
    "check_distinct",
    "vandermonde",
    "extended_vandermonde_check",
    "reduced_vandermonde",
    "vandermonde_swap_sign_check",
    "lagrange_weights",
    "lagrange_extrapolation_check",
]

logger = logging.getLogger(__name__)

#: Two points closer than this (relative) are considered coincident
COINCIDENCE_RTOL = 1e-10


class CoincidentPointsError(PreconditionError):
    """Raised when points that must be pairwise distinct are not."""

    pass


def _as_points(xs) -> np.ndarray:
    return np.atleast_1d(np.asarray(xs, dtype=complex))


def check_distinct(xs, what: str = "points", rtol: float = COINCIDENCE_RTOL):
    """Raise :class:`CoincidentPointsError` if two entries of **xs** coincide."""
    xs = _as_points(xs)
    for i, j in itertools.combinations(range(len(xs)), 2):
        scale = max(abs(xs[i]), abs(xs[j]), 1.0)
        if abs(xs[i] - xs[j]) < rtol * scale:
            raise CoincidentPointsError(
                f"The {what:s} must be pairwise distinct (#{i:d} and #{j:d} coincide)."
            )
    return xs


@dataclasses.dataclass(frozen=True)
class IndexSet:
    """Sorted distinct 1-based positions ``l_1 < ... < l_L`` within ``1..size``."""

    positions: tuple[int, ...]
    size: int

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(int(p) for p in self.positions))
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            raise PreconditionError(f"Positions must increase strictly: {self.positions}")
        if self.positions and (self.positions[0] < 1 or self.positions[-1] > self.size):
            raise PreconditionError(
                f"Positions {self.positions} are not within 1..{self.size:d}"
            )

    def __len__(self):
        return len(self.positions)

    def __iter__(self) -> typing.Iterator[int]:
        return iter(self.positions)

    @property
    def complement(self) -> IndexSet:
        return IndexSet(
            tuple(p for p in range(1, self.size + 1) if p not in self.positions),
            self.size,
        )

    @classmethod
    def all_subsets(cls, size: int) -> typing.Iterator[IndexSet]:
        """Every index set of ``1..size`` (including the empty one)."""
        for length in range(size + 1):
            for positions in itertools.combinations(range(1, size + 1), length):
                yield cls(positions, size)


def vandermonde(xs) -> complex:
    """``prod_{i<j} (x_i - x_j)``."""
    xs = _as_points(xs)
    value = 1.0 + 0.0j
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            value *= xs[i] - xs[j]
    return complex(value)


def _gap(lhs: complex, rhs: complex) -> float:
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1.0)


def extended_vandermonde_check(xs, zs) -> tuple[complex, complex, float]:
    """Compare ``prod_{m,n} (x_n - z_m) Delta(xs)`` with ``Delta(xs, zs) / Delta(zs)``.

    :return: Both sides and their relative gap.
    """
    xs = _as_points(xs)
    zs = check_distinct(zs, "zs")
    lhs = complex(np.prod(np.subtract.outer(xs, zs))) * vandermonde(xs)
    rhs = vandermonde(np.concatenate([xs, zs])) / vandermonde(zs)
    return lhs, rhs, _gap(lhs, rhs)


def reduced_vandermonde(xs, removed: IndexSet) -> tuple[complex, complex]:
    """The Vandermonde product of **xs** with the **removed** entries left out.

    :return: The direct product over the surviving entries and the closed form
             ``Delta_N(x) Delta_L(x_l) prod_j (-1)**(N - l_j) / prod_{n != l_j} (x_n - x_{l_j})``.
    """
    xs = check_distinct(xs, "xs")
    if removed.size != len(xs):
        raise PreconditionError(f"The index set refers to {removed.size} entries, not {len(xs)}.")
    n_points = len(xs)
    chosen = [p - 1 for p in removed]
    direct = vandermonde([xs[p - 1] for p in removed.complement])
    closed = vandermonde(xs) * vandermonde(xs[chosen])
    for l in chosen:
        others = np.delete(xs, l)
        closed *= (-1) ** (n_points - 1 - l) / np.prod(others - xs[l])
    return direct, complex(closed)


def vandermonde_swap_sign_check(xs, zs, rtol: float = 1e-12) -> bool:
    """Check that ``Delta(xs, zs) = (-1)**(N M) Delta(zs, xs)``."""
    xs, zs = _as_points(xs), _as_points(zs)
    check_distinct(np.concatenate([xs, zs]), "combined points")
    lhs = vandermonde(np.concatenate([xs, zs]))
    rhs = (-1) ** (len(xs) * len(zs)) * vandermonde(np.concatenate([zs, xs]))
    return _gap(lhs, rhs) <= rtol


def lagrange_weights(points) -> np.ndarray:
    """The weights ``1 / prod_{j != m} (s_m - s_j)`` for every point ``s_m``."""
    points = check_distinct(points, "interpolation points")
    weights = np.empty(len(points), dtype=complex)
    for m in range(len(points)):
        weights[m] = 1.0 / np.prod(points[m] - np.delete(points, m))
    return weights


def lagrange_extrapolation_check(u: complex, ss) -> tuple[complex, complex]:
    """Compare ``1 / prod_j (u - s_j)`` with its partial fraction expansion.

    :return: ``(lhs, rhs)`` with ``rhs = sum_m (1 / (u - s_m)) prod_{j != m} 1 / (s_m - s_j)``.
    """
    ss = _as_points(ss)
    if not len(ss):
        raise PreconditionError("At least one interpolation point is needed.")
    check_distinct(np.concatenate([ss, [u]]), "u and the interpolation points")
    lhs = complex(1.0 / np.prod(u - ss))
    rhs = compensated_sum(lagrange_weights(ss) / (u - ss))
    return lhs, rhs
