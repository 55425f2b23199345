#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
The ``polyens`` package computes expectations of products and ratios of
characteristic polynomials, Schur polynomial averages and correlation kernels
for polynomial ensembles of random matrices. Every analytic result can be
checked against independent brute-force oracles.

Here are a few pointers for a better understanding of the code:

* :mod:`polyens.numerics` holds the dense complex linear algebra, the Gauss
  rules, the contour paths and the node-doubling convergence gate every
  quadrature based result goes through;
* :mod:`polyens.specfun` and :mod:`polyens.vandermonde` provide the special
  functions (monic Hermite/Laguerre polynomials, regularised Bessel function)
  and the Vandermonde/Lagrange identities;
* :mod:`polyens.ensemble` deals with arbitrary polynomial ensembles
  (:class:`polyens.ensemble.PolynomialEnsemble`): moments, partition
  function, Schur expectations, the Giambelli check, equal ratios and the
  inverse characteristic polynomial;
* :mod:`polyens.invertible` deals with invertible ensembles, the two built-in
  ones being the Gaussian unitary ensemble with an external source and its
  chiral counterpart: ratios of characteristic polynomials, special paths
  and the correlation kernel;
* :mod:`polyens.oracle` provides Monte Carlo samplers and a tensor
  quadrature used as ground truth;
* :mod:`polyens.conf` is an utility module that is used to handle the
  configuration data and the logging facility;
* :mod:`polyens.schema`, :mod:`polyens.commands` and
  :mod:`polyens.entrypoints.polyens` implement the ``polyens`` executable.

"""

__all__ = ["gue", "gue_ext", "chgue_ext", "get_ensemble", "RatioQuery"]

from .ensemble import gue
from .invertible import RatioQuery, chgue_ext, get_ensemble, gue_ext
