#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
Handle the polyens configuration's file.
"""

from __future__ import annotations

import configparser
import contextlib
import logging
import logging.handlers
import os

__all__ = ["PolyensConfig", "polyens_conf"]

logger = logging.getLogger(__name__)


class PolyensConfig:
    """Read the polyens configuration files.

    A system-wide configuration file can be specified using the
    POLYENS_SITE_CONF environment variable. An additional user-wide
    configuration file will be read in (if present). It is located in
    ~/.polyensrc.ini.

    Example::

        [logging]
        level = INFO

        [quadrature]
        hermite_nodes = 128
        gate_rtol = 1e-8

        [montecarlo]
        samples = 100000
        seed = 20240101

        [ratio]
        aux_integration = auto
        residues = exact

    """

    _CONFIG_ENV_VAR = "POLYENS_SITE_CONF"
    _CONFIG_FILE = os.path.join(os.path.expanduser("~"), ".polyensrc.ini")

    def __init__(self, conf_txt: str = None):
        """
        :param conf_txt: Provide a text based version of the config file. For
                         testing purposes only. If provided, the default
                         configuration (~/.polyensrc.ini) is not read in.
        """
        conf_obj = configparser.ConfigParser()
        conf_obj.optionxform = lambda option: option
        if conf_txt is not None:
            conf_obj.read_string(conf_txt)
        else:
            todo = []
            site_config = os.environ.get(self._CONFIG_ENV_VAR, None)
            if site_config and os.path.exists(site_config):
                todo.append(site_config)
            if os.path.exists(self._CONFIG_FILE):
                todo.append(self._CONFIG_FILE)
            if todo:
                conf_obj.read(todo, encoding="utf-8")
        self._conf = conf_obj

    def logging_config(self, filename: str = None, level: str = None):
        """Configure the logging facility.

        The ``filename`` and ``level`` options of the configuration file
        ``[logging]`` section are considered. If missing, default values for
        ``filename`` and ``level`` are ``~/.polyens.log`` and ``WARNING``.
        """
        if filename is None:
            filename = self._conf.get("logging", "filename", fallback="~/.polyens.log")
            filename = os.path.expanduser(filename)
        f_handler = logging.handlers.TimedRotatingFileHandler(
            filename, when="midnight", interval=1, backupCount=3, encoding="utf-8"
        )
        formatter = logging.Formatter(
            "[%(asctime)s] pid=%(process)d: %(name)s %(levelname)s: %(message)s"
        )
        f_handler.setFormatter(formatter)
        m_logger = logging.getLogger()
        m_logger.addHandler(f_handler)
        if level is None:
            m_logger.setLevel(self._conf.get("logging", "level", fallback="WARNING"))
        else:
            m_logger.setLevel(level)
        return f_handler

    @contextlib.contextmanager
    def overrides(self, section: str, **options):
        """Temporarily replace some options of a given **section**.

        ``None`` values are ignored.
        """
        saved = dict()
        if not self._conf.has_section(section):
            self._conf.add_section(section)
        try:
            for option, value in options.items():
                if value is None:
                    continue
                saved[option] = self._conf.get(section, option, fallback=None)
                self._conf.set(section, option, str(value))
            yield self
        finally:
            for option, value in saved.items():
                if value is None:
                    self._conf.remove_option(section, option)
                else:
                    self._conf.set(section, option, value)

    def _positive_int(self, section: str, option: str, fallback: int) -> int:
        value = int(self._conf.get(section, option, fallback=str(fallback)))
        if value < 1:
            raise ValueError(f"[{section:s}] {option:s} must be positive. Not {value:d}.")
        return value

    @staticmethod
    def _choice_value(value: str, choices: tuple[str, ...]) -> str:
        """Check that a configuration entry is one of the allowed choices."""
        if value.strip(" ") not in choices:
            raise ValueError(f"Must be one of {', '.join(choices)}. Not {value!s}.")
        return value.strip(" ")

    @property
    def hermite_nodes(self) -> int:
        """Default node count for Gauss-Hermite rules and imaginary-axis paths."""
        return self._positive_int("quadrature", "hermite_nodes", 128)

    @property
    def laguerre_nodes(self) -> int:
        """Default node count for Gauss-Laguerre rules and negative half-lines."""
        return self._positive_int("quadrature", "laguerre_nodes", 200)

    @property
    def legendre_nodes(self) -> int:
        """Default node count for Gauss-Legendre rules on finite intervals."""
        return self._positive_int("quadrature", "legendre_nodes", 64)

    @property
    def circle_points(self) -> int:
        """Default number of points on circular contours."""
        return self._positive_int("quadrature", "circle_points", 256)

    @property
    def oracle_nodes(self) -> int:
        """Per-axis node count of the tensor quadrature oracle."""
        return self._positive_int("quadrature", "oracle_nodes", 120)

    @property
    def gate_rtol(self) -> float:
        """The largest n/2n relative gap accepted by the convergence gate."""
        value = float(self._conf.get("quadrature", "gate_rtol", fallback="1e-8"))
        if not value > 0:
            raise ValueError(f"gate_rtol must be positive. Not {value!s}.")
        return value

    @property
    def mc_samples(self) -> int:
        """Default number of Monte Carlo samples."""
        return self._positive_int("montecarlo", "samples", 100000)

    @property
    def mc_seed(self) -> int:
        """Default Monte Carlo seed."""
        return int(self._conf.get("montecarlo", "seed", fallback="20240101"))

    @property
    def aux_integration(self) -> str:
        """How integrals over the auxiliary contour are computed.

        ``quadrature`` integrates along the contour; ``monic_basis`` uses the
        exact polynomial inversion identity; ``auto`` integrates along the
        contour and switches to the monic basis when the convergence gate fails.
        """
        return self._choice_value(
            self._conf.get("ratio", "aux_integration", fallback="auto"),
            ("auto", "quadrature", "monic_basis"),
        )

    @property
    def residues(self) -> str:
        """How the contour integrals around the external source are evaluated."""
        return self._choice_value(
            self._conf.get("ratio", "residues", fallback="exact"), ("exact", "circle")
        )


#: The go-to object to fetch some configuration data
polyens_conf = PolyensConfig()
