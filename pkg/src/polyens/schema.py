#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
JSON run configurations and run reports of the ``polyens`` command.

Complex numbers are always written as two-element ``[re, im]`` arrays. Both
documents carry a ``schema_version`` field (currently 1).
"""

from __future__ import annotations

import csv
import importlib.metadata
import io
import json
import typing

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "EnsembleSpec",
    "NumericsSpec",
    "OutputSpec",
    "GridSpec",
    "RunConfig",
    "RunReport",
    "load_config",
    "as_pair",
    "jsonable",
    "report_to_csv",
]

SCHEMA_VERSION = 1

#: A complex number as ``[re, im]``
ComplexPair = tuple[float, float]

Provider = typing.Literal["formula", "equal_ratio", "special", "quad", "mc"]


class ConfigError(ValueError):
    """Raised when a run configuration can not be decoded or validated."""

    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EnsembleSpec(_Strict):
    """The ensemble a command works on."""

    kind: typing.Literal["gue_ext", "chgue_ext"]
    a: list[float] = Field(min_length=1)
    nu: float = 0.0

    @model_validator(mode="after")
    def _check_nu(self):
        if self.kind == "gue_ext" and self.nu != 0:
            raise ValueError("nu is only meaningful for chgue_ext ensembles")
        if not self.nu > -1:
            raise ValueError(f"nu must be > -1 (got {self.nu})")
        return self


class NumericsSpec(_Strict):
    """Overrides of the configuration file's numerical defaults."""

    nodes_line: typing.Optional[int] = Field(default=None, ge=1)
    nodes_circle: typing.Optional[int] = Field(default=None, ge=8)
    oracle_nodes: typing.Optional[int] = Field(default=None, ge=1)
    mc_samples: typing.Optional[int] = Field(default=None, ge=2)
    seed: typing.Optional[int] = Field(default=None, ge=0, lt=1 << 64)
    gate_rtol: typing.Optional[float] = Field(default=None, gt=0)


class OutputSpec(_Strict):
    path: typing.Optional[str] = None
    format: typing.Literal["json", "csv"] = "json"


class GridSpec(_Strict):
    """Kernel grid: explicit ``xs``/``ys`` lists or ``start, stop, count``."""

    xs: typing.Optional[list[float]] = None
    ys: typing.Optional[list[float]] = None
    start: typing.Optional[float] = None
    stop: typing.Optional[float] = None
    count: typing.Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_grid(self):
        explicit = self.xs is not None or self.ys is not None
        ranged = self.count is not None
        if explicit == ranged:
            raise ValueError("Either xs/ys lists or start/stop/count must be given")
        if ranged and (self.start is None or self.stop is None):
            raise ValueError("start and stop are needed along with count")
        if explicit and not (self.xs or self.ys):
            raise ValueError("The kernel grid is empty")
        return self

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """The x and y values of the grid."""
        if self.count is not None:
            values = np.linspace(self.start, self.stop, self.count)
            return values, values
        xs = self.xs if self.xs else self.ys
        ys = self.ys if self.ys else self.xs
        return np.array(xs, dtype=float), np.array(ys, dtype=float)


class RunConfig(_Strict):
    """The JSON document read by every command."""

    schema_version: int = SCHEMA_VERSION
    ensemble: EnsembleSpec
    numerics: NumericsSpec = NumericsSpec()
    output: OutputSpec = OutputSpec()
    zs: list[ComplexPair] = []
    ys: list[ComplexPair] = []
    diagrams: list[list[int]] = []
    max_boxes: int = Field(default=4, ge=0)
    sizes: list[int] = []
    providers: list[Provider] = ["formula"]
    grid: typing.Optional[GridSpec] = None
    tolerance: float = Field(default=1e-6, gt=0)

    @field_validator("schema_version")
    @classmethod
    def _check_version(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"Unsupported schema_version {value} (expected {SCHEMA_VERSION})")
        return value

    @field_validator("sizes")
    @classmethod
    def _check_sizes(cls, value: list[int]) -> list[int]:
        if any(v < 1 for v in value):
            raise ValueError("Ensemble sizes must be positive")
        return value

    @property
    def z_points(self) -> np.ndarray:
        return np.array([complex(*pair) for pair in self.zs], dtype=complex)

    @property
    def y_points(self) -> np.ndarray:
        return np.array([complex(*pair) for pair in self.ys], dtype=complex)


def _version() -> str:
    try:
        return importlib.metadata.version("polyens")
    except importlib.metadata.PackageNotFoundError:
        return "unknown"


class RunReport(BaseModel):
    """The outcome of a command."""

    schema_version: int = SCHEMA_VERSION
    command: str
    version: str = Field(default_factory=_version)
    ok: bool = True
    inputs: dict[str, typing.Any] = {}
    outputs: dict[str, typing.Any] = {}
    diagnostics: dict[str, typing.Any] = {}

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


def load_config(text: str) -> RunConfig:
    """Decode and validate a JSON run configuration.

    :exception ConfigError: If the document is not valid JSON or does not
                            match the :class:`RunConfig` schema.
    """
    try:
        return RunConfig.model_validate(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"The configuration is not valid JSON: {exc}") from exc
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration:\n{exc}") from exc


def as_pair(value) -> list[float]:
    """``[re, im]`` for any complex-like scalar."""
    value = complex(value)
    return [value.real, value.imag]


def jsonable(obj):
    """Recursively turn complex numbers into pairs and arrays into lists."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return as_pair(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _flatten(prefix: str, obj, rows: list):
    if isinstance(obj, dict):
        for key, value in obj.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), value, rows)
    elif isinstance(obj, list):
        for i, value in enumerate(obj):
            _flatten(f"{prefix}.{i:d}", value, rows)
    else:
        rows.append((prefix, obj))


def report_to_csv(report: RunReport) -> str:
    """CSV rendering of a report.

    Kernel reports give one ``x,y,K`` row per grid point; other reports list
    their flattened outputs as ``key,value`` rows.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    if report.command == "kernel":
        writer.writerow(["x", "y", "K"])
        writer.writerows(report.outputs["grid"])
    else:
        rows = []
        _flatten("", report.outputs, rows)
        writer.writerow(["key", "value"])
        writer.writerows(rows)
    return buffer.getvalue()
