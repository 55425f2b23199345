#  Copyright (©) Meteo-France (2024-)
#
#  This software is governed by the CeCILL-C license under French law and
#  abiding by the rules of distribution of free software. You can use,
#  modify and/or redistribute the software under the terms of the CeCILL-C
#  license as circulated by CEA, CNRS and INRIA at "http://www.cecill.info".

"""
The commands of the ``polyens`` executable.

Each command turns a validated :class:`~polyens.schema.RunConfig` into a
:class:`~polyens.schema.RunReport`. A report's ``ok`` flag is ``False``
whenever one of the reported gaps exceeds the configured tolerance.
"""

from __future__ import annotations

import contextlib
import logging
import time
import typing

import numpy as np

from .conf import polyens_conf
from .ensemble import (
    YoungDiagram,
    equal_ratio_expectation,
    giambelli_check,
    inverse_expectation_forms,
)
from .invertible import (
    InvertibleEnsemble,
    RatioQuery,
    get_ensemble,
    kernel,
    kernel_trace,
    product_expectation,
    ratio_expectation,
    ratio_m_plus_one_over_one,
)
from .numerics import PreconditionError, relative_gap
from .oracle import (
    mc_expect,
    mc_expect_ratio,
    quad_expect,
    ratio_function,
    sample_chgue_ext,
    sample_gue_ext,
)
from .schema import RunConfig, RunReport, jsonable

__all__ = [
    "build_ensemble",
    "cmd_zcheck",
    "cmd_giambelli",
    "cmd_ratio",
    "cmd_kernel",
    "cmd_oracle",
    "get_command",
]

logger = logging.getLogger(__name__)

#: Number of standard errors accepted by Monte Carlo comparisons
MC_SIGMAS = 3.0


def build_ensemble(config: RunConfig, size: int = None) -> InvertibleEnsemble:
    """The configured ensemble (restricted to its first **size** parameters)."""
    ens_conf = config.ensemble
    a = ens_conf.a if size is None else ens_conf.a[:size]
    if size is not None and size > len(ens_conf.a):
        raise PreconditionError(f"N={size:d} exceeds the {len(ens_conf.a):d} given parameters.")
    kwargs = dict(a=a, nodes=config.numerics.nodes_line)
    if ens_conf.kind == "chgue_ext":
        kwargs["nu"] = ens_conf.nu
    return get_ensemble(ens_conf.kind, **kwargs)


@contextlib.contextmanager
def _numerics(config: RunConfig):
    """Apply the configuration's numerical overrides for the command's duration."""
    numerics = config.numerics
    with polyens_conf.overrides(
        "quadrature",
        circle_points=numerics.nodes_circle,
        oracle_nodes=numerics.oracle_nodes,
        gate_rtol=numerics.gate_rtol,
    ):
        yield


def _diagnostics(ens: InvertibleEnsemble, started: float, **extra) -> dict:
    diagnostics = dict(
        nodes_line=ens.nodes,
        nodes_circle=polyens_conf.circle_points,
        oracle_nodes=polyens_conf.oracle_nodes,
        gate_rtol=polyens_conf.gate_rtol,
        certification=ens._cache.get("certification", {}),
    )
    diagnostics.update(extra)
    diagnostics["wall_time"] = time.perf_counter() - started
    return diagnostics


def _report(command: str, config: RunConfig, ok: bool, outputs: dict, diagnostics: dict):
    report = RunReport(
        command=command,
        ok=bool(ok),
        inputs=config.model_dump(mode="json"),
        outputs=jsonable(outputs),
        diagnostics=jsonable(diagnostics),
    )
    if ok:
        logger.info("Command %s succeeded.", command)
    else:
        logger.error("Command %s: some gaps exceed the tolerance.", command)
    return report


def _sample(config: RunConfig, ens: InvertibleEnsemble):
    count = config.numerics.mc_samples or polyens_conf.mc_samples
    seed = polyens_conf.mc_seed if config.numerics.seed is None else config.numerics.seed
    if config.ensemble.kind == "gue_ext":
        return sample_gue_ext(ens.a, count, seed)
    return sample_chgue_ext(ens.a, config.ensemble.nu, count, seed)


def cmd_zcheck(config: RunConfig) -> RunReport:
    """Partition function: moment determinant against ``N! Delta_N(a)``."""
    started = time.perf_counter()
    with _numerics(config):
        ens = build_ensemble(config)
        from_moments = ens.partition_function()
        closed_form = ens.partition_function_closed_form()
        gap = relative_gap(closed_form, from_moments)
        moments_gap = ens.moments(ens.n - 1).gap
        outputs = dict(moments=from_moments, closed_form=closed_form, gap=gap)
        return _report(
            "zcheck",
            config,
            gap <= config.tolerance,
            outputs,
            _diagnostics(ens, started, moments_gap=moments_gap),
        )


def _diagrams(config: RunConfig) -> list[YoungDiagram]:
    diagrams = [
        diagram
        for size in range(1, config.max_boxes + 1)
        for diagram in YoungDiagram.partitions(size)
    ]
    for parts in config.diagrams:
        diagram = YoungDiagram(tuple(parts))
        if diagram not in diagrams:
            diagrams.append(diagram)
    return diagrams


def cmd_giambelli(config: RunConfig) -> RunReport:
    """Giambelli compatibility sweep over diagrams and ensemble sizes."""
    started = time.perf_counter()
    with _numerics(config):
        sizes = config.sizes or [len(config.ensemble.a)]
        rows = []
        worst = 0.0
        for size in sizes:
            ens = build_ensemble(config, size)
            for diagram in _diagrams(config):
                check = giambelli_check(ens, diagram)
                worst = max(worst, check.gap, check.h_gap)
                rows.append(
                    dict(
                        n=size,
                        diagram=list(diagram.parts),
                        frobenius=str(diagram.frobenius()),
                        lhs=check.lhs,
                        rhs=check.rhs,
                        h_det=check.h_det,
                        gap=check.gap,
                        h_gap=check.h_gap,
                    )
                )
        logger.debug("Giambelli sweep: %d checks, worst gap %.2e", len(rows), worst)
        return _report(
            "giambelli",
            config,
            worst <= config.tolerance,
            dict(checks=rows, worst_gap=worst),
            _diagnostics(ens, started),
        )


def _special_path(ens: InvertibleEnsemble, query: RatioQuery) -> typing.Optional[dict]:
    """The dedicated formula matching the shape of **query** (if any)."""
    if query.l == 0:
        result = product_expectation(ens, query.zs)
        return dict(path="product", value=result.value, gap=result.gap)
    if query.l == 1 and query.m == 0:
        forms = inverse_expectation_forms(ens, query.ys[0])
        return dict(path="inverse", value=forms.value, gap=max(forms.gap, forms.forms_gap))
    if query.l == 1:
        result = ratio_m_plus_one_over_one(ens, query.zs, query.ys[0])
        return dict(path="m_plus_one_over_one", value=result.value, gap=result.gap)
    return None


def _equal_ratio(ens: InvertibleEnsemble, query: RatioQuery) -> typing.Optional[dict]:
    if query.m != query.l:
        return None
    gaps = [0.0]

    def _single_ratio(z, u):
        result = ratio_expectation(ens, RatioQuery((z,), (u,)))
        gaps.append(result.gap)
        return result.value

    value = equal_ratio_expectation(ens, query.zs, query.ys, _single_ratio)
    return dict(value=value, gap=max(gaps))


def cmd_ratio(config: RunConfig) -> RunReport:
    """Ratios of characteristic polynomials with every requested provider."""
    started = time.perf_counter()
    with _numerics(config):
        ens = build_ensemble(config)
        query = RatioQuery(config.z_points, config.y_points)
        providers = dict()
        skipped = []
        for provider in config.providers:
            if provider == "formula":
                result = ratio_expectation(ens, query)
                providers[provider] = dict(value=result.value, gap=result.gap)
            elif provider == "equal_ratio":
                outcome = _equal_ratio(ens, query)
                if outcome is None:
                    skipped.append(provider)
                else:
                    providers[provider] = outcome
            elif provider == "special":
                outcome = _special_path(ens, query)
                if outcome is None:
                    skipped.append(provider)
                else:
                    providers[provider] = outcome
            elif provider == "quad":
                result = quad_expect(ens, ratio_function(query.zs, query.ys))
                providers[provider] = dict(value=result.value, gap=result.gap)
            else:
                estimate = mc_expect_ratio(_sample(config, ens), query.zs, query.ys)
                providers[provider] = dict(
                    value=estimate.mean, std_error=estimate.std_error, count=estimate.count
                )
        ok = True
        reference = next(
            (providers[p]["value"] for p in ("formula", "special", "quad") if p in providers),
            None,
        )
        for name, outcome in providers.items():
            if reference is None:
                break
            if "std_error" in outcome:
                agrees = abs(outcome["value"] - reference) <= MC_SIGMAS * outcome[
                    "std_error"
                ] + 1e-12 * max(abs(reference), 1.0)
                outcome["agrees"] = agrees
            else:
                outcome["agreement_gap"] = relative_gap(outcome["value"], reference)
                agrees = outcome["agreement_gap"] <= config.tolerance
            ok = ok and agrees
        return _report(
            "ratio",
            config,
            ok,
            dict(m=query.m, l=query.l, providers=providers, skipped=skipped),
            _diagnostics(ens, started),
        )


def cmd_kernel(config: RunConfig) -> RunReport:
    """The correlation kernel on a grid, with its trace check."""
    started = time.perf_counter()
    if config.grid is None:
        raise PreconditionError("The kernel command needs a grid.")
    with _numerics(config):
        ens = build_ensemble(config)
        xs, ys = config.grid.axes()
        values = kernel(ens, xs[:, np.newaxis], ys[np.newaxis, :])
        trace = kernel_trace(ens)
        trace_gap = relative_gap(float(ens.n), trace.value)
        grid = [
            [float(x), float(y), float(values.value[i, j])]
            for i, x in enumerate(xs)
            for j, y in enumerate(ys)
        ]
        outputs = dict(grid=grid, trace=trace.value, trace_gap=trace_gap)
        return _report(
            "kernel",
            config,
            trace_gap <= config.tolerance,
            outputs,
            _diagnostics(ens, started, kernel_gap=values.gap, trace_convergence_gap=trace.gap),
        )


def cmd_oracle(config: RunConfig) -> RunReport:
    """Monte Carlo and tensor quadrature oracle runs."""
    started = time.perf_counter()
    with _numerics(config):
        ens = build_ensemble(config)
        query = RatioQuery(config.z_points, config.y_points)
        providers = [p for p in config.providers if p in ("mc", "quad")] or ["mc", "quad"]
        outputs = dict()
        ok = True
        if "quad" in providers:
            result = quad_expect(ens, ratio_function(query.zs, query.ys))
            outputs["quad"] = dict(value=result.value, gap=result.gap)
        if "mc" in providers:
            batch = _sample(config, ens)
            expected_trace = float(np.sum(ens.a))
            if config.ensemble.kind == "chgue_ext":
                expected_trace += ens.n * (ens.n + config.ensemble.nu)
            trace = mc_expect(batch, lambda xs: np.sum(xs, axis=-1))
            ratio = mc_expect_ratio(batch, query.zs, query.ys)
            trace_ok = trace.agrees_with(expected_trace, MC_SIGMAS)
            outputs["mc"] = dict(
                seed=batch.seed,
                count=batch.count,
                mean_trace=trace.mean.real,
                trace_std_error=trace.std_error,
                expected_trace=expected_trace,
                trace_agrees=trace_ok,
                value=ratio.mean,
                std_error=ratio.std_error,
            )
            ok = ok and trace_ok
            if "quad" in outputs:
                outputs["mc"]["agrees"] = ratio.agrees_with(outputs["quad"]["value"], MC_SIGMAS)
                ok = ok and outputs["mc"]["agrees"]
        return _report("oracle", config, ok, outputs, _diagnostics(ens, started))


_COMMANDS = dict(
    zcheck=cmd_zcheck,
    giambelli=cmd_giambelli,
    ratio=cmd_ratio,
    kernel=cmd_kernel,
    oracle=cmd_oracle,
)


def get_command(name: str) -> typing.Callable[[RunConfig], RunReport]:
    """A simple factory method for the commands."""
    try:
        return _COMMANDS[name]
    except KeyError:
        raise ValueError(f'No command is available for name="{name:s}"') from None
