"""
Command-line front end.

    python -m submersion_curvature curvature --example sphere --r 1 --points 5
    python -m submersion_curvature verify --example hopf --eps 0.5 --identity all
    python -m submersion_curvature sweep --family berger_family --values 1,0.5,0.25,0.1 --format csv

Unknown `--name value` pairs become catalog parameters. Exit codes:
0 all passed, 1 residual failure, 2 hypothesis not met, 3 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence, TextIO

import numpy as np

from . import catalog, settings
from .catalog import CatalogBuild
from .config import RunConfig, load_config_file, parse_params, parse_point
from .diffgeo_core import DifferentiationConfig, curvature_at, orthonormal_frame
from .errors import ConfigError, GeometryError, HypothesisUnmetError
from .reports import IDENTITY_COLUMNS, SweepRow, SweepTable, emit, identity_row
from .submersion import (
    IdentityId,
    IdentityReport,
    assemble_total_metric,
    measure_hypothesis_report,
    verify_base_derivative_identities,
    verify_laplacian_split,
    verify_lie_derivative_fiber_volume,
    verify_main_equality,
    verify_oneill_identity,
    verify_theorem2_2,
)
from .weighted_geometry import WeightedManifold, modified_scalar_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RESIDUAL = 1
EXIT_HYPOTHESIS = 2
EXIT_CONFIG = 3

IDENTITY_ORDER = [i.value for i in IdentityId]
DEFAULT_SWEEP_VALUES = {
    "berger_family": [1.0, 0.5, 0.25, 0.1],
    "product_family": [1.0, 0.5, 0.25, 0.1],
    "warped_family": [0.5, 0.0],
}


class _ArgumentParser(argparse.ArgumentParser):
    # no prefix matching: catalog parameters such as --t or --base must not resolve to --tol or --base-points
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise ConfigError(message)


def configure_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="[%(asctime)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stderr,
        force=True,
    )


def _ordered_map(func, items, workers: int) -> list:
    items = list(items)
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# ---------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config file")
    common.add_argument("--example", help="catalog id")
    common.add_argument("--param", action="append", default=[], metavar="K=V", help="catalog parameter")
    common.add_argument("--points", type=int, help="pointwise samples")
    common.add_argument("--base-points", type=int, dest="base_points", help="base samples for fiber integrals")
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float, help="residual tolerance override")
    common.add_argument("--step", type=float, help="relative inner stencil step")
    common.add_argument("--nested-step", type=float, dest="nested_step", help="relative outer stencil step")
    common.add_argument("--order", type=int, choices=(2, 4), help="stencil order")
    common.add_argument("--grid", type=int, help="quadrature nodes per fiber axis")
    common.add_argument("--format", choices=("human", "json", "csv", "pdf"), dest="output_format")
    common.add_argument("--out", type=Path)
    common.add_argument("--workers", type=int)
    common.add_argument("--q", type=float, help="weight dimension for R_q")
    common.add_argument("--point", action="append", default=[], help="explicit point, comma separated")
    common.add_argument("--verbose", action="store_true")

    parser = _ArgumentParser(prog="submersion_curvature",
                             description="Modified scalar curvature on weighted manifolds and submersions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    sub.add_parser("curvature", parents=[common], help="R, R_inf and R_q at sample points")
    verify = sub.add_parser("verify", parents=[common], help="verify submersion identities")
    verify.add_argument("--identity", default=None, choices=IDENTITY_ORDER + ["all"])
    sweep = sub.add_parser("sweep", parents=[common], help="collapse sweep over a family")
    sweep.add_argument("--family")
    sweep.add_argument("--values", help="comma separated parameter values")
    return parser


def _extra_params(extras: Sequence[str]) -> dict:
    params, k = {}, 0
    while k < len(extras):
        token = extras[k]
        if not token.startswith("--") or len(token) < 3:
            raise ConfigError(f"unexpected argument {token!r}")
        name, sep, value = token[2:].partition("=")
        if not sep:
            if k + 1 >= len(extras):
                raise ConfigError(f"{token} needs a value")
            value = extras[k + 1]
            k += 1
        params[name.replace("-", "_")] = value
        k += 1
    return params


def run_config_from_args(args: argparse.Namespace, extras: Sequence[str]) -> RunConfig:
    run = RunConfig()
    if args.config is not None:
        run = load_config_file(run, args.config)
    updates = {}
    if args.example is not None:
        updates["example"] = args.example
        if run.example != args.example:
            updates["params"] = {}
    params = dict(updates.get("params", run.params))
    params.update(parse_params(args.param))
    params.update(_extra_params(extras))
    updates["params"] = params

    for name in ("points", "base_points", "seed", "grid", "workers", "q", "output_format", "out"):
        value = getattr(args, name)
        if value is not None:
            updates[name] = value
    if args.tol is not None:
        updates["tolerance"] = args.tol
    if args.step is not None or args.nested_step is not None or args.order is not None:
        try:
            updates["diff"] = DifferentiationConfig(
                args.step if args.step is not None else run.diff.step,
                args.order if args.order is not None else run.diff.stencil_order,
                args.nested_step if args.nested_step is not None else run.diff.nested_step,
            )
        except GeometryError as exc:
            raise ConfigError(str(exc)) from None
    if args.point:
        updates["explicit_points"] = [parse_point(p) for p in args.point]
    if getattr(args, "identity", None):
        updates["identity"] = args.identity
    if getattr(args, "family", None):
        updates["family"] = args.family
    if getattr(args, "values", None):
        try:
            updates["values"] = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"--values expects numbers, got {args.values!r}") from None
    return replace(run, **updates).validate()


def _points(run: RunConfig, build: CatalogBuild) -> np.ndarray:
    if run.explicit_points:
        for p in run.explicit_points:
            if len(p) != build.domain.dim:
                raise ConfigError(
                    f"--point {','.join(f'{float(c):g}' for c in p)} has {len(p)} coordinates, "
                    f"{build.id} needs {build.domain.dim} ({', '.join(build.domain.names)})"
                )
        return np.array([build.domain.wrap(p) for p in run.explicit_points])
    return build.default_samples(run.points, run.seed)


def _coord_names(build: CatalogBuild) -> List[str]:
    return list(build.domain.names)


# ---------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------

def cmd_curvature(run: RunConfig, stream: TextIO) -> int:
    build = run.build()
    tol = run.tolerance_or(settings.TOL_CURVATURE)
    names = _coord_names(build)
    points = _points(run, build)
    if build.kind == "submersion":
        metric, r_key = assemble_total_metric(build.obj), "R_M"
        weighted = None if build.obj.unit_density else WeightedManifold(metric, build.obj.density())
    elif build.kind == "weighted":
        metric, weighted, r_key = build.obj.metric, build.obj, "R"
    else:
        metric, weighted, r_key = build.obj, None, "R"
    if run.q is not None and weighted is None:
        raise ConfigError(f"--q needs a weighted example; {build.id} has no density")

    def one(p):
        row = {name: float(c) for name, c in zip(names, p)}
        if weighted is not None:
            rep = modified_scalar_report(weighted, p, run.diff, run.q)
            row.update(R=rep.scalar, R_inf=rep.r_inf, R_q=rep.r_q)
        else:
            row["R"] = curvature_at(metric, p, run.diff).scalar
        errors = []
        for key, computed in ((r_key, row["R"]), ("R_inf", row.get("R_inf")), ("R_q", row.get("R_q"))):
            if key in build.oracles and computed is not None:
                if key == "R_q":
                    expected = build.oracles[key].at(p, q=run.q)
                else:
                    expected = build.oracles[key].at(p)
                errors.append(abs(computed - expected) / max(1.0, abs(expected)))
                row[f"{key}_oracle"] = expected
        row["error"] = max(errors) if errors else None
        row["flagged"] = bool(errors) and max(errors) > tol
        return row

    rows = _ordered_map(one, points, run.workers)
    columns = names + ["R"]
    if weighted is not None:
        columns += ["R_inf"] + (["R_q"] if run.q is not None else [])
    columns += [k for k in (f"{r_key}_oracle", "R_inf_oracle", "R_q_oracle") if any(k in r for r in rows)]
    columns += ["error", "flagged"]
    flagged = any(r["flagged"] for r in rows)
    emit(rows, columns, run.output_format, stream, title=f"curvature {build.id}",
         subtitle=f"{len(rows)} points, tolerance {tol:g}", status="fail" if flagged else "pass", out=run.out)
    logger.info("[Curvature] %s: %d points, %s", build.id, len(rows), "flagged" if flagged else "ok")
    return EXIT_RESIDUAL if flagged else EXIT_OK


# ---------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------

def _base_directions(build: CatalogBuild, b) -> List[np.ndarray]:
    return list(orthonormal_frame(build.obj.base_metric()(b)).T)


def _run_identity(identity: str, build: CatalogBuild, run: RunConfig) -> IdentityReport:
    s, cfg, grid, workers = build.obj, run.diff, run.grid, run.workers
    samples = _points(run, build)
    base_samples = build.base_samples(run.base_points, run.seed)

    if identity == IdentityId.ONEILL.value:
        return verify_oneill_identity(s, samples, cfg, run.tolerance_or(settings.TOL_NESTED_IDENTITY), workers)
    if identity == IdentityId.LAPLACIAN_SPLIT.value:
        tol = run.tolerance_or(settings.TOL_IDENTITY)
        return IdentityReport.combine([verify_laplacian_split(s, f, samples, cfg, tol, workers)
                                       for f in build.test_functions])
    if identity == IdentityId.BASE_DERIVATIVES.value:
        tol = run.tolerance_or(settings.TOL_NESTED_IDENTITY)
        return IdentityReport.combine([verify_base_derivative_identities(s, b, None, grid, cfg, tol,
                                                                         workers=workers)
                                       for b in base_samples])
    if identity == IdentityId.MEASURE_HYPOTHESIS.value:
        return measure_hypothesis_report(s, base_samples, grid, cfg, settings.TOL_MEASURE, workers)
    if identity == IdentityId.MAIN_EQUALITY.value:
        tol = run.tolerance_or(settings.TOL_IDENTITY)
        return IdentityReport.combine([verify_main_equality(s, b, grid, cfg, tol, workers=workers)
                                       for b in base_samples])
    if identity == IdentityId.THEOREM2_2.value:
        return verify_theorem2_2(s, base_samples, grid, cfg, run.tolerance_or(settings.TOL_IDENTITY),
                                 workers=workers)
    if identity == IdentityId.LIE_FIBER_VOLUME.value:
        tol = run.tolerance_or(settings.TOL_NESTED_IDENTITY)
        return IdentityReport.combine([
            verify_lie_derivative_fiber_volume(s, b, d, grid, cfg, tolerance=tol)
            for b in base_samples for d in _base_directions(build, b)
        ])
    raise ConfigError(f"unknown identity {identity!r}")


def cmd_verify(run: RunConfig, stream: TextIO) -> int:
    build = run.build()
    if build.kind != "submersion":
        raise ConfigError(f"verify needs a submersion example, {build.id} is a {build.kind}")
    requested = IDENTITY_ORDER if run.identity == "all" else [run.identity]

    rows, objects = [], []
    residual_failure = hypothesis_unmet = False
    for identity in requested:
        if identity == IdentityId.THEOREM2_2.value and run.identity == "all" and not build.obj.unit_density:
            logger.info("[Verify] %s: skipping %s, density is not identically one", build.id, identity)
            continue
        logger.info("[Verify] %s: %s", build.id, identity)
        try:
            report = _run_identity(identity, build, run)
        except HypothesisUnmetError as exc:
            hypothesis_unmet = True
            logger.warning("[Verify] %s: %s", identity, exc)
            row = {"identity": identity, "passed": False, "max_abs_residual": None, "tolerance": None,
                   "hypothesis_met": False, "points": 0, "notes": str(exc), "outcome": "hypothesis-unmet"}
            rows.append(row)
            objects.append(dict(row, spread=exc.spread))
            continue

        expected_failure = identity in build.expected_failures
        if expected_failure:
            outcome = "expected-failure" if not report.passed else "unexpected-pass"
            ok = not report.passed
        else:
            outcome = "pass" if report.passed else "fail"
            ok = report.passed
        residual_failure |= not ok
        row = dict(identity_row(report), outcome=outcome)
        rows.append(row)
        objects.append(dict(report.to_dict(), outcome=outcome, example=build.id))
        logger.info("[Verify] %s: %s max residual %.3e (tol %g)", identity, outcome,
                    report.max_abs_residual, report.tolerance)

    status = "fail" if residual_failure else ("hypothesis" if hypothesis_unmet else "pass")
    emit(rows, IDENTITY_COLUMNS + ["outcome"], run.output_format, stream, json_objects=objects,
         title=f"verify {build.id}", subtitle=", ".join(f"{k}={v}" for k, v in sorted(build.params.items())),
         status=status, out=run.out)
    if residual_failure:
        return EXIT_RESIDUAL
    return EXIT_HYPOTHESIS if hypothesis_unmet else EXIT_OK


# ---------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------

def sweep_table(family: str, values: Sequence[float], run: RunConfig) -> SweepTable:
    entry = catalog.get_entry(family)
    if entry.kind != "family":
        raise ConfigError(f"{family} is not a family; choose from {', '.join(catalog.families())}")
    parameter = entry.family_parameter
    tol = run.tolerance_or(settings.TOL_IDENTITY)

    rows = []
    for value in values:
        build = catalog.build(family, **{**run.params, parameter: value})
        s = build.obj
        base_samples = build.base_samples(run.base_points, run.seed)
        report = verify_theorem2_2(s, base_samples, run.grid, run.diff, tol, workers=run.workers)
        base_metric = s.base_metric()
        r_b = [curvature_at(base_metric, b, run.diff).scalar for b in base_samples]
        r_m_min = float(min(report.details["R_M_min"]))
        r_b_q_min = float(min(report.details["rhs"]))
        row = SweepRow(
            param=float(value),
            R_M_min=r_m_min,
            R_M_max=float(max(report.details["R_M_max"])),
            R_B_min=float(min(r_b)),
            R_B_q_min=r_b_q_min,
            margin=r_b_q_min - r_m_min,
            max_residual=float(report.max_abs_residual),
            tolerance=tol,
            flagged=bool(not report.passed or r_m_min > r_b_q_min + tol),
        )
        logger.info("[Sweep] %s %s=%g: R_M min %.8g, R_B_q min %.8g", family, parameter, value,
                    row.R_M_min, row.R_B_q_min)
        rows.append(row)
    return SweepTable.sorted(family, parameter, rows)


def cmd_sweep(run: RunConfig, stream: TextIO) -> int:
    family = run.family or run.example
    if family is None:
        raise ConfigError("sweep needs --family")
    params = dict(run.params)
    parameter = catalog.get_entry(family).family_parameter
    params.pop(parameter or "", None)
    values = run.values or DEFAULT_SWEEP_VALUES.get(family, [])
    if not values:
        raise ConfigError(f"no --values given for {family}")
    table = sweep_table(family, values, replace(run, params=params))
    emit(table.as_dicts(), SweepTable.fieldnames(), run.output_format, stream,
         title=f"sweep {family}", subtitle=f"{parameter} in {values}",
         status="fail" if table.flagged else "pass", out=run.out)
    return EXIT_RESIDUAL if table.flagged else EXIT_OK


COMMANDS = {"curvature": cmd_curvature, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv: Optional[Sequence[str]] = None, stream: Optional[TextIO] = None) -> int:
    stream = stream or sys.stdout
    try:
        args, extras = build_parser().parse_known_args(argv)
        configure_logging(args.verbose)
        run = run_config_from_args(args, extras)
        return COMMANDS[args.command](run, stream)
    except HypothesisUnmetError as exc:
        logger.error("[CLI] %s", exc)
        return EXIT_HYPOTHESIS
    except GeometryError as exc:
        logger.error("[CLI] %s", exc)
        return EXIT_CONFIG
