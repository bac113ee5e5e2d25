"""
Run configuration: environment defaults, INI config files and user examples.

Precedence is settings (environment) < config file < command-line flags.

A user example lives in the [example] section:

    [example]
    kind     = submersion
    base_coords   = u
    base_bounds   = 0.1:1.4
    base_periodic = no
    fiber_coords  = y
    fiber_bounds  = 0:2*pi
    fiber_periodic = yes
    g_base     = 1
    g_fiber    = (1 + 0.25*sin(u)*cos(y))^2
    connection = 0
    oracle_R_F = 0

Matrices are rows separated by ';' with entries separated by ','.
"""

from __future__ import annotations

import configparser
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import catalog, settings
from .catalog import CatalogBuild, Oracle, standard_test_functions
from .diffgeo_core import DEFAULT_CONFIG, ChartDomain, DensityField, DifferentiationConfig, MetricField
from .errors import ConfigError, ExpressionError, GeometryError
from .expressions import compile_expression
from .submersion import KKSubmersion
from .weighted_geometry import WeightedManifold

logger = logging.getLogger(__name__)

FORMATS = ("human", "json", "csv", "pdf")
SAMPLE_MARGIN = 0.1


@dataclass
class RunConfig:
    example: Optional[str] = None
    params: Dict[str, str] = field(default_factory=dict)
    user_example: Optional[CatalogBuild] = None
    diff: DifferentiationConfig = DEFAULT_CONFIG
    grid: int = settings.DEFAULT_GRID
    tolerance: Optional[float] = None
    points: int = settings.DEFAULT_POINTS
    base_points: int = settings.DEFAULT_BASE_POINTS
    seed: int = settings.DEFAULT_SEED
    output_format: str = "human"
    out: Optional[Path] = None
    workers: int = settings.DEFAULT_WORKERS
    q: Optional[float] = None
    identity: str = "all"
    explicit_points: List[np.ndarray] = field(default_factory=list)
    family: Optional[str] = None
    values: List[float] = field(default_factory=list)

    def validate(self) -> "RunConfig":
        if self.output_format not in FORMATS:
            raise ConfigError(f"format must be one of {', '.join(FORMATS)}, got {self.output_format!r}")
        for label, value in (("points", self.points), ("base_points", self.base_points),
                             ("grid", self.grid), ("workers", self.workers)):
            if value < 1:
                raise ConfigError(f"{label} must be positive, got {value}")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tolerance}")
        return self

    def build(self) -> CatalogBuild:
        if self.user_example is not None and self.example is None:
            return self.user_example
        if self.example is None:
            raise ConfigError("no example given (use --example or an [example] section)")
        return catalog.build(self.example, **self.params)

    def tolerance_or(self, default: float) -> float:
        return default if self.tolerance is None else self.tolerance


# ---------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------

def _line_of(text: str, section: str, key: str) -> Optional[int]:
    current = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and line.split("=", 1)[0].split(":", 1)[0].strip().lower() == key.lower():
            return number
    return None


class _Section:
    """Typed access to one section with line-aware errors."""

    def __init__(self, parser: configparser.ConfigParser, text: str, name: str):
        self.parser = parser
        self.text = text
        self.name = name

    def has(self, key: str) -> bool:
        return self.parser.has_option(self.name, key)

    def raw(self, key: str, required: bool = False) -> Optional[str]:
        if not self.has(key):
            if required:
                raise ConfigError("missing required key", self.name, key)
            return None
        return self.parser.get(self.name, key).strip()

    def fail(self, key: str, message: str) -> ConfigError:
        return ConfigError(message, self.name, key, _line_of(self.text, self.name, key))

    def number(self, key: str, cast=float):
        value = self.raw(key)
        if value is None:
            return None
        try:
            return cast(value)
        except ValueError:
            raise self.fail(key, f"expected {cast.__name__}, got {value!r}") from None

    def keys(self) -> List[str]:
        return list(self.parser.options(self.name))


def _split_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _constant(text: str) -> float:
    return compile_expression(text, ())(())


def _chart(section: _Section, prefix: str) -> ChartDomain:
    coords_key, bounds_key, periodic_key = f"{prefix}coords", f"{prefix}bounds", f"{prefix}periodic"
    names = tuple(_split_list(section.raw(coords_key, required=True)))
    try:
        bounds = []
        for item in _split_list(section.raw(bounds_key, required=True)):
            lo, sep, hi = item.partition(":")
            if not sep:
                raise section.fail(bounds_key, f"bound {item!r} is not of the form lo:hi")
            bounds.append((_constant(lo), _constant(hi)))
    except ExpressionError as exc:
        raise section.fail(bounds_key, str(exc)) from None
    flags = _split_list(section.raw(periodic_key) or ",".join(["no"] * len(names)))
    periodic = []
    for flag in flags:
        if flag.lower() not in ("yes", "no", "true", "false", "1", "0"):
            raise section.fail(periodic_key, f"periodic flags are yes/no, got {flag!r}")
        periodic.append(flag.lower() in ("yes", "true", "1"))
    if not len(names) == len(bounds) == len(periodic):
        raise section.fail(coords_key, f"{len(names)} coordinates, {len(bounds)} bounds, {len(periodic)} flags")
    try:
        return ChartDomain(tuple(bounds), tuple(periodic), names)
    except GeometryError as exc:
        raise section.fail(bounds_key, str(exc)) from None


def _matrix(section: _Section, key: str, names: Sequence[str], shape: Tuple[int, int]):
    text = section.raw(key, required=True)
    try:
        rows = [[compile_expression(entry, names) for entry in _split_list(row)] for row in text.split(";")]
    except ExpressionError as exc:
        raise section.fail(key, str(exc)) from None
    if len(rows) != shape[0] or any(len(r) != shape[1] for r in rows):
        found = f"{len(rows)}x{max((len(r) for r in rows), default=0)}"
        raise section.fail(key, f"expected a {shape[0]}x{shape[1]} matrix, got {found}")

    def evaluate(values):
        return np.array([[entry(values) for entry in row] for row in rows], dtype=float)

    return evaluate


def _scalar(section: _Section, key: str, names: Sequence[str]):
    text = section.raw(key)
    if text is None:
        return None
    try:
        return compile_expression(text, names)
    except ExpressionError as exc:
        raise section.fail(key, str(exc)) from None


def _oracles(section: _Section) -> Dict[str, Oracle]:
    oracles = {}
    for key in section.keys():
        if key.startswith("oracle_"):
            name = key[len("oracle_"):]
            try:
                value = _constant(section.raw(key))
            except ExpressionError as exc:
                raise section.fail(key, str(exc)) from None
            oracles[name] = Oracle(name, value, "user config")
    return oracles


def build_user_example(section: _Section) -> CatalogBuild:
    kind = (section.raw("kind", required=True) or "").lower()
    oracles = _oracles(section)
    if kind in ("manifold", "weighted"):
        domain = _chart(section, "")
        dim = domain.dim
        metric_fn = _matrix(section, "metric", domain.names, (dim, dim))
        metric = MetricField(domain, metric_fn, name="user")
        region = domain.sub_box(SAMPLE_MARGIN)
        if kind == "manifold":
            return CatalogBuild("user", "manifold", metric, oracles, region)
        phi = _scalar(section, "phi", domain.names)
        if phi is None:
            raise section.fail("phi", "weighted examples need a phi expression")
        w = WeightedManifold(metric, DensityField(domain, phi, name="phi"))
        return CatalogBuild("user", "weighted", w, oracles, region)
    if kind == "submersion":
        base = _chart(section, "base_")
        fiber = _chart(section, "fiber_")
        if not fiber.fully_periodic:
            raise section.fail("fiber_periodic", "every fiber axis must be periodic")
        n, q = base.dim, fiber.dim
        total_names = base.names + fiber.names
        g_base = _matrix(section, "g_base", base.names, (n, n))
        g_fiber = _matrix(section, "g_fiber", total_names, (q, q))
        connection = _matrix(section, "connection", total_names, (q, n))
        phi_expr = _scalar(section, "phi_M", total_names)
        joined = lambda x, y: np.concatenate([x, y])
        s = KKSubmersion(
            base, fiber, g_base,
            lambda x, y: g_fiber(joined(x, y)),
            lambda x, y: connection(joined(x, y)),
            None if phi_expr is None else (lambda x, y: phi_expr(joined(x, y))),
            name="user",
        )
        region = base.sub_box(SAMPLE_MARGIN).product(fiber)
        return CatalogBuild("user", "submersion", s, oracles, region, {}, frozenset(),
                            standard_test_functions(s.total))
    raise section.fail("kind", f"kind must be manifold, weighted or submersion, got {kind!r}")


# ---------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------

def _read(text: str, source: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first [section] header", line=exc.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(exc.message.split(":", 1)[-1].strip(), line=exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("cannot parse line", line=line) from None
    unknown = sorted(set(parser.sections()) - {"example", "differentiation", "quadrature", "output"})
    if unknown:
        raise ConfigError(f"unknown section(s) {', '.join(unknown)}",
                          line=_line_of_section(text, unknown[0]))
    return parser


def _line_of_section(text: str, name: str) -> Optional[int]:
    for number, raw in enumerate(text.splitlines(), start=1):
        if raw.strip() == f"[{name}]":
            return number
    return None


def apply_config_text(run: RunConfig, text: str, source: str = "<config>") -> RunConfig:
    parser = _read(text, source)
    updates = {}

    if parser.has_section("example"):
        section = _Section(parser, text, "example")
        if section.has("kind"):
            updates["user_example"] = build_user_example(section)
        elif section.has("id"):
            updates["example"] = section.raw("id")
            updates["params"] = {k: section.raw(k) for k in section.keys() if k != "id"}
        else:
            raise ConfigError("needs either id or kind", "example")

    if parser.has_section("differentiation"):
        section = _Section(parser, text, "differentiation")
        step = section.number("step")
        nested = section.number("nested_step")
        order = section.number("stencil_order", int)
        try:
            updates["diff"] = DifferentiationConfig(
                step if step is not None else run.diff.step,
                order if order is not None else run.diff.stencil_order,
                nested if nested is not None else run.diff.nested_step,
            )
        except GeometryError as exc:
            raise ConfigError(str(exc), "differentiation") from None

    if parser.has_section("quadrature"):
        grid = _Section(parser, text, "quadrature").number("grid", int)
        if grid is not None:
            updates["grid"] = grid

    if parser.has_section("output"):
        section = _Section(parser, text, "output")
        fmt = section.raw("format")
        if fmt is not None:
            if fmt not in FORMATS:
                raise section.fail("format", f"format must be one of {', '.join(FORMATS)}")
            updates["output_format"] = fmt
        path = section.raw("path")
        if path:
            updates["out"] = Path(path)

    logger.debug("[Config] %s sets %s", source, sorted(updates))
    return replace(run, **updates)


def load_config_file(run: RunConfig, path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return apply_config_text(run, text, str(path))


def parse_point(text: str) -> np.ndarray:
    try:
        return np.array([_constant(item) for item in text.split(",")], dtype=float)
    except ExpressionError as exc:
        raise ConfigError(f"bad point {text!r}: {exc}") from None


def parse_params(pairs: Sequence[str]) -> Dict[str, str]:
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--param expects key=value, got {pair!r}")
        params[key.strip()] = value.strip()
    return params
