"""Exception hierarchy shared by the geometry engine, the catalog and the CLI."""

from __future__ import annotations

from typing import Optional, Sequence


def _fmt_point(point: Sequence[float]) -> str:
    return "(" + ", ".join(f"{float(c):.6g}" for c in point) + ")"


class GeometryError(Exception):
    """Base class for every error raised by submersion_curvature."""


class DegenerateMetricError(GeometryError):
    def __init__(self, point: Sequence[float], what: str = "metric"):
        self.point = tuple(float(c) for c in point)
        super().__init__(f"{what} is not positive definite at {_fmt_point(point)}")


class AsymmetricMetricError(GeometryError):
    def __init__(self, point: Sequence[float], asymmetry: float):
        self.point = tuple(float(c) for c in point)
        self.asymmetry = asymmetry
        super().__init__(
            f"metric matrix is not symmetric at {_fmt_point(point)} "
            f"(max |g - g^T| = {asymmetry:.3e})"
        )


class BoundaryError(GeometryError):
    def __init__(self, point: Sequence[float], axis: int, reach: float):
        self.point = tuple(float(c) for c in point)
        self.axis = axis
        super().__init__(
            f"point {_fmt_point(point)} lies within the stencil reach {reach:.3e} "
            f"of the boundary on non-periodic axis {axis}"
        )


class DensityError(GeometryError):
    def __init__(self, point: Sequence[float], value: float):
        self.point = tuple(float(c) for c in point)
        self.value = float(value)
        super().__init__(f"density must be positive, got {float(value):.6g} at {_fmt_point(point)}")


class ParameterError(GeometryError, ValueError):
    pass


class UnsupportedDomainError(GeometryError):
    pass


class PreconditionError(GeometryError):
    pass


class HypothesisUnmetError(GeometryError):
    """Fiber transport does not preserve the weighted fiber measure at a base point."""

    def __init__(self, message: str, spread: Optional[float] = None):
        self.spread = spread
        super().__init__(message)


class StepSizeError(GeometryError):
    pass


class ConsistencyError(GeometryError):
    pass


class CatalogError(GeometryError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class ExpressionError(GeometryError, ValueError):
    def __init__(self, message: str, text: str = "", index: Optional[int] = None):
        self.text = text
        self.index = index
        where = f" at index {index}" if index is not None else ""
        shown = f" in {text!r}" if text else ""
        super().__init__(f"{message}{where}{shown}")


class ConfigError(GeometryError):
    def __init__(self, message: str, section: Optional[str] = None,
                 key: Optional[str] = None, line: Optional[int] = None):
        self.section = section
        self.key = key
        self.line = line
        prefix = ""
        if section is not None:
            prefix = f"[{section}]" + (f" {key}" if key else "") + ": "
        if line is not None:
            prefix = f"line {line}: " + prefix
        super().__init__(prefix + message)
