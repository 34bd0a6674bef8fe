"""Domain types for PT-symmetric square wells and the potential-spec file parser."""

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

# The well walls sit at -1 and +1; nothing else is accepted on a domain line.
WELL_DOMAIN = (-1.0, 1.0)

_NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


class PtWellError(Exception):
    """Base class for all errors raised by ptwell."""

    exit_code = 1

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.context = context or {}


class SpecError(PtWellError):
    """A potential-spec document could not be turned into a WellSpec."""

    exit_code = 2

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message, {"line": line_number})
        self.line_number = line_number


class MalformedLine(SpecError):
    """Unknown keyword or wrong number of tokens."""


class BadDomain(SpecError):
    """Domain directive other than ``domain -1 1``."""


class BadPosition(SpecError):
    """Delta position outside (0, 1) or not strictly increasing."""


class BadNumber(SpecError):
    """Token that is not a finite decimal real."""


class LevelTag(Enum):
    """Behaviour of a level under growing non-Hermiticity."""

    ROBUST = "Robust"
    FRAGILE = "Fragile"
    UNCLASSIFIED = "Unclassified"

    @property
    def letter(self) -> str:
        return self.value[0]


class TraceStatus(Enum):
    """State of one continuation sample."""

    REAL = "Real"
    MERGED = "Merged"
    COMPLEX = "Complex"


@dataclass(frozen=True)
class WellSpec:
    """
    Imaginary point interactions inside the well (-1, 1).

    Each entry (a, xi) stands for the pair i*xi*delta(x - a) - i*xi*delta(x + a).
    """

    positions: Tuple[float, ...] = ()
    couplings: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "positions", tuple(float(a) for a in self.positions))
        object.__setattr__(self, "couplings", tuple(float(x) for x in self.couplings))

    @property
    def count(self) -> int:
        return len(self.positions)

    @property
    def is_pure(self) -> bool:
        """True for the bare square well (no deltas at all)."""
        return self.count == 0

    @property
    def max_coupling(self) -> float:
        return max((abs(x) for x in self.couplings), default=0.0)

    def with_couplings(self, couplings: Sequence[float]) -> "WellSpec":
        return WellSpec(self.positions, tuple(couplings))

    def scaled(self, strength: float) -> "WellSpec":
        """
        Return the spec driven by a single sweep strength.

        Couplings keep their ratios and the largest one equals ``strength``.
        A spec whose couplings all vanish stays at zero coupling.

        Args:
            strength: Sweep strength xi

        Returns:
            New WellSpec with couplings strength * xi_l / max|xi_l|
        """
        peak = self.max_coupling
        if peak == 0.0:
            return self.with_couplings([0.0] * self.count)
        return self.with_couplings([strength * x / peak for x in self.couplings])

    def segment_edges(self) -> List[float]:
        """Breakpoints -1, -a_L, ..., -a_1, a_1, ..., a_L, 1 of the piecewise ansatz."""
        inner = list(self.positions)
        return [-1.0, *(-a for a in reversed(inner)), *inner, 1.0]


@dataclass(frozen=True)
class RootRecord:
    """One real bound-state root kappa_n of the secular determinant."""

    index: int
    kappa: float
    residual: float
    tag: LevelTag = LevelTag.UNCLASSIFIED

    @property
    def epsilon(self) -> float:
        """Squared energy eps_n = kappa_n**2."""
        return self.kappa * self.kappa


@dataclass(frozen=True)
class ExceptionalPoint:
    """Coalescence of two levels at a critical coupling."""

    xi_c: float
    kappa_c: float
    pair: Tuple[int, int]
    residuals: Tuple[float, float]


@dataclass(frozen=True)
class TraceSample:
    xi: float
    kappa: complex
    status: TraceStatus


@dataclass
class ContinuationTrace:
    """Path kappa_n(xi) of one level along a coupling grid.

    A trace holds one sample per grid strength. A level that merged below
    the first recorded strength also keeps its Merged sample in front, and
    then holds one sample more than the grid.
    """

    level: int
    samples: List[TraceSample] = field(default_factory=list)
    partner: Optional[int] = None
    exceptional_point: Optional[ExceptionalPoint] = None
    lost_at: Optional[float] = None

    @property
    def is_lost(self) -> bool:
        return self.lost_at is not None

    @property
    def merged(self) -> Optional[TraceSample]:
        for sample in self.samples:
            if sample.status is TraceStatus.MERGED:
                return sample
        return None

    @property
    def last(self) -> TraceSample:
        return self.samples[-1]

    def add(self, xi: float, kappa: complex, status: TraceStatus) -> None:
        self.samples.append(TraceSample(float(xi), complex(kappa), status))


def _parse_number(token: str, line_number: int) -> float:
    if not _NUMBER_RE.match(token):
        raise BadNumber(f"not a decimal real: {token!r}", line_number)
    value = float(token)
    if not math.isfinite(value):
        raise BadNumber(f"not a finite real: {token!r}", line_number)
    return value


def parse_well_spec(text: str) -> WellSpec:
    """
    Parse a potential-spec document.

    Grammar: '#' starts a comment, blank lines are ignored, an optional first
    directive ``domain -1 1`` and then ``delta <a> <xi>`` lines with strictly
    increasing positions.

    Args:
        text: Document contents

    Returns:
        WellSpec in input order

    Raises:
        MalformedLine, BadDomain, BadPosition, BadNumber
    """
    positions: List[float] = []
    couplings: List[float] = []
    seen_directive = False

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0]

        if keyword == "domain":
            if seen_directive:
                raise MalformedLine("domain must be the first directive", line_number)
            if len(tokens) != 3:
                raise MalformedLine("expected 'domain <left> <right>'", line_number)
            bounds = (_parse_number(tokens[1], line_number), _parse_number(tokens[2], line_number))
            if bounds != WELL_DOMAIN:
                raise BadDomain(f"well domain must be -1 1, got {tokens[1]} {tokens[2]}", line_number)
        elif keyword == "delta":
            if len(tokens) != 3:
                raise MalformedLine("expected 'delta <a> <xi>'", line_number)
            a = _parse_number(tokens[1], line_number)
            xi = _parse_number(tokens[2], line_number)
            if not 0.0 < a < 1.0:
                raise BadPosition(f"position {tokens[1]} outside (0, 1)", line_number)
            if positions and a <= positions[-1]:
                raise BadPosition(
                    f"position {tokens[1]} does not increase past {positions[-1]!r}", line_number
                )
            positions.append(a)
            couplings.append(xi)
        else:
            raise MalformedLine(f"unknown keyword {keyword!r}", line_number)
        seen_directive = True

    return WellSpec(tuple(positions), tuple(couplings))


def render_well_spec(spec: WellSpec) -> str:
    """Render a spec in the file format; parse_well_spec reads it back exactly."""
    lines = ["domain -1 1"]
    lines.extend(f"delta {a!r} {xi!r}" for a, xi in zip(spec.positions, spec.couplings))
    return "\n".join(lines) + "\n"


def validate(spec: WellSpec) -> List[str]:
    """
    Report every violated WellSpec invariant.

    Args:
        spec: Spec to check

    Returns:
        Human-readable violations; empty when the spec is valid
    """
    violations = []
    if len(spec.positions) != len(spec.couplings):
        violations.append(
            f"length mismatch: {len(spec.positions)} positions, {len(spec.couplings)} couplings"
        )
    for a in spec.positions:
        if not (math.isfinite(a) and 0.0 < a < 1.0):
            violations.append(f"position out of range: {a!r}")
    for left, right in zip(spec.positions, spec.positions[1:]):
        if not left < right:
            violations.append(f"non-strict ordering: {left!r} then {right!r}")
    for xi in spec.couplings:
        if not math.isfinite(xi):
            violations.append(f"coupling not finite: {xi!r}")
    return violations
