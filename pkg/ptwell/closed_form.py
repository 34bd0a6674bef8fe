"""Explicit secular determinants and the reduced eigenvalue conditions at rational a."""

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .model import PtWellError, WellSpec

# Scan step used when listing the roots of one reduced condition.
_ROOT_SCAN_STEP = math.pi / 200


class BackendUnsupported(PtWellError):
    """No closed-form determinant exists for this number of deltas."""

    exit_code = 3


class PoleAtKappa(PtWellError):
    """A reduced condition degenerates at the requested kappa."""


class RationalPosition(Enum):
    """Delta positions for which the L = 1 determinant factorizes."""

    HALF = "1/2"
    THIRD = "1/3"
    TWO_THIRDS = "2/3"
    QUARTER = "1/4"

    @property
    def position(self) -> float:
        return float(Fraction(self.value))

    @classmethod
    def from_position(cls, a: float, tol: float = 1e-12) -> Optional["RationalPosition"]:
        for tag in cls:
            if abs(tag.position - a) <= tol:
                return tag
        return None


class ConditionKind(Enum):
    EXACT_ROOTS = "ExactRoots"
    TRANSCENDENTAL = "Transcendental"
    QUADRATIC_IN_X = "QuadraticInX"


# Spacing of the xi-independent roots of each factorization.
EXACT_ROOT_SPACING = {
    RationalPosition.HALF: math.pi,
    RationalPosition.THIRD: 1.5 * math.pi,
    RationalPosition.TWO_THIRDS: 1.5 * math.pi,
    RationalPosition.QUARTER: 2.0 * math.pi,
}


def _single_term(kappa, a, xi):
    return -0.5 * xi**2 / kappa**2 * np.sin(2 * kappa * a) * np.sin(kappa * (1 - a)) ** 2


def det_L1(kappa, a: float, xi: float):
    """
    Secular determinant of a single delta pair at +-a.

    D = -1/2 { sin 2k + (xi^2/k^2) sin 2ka sin^2[k(1-a)] }

    Works element-wise on numpy arrays and on complex kappa.
    """
    return -0.5 * np.sin(2 * kappa) + _single_term(kappa, a, xi)


def _pair_term(kappa, a: float, b: float, xi1: float, xi2: float, printed: bool):
    g1g2 = xi1 * xi2 / kappa**2
    inner = np.sin(kappa * (b - a)) ** 2
    if printed:
        quartic = g1g2**2 * inner
    else:
        quartic = 0.5 * g1g2**2 * inner * np.sin(2 * kappa * a)
    return -(g1g2 * np.sin(2 * kappa * a) + quartic) * np.sin(kappa * (1 - b)) ** 2


def det_L2(kappa, a: float, b: float, xi1: float, xi2: float):
    """
    Secular determinant of two delta pairs at +-a and +-b (a < b).

    Sum of the pure-well term, one single-delta term per coupling and the
    cross term -{(xi1 xi2/k^2) sin 2ka + 1/2 (xi1^2 xi2^2/k^4) sin 2ka
    sin^2[k(b-a)]} sin^2[k(1-b)]. The quartic piece vanishes with sin 2ka,
    so a -> 0 removes the inner pair and a = b merges the couplings.
    """
    total = -0.5 * np.sin(2 * kappa) + _single_term(kappa, a, xi1)
    total = total + _single_term(kappa, b, xi2)
    return total + _pair_term(kappa, a, b, xi1, xi2, printed=False)


def det_L2_printed(kappa, a: float, b: float, xi1: float, xi2: float):
    """det_L2 with the quartic cross term lacking the sin 2ka factor and the 1/2."""
    total = -0.5 * np.sin(2 * kappa) + _single_term(kappa, a, xi1)
    total = total + _single_term(kappa, b, xi2)
    return total + _pair_term(kappa, a, b, xi1, xi2, printed=True)


def closed_form_det(spec: WellSpec, kappa):
    """
    Closed-form determinant of a spec with at most two delta pairs.

    Raises:
        BackendUnsupported: For L > 2
    """
    if spec.count == 0:
        return -0.5 * np.sin(2 * kappa)
    if spec.count == 1:
        return det_L1(kappa, spec.positions[0], spec.couplings[0])
    if spec.count == 2:
        a, b = spec.positions
        xi1, xi2 = spec.couplings
        return det_L2(kappa, a, b, xi1, xi2)
    raise BackendUnsupported(
        f"no closed-form determinant for L={spec.count} (closed backend needs L <= 2)",
        {"count": spec.count},
    )


@dataclass(frozen=True)
class ReducedCondition:
    """One factor of the L = 1 determinant at a rational delta position."""

    kind: ConditionKind
    a_tag: RationalPosition
    xi: float
    description: str

    @property
    def spacing(self) -> Optional[float]:
        """Root spacing of an ExactRoots factor."""
        if self.kind is ConditionKind.EXACT_ROOTS:
            return EXACT_ROOT_SPACING[self.a_tag]
        return None

    def quadratic_coefficients(self, kappa: float):
        """Coefficients (A, B, C) of A X^2 + B X + C = 0 with X = cos(2k/3)."""
        if self.kind is not ConditionKind.QUADRATIC_IN_X:
            raise ValueError(f"{self.kind.value} condition has no quadratic form")
        xi2 = self.xi**2
        return 4 * kappa**2 - xi2, xi2, -(kappa**2)

    def value(self, kappa):
        """Signed, pole-free form of the condition; zero exactly at its roots."""
        xi2 = self.xi**2
        k2 = kappa**2
        if self.kind is ConditionKind.EXACT_ROOTS:
            return np.sin(math.pi * kappa / self.spacing)
        if self.kind is ConditionKind.QUADRATIC_IN_X:
            x = np.cos(2 * kappa / 3)
            big_a, big_b, big_c = self.quadratic_coefficients(kappa)
            return big_a * x**2 + big_b * x + big_c
        if self.a_tag is RationalPosition.HALF:
            return (xi2 - 4 * k2) * np.cos(kappa) - xi2
        if self.a_tag is RationalPosition.THIRD:
            return (xi2 - 4 * k2) * np.cos(4 * kappa / 3) - (xi2 + 2 * k2)
        # a = 1/4: det_L1 with the sin(k/2) factor of the exact roots divided out
        return 4 * k2 * np.cos(kappa / 2) * np.cos(kappa) + xi2 * np.sin(0.75 * kappa) ** 2

    def roots(self, kappa_max: float, kappa_min: float = 1e-3, xtol: float = 1e-13) -> List[float]:
        """
        Roots of this factor in (kappa_min, kappa_max], ascending.

        ExactRoots are listed in closed form; the other kinds are bracketed on
        a fine grid and refined with brentq. Touching zeros are picked up from
        grid minima of |value|.
        """
        if self.kind is ConditionKind.EXACT_ROOTS:
            count = int(math.floor(kappa_max / self.spacing + 1e-12))
            return [m * self.spacing for m in range(1, count + 1) if m * self.spacing > kappa_min]

        grid = np.arange(kappa_min, kappa_max + _ROOT_SCAN_STEP, _ROOT_SCAN_STEP)
        grid = grid[grid <= kappa_max]
        values = np.array([self.value(k) for k in grid])
        found: List[float] = []
        for i in range(len(grid) - 1):
            if values[i] == 0.0:
                found.append(float(grid[i]))
            elif values[i] * values[i + 1] < 0.0:
                found.append(brentq(self.value, grid[i], grid[i + 1], xtol=xtol))
        for i in range(1, len(grid) - 1):
            local = abs(values[i])
            if local < abs(values[i - 1]) and local < abs(values[i + 1]):
                if values[i - 1] * values[i] > 0.0 and values[i] * values[i + 1] > 0.0:
                    best = minimize_scalar(
                        lambda k: abs(self.value(k)),
                        bounds=(grid[i - 1], grid[i + 1]),
                        method="bounded",
                        options={"xatol": xtol},
                    )
                    if best.fun < 1e-9 * (1 + best.x**2):
                        found.append(float(best.x))
        return sorted(found)


def residual(condition: ReducedCondition, kappa: float) -> float:
    """
    Absolute value of the pole-free condition at kappa.

    Raises:
        PoleAtKappa: At kappa = 0, where every rearranged form vanishes identically
    """
    if kappa == 0:
        raise PoleAtKappa(
            f"{condition.kind.value} condition at a={condition.a_tag.value} is degenerate at kappa=0"
        )
    return float(abs(condition.value(kappa)))


def reduced_conditions(a_tag: RationalPosition, xi: float) -> List[ReducedCondition]:
    """
    Factorized eigenvalue conditions of the L = 1 well at a rational position.

    Args:
        a_tag: Delta position 1/2, 1/3, 2/3 or 1/4
        xi: Coupling

    Returns:
        The xi-dependent factor followed by the exact-root factor
    """
    if a_tag is RationalPosition.HALF:
        dependent = ReducedCondition(
            ConditionKind.TRANSCENDENTAL, a_tag, xi, "cos k = xi^2/(xi^2 - 4k^2)"
        )
        exact = "k_2m = m pi"
    elif a_tag is RationalPosition.THIRD:
        dependent = ReducedCondition(
            ConditionKind.TRANSCENDENTAL,
            a_tag,
            xi,
            "cos(4k/3) = (xi^2 + 2k^2)/(xi^2 - 4k^2)",
        )
        exact = "k_3m = 3 m pi/2"
    elif a_tag is RationalPosition.TWO_THIRDS:
        dependent = ReducedCondition(
            ConditionKind.QUADRATIC_IN_X,
            a_tag,
            xi,
            "(4k^2 - xi^2) X^2 + xi^2 X - k^2 = 0, X = cos(2k/3)",
        )
        exact = "k_3m = 3 m pi/2"
    else:
        dependent = ReducedCondition(
            ConditionKind.TRANSCENDENTAL,
            a_tag,
            xi,
            "det_L1(k, 1/4, xi) / sin(k/2) = 0",
        )
        exact = "k_4m = 2 m pi"
    return [dependent, ReducedCondition(ConditionKind.EXACT_ROOTS, a_tag, xi, exact)]
