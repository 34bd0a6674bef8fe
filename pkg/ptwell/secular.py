"""Matching system of the piecewise-trigonometric ansatz and its secular determinant."""

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor

from .closed_form import BackendUnsupported, closed_form_det
from .model import PtWellError, WellSpec

Kappa = Union[float, complex]

# Entries stay O(1) up to this |kappa|; beyond it the scan grids become meaningless.
KAPPA_LIMIT = 1e3

CALIBRATION_KAPPA = 0.37
CALIBRATION_STEP = 0.1
CALIBRATION_TRIES = 20
CALIBRATION_FLOOR = 1e-8

BACKENDS = ("matrix", "closed")

# A linear form maps a column to (real-type, imaginary-type) coefficients:
# the complex condition reads sum_j (re_j + i im_j) u_j over real unknowns u_j.
LinearForm = Dict[int, Tuple[Kappa, Kappa]]


class ZeroKappa(PtWellError):
    """kappa = 0 collapses the sin/cos basis of the ansatz."""


class KappaOutOfRange(PtWellError):
    """|kappa| above the supported bound."""


class CalibrationFailed(PtWellError):
    """No reference kappa with a usable closed-form value was found."""


@dataclass(frozen=True)
class MatchingSystem:
    """The 4L x 4L real (or complex-continued) matching matrix at one kappa."""

    spec: WellSpec
    kappa: Kappa
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def unknown_labels(count: int) -> List[str]:
    """Column order mu, nu, (gamma_l, delta_l, alpha_l, beta_l) for l < L, alpha_L, beta_L."""
    if count == 0:
        return []
    labels = ["mu", "nu"]
    for shell in range(1, count):
        labels.extend(f"{name}_{shell}" for name in ("gamma", "delta", "alpha", "beta"))
    labels.extend([f"alpha_{count}", f"beta_{count}"])
    return labels


def region_columns(count: int, region: int) -> Dict[str, int]:
    """Columns of the unknowns of one region; region 0 is the centre piece."""
    if region == 0:
        return {"mu": 0, "nu": 1}
    if region < count:
        base = 2 + 4 * (region - 1)
        return {"gamma": base, "delta": base + 1, "alpha": base + 2, "beta": base + 3}
    return {"alpha": 4 * count - 2, "beta": 4 * count - 1}


def region_reference(spec: WellSpec, region: int) -> float:
    """Point r with psi = A sin k(r - x) + C cos k(r - x) on region l; 1 for the outermost."""
    return spec.positions[region] if region < spec.count else 1.0


def _value_form(spec: WellSpec, region: int, x: float, kappa: Kappa) -> LinearForm:
    cols = region_columns(spec.count, region)
    if region == 0:
        return {cols["mu"]: (np.cos(kappa * x), 0.0), cols["nu"]: (0.0, np.sin(kappa * x))}
    arg = kappa * (region_reference(spec, region) - x)
    s, c = np.sin(arg), np.cos(arg)
    form = {cols["alpha"]: (s, 0.0), cols["beta"]: (0.0, s)}
    if "gamma" in cols:
        form[cols["gamma"]] = (c, 0.0)
        form[cols["delta"]] = (0.0, c)
    return form


def _slope_form(spec: WellSpec, region: int, x: float, kappa: Kappa) -> LinearForm:
    """psi'(x) / kappa as a linear form."""
    cols = region_columns(spec.count, region)
    if region == 0:
        return {cols["mu"]: (-np.sin(kappa * x), 0.0), cols["nu"]: (0.0, np.cos(kappa * x))}
    arg = kappa * (region_reference(spec, region) - x)
    s, c = np.sin(arg), np.cos(arg)
    form = {cols["alpha"]: (-c, 0.0), cols["beta"]: (0.0, -c)}
    if "gamma" in cols:
        form[cols["gamma"]] = (s, 0.0)
        form[cols["delta"]] = (0.0, s)
    return form


def _combine(*terms: Tuple[Kappa, LinearForm]) -> LinearForm:
    out: LinearForm = {}
    for weight, form in terms:
        for col, (re, im) in form.items():
            old_re, old_im = out.get(col, (0.0, 0.0))
            out[col] = (old_re + weight * re, old_im + weight * im)
    return out


def _times_i(form: LinearForm, factor: Kappa) -> LinearForm:
    # (re + i im) * i f = -f im + i f re
    return {col: (-factor * im, factor * re) for col, (re, im) in form.items()}


def _check_kappa(kappa: Kappa) -> None:
    if kappa == 0:
        raise ZeroKappa("kappa = 0 makes the ansatz degenerate")
    if abs(kappa) > KAPPA_LIMIT:
        raise KappaOutOfRange(f"|kappa| = {abs(kappa):g} exceeds {KAPPA_LIMIT:g}")


def _as_kappa(kappa: Kappa) -> Kappa:
    value = complex(kappa)
    return value.real if value.imag == 0.0 else value


def assemble(spec: WellSpec, kappa: Kappa) -> MatchingSystem:
    """
    Build the matching matrix from the conditions at +a_1, ..., +a_L.

    At a_j the inner piece (centre for j = 1, region j-1 otherwise) meets
    region j. Each complex condition contributes its real-type and
    imaginary-type rows; derivative rows are divided by kappa, so the
    coupling enters as xi/kappa.

    Args:
        spec: Well to match
        kappa: Real bound-state momentum, or complex for continued roots

    Returns:
        MatchingSystem of size 4L

    Raises:
        ZeroKappa, KappaOutOfRange
    """
    _check_kappa(kappa)
    kappa = _as_kappa(kappa)
    size = 4 * spec.count
    dtype = complex if isinstance(kappa, complex) else float
    matrix = np.zeros((size, size), dtype=dtype)

    for j, (a, xi) in enumerate(zip(spec.positions, spec.couplings), start=1):
        inner, outer = j - 1, j
        value = _combine(
            (1.0, _value_form(spec, outer, a, kappa)),
            (-1.0, _value_form(spec, inner, a, kappa)),
        )
        slope = _combine(
            (1.0, _slope_form(spec, outer, a, kappa)),
            (-1.0, _slope_form(spec, inner, a, kappa)),
            (-1.0, _times_i(_value_form(spec, inner, a, kappa), xi / kappa)),
        )
        row = 4 * (j - 1)
        for offset, form in ((0, value), (2, slope)):
            for col, (re, im) in form.items():
                matrix[row + offset, col] = re
                matrix[row + offset + 1, col] = im

    return MatchingSystem(spec, kappa, matrix)


def determinant(system: MatchingSystem) -> complex:
    """
    Determinant by row-scaled LU with partial pivoting.

    Each row is divided by its largest entry before factorization and the
    scales are multiplied back; the permutation sign is tracked exactly.
    The empty system has determinant 1 and a singular one returns 0.
    """
    if system.size == 0:
        return complex(1.0)
    scales = np.max(np.abs(system.matrix), axis=1)
    if np.any(scales == 0.0):
        return complex(0.0)
    scaled = system.matrix / scales[:, None]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(scaled, check_finite=False)
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    sign = -1.0 if swaps % 2 else 1.0
    return complex(sign * np.prod(np.diag(lu)) * np.prod(scales))


@lru_cache(maxsize=512)
def calibration_constant(spec: WellSpec) -> complex:
    """
    Fixed ratio between the matrix determinant and the closed-form determinant.

    L = 1, 2 compare against det_L1/det_L2 of the same spec; larger L compare
    the zero-coupling system against -1/2 sin 2k, the ratio depending only on
    row and column conventions.

    Raises:
        CalibrationFailed: After CALIBRATION_TRIES references without a usable value
    """
    reference_spec = spec if spec.count <= 2 else spec.with_couplings([0.0] * spec.count)
    for attempt in range(CALIBRATION_TRIES):
        kappa = CALIBRATION_KAPPA + attempt * CALIBRATION_STEP
        closed = complex(closed_form_det(reference_spec, kappa))
        if abs(closed) < CALIBRATION_FLOOR:
            continue
        raw = determinant(assemble(reference_spec, kappa))
        if raw == 0:
            continue
        return raw / closed
    raise CalibrationFailed(
        f"no reference kappa with |closed form| >= {CALIBRATION_FLOOR:g} in {CALIBRATION_TRIES} tries",
        {"positions": spec.positions, "couplings": spec.couplings},
    )


def normalized_determinant(spec: WellSpec, kappa: Kappa) -> complex:
    """
    Matrix determinant divided by the spec's calibration constant.

    Agrees pointwise with det_L1/det_L2 for L = 1, 2; the bare well returns
    -1/2 sin 2k directly.

    Raises:
        ZeroKappa, KappaOutOfRange, CalibrationFailed
    """
    _check_kappa(kappa)
    if spec.count == 0:
        return complex(-0.5 * np.sin(2 * complex(kappa)))
    return determinant(assemble(spec, kappa)) / calibration_constant(spec)


def secular_function(spec: WellSpec, backend: str = "matrix") -> Callable[[Kappa], Kappa]:
    """
    kappa -> D(kappa) for one backend.

    Real kappa gives a float (round-off imaginary parts dropped); complex
    kappa gives a complex value.

    Raises:
        BackendUnsupported: Closed backend with L > 2, or an unknown backend name
    """
    if backend not in BACKENDS:
        raise BackendUnsupported(f"unknown backend {backend!r}; choose from {', '.join(BACKENDS)}")
    if backend == "closed" and spec.count > 2:
        raise BackendUnsupported(
            f"closed backend supports L <= 2, spec has L={spec.count}", {"count": spec.count}
        )

    def evaluate(kappa: Kappa) -> Kappa:
        if backend == "closed":
            _check_kappa(kappa)
            value = complex(closed_form_det(spec, _as_kappa(kappa)))
        else:
            value = normalized_determinant(spec, kappa)
        if isinstance(_as_kappa(kappa), complex):
            return value
        return value.real

    return evaluate


__all__ = [
    "BACKENDS",
    "BackendUnsupported",
    "CalibrationFailed",
    "KappaOutOfRange",
    "MatchingSystem",
    "ZeroKappa",
    "assemble",
    "calibration_constant",
    "determinant",
    "normalized_determinant",
    "region_columns",
    "region_reference",
    "secular_function",
    "unknown_labels",
]
