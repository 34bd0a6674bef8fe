"""Wave functions from the matching nullspace, PT normalization and biorthogonal overlaps."""

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .model import PtWellError, RootRecord, WellSpec
from .secular import assemble, region_columns, region_reference, unknown_labels

ArrayLike = Union[float, np.ndarray]

QUADRATURE_NODES = 64
# Smallest pivot relative to the largest one that still counts as singular.
SINGULAR_PIVOT = 1e-7
# Matrix rows below this fraction of the largest entry are zeroed before row scaling.
NEGLIGIBLE_ROW = 1e-8
# Below this fraction of the coefficient scale mu is treated as zero.
MU_FLOOR = 1e-8


class NotARoot(PtWellError):
    """The matching matrix at kappa has no small pivot."""


class SpecMismatch(PtWellError):
    """Overlap of eigenfunctions belonging to different wells."""


class OutOfDomain(PtWellError):
    """Evaluation point outside [-1, 1]."""


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    """Real unknowns of the ansatz in the column order of the matching matrix."""

    values: np.ndarray
    count: int

    @property
    def mu(self) -> float:
        return float(self.values[0])

    @property
    def nu(self) -> float:
        return float(self.values[1])

    def region(self, region: int) -> Dict[str, float]:
        """Named coefficients of one region (0 = centre piece)."""
        columns = region_columns(self.count, region)
        return {name: float(self.values[col]) for name, col in columns.items()}

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(unknown_labels(self.count), (float(v) for v in self.values)))


@dataclass(frozen=True, eq=False)
class Eigenfunction:
    """PT-symmetric bound state psi(x) = psi*(-x) at a real root kappa."""

    kappa: float
    spec: WellSpec
    coefficients: CoefficientVector
    rho: float = float("nan")
    degenerate: bool = False
    level: int = 0


def _full_pivot_elimination(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gaussian elimination with full pivoting, P A Q = L U.

    Returns:
        (U, column permutation q, |pivots|)
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    q = np.arange(n)
    for k in range(n - 1):
        block = np.abs(a[k:, k:])
        row, col = np.unravel_index(int(np.argmax(block)), block.shape)
        row += k
        col += k
        a[[k, row], :] = a[[row, k], :]
        a[:, [k, col]] = a[:, [col, k]]
        q[[k, col]] = q[[col, k]]
        if a[k, k] == 0.0:
            break
        factors = a[k + 1 :, k] / a[k, k]
        a[k + 1 :, k:] -= np.outer(factors, a[k, k:])
    return np.triu(a), q, np.abs(np.diag(a))


def nullspace_coefficients(spec: WellSpec, kappa: float) -> Tuple[CoefficientVector, bool]:
    """
    Nontrivial solution of the matching system at a root.

    The last free unknown of the fully pivoted elimination is set to 1 and
    the rest follow by back substitution; the vector is then rescaled to
    mu = 1, or nu = 1 when mu vanishes.

    Args:
        spec: Well with at least one delta pair
        kappa: Verified real root

    Returns:
        (coefficients, degenerate) where degenerate marks a second small pivot

    Raises:
        NotARoot: The smallest pivot is not small against the largest
    """
    matrix = np.array(assemble(spec, float(kappa)).matrix, dtype=float)
    scales = np.max(np.abs(matrix), axis=1)
    # a row of round-off must stay negligible after equilibration
    vanishing = scales <= NEGLIGIBLE_ROW * scales.max()
    matrix[vanishing] = 0.0
    scales[vanishing] = 1.0
    upper, q, pivots = _full_pivot_elimination(matrix / scales[:, None])

    largest = float(pivots.max())
    if pivots[-1] > SINGULAR_PIVOT * largest:
        raise NotARoot(
            f"kappa={kappa!r} is not a root: smallest pivot {pivots[-1]:.3e} of {largest:.3e}",
            {"kappa": kappa},
        )
    degenerate = len(pivots) > 1 and bool(pivots[-2] <= SINGULAR_PIVOT * largest)

    n = upper.shape[0]
    permuted = np.zeros(n)
    permuted[-1] = 1.0
    if n > 1:
        permuted[:-1] = np.linalg.solve(upper[:-1, :-1], -upper[:-1, -1])
    values = np.empty(n)
    values[q] = permuted

    scale = np.max(np.abs(values))
    if abs(values[0]) > MU_FLOOR * scale:
        values = values / values[0]
    else:
        values = values / values[1]
        values[0] = 0.0
    return CoefficientVector(values, spec.count), degenerate


def _region_of(spec: WellSpec, distance: np.ndarray) -> np.ndarray:
    return np.searchsorted(np.asarray(spec.positions), distance, side="left")


def _piece(psi: Eigenfunction, region: int, x: ArrayLike, slope: bool) -> ArrayLike:
    """Formula of one right-half region at x, also outside its own interval."""
    spec, kappa = psi.spec, psi.kappa
    c = psi.coefficients.region(region)
    if region == 0:
        if slope:
            return kappa * (-c["mu"] * np.sin(kappa * x) + 1j * c["nu"] * np.cos(kappa * x))
        return c["mu"] * np.cos(kappa * x) + 1j * c["nu"] * np.sin(kappa * x)
    arg = kappa * (region_reference(spec, region) - x)
    amp_sin = c["alpha"] + 1j * c["beta"]
    amp_cos = c.get("gamma", 0.0) + 1j * c.get("delta", 0.0)
    if slope:
        return kappa * (-amp_sin * np.cos(arg) + amp_cos * np.sin(arg))
    return amp_sin * np.sin(arg) + amp_cos * np.cos(arg)


def _right_pieces(psi: Eigenfunction, x: np.ndarray, slope: bool) -> np.ndarray:
    """psi (or psi') on 0 <= x <= 1."""
    regions = _region_of(psi.spec, x)
    out = np.zeros(x.shape, dtype=complex)
    for region in np.unique(regions):
        mask = regions == region
        out[mask] = _piece(psi, int(region), x[mask], slope)
    return out


def _sample(psi: Eigenfunction, x: ArrayLike, slope: bool) -> Union[complex, np.ndarray]:
    points = np.asarray(x, dtype=float)
    if np.any(np.abs(points) > 1.0):
        raise OutOfDomain(f"x outside [-1, 1]: {points[np.abs(points) > 1.0][:3].tolist()}")
    flat = points.reshape(-1)
    # Left pieces carry the conjugate coefficients: psi(-x) = conj(psi(x)),
    # and psi'(-x) = -conj(psi'(x)).
    values = _right_pieces(psi, np.abs(flat), slope)
    left = flat < 0
    values[left] = np.conj(values[left])
    if slope:
        values[left] = -values[left]
    values = values.reshape(points.shape)
    return complex(values) if values.ndim == 0 else values


def evaluate(psi: Eigenfunction, x: ArrayLike) -> Union[complex, np.ndarray]:
    """
    psi(x) from the piecewise ansatz; scalar or array x in [-1, 1].

    Raises:
        OutOfDomain
    """
    return _sample(psi, x, slope=False)


def derivative(psi: Eigenfunction, x: ArrayLike) -> Union[complex, np.ndarray]:
    """psi'(x); at a kink the inner piece is used."""
    return _sample(psi, x, slope=True)


def matching_residuals(psi: Eigenfunction) -> Dict[str, np.ndarray]:
    """
    Residuals of every matching condition on both sides.

    At +a_l: psi continuous and psi'(a+) - psi'(a-) = i xi psi(a); at -a_l
    the left pieces (conjugate coefficients, mirrored argument) must satisfy
    the same with -i xi. Slope residuals are divided by kappa.

    Returns:
        {"right": 2L complex residuals, "left": 2L complex residuals},
        value and slope condition interleaved per delta
    """
    kappa = psi.kappa
    out = {"right": [], "left": []}
    for j, (a, xi) in enumerate(zip(psi.spec.positions, psi.spec.couplings), start=1):
        inner, outer = j - 1, j
        value_in = complex(_piece(psi, inner, a, False))
        value_out = complex(_piece(psi, outer, a, False))
        slope_in = complex(_piece(psi, inner, a, True))
        slope_out = complex(_piece(psi, outer, a, True))
        out["right"].append(value_out - value_in)
        out["right"].append((slope_out - slope_in - 1j * xi * value_in) / kappa)

        # mirrored pieces at -a: outer region lies left of -a
        left_value_in = np.conj(value_in)
        left_value_out = np.conj(value_out)
        left_slope_in = -np.conj(slope_in)
        left_slope_out = -np.conj(slope_out)
        out["left"].append(left_value_in - left_value_out)
        out["left"].append((left_slope_in - left_slope_out + 1j * xi * left_value_in) / kappa)
    return {side: np.array(values, dtype=complex) for side, values in out.items()}


@lru_cache(maxsize=8)
def _reference_rule(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(nodes)


def segment_quadrature(
    spec: WellSpec, nodes: int = QUADRATURE_NODES
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre points and weights on each segment between -1, +-a_l and 1.

    Returns:
        (points, weights) over the whole well, ascending in x
    """
    ref_x, ref_w = _reference_rule(nodes)
    edges = spec.segment_edges()
    points, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        points.append(lo + half * (ref_x + 1.0))
        weights.append(half * ref_w)
    return np.concatenate(points), np.concatenate(weights)


def _same_spec(first: Eigenfunction, second: Eigenfunction) -> None:
    if first.spec != second.spec:
        raise SpecMismatch("eigenfunctions belong to different wells")


def bilinear_overlap(psi_m: Eigenfunction, psi_n: Eigenfunction) -> complex:
    """Unconjugated integral of psi_m psi_n over (-1, 1); real up to round-off."""
    _same_spec(psi_m, psi_n)
    points, weights = segment_quadrature(psi_m.spec)
    return complex(np.sum(weights * evaluate(psi_m, points) * evaluate(psi_n, points)))


def overlap_rho(psi_m: Eigenfunction, psi_n: Eigenfunction) -> float:
    """
    Real part of the bilinear overlap; rho_n for m = n.

    With psi(0) = 1 and psi(x) = psi*(-x) the odd bare-well states are
    i sin, so at zero coupling rho_n = (-1)^(n+1) rather than +1. The sign
    is kept; only |rho_n| = 1 there.

    Raises:
        SpecMismatch
    """
    return bilinear_overlap(psi_m, psi_n).real


def left_pairing(psi_n: Eigenfunction, psi_m: Eigenfunction) -> complex:
    """Conjugated pairing of the left state L_n(x) = psi_n(-x) with psi_m."""
    _same_spec(psi_n, psi_m)
    points, weights = segment_quadrature(psi_n.spec)
    left = evaluate(psi_n, -points)
    return complex(np.sum(weights * np.conj(left) * evaluate(psi_m, points)))


def overlap_matrix(functions: Sequence[Eigenfunction]) -> np.ndarray:
    """Bilinear overlaps of all pairs, row m and column n."""
    if not functions:
        return np.zeros((0, 0), dtype=complex)
    for other in functions[1:]:
        _same_spec(functions[0], other)
    points, weights = segment_quadrature(functions[0].spec)
    samples = np.array([evaluate(psi, points) for psi in functions])
    return (samples * weights) @ samples.T


def eigenfunction(spec: WellSpec, kappa: float, level: int = 0) -> Eigenfunction:
    """
    Normalized eigenfunction at a real root with its overlap rho.

    The bare well (no deltas) is handled analytically: cos(kappa x) for even
    and i sin(kappa x) for odd states.

    Raises:
        NotARoot
    """
    if spec.is_pure:
        level = level or int(round(2 * kappa / np.pi))
        if abs(np.cos(kappa)) > SINGULAR_PIVOT and abs(np.sin(kappa)) > SINGULAR_PIVOT:
            raise NotARoot(f"kappa={kappa!r} is not a square-well level", {"kappa": kappa})
        even = abs(np.cos(kappa)) <= SINGULAR_PIVOT
        values = np.array([1.0, 0.0]) if even else np.array([0.0, 1.0])
        psi = Eigenfunction(float(kappa), spec, CoefficientVector(values, 0), level=level)
    else:
        coefficients, degenerate = nullspace_coefficients(spec, kappa)
        psi = Eigenfunction(float(kappa), spec, coefficients, degenerate=degenerate, level=level)
    return replace(psi, rho=overlap_rho(psi, psi))


def eigenfunctions(spec: WellSpec, roots: Sequence[RootRecord]) -> List[Eigenfunction]:
    return [eigenfunction(spec, root.kappa, root.index) for root in roots]
