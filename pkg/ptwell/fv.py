"""
Feshbach-Villars two-component layer.

Kets are sampled on a quadrature grid as arrays of shape (2, P): the up
component first, the down component second. All pairings use the grid
weights, <u|v> = sum_c sum_p w_p conj(u[c, p]) v[c, p]. The Hamiltonian
acts only through its truncated spectral representation.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from rich.console import Console

from .model import PtWellError, RootRecord, WellSpec
from .spectral import eigenfunction, evaluate, segment_quadrature

# Console for diagnostics
console = Console(stderr=True, legacy_windows=False)

DEFAULT_TRUNCATION = 12
DEFAULT_GRID = 1024
MIN_GRID = 64
DEGENERATE_RHO = 1e-10
MU_TOLERANCE = 1e-9


class DegenerateRoot(PtWellError):
    """Too few levels left once roots with vanishing rho are excluded."""

    exit_code = 4


class NonPositiveWeight(PtWellError):
    """A metric weight is zero, negative or not finite."""


class WeightScheme(Enum):
    UNIT = "unit"
    INVERSE_MU_SQUARED = "inv-mu2"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class GridRepresentation:
    """Sample points in (-1, 1) with positive quadrature weights."""

    points: np.ndarray
    weights: np.ndarray
    kind: str

    @property
    def size(self) -> int:
        return len(self.points)

    def pair(self, left: np.ndarray, right: np.ndarray) -> complex:
        """Conjugated pairing of two (2, P) vectors."""
        return complex(np.sum(self.weights * np.conj(left) * right))

    def norm(self, vector: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(vector) ** 2)))


def uniform_grid(intervals: int = DEFAULT_GRID) -> GridRepresentation:
    """
    Interior points of a uniform grid of M intervals with trapezoid weights.

    Boundary samples are dropped since every ket vanishes at the walls, so
    all weights equal 2/M.
    """
    if intervals < MIN_GRID:
        raise ValueError(f"grid needs at least {MIN_GRID} intervals, got {intervals}")
    points = -1.0 + 2.0 * np.arange(1, intervals) / intervals
    return GridRepresentation(points, np.full(intervals - 1, 2.0 / intervals), "uniform")


def segmented_grid(spec: WellSpec, points: int = DEFAULT_GRID) -> GridRepresentation:
    """Gauss-Legendre nodes on every segment between the kinks, about `points` in total."""
    if points < MIN_GRID:
        raise ValueError(f"grid needs at least {MIN_GRID} points, got {points}")
    segments = len(spec.segment_edges()) - 1
    nodes, weights = segment_quadrature(spec, max(16, points // segments))
    return GridRepresentation(nodes, weights, "segmented")


@dataclass(frozen=True, eq=False)
class FVEigenpair:
    """
    Two-component eigenvector with energy tau * kappa.

    right = (tau kappa D; D) and left = (L; tau kappa L) with L(x) = D(-x);
    mu is the grid pairing <left|right>, mu_expected = 2 tau kappa rho.
    """

    level: int
    kappa: float
    sign: int
    right: np.ndarray
    left: np.ndarray
    mu: float
    rho: float
    grid: Optional[GridRepresentation] = field(repr=False, default=None)

    @property
    def energy(self) -> float:
        return self.sign * self.kappa

    @property
    def mu_expected(self) -> float:
        return 2.0 * self.sign * self.kappa * self.rho

    @property
    def mu_mismatch(self) -> float:
        return abs(self.mu - self.mu_expected)


def build_eigenpairs(
    spec: WellSpec,
    roots: Sequence[RootRecord],
    grid: Optional[GridRepresentation] = None,
    min_levels: int = 1,
    quiet: bool = False,
) -> List[FVEigenpair]:
    """
    Both sign partners of every root, sampled on the grid.

    Roots with |rho| below 1e-10 (exceptional-point vicinity) are skipped
    with a warning.

    Args:
        spec: Well the roots belong to
        roots: Real roots, in level order
        grid: Carrier grid; the segmented grid of the spec by default
        min_levels: Fewest levels that must survive the exclusion
        quiet: Suppress skip warnings

    Returns:
        Eigenpairs ordered by level, tau = +1 before tau = -1

    Raises:
        DegenerateRoot: Fewer than min_levels levels left
    """
    grid = grid or segmented_grid(spec)
    pairs: List[FVEigenpair] = []
    skipped = []
    for root in roots:
        psi = eigenfunction(spec, root.kappa, root.index)
        if abs(psi.rho) < DEGENERATE_RHO:
            skipped.append(root.index)
            if not quiet:
                console.print(
                    f"  [yellow]![/yellow] Skipped level {root.index}: "
                    f"rho={psi.rho:.3e} (near an exceptional point)"
                )
            continue
        down = evaluate(psi, grid.points)
        mirrored = evaluate(psi, -grid.points)
        for sign in (1, -1):
            scale = sign * psi.kappa
            right = np.vstack([scale * down, down])
            left = np.vstack([mirrored, scale * mirrored])
            mu = grid.pair(left, right).real
            pairs.append(
                FVEigenpair(root.index, psi.kappa, sign, right, left, mu, psi.rho, grid)
            )

    levels = len(pairs) // 2
    if levels < min_levels:
        raise DegenerateRoot(
            f"only {levels} nondegenerate levels left (need {min_levels})",
            {"skipped": skipped},
        )
    return pairs


def _stack(vectors: Sequence[np.ndarray]) -> np.ndarray:
    return np.stack(list(vectors)) if vectors else np.zeros((0, 2, 0))


@dataclass(frozen=True, eq=False)
class LowRankOperator:
    """
    Operator sum_k |out_k> c_k <in_k| on the grid.

    out_vectors and in_vectors have shape (K, 2, P); the bra pairing uses
    the grid weights.
    """

    out_vectors: np.ndarray
    in_vectors: np.ndarray
    coefficients: np.ndarray
    weights: np.ndarray

    def apply(self, vector: np.ndarray) -> np.ndarray:
        projections = np.einsum("kcp,cp->k", np.conj(self.in_vectors) * self.weights, vector)
        return np.einsum("k,kcp->cp", self.coefficients * projections, self.out_vectors)

    def adjoint(self) -> "LowRankOperator":
        """Adjoint with respect to the weighted pairing."""
        return LowRankOperator(
            self.in_vectors, self.out_vectors, np.conj(self.coefficients), self.weights
        )

    def scaled(self, factor: float) -> "LowRankOperator":
        return LowRankOperator(
            self.out_vectors, self.in_vectors, factor * self.coefficients, self.weights
        )

    def dense(self) -> np.ndarray:
        """Matrix on the flattened (2P) vector in plain coordinates."""
        rank = len(self.coefficients)
        out = self.out_vectors.reshape(rank, -1).T
        bra = (np.conj(self.in_vectors) * self.weights).reshape(rank, -1)
        return out @ (self.coefficients[:, None] * bra)

    def gram_norm(self) -> float:
        """Operator norm of a Hermitian positive operator with out == in."""
        if len(self.coefficients) == 0:
            return 0.0
        flat = self.in_vectors.reshape(len(self.coefficients), -1)
        gram = (np.conj(flat) * np.tile(self.weights, 2)) @ flat.T
        root = np.sqrt(np.abs(self.coefficients))
        return float(np.linalg.eigvalsh(root[:, None] * gram * root[None, :]).max())


def _operator(
    pairs: Sequence[FVEigenpair], out_side: str, in_side: str, coefficients: Sequence[float]
) -> LowRankOperator:
    if not pairs:
        raise ValueError("no eigenpairs to build an operator from")
    return LowRankOperator(
        _stack([getattr(p, out_side) for p in pairs]),
        _stack([getattr(p, in_side) for p in pairs]),
        np.asarray(coefficients, dtype=complex),
        pairs[0].grid.weights,
    )


def identity_resolution(pairs: Sequence[FVEigenpair]) -> LowRankOperator:
    """Truncated resolution of the identity sum |n> (1/mu_n) <<n|."""
    return _operator(pairs, "right", "left", [1.0 / p.mu for p in pairs])


def spectral_hamiltonian(pairs: Sequence[FVEigenpair]) -> LowRankOperator:
    """Truncated Hamiltonian sum |n> (tau kappa_n / mu_n) <<n|."""
    return _operator(pairs, "right", "left", [p.energy / p.mu for p in pairs])


def identity_defect(pairs: Sequence[FVEigenpair], trial: np.ndarray) -> float:
    """Relative error ||P_N trial - trial|| / ||trial|| of the truncated resolution."""
    grid = pairs[0].grid
    projected = identity_resolution(pairs).apply(trial)
    return grid.norm(projected - trial) / grid.norm(trial)


def square_well_trial(grid: GridRepresentation, mode: int = 1) -> np.ndarray:
    """Two-component vector with the square-well mode sin(n pi (x+1)/2) in both components."""
    values = np.sin(mode * np.pi * (grid.points + 1.0) / 2.0).astype(complex)
    return np.vstack([values, values])


def truncate(pairs: Sequence[FVEigenpair], levels: int) -> List[FVEigenpair]:
    """Eigenpairs of the lowest `levels` levels."""
    kept = sorted({p.level for p in pairs})[:levels]
    return [p for p in pairs if p.level in kept]


@dataclass(frozen=True)
class MetricSpec:
    """Positive weights omega_n^(+-) of the metric family, one per included level."""

    truncation: int
    weights_plus: tuple
    weights_minus: tuple
    scheme: WeightScheme = WeightScheme.INVERSE_MU_SQUARED

    def __post_init__(self) -> None:
        for name in ("weights_plus", "weights_minus"):
            values = tuple(float(w) for w in getattr(self, name))
            object.__setattr__(self, name, values)
            bad = [w for w in values if not (np.isfinite(w) and w > 0.0)]
            if bad:
                raise NonPositiveWeight(
                    f"metric weights must be positive, got {bad[0]!r} in {name}",
                    {"scheme": self.scheme.value},
                )
        if len(self.weights_plus) != len(self.weights_minus):
            raise ValueError("weights_plus and weights_minus differ in length")

    @classmethod
    def for_pairs(
        cls,
        pairs: Sequence[FVEigenpair],
        scheme: WeightScheme = WeightScheme.INVERSE_MU_SQUARED,
        truncation: Optional[int] = None,
    ) -> "MetricSpec":
        """Weights of a built-in scheme for the lowest `truncation` levels of pairs."""
        if scheme is WeightScheme.CUSTOM:
            raise ValueError("custom weights are given explicitly")
        included = truncate(pairs, truncation or len(pairs) // 2)
        plus = [p for p in included if p.sign > 0]
        minus = [p for p in included if p.sign < 0]
        if scheme is WeightScheme.UNIT:
            return cls(len(plus), (1.0,) * len(plus), (1.0,) * len(minus), scheme)
        return cls(
            len(plus),
            tuple(1.0 / p.mu**2 for p in plus),
            tuple(1.0 / p.mu**2 for p in minus),
            scheme,
        )

    def scaled(self, factor: float) -> "MetricSpec":
        return MetricSpec(
            self.truncation,
            tuple(factor * w for w in self.weights_plus),
            tuple(factor * w for w in self.weights_minus),
            WeightScheme.CUSTOM,
        )


@dataclass(frozen=True, eq=False)
class Metric:
    """Theta built from left vectors and its inverse from right vectors, on the included pairs."""

    theta: LowRankOperator
    theta_inverse: LowRankOperator
    pairs: List[FVEigenpair]
    spec: MetricSpec
    norm: float = field(default=0.0)


def build_metric(pairs: Sequence[FVEigenpair], mspec: MetricSpec) -> Metric:
    """
    Theta = sum |n>> omega_n <<n| and Theta^-1 = sum |n> 1/(omega_n |mu_n|^2) <n|.

    Theta^-1 Theta is the identity on the span of the right vectors and
    Theta Theta^-1 on the span of the left vectors.

    Raises:
        NonPositiveWeight: Through MetricSpec
        ValueError: Fewer included levels than weights
    """
    included = truncate(pairs, mspec.truncation)
    plus = [p for p in included if p.sign > 0]
    minus = [p for p in included if p.sign < 0]
    if len(plus) < len(mspec.weights_plus) or len(minus) < len(mspec.weights_minus):
        raise ValueError(
            f"metric has {len(mspec.weights_plus)} levels but only {len(plus)} eigenpairs"
        )
    omega = dict(zip(((p.level, 1) for p in plus), mspec.weights_plus))
    omega.update(zip(((p.level, -1) for p in minus), mspec.weights_minus))
    used = [p for p in included if (p.level, p.sign) in omega]
    weights = [omega[(p.level, p.sign)] for p in used]

    theta = _operator(used, "left", "left", weights)
    inverse_weights = [1.0 / (w * p.mu**2) for w, p in zip(weights, used)]
    inverse = _operator(used, "right", "right", inverse_weights)
    return Metric(theta, inverse, used, mspec, theta.gram_norm())


def quasi_hermiticity_residual(
    pairs: Sequence[FVEigenpair], metric: Metric, trial: np.ndarray
) -> float:
    """||(Theta H_N - H_N^dagger Theta) trial|| / (||Theta|| ||H_N trial||)."""
    grid = pairs[0].grid
    hamiltonian = spectral_hamiltonian(pairs)
    moved = hamiltonian.apply(trial)
    commutator = metric.theta.apply(moved) - hamiltonian.adjoint().apply(metric.theta.apply(trial))
    scale = metric.norm * grid.norm(moved)
    return grid.norm(commutator) / scale if scale > 0 else 0.0


def physical_product(metric: Metric, first: np.ndarray, second: np.ndarray) -> complex:
    """Scalar product <first|Theta second> of the physical Hilbert space."""
    grid = metric.pairs[0].grid
    return grid.pair(first, metric.theta.apply(second))


def product_gram(metric: Metric, vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Hermitian matrix of physical products among the vectors."""
    grid = metric.pairs[0].grid
    flat = np.stack([v.reshape(-1) for v in vectors])
    moved = np.stack([metric.theta.apply(v).reshape(-1) for v in vectors])
    gram = (np.conj(flat) * np.tile(grid.weights, 2)) @ moved.T
    return 0.5 * (gram + gram.conj().T)


def metric_coefficients(metric: Metric) -> np.ndarray:
    """
    M[(m, s), (n, t)] = <m^s|Theta|n^t> / (mu_m mu_n) over the metric's pairs;
    equals diag(omega) when the eigenvectors are biorthogonal on the grid.
    """
    pairs = metric.pairs
    grid = pairs[0].grid
    size = len(pairs)
    matrix = np.empty((size, size), dtype=complex)
    moved = [metric.theta.apply(p.right) for p in pairs]
    for i, first in enumerate(pairs):
        for j, second in enumerate(pairs):
            matrix[i, j] = grid.pair(first.right, moved[j]) / (first.mu * second.mu)
    return matrix


def random_span_vectors(
    pairs: Sequence[FVEigenpair], count: int = 10, seed: int = 20240501
) -> List[np.ndarray]:
    """Seeded complex combinations of the right eigenvectors."""
    rng = np.random.default_rng(seed)
    basis = _stack([p.right for p in pairs])
    vectors = []
    for _ in range(count):
        coeffs = rng.normal(size=len(pairs)) + 1j * rng.normal(size=len(pairs))
        vectors.append(np.einsum("k,kcp->cp", coeffs, basis))
    return vectors


@dataclass
class MetricDiagnostics:
    """Summary of the metric checks for one well."""

    truncation: int
    grid: int
    grid_kind: str
    scheme: str
    min_eigenvalue_of_product_gram: float
    quasi_hermiticity_residual_max: float
    identity_defects: List[float]
    mu: List[float]
    rho: List[float]
    mu_mismatch_max: float
    levels: List[int]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "truncation": self.truncation,
            "grid": self.grid,
            "grid_kind": self.grid_kind,
            "scheme": self.scheme,
            "levels": self.levels,
            "min_eigenvalue_of_product_gram": self.min_eigenvalue_of_product_gram,
            "quasi_hermiticity_residual_max": self.quasi_hermiticity_residual_max,
            "identity_defects": self.identity_defects,
            "mu": self.mu,
            "rho": self.rho,
            "mu_mismatch_max": self.mu_mismatch_max,
        }


def diagnose(
    spec: WellSpec,
    roots: Sequence[RootRecord],
    truncation: int = DEFAULT_TRUNCATION,
    grid: Optional[GridRepresentation] = None,
    scheme: WeightScheme = WeightScheme.INVERSE_MU_SQUARED,
    seed: int = 20240501,
    samples: int = 10,
    quiet: bool = False,
) -> MetricDiagnostics:
    """
    Positivity, quasi-Hermiticity and completeness checks for the lowest levels.

    Raises:
        DegenerateRoot: Fewer than two usable levels
    """
    grid = grid or segmented_grid(spec)
    pairs = truncate(build_eigenpairs(spec, roots, grid, min_levels=2, quiet=quiet), truncation)
    levels = sorted({p.level for p in pairs})
    metric = build_metric(pairs, MetricSpec.for_pairs(pairs, scheme))

    gram = product_gram(metric, [p.right for p in pairs])
    residuals = [
        quasi_hermiticity_residual(pairs, metric, v)
        for v in random_span_vectors(pairs, samples, seed)
    ]
    trial = square_well_trial(grid, 1)
    half = max(1, len(levels) // 2)
    defects = [identity_defect(truncate(pairs, half), trial), identity_defect(pairs, trial)]

    return MetricDiagnostics(
        truncation=len(levels),
        grid=grid.size,
        grid_kind=grid.kind,
        scheme=scheme.value,
        min_eigenvalue_of_product_gram=float(np.linalg.eigvalsh(gram).min()),
        quasi_hermiticity_residual_max=float(max(residuals)),
        identity_defects=[float(d) for d in defects],
        mu=[p.mu for p in pairs],
        rho=[p.rho for p in pairs if p.sign > 0],
        mu_mismatch_max=float(max(p.mu_mismatch for p in pairs)),
        levels=levels,
    )
