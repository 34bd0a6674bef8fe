"""Real roots of the secular determinant, their continuation in xi and level classification."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.console import Console
from scipy.optimize import brentq, minimize_scalar

from .model import (
    ContinuationTrace,
    ExceptionalPoint,
    LevelTag,
    PtWellError,
    RootRecord,
    TraceStatus,
    WellSpec,
)
from .secular import KAPPA_LIMIT, secular_function
from .utils import resolve_workers

# Console for diagnostics (stderr keeps stdout free for CSV)
console = Console(stderr=True, legacy_windows=False)

DEFAULT_XI_MAX = 40.0
# Sweep resolution used by classify_levels when no step count is given.
CLASSIFY_XI_STEP = 0.1

_NEWTON_MAX_ITER = 50
_EP_MAX_ITER = 60
# Two roots closer than this are one root.
_DEDUPE_TOL = 1e-9

SecularFn = Callable[[complex], complex]
ProgressFn = Callable[[int, int], None]


class LostTrack(PtWellError):
    """A level could be followed neither as a real nor as a complex root."""


class NoCoalescence(PtWellError):
    """The requested pair does not meet at an exceptional point in the searched range."""


@dataclass(frozen=True)
class ScanConfig:
    """Grid and tolerances of the real-root scan."""

    kappa_max: float = 10.0
    kappa_min: float = 1e-3
    step: float = math.pi / 40
    refine_tol: float = 1e-12
    residual_tol: float = 1e-10

    def __post_init__(self) -> None:
        if not 0.0 < self.kappa_min < self.kappa_max <= KAPPA_LIMIT:
            raise ValueError(
                f"need 0 < kappa_min < kappa_max <= {KAPPA_LIMIT:g}, "
                f"got {self.kappa_min!r}, {self.kappa_max!r}"
            )
        if not 0.0 < self.step < math.pi / 4:
            raise ValueError(f"scan step must lie in (0, pi/4), got {self.step!r}")
        if self.refine_tol <= 0.0 or self.residual_tol <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class SweepConfig:
    """Grid of the sweep strength xi and the collision/EP tolerances."""

    xi_from: float = 0.0
    xi_to: float = DEFAULT_XI_MAX
    steps: int = 401
    collision_delta: float = 1e-3
    ep_tol: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 <= self.xi_from < self.xi_to:
            raise ValueError(f"need 0 <= xi_from < xi_to, got {self.xi_from!r}, {self.xi_to!r}")
        if self.steps < 2:
            raise ValueError(f"a sweep needs at least 2 steps, got {self.steps}")

    @property
    def spacing(self) -> float:
        return (self.xi_to - self.xi_from) / (self.steps - 1)

    def grid(self) -> np.ndarray:
        return np.linspace(self.xi_from, self.xi_to, self.steps)

    def warmup_grid(self) -> np.ndarray:
        """Strengths from 0 up to (excluding) xi_from at roughly the sweep spacing."""
        if self.xi_from == 0.0:
            return np.empty(0)
        count = max(2, int(math.ceil(self.xi_from / self.spacing)) + 1)
        return np.linspace(0.0, self.xi_from, count)[:-1]


@dataclass(frozen=True)
class LevelClass:
    """Classification of one level within [0, xi_max]."""

    level: int
    tag: LevelTag
    xi_max: float
    partner: Optional[int] = None
    xi_c: Optional[float] = None


def _chunks(count: int, parts: int) -> List[Tuple[int, int]]:
    parts = max(1, min(parts, count))
    edges = np.linspace(0, count, parts + 1).astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def _evaluate_grid(
    f: SecularFn, grid: np.ndarray, executor: Optional[ThreadPoolExecutor], parts: int
) -> np.ndarray:
    """Values of f on the grid; contiguous chunks may run on the executor, reassembled in order."""

    def run(bounds: Tuple[int, int]) -> List[float]:
        lo, hi = bounds
        return [float(f(float(k))) for k in grid[lo:hi]]

    if executor is None:
        return np.array(run((0, len(grid))))
    values: List[float] = []
    for chunk in executor.map(run, _chunks(len(grid), parts)):
        values.extend(chunk)
    return np.array(values)


def _touching_roots(
    f: SecularFn, lo: float, hi: float, refine_tol: float, residual_tol: float
) -> List[float]:
    """Roots hidden between two grid points of equal sign (near-double or touching zeros)."""
    fine = np.linspace(lo, hi, 201)
    values = np.array([float(f(float(k))) for k in fine])
    found = []
    for i in range(len(fine) - 1):
        if values[i] == 0.0:
            found.append(float(fine[i]))
        elif values[i] * values[i + 1] < 0.0:
            found.append(brentq(f, fine[i], fine[i + 1], xtol=refine_tol, maxiter=200))
    if found:
        return found
    best = minimize_scalar(
        lambda k: abs(float(f(k))), bounds=(lo, hi), method="bounded", options={"xatol": refine_tol}
    )
    if best.fun < residual_tol:
        return [float(best.x)]
    return []


def scan_roots(
    f: SecularFn,
    kappa_lo: float,
    kappa_hi: float,
    step: float,
    refine_tol: float = 1e-12,
    residual_tol: float = 1e-10,
    executor: Optional[ThreadPoolExecutor] = None,
    parts: int = 1,
) -> List[float]:
    """
    Real zeros of f on [kappa_lo, kappa_hi], ascending.

    Sign changes on the grid are refined with brentq. Grid minima of |f|
    below sqrt(residual_tol) without a sign change are searched on a finer
    grid so that near-double roots are not missed.
    """
    count = max(2, int(math.ceil((kappa_hi - kappa_lo) / step)) + 1)
    grid = np.linspace(kappa_lo, kappa_hi, count)
    values = _evaluate_grid(f, grid, executor, parts)

    brackets: List[Tuple[float, float]] = []
    found: List[float] = []
    for i in range(count - 1):
        if values[i] == 0.0:
            found.append(float(grid[i]))
        elif values[i] * values[i + 1] < 0.0:
            brackets.append((float(grid[i]), float(grid[i + 1])))
    if values[-1] == 0.0:
        found.append(float(grid[-1]))
    # roots on the scan ends have no bracket to fall into
    for end in (0, count - 1):
        if 0.0 < abs(values[end]) < residual_tol:
            found.append(float(grid[end]))

    def refine(bracket: Tuple[float, float]) -> float:
        return brentq(f, bracket[0], bracket[1], xtol=refine_tol, maxiter=200)

    if executor is None:
        found.extend(refine(b) for b in brackets)
    else:
        found.extend(executor.map(refine, brackets))

    threshold = math.sqrt(residual_tol)
    for i in range(1, count - 1):
        local = abs(values[i])
        if local >= threshold or local == 0.0:
            continue
        if local <= abs(values[i - 1]) and local <= abs(values[i + 1]):
            if values[i - 1] * values[i] > 0.0 and values[i] * values[i + 1] > 0.0:
                found.extend(
                    _touching_roots(f, grid[i - 1], grid[i + 1], refine_tol, residual_tol)
                )

    unique: List[float] = []
    for kappa in sorted(found):
        if not unique or kappa - unique[-1] > _DEDUPE_TOL:
            unique.append(kappa)
    return unique


def find_real_roots(
    spec: WellSpec,
    config: Optional[ScanConfig] = None,
    backend: str = "matrix",
    max_workers: Optional[int] = None,
) -> List[RootRecord]:
    """
    All real bound-state roots in [kappa_min, kappa_max].

    Args:
        spec: Well to scan
        config: Scan grid and tolerances
        backend: "matrix" or "closed"
        max_workers: Thread count for the grid evaluation (PTWELL_THREADS when None)

    Returns:
        RootRecords sorted by kappa and numbered from 1; roots whose residual
        stays above residual_tol are dropped with a warning
    """
    config = config or ScanConfig()
    f = secular_function(spec, backend)
    workers = resolve_workers(max_workers)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        kappas = scan_roots(
            f,
            config.kappa_min,
            config.kappa_max,
            config.step,
            config.refine_tol,
            config.residual_tol,
            executor,
            workers,
        )

    records: List[RootRecord] = []
    for kappa in kappas:
        residual = abs(f(kappa))
        if residual >= config.residual_tol:
            console.print(
                f"  [yellow]![/yellow] Dropped root candidate {kappa:.12g}: "
                f"residual {residual:.3e} above {config.residual_tol:.1e}"
            )
            continue
        records.append(RootRecord(len(records) + 1, kappa, residual))
    return records


def _derivative(f: SecularFn, kappa: complex) -> complex:
    h = 1e-7 * max(1.0, abs(kappa))
    return (f(kappa + h) - f(kappa - h)) / (2 * h)


def _safe(f: SecularFn, kappa: complex) -> complex:
    try:
        return f(kappa)
    except PtWellError:
        return complex(math.inf)


def newton_root(
    f: SecularFn, start: complex, tol: float, max_shift: float = math.pi / 4
) -> Optional[complex]:
    """
    Damped Newton iteration on f from start.

    A real start iterates on the real axis, a complex one in the complex
    plane. Steps are halved until |f| decreases; one polishing step is taken
    after convergence if it does not increase |f|.

    Returns:
        The root, or None when the iteration stalls, leaves the half-plane Re kappa > 0 or
        moves farther than max_shift from the start
    """
    kappa = start
    value = _safe(f, kappa)
    if not np.isfinite(value):
        return None
    for _ in range(_NEWTON_MAX_ITER):
        if abs(value) < tol:
            break
        slope = _derivative(f, kappa)
        if slope == 0 or not np.isfinite(slope):
            return None
        step = value / slope
        damping = 1.0
        while damping >= 1.0 / 64:
            trial = kappa - damping * step
            if trial.real > 0:
                trial_value = _safe(f, trial)
                if abs(trial_value) < abs(value):
                    break
            damping /= 2
        else:
            return None
        kappa, value = trial, trial_value
        if abs(kappa - start) > max_shift:
            return None
    if abs(value) >= tol:
        return None

    slope = _derivative(f, kappa)
    if slope != 0 and np.isfinite(slope):
        polished = kappa - value / slope
        if polished.real > 0 and abs(_safe(f, polished)) <= abs(value):
            kappa = polished
    return kappa


class LevelTracker:
    """
    Follows the levels kappa_n(xi) from the square-well values n pi/2 as the
    sweep strength grows, locating exceptional points on the way.
    """

    def __init__(
        self,
        spec: WellSpec,
        scan: Optional[ScanConfig] = None,
        sweep: Optional[SweepConfig] = None,
        backend: str = "matrix",
        verbose: bool = False,
        quiet: bool = False,
        max_workers: Optional[int] = None,
    ):
        """
        Initialize the tracker.

        Args:
            spec: Well whose couplings set the sweep direction
            scan: Tolerances for the Newton corrector and window scans
            sweep: Default strength grid
            backend: "matrix" or "closed"
            verbose: Log every collision and exceptional point
            quiet: Suppress warnings
            max_workers: Threads for the per-level corrector
        """
        self.spec = spec
        self.scan = scan or ScanConfig()
        self.sweep = sweep or SweepConfig()
        self.backend = backend
        self.verbose = verbose
        self.quiet = quiet
        self.max_workers = resolve_workers(max_workers)
        # fail early on an unsupported backend
        secular_function(spec, backend)

    def _log(self, message: str) -> None:
        """Log a message if verbose mode is enabled."""
        if self.verbose and not self.quiet:
            console.print(f"  [dim]{message}[/dim]")

    def _warn(self, message: str) -> None:
        if not self.quiet:
            console.print(f"  [yellow]![/yellow] {message}")

    def secular_at(self, xi: float) -> SecularFn:
        """kappa -> D(kappa) at sweep strength xi."""
        return secular_function(self.spec.scaled(xi), self.backend)

    # ------------------------------------------------------------------
    # exceptional points

    def _ep_system(self, kappa: float, xi: float) -> np.ndarray:
        f = self.secular_at(xi)
        h = 1e-6 * max(1.0, abs(kappa))
        return np.array([f(kappa), (f(kappa + h) - f(kappa - h)) / (2 * h)])

    def _ep_jacobian(self, kappa: float, xi: float) -> np.ndarray:
        # Outer differences use a wider step than the inner kappa-derivative.
        hk = 1e-4 * max(1.0, abs(kappa))
        hx = 1e-4 * max(1.0, abs(xi))
        jacobian = np.empty((2, 2))
        system = self._ep_system
        jacobian[:, 0] = (system(kappa + hk, xi) - system(kappa - hk, xi)) / (2 * hk)
        jacobian[:, 1] = (system(kappa, xi + hx) - system(kappa, xi - hx)) / (2 * hx)
        return jacobian

    def _newton_ep(self, kappa: float, xi: float) -> Optional[Tuple[float, float]]:
        target = self.sweep.ep_tol / 10
        for _ in range(_EP_MAX_ITER):
            try:
                residual = self._ep_system(kappa, xi)
                if abs(residual[0]) < target and abs(residual[1]) < target:
                    return kappa, xi
                shift = np.linalg.solve(self._ep_jacobian(kappa, xi), -residual)
            except (PtWellError, np.linalg.LinAlgError):
                return None
            scale = max(1.0, abs(shift[0]) / 0.1, abs(shift[1]) / (0.1 * max(1.0, xi)))
            kappa += shift[0] / scale
            xi += shift[1] / scale
            if not (np.isfinite(kappa) and np.isfinite(xi)) or kappa <= 0.0 or xi < 0.0:
                return None
        return None

    def _root_count(self, xi: float, lo: float, hi: float) -> List[float]:
        return scan_roots(
            self.secular_at(xi),
            max(lo, self.scan.kappa_min),
            hi,
            (hi - lo) / 400,
            self.scan.refine_tol,
            self.scan.residual_tol,
        )

    def _bisect_ep(
        self, bracket: Tuple[float, float], window: Tuple[float, float]
    ) -> Optional[Tuple[float, float]]:
        """Strength where the real roots inside the window drop by two; kappa at the |D| minimum."""
        pad = max(0.05, window[1] - window[0])
        lo_k, hi_k = window[0] - pad, window[1] + pad
        lo, hi = bracket
        start = self._root_count(lo, lo_k, hi_k)
        if len(start) - len(self._root_count(hi, lo_k, hi_k)) < 2:
            return None
        while hi - lo > 1e-12 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if len(self._root_count(mid, lo_k, hi_k)) >= len(start):
                lo = mid
            else:
                hi = mid
        survivors = self._root_count(hi, lo_k, hi_k)
        vanished = [
            k
            for k in self._root_count(lo, lo_k, hi_k)
            if all(abs(k - s) > 1e-6 for s in survivors)
        ]
        if not vanished:
            return None
        f = self.secular_at(hi)
        best = minimize_scalar(
            lambda k: abs(f(k)),
            bounds=(min(vanished) - 1e-6, max(vanished) + 1e-6),
            method="bounded",
            options={"xatol": 1e-13},
        )
        return float(best.x), 0.5 * (lo + hi)

    def refine_exceptional_point(
        self,
        kappa_guess: float,
        xi_guess: float,
        pair: Tuple[int, int],
        bracket: Optional[Tuple[float, float]] = None,
        window: Optional[Tuple[float, float]] = None,
    ) -> Optional[ExceptionalPoint]:
        """
        Solve D = dD/dkappa = 0 near a guess.

        Newton on (kappa, xi) comes first; its answer is rejected when it
        leaves the strength bracket or drifts away from the pair's window,
        in which case the bracket is bisected on the root count.
        """
        found = self._newton_ep(kappa_guess, xi_guess)
        if found is not None and bracket is not None:
            kappa, xi = found
            width = (window[1] - window[0]) if window else 0.0
            if not (bracket[0] - 1e-9 <= xi <= bracket[1] + 1e-9):
                found = None
            elif abs(kappa - kappa_guess) > width + 0.1:
                found = None
        if found is None and bracket is not None and window is not None:
            self._log(f"EP Newton stalled for pair {pair}; bisecting xi in {bracket}")
            found = self._bisect_ep(bracket, window)
        if found is None:
            return None
        kappa, xi = found
        residual = self._ep_system(kappa, xi)
        return ExceptionalPoint(
            xi_c=float(xi),
            kappa_c=float(kappa),
            pair=tuple(sorted(pair)),
            residuals=(float(abs(residual[0])), float(abs(residual[1]))),
        )

    def branch_guess(self, ep: ExceptionalPoint, xi: float) -> complex:
        """
        Upper complex root just past an EP from the square-root law
        kappa - kappa_c ~ sqrt(-2 D_xi (xi - xi_c) / D_kk).
        """
        f = self.secular_at(ep.xi_c)
        kappa = ep.kappa_c
        h = 1e-4 * max(1.0, kappa)
        hx = 1e-4 * max(1.0, ep.xi_c)
        d_kk = (f(kappa + h) - 2 * f(kappa) + f(kappa - h)) / h**2
        above, below = self.secular_at(ep.xi_c + hx), self.secular_at(ep.xi_c - hx)
        d_xi = (above(kappa) - below(kappa)) / (2 * hx)
        if d_kk == 0:
            return complex(kappa, 1e-3)
        shift = np.sqrt(complex(-2 * d_xi * (xi - ep.xi_c) / d_kk))
        if abs(shift.imag) < 1e-3:
            return complex(kappa, 1e-3)
        return complex(kappa + shift.real, abs(shift.imag))

    # ------------------------------------------------------------------
    # continuation

    @staticmethod
    def _predict(trace: ContinuationTrace, xi: float) -> float:
        last = trace.last
        if len(trace.samples) < 2:
            return last.kappa.real
        prev = trace.samples[-2]
        if last.xi == prev.xi:
            return last.kappa.real
        slope = (last.kappa.real - prev.kappa.real) / (last.xi - prev.xi)
        return last.kappa.real + slope * (xi - last.xi)

    def _predict_complex(self, trace: ContinuationTrace, xi: float) -> complex:
        last = trace.last
        if last.status is TraceStatus.MERGED:
            return self.branch_guess(trace.exceptional_point, xi)
        prev = trace.samples[-2]
        if prev.status is TraceStatus.MERGED:
            kappa_c = prev.kappa
            scale = math.sqrt((xi - prev.xi) / (last.xi - prev.xi))
            guess = kappa_c + (last.kappa - kappa_c) * scale
        else:
            guess = last.kappa + (last.kappa - prev.kappa) * (xi - last.xi) / (last.xi - prev.xi)
        if abs(guess.imag) < 1e-3:
            guess = complex(guess.real, 1e-3)
        return guess

    @staticmethod
    def _ep_strength_guess(first: ContinuationTrace, second: ContinuationTrace, xi: float) -> float:
        """Extrapolate the squared gap of the pair, which closes linearly in xi near an EP."""
        xi_prev = first.last.xi
        if len(first.samples) < 2 or len(second.samples) < 2:
            return xi_prev
        gap_now = (first.last.kappa.real - second.last.kappa.real) ** 2
        gap_before = (first.samples[-2].kappa.real - second.samples[-2].kappa.real) ** 2
        if gap_before <= gap_now:
            return xi_prev
        span = xi_prev - first.samples[-2].xi
        return min(xi, xi_prev + gap_now * span / (gap_before - gap_now))

    def _uncertain_levels(
        self,
        traces: Dict[int, ContinuationTrace],
        results: Dict[int, Optional[complex]],
    ) -> set:
        delta = self.sweep.collision_delta
        uncertain = {n for n, kappa in results.items() if kappa is None}
        converged = sorted((kappa.real, n) for n, kappa in results.items() if kappa is not None)
        previous = sorted((traces[n].last.kappa.real, n) for n in results)
        for ordered in (converged, previous):
            for (k1, n1), (k2, n2) in zip(ordered, ordered[1:]):
                if k2 - k1 < delta:
                    uncertain.update((n1, n2))
        return uncertain

    def _resolve(
        self,
        f: SecularFn,
        uncertain: set,
        predictions: Dict[int, float],
        results: Dict[int, Optional[complex]],
        claimed: List[float],
    ) -> Tuple[Dict[int, float], List[int]]:
        """
        Assign roots found by window scans to the uncertain levels.

        Windows of half-width pi/8 around the predictions are merged into
        clusters; inside a cluster roots go to the nearest prediction first.

        Returns:
            (assigned kappas, levels left without a real root)
        """
        half = math.pi / 8
        ordered = sorted(uncertain, key=lambda n: predictions[n])
        clusters: List[List[int]] = []
        for n in ordered:
            if clusters and predictions[n] - predictions[clusters[-1][-1]] < 2 * half:
                clusters[-1].append(n)
            else:
                clusters.append([n])

        assigned: Dict[int, float] = {}
        lacking: List[int] = []
        for cluster in clusters:
            lo = predictions[cluster[0]] - half
            hi = predictions[cluster[-1]] + half
            roots = self._root_count_in(f, lo, hi)
            roots = [r for r in roots if all(abs(r - c) > 1e-8 for c in claimed)]
            candidates = sorted(
                (abs(r - predictions[n]), n, i) for n in cluster for i, r in enumerate(roots)
            )
            taken: set = set()
            for distance, n, i in candidates:
                if n in assigned or i in taken or distance >= math.pi / 4:
                    continue
                assigned[n] = roots[i]
                taken.add(i)
            for n in cluster:
                if n in assigned:
                    continue
                newton = results.get(n)
                distinct = newton is not None and all(
                    abs(newton.real - k) > 1e-8 for k in assigned.values()
                )
                if distinct:
                    assigned[n] = newton.real
                else:
                    lacking.append(n)

        if len(lacking) == 1:
            # a lone level touching an assigned root shares it
            n = lacking[0]
            delta = self.sweep.collision_delta
            near = [k for k in assigned.values() if abs(k - predictions[n]) < delta]
            if near:
                assigned[n] = near[0]
                lacking = []
        return assigned, lacking

    def _root_count_in(self, f: SecularFn, lo: float, hi: float) -> List[float]:
        lo = max(lo, self.scan.kappa_min)
        return scan_roots(
            f, lo, hi, (hi - lo) / 200, self.scan.refine_tol, self.scan.residual_tol
        )

    def _merge(
        self,
        traces: Dict[int, ContinuationTrace],
        lacking: List[int],
        xi: float,
    ) -> None:
        """Pair up levels that lost their real roots and locate their exceptional points."""
        lacking = sorted(lacking, key=lambda n: traces[n].last.kappa.real)
        while len(lacking) >= 2:
            n, m = lacking.pop(0), lacking.pop(0)
            first, second = traces[n], traces[m]
            xi_prev = first.last.xi
            k_n, k_m = first.last.kappa.real, second.last.kappa.real
            window = (min(k_n, k_m), max(k_n, k_m))
            ep = self.refine_exceptional_point(
                0.5 * (k_n + k_m),
                self._ep_strength_guess(first, second, xi),
                (n, m),
                bracket=(xi_prev, xi),
                window=window,
            )
            if ep is None:
                self._warn(f"Lost levels {n} and {m} at xi={xi:.6g}: no exceptional point found")
                first.lost_at = second.lost_at = float(xi)
                continue
            self._log(
                f"Levels {n} and {m} merge at xi_c={ep.xi_c:.12g}, kappa_c={ep.kappa_c:.12g}"
            )
            for trace, partner in ((first, m), (second, n)):
                trace.partner = partner
                trace.exceptional_point = ep
                trace.add(ep.xi_c, ep.kappa_c, TraceStatus.MERGED)
        for n in lacking:
            self._warn(f"Lost level {n} at xi={xi:.6g}: no real root and no partner")
            traces[n].lost_at = float(xi)

    def _advance_complex(
        self, traces: Dict[int, ContinuationTrace], xi: float, f: SecularFn
    ) -> None:
        tol = self.scan.residual_tol
        for n, trace in traces.items():
            if trace.is_lost or trace.last.status is TraceStatus.REAL or trace.partner is None:
                continue
            if n > trace.partner:
                continue
            partner = traces[trace.partner]
            guess = self._predict_complex(trace, xi)
            root = newton_root(f, guess, tol, max_shift=math.pi / 4)
            if root is None:
                self._warn(f"Lost complex pair ({n}, {trace.partner}) at xi={xi:.6g}")
                trace.lost_at = partner.lost_at = float(xi)
                continue
            root = complex(root)
            if root.imag < 0:
                root = root.conjugate()
            trace.add(xi, root, TraceStatus.COMPLEX)
            partner.add(xi, root.conjugate(), TraceStatus.COMPLEX)

    def _advance(
        self,
        traces: Dict[int, ContinuationTrace],
        xi: float,
        executor: ThreadPoolExecutor,
    ) -> None:
        f = self.secular_at(xi)
        tol = self.scan.residual_tol
        self._advance_complex(traces, xi, f)

        real_levels = [
            n for n, t in traces.items() if not t.is_lost and t.last.status is TraceStatus.REAL
        ]
        if not real_levels:
            return
        predictions = {n: self._predict(traces[n], xi) for n in real_levels}

        def correct(n: int) -> Optional[complex]:
            root = newton_root(f, predictions[n], tol)
            if root is None or abs(root.real - traces[n].last.kappa.real) >= math.pi / 4:
                return None
            return root

        results = dict(zip(real_levels, executor.map(correct, real_levels)))
        uncertain = self._uncertain_levels(traces, results)
        accepted = {n: results[n].real for n in real_levels if n not in uncertain}
        lacking: List[int] = []
        if uncertain:
            self._log(f"Resolving levels {sorted(uncertain)} at xi={xi:.6g}")
            assigned, lacking = self._resolve(
                f, uncertain, predictions, results, sorted(accepted.values())
            )
            accepted.update(assigned)

        for n in real_levels:
            if n in accepted:
                traces[n].add(xi, accepted[n], TraceStatus.REAL)
        if lacking:
            self._merge(traces, lacking, xi)

    def continue_levels(
        self,
        levels: Sequence[int],
        sweep: Optional[SweepConfig] = None,
        progress: Optional[ProgressFn] = None,
    ) -> List[ContinuationTrace]:
        """
        Continue the given levels across the sweep grid.

        Levels start at kappa_n = n pi/2 at zero strength; a sweep starting
        above zero is walked from 0 first without recording. A Merged sample
        met on that walk is kept, so its trace starts with it and carries
        steps + 1 samples.

        Args:
            levels: Level indices (1-based)
            sweep: Strength grid; the tracker default when None
            progress: Called with (done, total) after each grid step

        Returns:
            One trace per level in ascending level order
        """
        sweep = sweep or self.sweep
        levels = sorted(set(levels))
        if not levels or levels[0] < 1:
            raise ValueError("levels are numbered from 1")
        traces = {n: ContinuationTrace(n) for n in levels}
        for n in levels:
            traces[n].add(0.0, n * math.pi / 2, TraceStatus.REAL)

        strengths = np.concatenate([sweep.warmup_grid(), sweep.grid()])
        total = len(strengths) - 1
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            for done, xi in enumerate(strengths[1:], start=1):
                self._advance(traces, float(xi), executor)
                if progress is not None:
                    progress(done, total)
                if all(t.is_lost for t in traces.values()):
                    break

        for trace in traces.values():
            trace.samples = [
                s for s in trace.samples if s.xi >= sweep.xi_from or s.status is TraceStatus.MERGED
            ]
        return [traces[n] for n in levels]

    # ------------------------------------------------------------------
    # pair queries

    def _confirms(self, ep: ExceptionalPoint) -> bool:
        """The candidate is a fold of D and levels pair[0], pair[1] are its two roots."""
        n, m = ep.pair
        delta = min(1e-3 * max(1.0, ep.xi_c), 0.5 * ep.xi_c)
        below = ep.xi_c - delta
        if below <= 0.0:
            return False
        steps = max(2, int(math.ceil(below / CLASSIFY_XI_STEP)) + 1)
        traces = self.continue_levels(
            range(1, m + max(4, m // 2) + 1),
            SweepConfig(0.0, below, steps, self.sweep.collision_delta, self.sweep.ep_tol),
        )
        real = [
            (abs(t.last.kappa.real - ep.kappa_c), t.level)
            for t in traces
            if not t.is_lost and t.last.status is TraceStatus.REAL
        ]
        nearest = {level for _, level in sorted(real)[:2]}
        if nearest != {n, m}:
            return False
        pair_kappas = [traces[n - 1].last.kappa.real, traces[m - 1].last.kappa.real]
        gap = max(abs(k - ep.kappa_c) for k in pair_kappas) + 1e-6
        lo, hi = min(pair_kappas) - gap, max(pair_kappas) + gap
        before = self._root_count_in(self.secular_at(below), lo, hi)
        after = self._root_count_in(self.secular_at(ep.xi_c + delta), lo, hi)
        return len(before) - len(after) == 2

    def find_exceptional_point(
        self, kappa_guess: float, xi_guess: float, pair: Tuple[int, int]
    ) -> ExceptionalPoint:
        """
        Exceptional point where levels pair[0] and pair[1] coalesce.

        The guesses seed a direct Newton solve, accepted once the tracked
        levels confirm the pair's identity. Otherwise the levels are
        continued across the sweep range and the pair's EP is taken from
        the traces.

        Raises:
            NoCoalescence: The pair does not merge within [xi_from, xi_to]
        """
        n, m = sorted(pair)
        if n < 1 or n == m:
            raise ValueError(f"invalid level pair {pair}")
        sweep = self.sweep
        context = {"pair": (n, m), "xi_from": sweep.xi_from, "xi_to": sweep.xi_to}
        if self.spec.max_coupling == 0.0:
            raise NoCoalescence("zero coupling: all levels stay real and simple", context)

        candidate = self.refine_exceptional_point(kappa_guess, xi_guess, (n, m))
        if candidate is not None and sweep.xi_from <= candidate.xi_c <= sweep.xi_to:
            if self._confirms(candidate):
                return candidate
            self._log(f"EP candidate at xi={candidate.xi_c:.6g} does not belong to pair {(n, m)}")

        traces = self.continue_levels(range(1, m + max(4, m // 2) + 1), sweep)
        ep = traces[n - 1].exceptional_point
        if ep is not None and ep.pair == (n, m) and sweep.xi_from <= ep.xi_c <= sweep.xi_to:
            return ep
        raise NoCoalescence(
            f"levels {n} and {m} do not coalesce for xi in [{sweep.xi_from:g}, {sweep.xi_to:g}]",
            context,
        )

    def complex_pair_at(self, ep: ExceptionalPoint, xi: float) -> Tuple[complex, complex]:
        """
        Both complex roots of a merged pair at a strength past xi_c, each from
        its own Newton solve.

        Raises:
            LostTrack: Either member fails to converge
        """
        f = self.secular_at(xi)
        guess = self.branch_guess(ep, xi)
        upper = newton_root(f, guess, self.scan.residual_tol)
        lower = newton_root(f, guess.conjugate(), self.scan.residual_tol)
        if upper is None or lower is None:
            raise LostTrack(
                f"complex pair {ep.pair} not found at xi={xi:g}", {"xi_c": ep.xi_c, "xi": xi}
            )
        return complex(upper), complex(lower)

    def classify(
        self,
        levels: int,
        xi_max: float = DEFAULT_XI_MAX,
        steps: Optional[int] = None,
        progress: Optional[ProgressFn] = None,
    ) -> List[LevelClass]:
        """
        Tag levels 1..N as Robust or Fragile within [0, xi_max].

        Buffer levels above N are followed too so that the partners of the
        highest requested levels are tracked.
        """
        if levels < 1:
            raise ValueError("need at least one level")
        if xi_max <= 0.0:
            raise ValueError("xi_max must be positive")
        steps = steps or max(2, int(math.ceil(xi_max / CLASSIFY_XI_STEP)) + 1)
        sweep = SweepConfig(0.0, xi_max, steps, self.sweep.collision_delta, self.sweep.ep_tol)
        buffer = max(4, levels // 2)
        traces = self.continue_levels(range(1, levels + buffer + 1), sweep, progress)

        classes = []
        for trace in traces[:levels]:
            if trace.merged is not None:
                ep = trace.exceptional_point
                classes.append(
                    LevelClass(trace.level, LevelTag.FRAGILE, xi_max, trace.partner, ep.xi_c)
                )
            elif trace.is_lost:
                classes.append(LevelClass(trace.level, LevelTag.UNCLASSIFIED, xi_max))
            else:
                classes.append(LevelClass(trace.level, LevelTag.ROBUST, xi_max))
        return classes


def continue_levels(
    spec: WellSpec,
    sweep: SweepConfig,
    scan: Optional[ScanConfig] = None,
    levels: Optional[Sequence[int]] = None,
    backend: str = "matrix",
    **kwargs,
) -> List[ContinuationTrace]:
    """Continue levels (default 1..6) of spec across the sweep; see LevelTracker.continue_levels."""
    progress = kwargs.pop("progress", None)
    tracker = LevelTracker(spec, scan, sweep, backend, **kwargs)
    return tracker.continue_levels(levels or range(1, 7), sweep, progress)


def find_exceptional_point(
    spec: WellSpec,
    kappa_guess: float,
    xi_guess: float,
    pair: Tuple[int, int],
    sweep: Optional[SweepConfig] = None,
    scan: Optional[ScanConfig] = None,
    backend: str = "matrix",
) -> ExceptionalPoint:
    """Exceptional point of a level pair; see LevelTracker.find_exceptional_point."""
    return LevelTracker(spec, scan, sweep, backend, quiet=True).find_exceptional_point(
        kappa_guess, xi_guess, pair
    )


def classify_levels(
    spec: WellSpec,
    levels: int,
    xi_max: float = DEFAULT_XI_MAX,
    scan: Optional[ScanConfig] = None,
    backend: str = "matrix",
    steps: Optional[int] = None,
    **kwargs,
) -> List[LevelClass]:
    """Robust/Fragile tags of levels 1..N within [0, xi_max]; see LevelTracker.classify."""
    progress = kwargs.pop("progress", None)
    tracker = LevelTracker(spec, scan, None, backend, **kwargs)
    return tracker.classify(levels, xi_max, steps, progress)


def complex_pair_at(
    spec: WellSpec, ep: ExceptionalPoint, xi: float, backend: str = "matrix"
) -> Tuple[complex, complex]:
    """Upper and lower complex roots of a merged pair at strength xi."""
    return LevelTracker(spec, backend=backend, quiet=True).complex_pair_at(ep, xi)
