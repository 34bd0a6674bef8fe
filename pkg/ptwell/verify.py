"""Cross-backend verification suite producing a deterministic report."""

import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from .closed_form import RationalPosition, closed_form_det, det_L1, reduced_conditions
from .model import WellSpec
from .rootfind import ScanConfig, find_real_roots
from .secular import normalized_determinant
from .spectral import NotARoot, eigenfunction, matching_residuals

DEFAULT_SEED = 20240501
DEFAULT_XI_LIST = (0.0, 1.0, 3.0, 5.0, 10.0)

PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped"

REALITY_TOL = 1e-12
RATIO_TOL = 1e-9
DEGENERATION_TOL = 1e-9
CLOSED_DEGENERATION_TOL = 1e-14
REDUNDANCY_TOL = 1e-9
CONTINUITY_RATIO = 1e-3
ROOT_MATCH_TOL = 1e-8


class VerificationReport:
    """
    Ordered list of named checks with their worst residuals.

    Nothing time-dependent is recorded, so a report regenerated with the
    same seed serializes to identical bytes.
    """

    def __init__(self, seed: int = DEFAULT_SEED, subject: Optional[Dict[str, Any]] = None):
        """
        Initialize the report.

        Args:
            seed: Seed of the randomized samples
            subject: Parameters describing what was verified
        """
        self.seed = seed
        self.subject = subject or {}
        self.checks: List[Dict[str, Any]] = []

    def _add(
        self,
        name: str,
        status: str,
        worst: Optional[float],
        threshold: Optional[float],
        context: Optional[Dict[str, Any]],
    ) -> None:
        if any(check["name"] == name for check in self.checks):
            raise ValueError(f"duplicate check name {name!r}")
        self.checks.append(
            {
                "name": name,
                "status": status,
                "worst_residual": worst,
                "threshold": threshold,
                "context": dict(context or {}),
            }
        )

    def add_check(
        self,
        name: str,
        worst: float,
        threshold: float,
        context: Optional[Dict[str, Any]] = None,
    ) -> bool:
        """Record a check that passes iff worst <= threshold; returns the outcome."""
        worst = float(worst)
        passed = math.isfinite(worst) and worst <= threshold
        self._add(name, PASS if passed else FAIL, worst, threshold, context)
        return passed

    def add_skip(self, name: str, reason: str) -> None:
        """Record a check that does not apply."""
        self._add(name, SKIPPED, None, None, {"reason": reason})

    def extend(self, other: "VerificationReport") -> None:
        for check in other.checks:
            self._add(
                check["name"],
                check["status"],
                check["worst_residual"],
                check["threshold"],
                check["context"],
            )

    @property
    def passed(self) -> bool:
        return all(check["status"] != FAIL for check in self.checks)

    @property
    def failures(self) -> List[str]:
        return [check["name"] for check in self.checks if check["status"] == FAIL]

    def generate(self) -> Dict[str, Any]:
        """
        Generate the report data structure.

        Returns:
            Dictionary with the summary and every check in registry order
        """
        return {
            "report_version": "1.0",
            "ptwell_version": __version__,
            "seed": self.seed,
            "subject": self.subject,
            "statistics": {
                "total": len(self.checks),
                "passed": sum(1 for c in self.checks if c["status"] == PASS),
                "failed": sum(1 for c in self.checks if c["status"] == FAIL),
                "skipped": sum(1 for c in self.checks if c["status"] == SKIPPED),
            },
            "passed": self.passed,
            "checks": self.checks,
        }

    def to_json(self) -> str:
        return json.dumps(self.generate(), indent=2, ensure_ascii=False)

    def save_json(self, path: str) -> str:
        """
        Save the report as a JSON file.

        Returns:
            Path to the saved report
        """
        output_path = Path(path)
        with output_path.open("w", encoding="utf-8") as f:
            f.write(self.to_json() + "\n")
        return str(output_path)


def _kappa_samples(rng: np.random.Generator, count: int) -> np.ndarray:
    return np.sort(rng.uniform(0.1, 20.0, count))


def _worst(values: Iterable[float]) -> float:
    values = list(values)
    return max(values) if values else 0.0


def _check_reality(report: VerificationReport, spec: WellSpec, kappas: np.ndarray) -> None:
    worst = 0.0
    for kappa in kappas:
        value = normalized_determinant(spec, float(kappa))
        worst = max(worst, abs(value.imag) / (abs(value.real) + 1.0))
    report.add_check("reality", worst, REALITY_TOL, {"samples": len(kappas)})


def _check_ratio(report: VerificationReport, spec: WellSpec) -> None:
    if spec.count > 2:
        report.add_skip("ratio_constancy", f"no closed form for L={spec.count}")
        return
    worst = 0.0
    used = 0
    for kappa in np.linspace(0.1, 20.0, 200):
        closed = float(closed_form_det(spec, kappa))
        matrix = normalized_determinant(spec, float(kappa)).real
        if abs(closed) < 1e-6 or abs(matrix) < 1e-6:
            continue
        used += 1
        worst = max(worst, abs(matrix / closed - 1.0))
    report.add_check("ratio_constancy", worst, RATIO_TOL, {"samples": used})


def _reduce(spec: WellSpec) -> Dict[str, WellSpec]:
    """The spec with its outermost coupling zeroed, and the spec without that pair."""
    couplings = list(spec.couplings)
    couplings[-1] = 0.0
    return {
        "zeroed": spec.with_couplings(couplings),
        "reduced": WellSpec(spec.positions[:-1], spec.couplings[:-1]),
    }


def _check_degeneration(report: VerificationReport, spec: WellSpec, kappas: np.ndarray) -> None:
    if spec.is_pure:
        report.add_skip("degeneration", "no delta pair to remove")
        report.add_skip("degeneration_closed", "no delta pair to remove")
        return
    pair = _reduce(spec)

    def gap(kappa: float) -> float:
        reduced = normalized_determinant(pair["reduced"], kappa)
        return abs(normalized_determinant(pair["zeroed"], kappa) - reduced) / max(1.0, abs(reduced))

    worst = _worst(gap(float(k)) for k in kappas)
    context = {"removed_position": spec.positions[-1]}
    report.add_check("degeneration", worst, DEGENERATION_TOL, context)

    if spec.count > 2:
        report.add_skip("degeneration_closed", f"no closed form for L={spec.count}")
        return
    worst = _worst(
        abs(float(closed_form_det(pair["zeroed"], k)) - float(closed_form_det(pair["reduced"], k)))
        for k in kappas
    )
    report.add_check("degeneration_closed", worst, CLOSED_DEGENERATION_TOL, {"count": spec.count})


def _check_redundancy(report: VerificationReport, spec: WellSpec, kappa_max: float) -> None:
    if spec.is_pure:
        report.add_skip("pt_redundancy", "no matching conditions")
        return
    worst = 0.0
    roots = find_real_roots(spec, ScanConfig(kappa_max=kappa_max), max_workers=1)
    checked = 0
    for root in roots:
        try:
            psi = eigenfunction(spec, root.kappa, root.index)
        except NotARoot:
            continue
        scale = float(np.max(np.abs(psi.coefficients.values)))
        left = matching_residuals(psi)["left"]
        worst = max(worst, float(np.max(np.abs(left))) / scale)
        checked += 1
    report.add_check("pt_redundancy", worst, REDUNDANCY_TOL, {"roots": checked})


def _check_continuity(report: VerificationReport, spec: WellSpec, kappas: np.ndarray) -> None:
    if spec.is_pure:
        report.add_skip("xi_continuity", "no couplings")
        return
    base = spec.with_couplings([0.0] * spec.count)

    def error(eps: float) -> float:
        nudged = spec.with_couplings([eps] * spec.count)
        return _worst(
            abs(normalized_determinant(nudged, float(k)) - normalized_determinant(base, float(k)))
            for k in kappas
        )

    coarse, fine = error(1e-4), error(1e-6)
    ratio = fine / coarse if coarse > 0 else 0.0
    passed_floor = fine <= 1e-14
    report.add_check(
        "xi_continuity",
        0.0 if passed_floor else ratio,
        CONTINUITY_RATIO,
        {"error_1e-4": coarse, "error_1e-6": fine},
    )


def verify_determinants(
    spec: WellSpec, seed: int = DEFAULT_SEED, kappa_max: float = 10.0
) -> VerificationReport:
    """
    Internal and closed-form consistency checks of the determinant of one well.

    Closed-form comparisons are reported as skipped for L > 2.
    """
    rng = np.random.default_rng(seed)
    kappas = _kappa_samples(rng, 50)
    report = VerificationReport(
        seed, {"positions": list(spec.positions), "couplings": list(spec.couplings)}
    )
    _check_reality(report, spec, kappas)
    _check_ratio(report, spec)
    _check_degeneration(report, spec, kappas)
    _check_redundancy(report, spec, kappa_max)
    _check_continuity(report, spec, kappas)
    return report


def _match(first: Sequence[float], second: Sequence[float]) -> float:
    """Largest distance between matched entries; inf when the counts differ."""
    if len(first) != len(second):
        return math.inf
    return _worst(abs(a - b) for a, b in zip(sorted(first), sorted(second)))


def _dedupe(values: Iterable[float]) -> List[float]:
    unique: List[float] = []
    for value in sorted(values):
        if not unique or value - unique[-1] > 1e-9:
            unique.append(value)
    return unique


def verify_rational_a(
    xi_list: Sequence[float] = DEFAULT_XI_LIST,
    kappa_max: float = 20.0,
    seed: int = DEFAULT_SEED,
) -> VerificationReport:
    """
    Root sets of det_L1 against the factorized conditions at a = 1/2, 1/3, 2/3, 1/4.

    Roots within 1e-6 of kappa_max are left out on both sides.
    """
    report = VerificationReport(seed, {"xi": list(xi_list), "kappa_max": kappa_max})
    config = ScanConfig(kappa_max=kappa_max)
    edge = kappa_max - 1e-6
    for tag in RationalPosition:
        for xi in xi_list:
            spec = WellSpec((tag.position,), (float(xi),))
            records = find_real_roots(spec, config, backend="closed", max_workers=1)
            direct = [r.kappa for r in records]
            dependent, exact = reduced_conditions(tag, float(xi))
            exact_roots = exact.roots(kappa_max, config.kappa_min)
            factored = _dedupe(dependent.roots(kappa_max, config.kappa_min) + exact_roots)
            direct = [k for k in direct if k < edge]
            factored = [k for k in factored if k < edge]
            report.add_check(
                f"root_sets a={tag.value} xi={xi:g}",
                _match(direct, factored),
                ROOT_MATCH_TOL,
                {"direct": len(direct), "factored": len(factored)},
            )
            flat = _worst(abs(float(det_L1(k, tag.position, float(xi)))) for k in exact_roots)
            report.add_check(
                f"exact_roots a={tag.value} xi={xi:g}", flat, 1e-10, {"roots": len(exact_roots)}
            )

    third = reduced_conditions(RationalPosition.THIRD, 1.0)[1].roots(kappa_max)
    two_thirds = reduced_conditions(RationalPosition.TWO_THIRDS, 1.0)[1].roots(kappa_max)
    report.add_check(
        "exact_roots_shared a=1/3,2/3", _match(third, two_thirds), 0.0, {"roots": len(third)}
    )
    return report


__all__ = [
    "DEFAULT_SEED",
    "VerificationReport",
    "verify_determinants",
    "verify_rational_a",
]
