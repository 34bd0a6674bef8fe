"""Command-line interface for ptwell."""

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from dotenv import load_dotenv
from rich.console import Console
from rich.panel import Panel
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TaskProgressColumn,
    TextColumn,
    TimeElapsedColumn,
)
from rich.table import Table

from . import __version__
from .config import (
    Config,
    get_config_path_for_display,
    load_config,
    merge_config_with_args,
    save_config,
)
from .fv import WeightScheme, diagnose, segmented_grid, uniform_grid
from .model import PtWellError, RootRecord, SpecError, WellSpec, parse_well_spec, validate
from .output import CsvWriter, JsonWriter, OutputTable, provenance
from .rootfind import (
    LevelTracker,
    ScanConfig,
    SweepConfig,
    find_real_roots,
)
from .secular import BACKENDS, KAPPA_LIMIT
from .spectral import eigenfunction, evaluate
from .verify import DEFAULT_SEED, verify_determinants, verify_rational_a

# Diagnostics go to stderr so stdout can carry CSV/JSON
console = Console(stderr=True, safe_box=True)
error_console = Console(stderr=True, style="bold red", safe_box=True)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


def _common_options() -> argparse.ArgumentParser:
    """Options shared by every subcommand."""
    common = argparse.ArgumentParser(add_help=False)

    group = common.add_argument_group("Advanced Options")
    group.add_argument("--verbose", "-v", action="store_true", help="Enable verbose output.")
    group.add_argument(
        "--quiet", "-q", action="store_true", help="Suppress all output except errors."
    )
    group.add_argument(
        "--threads",
        type=int,
        metavar="N",
        help="Worker threads for root scans (0 = one per CPU). Default: $PTWELL_THREADS",
    )

    scan = common.add_argument_group("Scan Tolerances")
    scan.add_argument("--kappa-min", dest="kappa_min", type=float, metavar="K")
    scan.add_argument("--step", type=float, metavar="H", help="Root scan grid step.")
    scan.add_argument("--refine-tol", dest="refine_tol", type=float, metavar="TOL")
    scan.add_argument("--residual-tol", dest="residual_tol", type=float, metavar="TOL")

    config_group = common.add_argument_group("Configuration")
    config_group.add_argument(
        "--config",
        "-c",
        metavar="FILE",
        help="Path to configuration file. Auto-detected if not specified.",
    )
    config_group.add_argument(
        "--save-config",
        metavar="FILE",
        nargs="?",
        const=True,
        help="Save current settings to config file and exit. "
        "Optionally specify output path (default: .ptwell.toml).",
    )
    config_group.add_argument(
        "--no-config",
        action="store_true",
        help="Ignore configuration files.",
    )
    return common


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser for the CLI."""
    parser = argparse.ArgumentParser(
        prog="ptwell",
        description="Bound states of PT-symmetric square wells with imaginary delta interactions",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Real spectrum up to kappa = 10
  ptwell spectrum well.txt --kmax 10 --out spectrum.csv

  # Follow the six lowest levels while the couplings grow to 40
  ptwell sweep well.txt --xi-to 40 --levels 6 --out sweep.csv

  # Robust/fragile pattern of the eleven lowest levels
  ptwell classify well.txt --levels 11 --xi-max 40

  # Metric diagnostics with 8 levels and unit weights
  ptwell metric well.txt --trunc 8 --omega unit

Spec files:
  domain -1 1
  delta 0.5 3.0      # i*3*delta(x-0.5) - i*3*delta(x+0.5)

Exit codes: 0 ok, 2 bad input, 3 unsupported backend, 4 degenerate levels.
        """,
    )
    parser.add_argument("--version", "-V", action="version", version=f"%(prog)s {__version__}")
    common = _common_options()
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text, description=help_text, parents=[common])
        cmd.add_argument("specfile", help="Potential spec file.")
        cmd.add_argument(
            "--out", "-o", default="-", metavar="FILE", help="Output file (- = stdout)."
        )
        return cmd

    spectrum = command("spectrum", "List the real bound-state roots kappa_n.")
    spectrum.add_argument("--kmax", type=float, default=10.0, help="Upper end of the scan.")
    spectrum.add_argument("--backend", choices=BACKENDS, default="matrix")

    sweep = command("sweep", "Continue levels while the coupling strength grows.")
    sweep.add_argument("--xi-from", dest="xi_from", type=float, default=0.0)
    sweep.add_argument("--xi-to", dest="xi_to", type=float, default=40.0)
    sweep.add_argument("--steps", type=int, help="Number of strength samples. Default: 401")
    sweep.add_argument("--levels", type=int, default=6, help="Levels 1..N to follow.")
    sweep.add_argument("--backend", choices=BACKENDS, default="matrix")
    _sweep_tolerances(sweep)

    classify = command("classify", "Tag levels robust or fragile within a coupling range.")
    classify.add_argument("--levels", type=int, default=6)
    classify.add_argument("--xi-max", dest="xi_max", type=float, default=40.0)
    classify.add_argument(
        "--steps", dest="classify_steps", type=int, help="Strength samples (default: step 0.1)."
    )
    classify.add_argument("--backend", choices=BACKENDS, default="matrix")
    _sweep_tolerances(classify)

    metric = command("metric", "Metric positivity and quasi-Hermiticity diagnostics.")
    metric.add_argument("--trunc", dest="truncation", type=int, help="Levels kept. Default: 12")
    metric.add_argument("--grid", type=int, help="Grid points. Default: 1024")
    metric.add_argument(
        "--grid-kind", dest="grid_kind", choices=("segmented", "uniform"), default="segmented"
    )
    metric.add_argument("--omega", choices=("unit", "inv-mu2"), help="Weight scheme.")
    metric.add_argument("--seed", type=int, default=DEFAULT_SEED)

    verify = command("verify", "Run the determinant cross-checks; exit 0 iff all pass.")
    verify.add_argument("--seed", type=int, default=DEFAULT_SEED)
    verify.add_argument("--kmax", type=float, default=10.0)
    verify.add_argument(
        "--rational", action="store_true", help="Also check the factorized conditions."
    )

    wave = command("wavefunction", "Sample psi_n(x) on a uniform grid.")
    wave.add_argument("--level", type=int, default=1)
    wave.add_argument("--samples", type=int, default=201)
    return parser


def _sweep_tolerances(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--collision-delta", dest="collision_delta", type=float, metavar="D")
    cmd.add_argument("--ep-tol", dest="ep_tol", type=float, metavar="TOL")


def read_spec_file(path: str) -> WellSpec:
    """
    Read and validate a potential spec file.

    Raises:
        SpecError: Missing file, parse error or invalid spec
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise SpecError(f"cannot read {path}: {e.strerror or e}") from e
    spec = parse_well_spec(text)
    problems = validate(spec)
    if problems:
        raise SpecError("; ".join(problems))
    return spec


def _flags(argv: List[str]) -> List[str]:
    """Command-line words after the subcommand name."""
    return argv[1:] if argv else []


def scan_config(args: argparse.Namespace, kappa_max: float) -> ScanConfig:
    return ScanConfig(
        kappa_max=kappa_max,
        kappa_min=args.kappa_min,
        step=args.step,
        refine_tol=args.refine_tol,
        residual_tol=args.residual_tol,
    )


def lowest_roots(
    spec: WellSpec, args: argparse.Namespace, count: int, kappa_max: float = 10.0
) -> List[RootRecord]:
    """At least `count` real roots, widening the scan until they are found or |kappa| hits its limit."""
    while True:
        roots = find_real_roots(spec, scan_config(args, kappa_max), max_workers=args.threads)
        if len(roots) >= count or kappa_max >= KAPPA_LIMIT:
            return roots
        kappa_max = min(KAPPA_LIMIT, 2 * kappa_max)


def print_header(args: argparse.Namespace, spec: WellSpec, config_file: Optional[str]) -> None:
    """Print the startup header with the well and settings."""
    info_lines = [
        f"[bold]Command:[/bold] {args.command}",
        f"[bold]Spec:[/bold] {args.specfile} (L={spec.count})",
    ]
    for a, xi in zip(spec.positions, spec.couplings):
        info_lines.append(f"  delta at +-{a:g}, xi={xi:g}")
    info_lines.append(f"[bold]Output:[/bold] {'stdout' if args.out == '-' else args.out}")
    if config_file:
        info_lines.append(f"[bold]Config:[/bold] {config_file}")

    panel = Panel(
        "\n".join(info_lines),
        title=f"[bold cyan]ptwell v{__version__}[/bold cyan]",
        border_style="cyan",
    )
    console.print(panel)


def _run_with_progress(
    args: argparse.Namespace, label: str, work: Callable[[Optional[Callable[[int, int], None]]], Any]
) -> Any:
    if args.quiet:
        return work(None)
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=not args.verbose,
    ) as progress:
        task = progress.add_task(label, total=None)

        def update(done: int, total: int) -> None:
            progress.update(task, completed=done, total=total)

        return work(update)


def cmd_spectrum(args: argparse.Namespace, spec: WellSpec, header: str) -> int:
    roots = find_real_roots(
        spec, scan_config(args, args.kmax), backend=args.backend, max_workers=args.threads
    )
    table = OutputTable(["n", "kappa", "epsilon", "residual"])
    for root in roots:
        table.add_row(root.index, root.kappa, root.epsilon, root.residual)
    CsvWriter(args.out).write(table, header)
    if not args.quiet:
        console.print(f"[green]+[/green] Found [bold]{len(roots)}[/bold] real roots up to {args.kmax:g}")
    return EXIT_OK


def _tracker(args: argparse.Namespace, spec: WellSpec, sweep: Optional[SweepConfig]) -> LevelTracker:
    return LevelTracker(
        spec,
        scan_config(args, 10.0),
        sweep,
        backend=args.backend,
        verbose=args.verbose,
        quiet=args.quiet,
        max_workers=args.threads,
    )


def cmd_sweep(args: argparse.Namespace, spec: WellSpec, header: str) -> int:
    sweep = SweepConfig(args.xi_from, args.xi_to, args.steps, args.collision_delta, args.ep_tol)
    tracker = _tracker(args, spec, sweep)
    traces = _run_with_progress(
        args,
        "Continuing levels",
        lambda update: tracker.continue_levels(range(1, args.levels + 1), sweep, update),
    )
    table = OutputTable(["level", "xi", "kappa_re", "kappa_im", "status"])
    for trace in traces:
        for sample in trace.samples:
            table.add_row(
                trace.level, sample.xi, sample.kappa.real, sample.kappa.imag, sample.status.value
            )
        if trace.is_lost:
            table.add_row(trace.level, trace.lost_at, None, None, "Lost")
    CsvWriter(args.out).write(table, header)
    if not args.quiet:
        merged = sum(1 for t in traces if t.merged is not None)
        console.print(f"[green]+[/green] {len(traces)} levels, {merged} merged in range")
    return EXIT_OK


def cmd_classify(args: argparse.Namespace, spec: WellSpec, header: str) -> int:
    tracker = _tracker(args, spec, SweepConfig(0.0, args.xi_max, 2, args.collision_delta, args.ep_tol))
    classes = _run_with_progress(
        args,
        "Classifying levels",
        lambda update: tracker.classify(args.levels, args.xi_max, args.classify_steps, update),
    )
    table = OutputTable(["n", "tag", "xi_c"])
    for item in classes:
        table.add_row(item.level, item.tag.value, item.xi_c)
    CsvWriter(args.out).write(table, header)

    if not args.quiet:
        summary = Table(
            title=f"Levels within xi <= {args.xi_max:g}", show_header=True, header_style="bold cyan"
        )
        summary.add_column("n", justify="right")
        summary.add_column("Tag")
        summary.add_column("Partner", justify="right")
        summary.add_column("xi_c", justify="right")
        for item in classes:
            summary.add_row(
                str(item.level),
                item.tag.value,
                "" if item.partner is None else str(item.partner),
                "" if item.xi_c is None else f"{item.xi_c:.10g}",
            )
        console.print(summary)
        console.print(f"[dim]Pattern: {''.join(item.tag.letter for item in classes)}[/dim]")
    return EXIT_OK


def cmd_metric(args: argparse.Namespace, spec: WellSpec, header: str) -> int:
    roots = lowest_roots(spec, args, args.truncation)[: args.truncation]
    grid = segmented_grid(spec, args.grid) if args.grid_kind == "segmented" else uniform_grid(args.grid)
    report = diagnose(
        spec,
        roots,
        truncation=args.truncation,
        grid=grid,
        scheme=WeightScheme(args.omega),
        seed=args.seed,
        quiet=args.quiet,
    )
    JsonWriter(args.out).write(report.to_dict(), header)
    if not args.quiet:
        console.print(
            f"[green]+[/green] min eigenvalue {report.min_eigenvalue_of_product_gram:.3e}, "
            f"quasi-Hermiticity residual {report.quasi_hermiticity_residual_max:.3e}"
        )
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, spec: WellSpec, header: str) -> int:
    report = verify_determinants(spec, args.seed, args.kmax)
    if args.rational:
        report.extend(verify_rational_a(seed=args.seed))
    JsonWriter(args.out).write(report.generate(), header)
    if not args.quiet:
        for name in report.failures:
            console.print(f"  [red]x[/red] {name}")
        status = "[green]passed[/green]" if report.passed else "[red]failed[/red]"
        console.print(f"Verification {status} ({len(report.checks)} checks)")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_wavefunction(args: argparse.Namespace, spec: WellSpec, header: str) -> int:
    if args.level < 1 or args.samples < 2:
        raise SpecError("--level must be >= 1 and --samples >= 2")
    roots = lowest_roots(spec, args, args.level)
    if len(roots) < args.level:
        raise PtWellError(f"only {len(roots)} real levels found, level {args.level} requested")
    psi = eigenfunction(spec, roots[args.level - 1].kappa, args.level)

    xs = np.linspace(-1.0, 1.0, args.samples)
    # exact mirror symmetry of the sample points
    xs = 0.5 * (xs - xs[::-1])
    values = evaluate(psi, xs)
    values[0] = values[-1] = 0.0

    table = OutputTable(["x", "psi_re", "psi_im"])
    for x, value in zip(xs, values):
        table.add_row(float(x), float(value.real), float(value.imag))
    CsvWriter(args.out).write(table, header)
    if not args.quiet:
        console.print(
            f"[green]+[/green] Level {args.level}: kappa={psi.kappa:.15g}, rho={psi.rho:.6g}"
        )
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, WellSpec, str], int]] = {
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "classify": cmd_classify,
    "metric": cmd_metric,
    "verify": cmd_verify,
    "wavefunction": cmd_wavefunction,
}


def _current_config(args: argparse.Namespace) -> Config:
    values = {name: getattr(args, name) for name in Config.__dataclass_fields__ if hasattr(args, name)}
    return Config(**{k: v for k, v in values.items() if v is not None})


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the CLI.

    Args:
        argv: Command-line arguments (defaults to sys.argv)

    Returns:
        Exit code (0 ok, 1 numerical failure, 2 bad input, 3 unsupported, 4 degenerate)
    """
    # Load environment variables (PTWELL_THREADS) from .env file if present
    load_dotenv()

    argv = list(sys.argv[1:] if argv is None else argv)
    parser = create_parser()
    args = parser.parse_args(argv)

    # Load and merge configuration file (unless --no-config)
    config_file_used = None
    config = None
    if not args.no_config:
        config = load_config(args.config)
        if config:
            config_file_used = get_config_path_for_display(args.config)
    merge_config_with_args(config, args)

    # Handle --save-config: save current settings and exit
    if args.save_config:
        save_path = args.save_config if isinstance(args.save_config, str) else None
        saved_path = save_config(_current_config(args), save_path)
        console.print(f"[green]+[/green] Configuration saved to: [bold]{saved_path}[/bold]")
        return EXIT_OK

    try:
        spec = read_spec_file(args.specfile)
        if args.verbose and not args.quiet:
            print_header(args, spec, config_file_used)
        header = provenance(args.command, _flags(argv))
        return COMMANDS[args.command](args, spec, header)
    except PtWellError as e:
        error_console.print(f"Error: {e}")
        return e.exit_code
    except ValueError as e:
        error_console.print(f"Error: {e}")
        return EXIT_INPUT
    except OSError as e:
        error_console.print(f"Error: cannot write output: {e}")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
