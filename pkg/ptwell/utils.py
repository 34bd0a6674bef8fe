"""Utility functions for ptwell."""

import math
import os
from pathlib import Path
from typing import Optional

THREADS_ENV = "PTWELL_THREADS"


def format_real(value: float) -> str:
    """
    Render a real with 16 digits after the point in scientific notation.

    The exponent carries no '+' sign and no zero padding, e.g.
    1.5707963267948966e0 or 2.5000000000000000e-3; 17 significant digits
    reproduce every binary64 value exactly.

    Args:
        value: Number to render

    Returns:
        The formatted number; 'nan', 'inf' or '-inf' for non-finite input
    """
    value = float(value)
    if not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if value == 0.0:
        # -0.0 is written without its sign
        value = 0.0
    mantissa, exponent = f"{value:.16e}".split("e")
    return f"{mantissa}e{int(exponent)}"


def resolve_workers(requested: Optional[int] = None) -> int:
    """
    Number of worker threads for parallel scans.

    An explicit positive request wins; otherwise PTWELL_THREADS is read, where
    0 or an unset/invalid value means one worker per CPU.

    Args:
        requested: Worker count from the command line or caller

    Returns:
        Positive worker count
    """
    if requested is not None and requested > 0:
        return requested
    try:
        configured = int(os.environ.get(THREADS_ENV, "0"))
    except ValueError:
        configured = 0
    if configured > 0:
        return configured
    return os.cpu_count() or 1


def ensure_directory(path: str) -> None:
    """
    Ensure a directory exists, creating it if necessary.

    Args:
        path: The directory path to ensure exists
    """
    if path:
        Path(path).mkdir(parents=True, exist_ok=True)
