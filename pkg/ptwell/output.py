"""CSV and JSON writers with a provenance header."""

import json
import sys
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .utils import ensure_directory, format_real

STDOUT = "-"


def provenance(command: str, flags: Sequence[str]) -> str:
    """'ptwell <version> <command> <flags>' for the first line of every output."""
    return " ".join(["ptwell", __version__, command, *flags]).rstrip()


def format_cell(value: Any) -> str:
    """Floats in 17-digit scientific notation, None as an empty cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_real(value)
    return str(value)


@dataclass
class OutputTable:
    """Header plus rows of equal length."""

    header: List[str]
    rows: List[List[Any]] = field(default_factory=list)

    def add_row(self, *values: Any) -> None:
        if len(values) != len(self.header):
            raise ValueError(
                f"row has {len(values)} cells, table has {len(self.header)} columns"
            )
        self.rows.append(list(values))


class BaseWriter(ABC):
    """Abstract base class for result writers."""

    format_name: str = ""
    file_extension: str = ""

    def __init__(self, destination: Optional[str] = None):
        """
        Initialize the writer.

        Args:
            destination: Output file, or '-'/None for stdout
        """
        self.destination = destination or STDOUT

    @abstractmethod
    def convert(self, payload: Any, header: str) -> str:
        """
        Render the payload.

        Args:
            payload: Table or document to render
            header: Provenance text

        Returns:
            The complete file contents
        """

    def write(self, payload: Any, header: str) -> str:
        """
        Write the rendered payload to the destination.

        Returns:
            Path written, or '-' for stdout
        """
        content = self.convert(payload, header)
        if self.destination == STDOUT:
            sys.stdout.write(content)
            sys.stdout.flush()
            return STDOUT

        output_path = Path(self.destination)
        if output_path.parent:
            ensure_directory(str(output_path.parent))
        # newline="\n" keeps Unix line endings on every platform
        with output_path.open("w", encoding="utf-8", newline="\n") as f:
            f.write(content)
        return str(output_path)


class CsvWriter(BaseWriter):
    """Comma-separated table preceded by a '# ' provenance comment."""

    format_name = "csv"
    file_extension = ".csv"

    def convert(self, payload: OutputTable, header: str) -> str:
        lines = [f"# {header}", ",".join(payload.header)]
        lines.extend(",".join(format_cell(v) for v in row) for row in payload.rows)
        return "\n".join(lines) + "\n"


class JsonWriter(BaseWriter):
    """JSON document carrying the provenance as its first field."""

    format_name = "json"
    file_extension = ".json"

    def convert(self, payload: Dict[str, Any], header: str) -> str:
        document = {"provenance": header, **payload}
        return json.dumps(document, indent=2, ensure_ascii=False) + "\n"
