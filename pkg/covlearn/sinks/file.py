"""
File sink writing experiment results as CSV or JSON.
"""
import asyncio
import csv
import io
import json
import os
from typing import Any, Dict, List, Optional

import aiofiles

from covlearn.core.models import RESULT_COLUMNS, ResultRow
from covlearn.sinks.base import ResultSink

RESULT_FORMATS = ("csv", "json")


def _format_value(value: Any) -> Any:
    if isinstance(value, float):
        return f"{value:.9g}"
    return value


def _round_value(value: Any) -> Any:
    if isinstance(value, float):
        return float(f"{value:.9g}")
    return value


class ResultFileSink(ResultSink):
    """
    Sink that writes result rows to a file.

    CSV output starts with the header line; JSON output is a single array of
    objects written on shutdown. Floats carry 9 significant digits in both.
    """

    def __init__(self):
        self.path = ""
        self.format = "csv"
        self.file = None
        self._records: List[Dict[str, Any]] = []

    async def initialize(self, config: Dict[str, Any]) -> None:
        """
        Initialize the sink with the provided configuration.

        Args:
            config: Sink configuration with the following keys:
                - path: Path to the output file (required)
                - format: "csv" or "json" (default: "csv")
        """
        self.path = config.get("path")
        if not self.path:
            raise ValueError("File path is required")

        self.format = config.get("format", "csv")
        if self.format not in RESULT_FORMATS:
            raise ValueError(f"Invalid format: {self.format}")

        os.makedirs(os.path.dirname(os.path.abspath(self.path)), exist_ok=True)
        self.file = await aiofiles.open(self.path, mode="w")
        if self.format == "csv":
            await self.file.write(",".join(RESULT_COLUMNS) + "\n")

    async def write(self, rows: List[ResultRow]) -> None:
        """
        Write a batch of result rows.

        Args:
            rows: Rows to write
        """
        if not rows:
            return

        if self.format == "json":
            for row in rows:
                self._records.append(
                    {k: _round_value(v) for k, v in row.to_record().items()}
                )
            return

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        for row in rows:
            writer.writerow([_format_value(v) for v in row.to_record().values()])
        await self.file.write(buffer.getvalue())
        await self.file.flush()

    async def shutdown(self) -> None:
        """
        Flush pending JSON records and close the file.
        """
        if self.file:
            if self.format == "json":
                await self.file.write(json.dumps(self._records, indent=2) + "\n")
                self._records = []
            await self.file.close()
            self.file = None


async def write_results(rows: List[ResultRow], path: str, fmt: str = "csv") -> None:
    """Write rows through a ResultFileSink."""
    sink = ResultFileSink()
    await sink.initialize({"path": path, "format": fmt})
    async with sink:
        await sink.write(rows)


def emit_results(rows: List[ResultRow], path: str, fmt: str = "csv") -> None:
    """
    Write the result table.

    Args:
        rows: Aggregated rows, at least one
        path: Output file
        fmt: "csv" or "json"

    Raises:
        ValueError: If rows is empty or the format is unknown
        OSError: If the path is not writable
    """
    if not rows:
        raise ValueError("No result rows to emit")
    if fmt not in RESULT_FORMATS:
        raise ValueError(f"Invalid format: {fmt}")
    asyncio.run(write_results(rows, path, fmt))


def load_results(path: str, fmt: Optional[str] = None) -> List[ResultRow]:
    """
    Parse a result file written by ``emit_results``.

    Args:
        path: Result file
        fmt: "csv" or "json"; inferred from the extension when omitted

    Returns:
        Rows in file order
    """
    if fmt is None:
        fmt = "json" if path.lower().endswith(".json") else "csv"

    with open(path, "r", newline="") as f:
        if fmt == "json":
            records = json.load(f)
        else:
            reader = csv.DictReader(f)
            if reader.fieldnames != list(RESULT_COLUMNS):
                raise ValueError(f"Unexpected result header in {path}: {reader.fieldnames}")
            records = list(reader)
    return [ResultRow.from_record(record) for record in records]
