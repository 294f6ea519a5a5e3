"""
Base interface for result sinks.
"""
from abc import ABC, abstractmethod
from typing import Any, Dict, List

from covlearn.core.models import ResultRow


class ResultSink(ABC):
    """
    Destination for the aggregated rows of an experiment.

    A sink is initialized once, receives rows in one or more batches, and is
    shut down exactly once. Used as an async context manager, the shutdown
    happens on exit, also when a write fails.
    """

    @abstractmethod
    async def initialize(self, config: Dict[str, Any]) -> None:
        """
        Open the destination.

        Args:
            config: Sink-specific settings

        Raises:
            ValueError: If the settings are incomplete or invalid
        """

    @abstractmethod
    async def write(self, rows: List[ResultRow]) -> None:
        """Append a batch of rows; an empty batch is a no-op."""

    @abstractmethod
    async def shutdown(self) -> None:
        """Finish the output and release the destination."""

    async def __aenter__(self) -> "ResultSink":
        return self

    async def __aexit__(self, exc_type, exc, tb) -> None:
        await self.shutdown()
