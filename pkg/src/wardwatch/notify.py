"""Pluggable notification sinks standing in for staff smartphone delivery.

A sink receives every NotificationMessage the gateway emits for its role
routing; implementations must tolerate concurrent delivery.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path
from typing import Protocol

logger = logging.getLogger(__name__)


class NotificationSink(Protocol):
    def deliver(self, message) -> None: ...


class ConsoleSink:
    """Logs each message; the default for interactive serving."""

    def deliver(self, message) -> None:
        logger.warning(
            "notify %s attempt %d: %s", message.role.value, message.attempt,
            message.text,
        )


class FileSink:
    """Appends one tab-separated line per message."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def deliver(self, message) -> None:
        line = "\t".join(
            [
                f"{message.emitted_at_s:.3f}",
                message.role.value,
                str(message.alert_id),
                str(message.patient_id),
                message.kind.label,
                message.band.label,
                str(message.attempt),
                message.text,
            ]
        )
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")


class MemorySink:
    """Collects messages in memory; used by tests and the in-process runner."""

    def __init__(self):
        self.messages = []
        self._lock = threading.Lock()

    def deliver(self, message) -> None:
        with self._lock:
            self.messages.append(message)

    def for_role(self, role) -> list:
        with self._lock:
            return [m for m in self.messages if m.role is role]
