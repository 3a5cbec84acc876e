"""Injectable time sources so latency math and date tools are testable."""

import time
from datetime import datetime, timezone


class Clock:
    """Monotonic milliseconds plus wall-clock time, swappable in tests."""

    def now_ms(self) -> int:
        """Monotonic timestamp in milliseconds."""
        return int(time.monotonic() * 1000)

    def wall(self) -> datetime:
        """Current wall-clock time, timezone-aware."""
        return datetime.now(timezone.utc)


class ManualClock(Clock):
    """Clock that only moves when told to. Wall time tracks the monotonic offset."""

    def __init__(self, start_ms: int = 0, wall_start: datetime | None = None):
        self._now_ms = start_ms
        self._wall_start = wall_start or datetime(2025, 1, 1, tzinfo=timezone.utc)

    def now_ms(self) -> int:
        return self._now_ms

    def wall(self) -> datetime:
        from datetime import timedelta

        return self._wall_start + timedelta(milliseconds=self._now_ms)

    def advance(self, ms: int) -> None:
        if ms < 0:
            raise ValueError("clock cannot move backwards")
        self._now_ms += ms
