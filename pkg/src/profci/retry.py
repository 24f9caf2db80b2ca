"""Retry with exponential backoff for transient remote failures."""

from __future__ import annotations

import logging
import time
from typing import Callable, TypeVar

log = logging.getLogger(__name__)

T = TypeVar("T")

RETRIES = 3
INITIAL_DELAY = 1.0


class Unavailable(RuntimeError):
    """A remote service could not be reached; safe to retry."""


def with_retries(
    fn: Callable[[], T],
    retries: int = RETRIES,
    initial_delay: float = INITIAL_DELAY,
    sleep: Callable[[float], None] = time.sleep,
) -> T:
    """Call ``fn``, retrying Unavailable up to ``retries`` times (1 s, 2 s, 4 s, ...)."""
    delay = initial_delay
    for attempt in range(retries + 1):
        try:
            return fn()
        except Unavailable as exc:
            if attempt == retries:
                raise
            log.warning("%s; retrying in %.0f s", exc, delay)
            sleep(delay)
            delay *= 2
    raise AssertionError("unreachable")
