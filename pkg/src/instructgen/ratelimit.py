"""Token-bucket rate limiting and retry with exponential backoff.

Backend calls run under a per-profile bucket; transient failures are
retried up to the profile's retry budget. Clock and sleep are injectable
so tests run without waiting.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")


class TokenBucket:
    def __init__(
        self,
        rate: float,
        burst: int = 1,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate <= 0 or burst < 1:
            raise ValueError("rate must be > 0 and burst >= 1")
        self.rate = rate
        self.burst = burst
        self._clock = clock
        self._sleep = sleep
        self._tokens = float(burst)
        self._last = clock()
        self._lock = threading.Lock()

    def _refill(self) -> None:
        now = self._clock()
        self._tokens = min(self.burst, self._tokens + (now - self._last) * self.rate)
        self._last = now

    def acquire(self) -> None:
        """Block until a token is available, then consume it."""
        while True:
            with self._lock:
                self._refill()
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


@dataclass(frozen=True)
class RetryPolicy:
    budget: int = 3          # total attempts, not retries
    base_delay: float = 0.1
    max_delay: float = 5.0

    def delay(self, attempt: int) -> float:
        """Backoff before attempt ``attempt`` (first attempt is 0: no wait)."""
        if attempt <= 0:
            return 0.0
        return min(self.base_delay * 2 ** (attempt - 1), self.max_delay)


def call_with_retry(
    fn: Callable[[], T],
    policy: RetryPolicy,
    retry_on: tuple[type[BaseException], ...],
    sleep: Callable[[float], None] = time.sleep,
    on_retry: Callable[[int, BaseException], None] | None = None,
) -> T:
    """Run ``fn`` up to ``policy.budget`` times, backing off between tries."""
    last: BaseException | None = None
    for attempt in range(policy.budget):
        wait = policy.delay(attempt)
        if wait:
            sleep(wait)
        try:
            return fn()
        except retry_on as exc:
            last = exc
            if on_retry:
                on_retry(attempt, exc)
    assert last is not None
    raise last


def run_bounded(tasks: Iterable[Callable[[], T]], max_workers: int = 4) -> list[T]:
    """Run callables under bounded parallelism, preserving input order."""
    from concurrent.futures import ThreadPoolExecutor

    tasks = list(tasks)
    if max_workers <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]
