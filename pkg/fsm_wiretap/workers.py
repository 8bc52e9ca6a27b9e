"""Ordered thread pool for embarrassingly parallel sweeps."""

from __future__ import annotations

import logging
import os
import queue
import threading
from typing import TYPE_CHECKING, Generic, TypeVar

from fsm_wiretap.exceptions import ConfigError

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

logger = logging.getLogger(__name__)

THREADS_ENV = "FSMWT_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else the FSMWT_THREADS environment variable, else 1."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if not raw:
            return 1
        try:
            threads = int(raw)
        except ValueError:
            msg = f"{THREADS_ENV}={raw!r} is not an integer"
            raise ConfigError(msg) from None
    if threads < 1:
        msg = f"Thread count must be at least 1, got {threads}"
        raise ConfigError(msg)
    return threads


class OrderedWorkerPool(Generic[T, R]):
    """Daemon worker threads that drain an indexed work queue.

    Results are stored by input index, so the output order never depends on
    which worker finished first.
    """

    def __init__(self, fn: Callable[[T], R], threads: int) -> None:
        """Initialize the pool.

        Args:
            fn: Function applied to every work item.
            threads: Number of worker threads.
        """
        self.fn = fn
        self.threads = threads
        self.work_queue: queue.Queue[tuple[int, T]] = queue.Queue()
        self._results: dict[int, R] = {}
        self._errors: dict[int, BaseException] = {}
        self._lock = threading.Lock()
        self._workers = [threading.Thread(target=self._work_loop, daemon=True) for _ in range(threads)]

    def _work_loop(self) -> None:
        while True:
            try:
                index, item = self.work_queue.get_nowait()
            except queue.Empty:
                return
            try:
                result = self.fn(item)
            except Exception as exc:  # noqa: BLE001
                with self._lock:
                    self._errors[index] = exc
            else:
                with self._lock:
                    self._results[index] = result
            finally:
                self.work_queue.task_done()

    def run(self, items: Sequence[T]) -> list[R]:
        """Apply fn to every item and return results in input order.

        The exception of the lowest failing index is re-raised.
        """
        for index, item in enumerate(items):
            self.work_queue.put((index, item))
        for worker in self._workers:
            worker.start()
        for worker in self._workers:
            worker.join()
        if self._errors:
            first = min(self._errors)
            logger.debug("%d of %d work items failed; first failure at index %d", len(self._errors), len(items), first)
            raise self._errors[first]
        return [self._results[i] for i in range(len(items))]


def ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: int | None = 1) -> list[R]:
    """Map fn over items on up to ``threads`` threads, preserving input order."""
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return OrderedWorkerPool(fn, min(threads, len(items))).run(items)
