"""Outcome registry for the acceptance criteria, reported at session end."""
import time
from contextlib import contextmanager

RESULTS: dict[int, tuple[str, str, float]] = {}


@contextmanager
def criterion(number: int, title: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        RESULTS[number] = ("FAIL", title, time.perf_counter() - start)
        raise
    RESULTS[number] = ("PASS", title, time.perf_counter() - start)
