"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

import contextlib
import time

RESULTS = {}


@contextlib.contextmanager
def criterion(number, title, budget_s=None):
    """Record PASS if the block finishes (within ``budget_s``), FAIL otherwise; failures still raise."""
    start = time.perf_counter()
    notes = []
    try:
        yield notes
    except BaseException as exc:
        RESULTS[number] = f"FAIL criterion {number}: {title} ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
        raise
    elapsed = time.perf_counter() - start
    detail = "; ".join(notes + [f"{elapsed:.1f}s"])
    if budget_s is not None and elapsed >= budget_s:
        RESULTS[number] = f"FAIL criterion {number}: {title} (over {budget_s}s budget: {detail})"
        raise AssertionError(f"took {elapsed:.1f}s, budget {budget_s}s")
    RESULTS[number] = f"PASS criterion {number}: {title} ({detail})"
