import contextvars
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")


def fan_out(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """Map ``fn`` over ``items``; results come back in input order whatever ``jobs`` is."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    # workers inherit the caller's run id
    ctx = contextvars.copy_context()

    def _run(item: T) -> R:
        return ctx.copy().run(fn, item)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run, items))
