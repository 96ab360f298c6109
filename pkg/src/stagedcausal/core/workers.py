from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
import structlog

from .errors import StagedCausalError

log = structlog.get_logger()

T = TypeVar("T")
R = TypeVar("R")

# (result, error message); exactly one of the two is set
Outcome = Tuple[Optional[R], Optional[str]]

# failures recorded per item; any other exception propagates
RECOVERABLE = (StagedCausalError, ArithmeticError, ValueError, np.linalg.LinAlgError)


def failure_reason(e: BaseException) -> str:
    return str(e) or type(e).__name__


def map_ordered(
    fn: Callable[[T], R],
    items: Sequence[T],
    max_workers: int = 1,
    on_done: Optional[Callable[[int, int], None]] = None,
    task: str = "task",
) -> List[Outcome]:
    """Run ``fn`` over ``items`` and return outcomes in input order.

    Input and numerical failures (``RECOVERABLE``) are captured per item
    instead of aborting the batch; any other exception is re-raised.
    """
    results: List[Outcome] = [(None, None)] * len(items)
    done = 0

    def _record(idx: int, value: Optional[R], err: Optional[str]) -> None:
        nonlocal done
        results[idx] = (value, err)
        done += 1
        if on_done:
            on_done(done, len(items))

    if max_workers <= 1 or len(items) <= 1:
        for idx, item in enumerate(items):
            try:
                _record(idx, fn(item), None)
            except RECOVERABLE as e:
                log.warning(f"{task}.failed", index=idx, error=failure_reason(e))
                _record(idx, None, failure_reason(e))
        return results

    with ThreadPoolExecutor(max_workers=max_workers) as ex:
        futs = {ex.submit(fn, item): idx for idx, item in enumerate(items)}
        for fut in as_completed(futs):
            idx = futs[fut]
            try:
                _record(idx, fut.result(), None)
            except RECOVERABLE as e:
                log.warning(f"{task}.failed", index=idx, error=failure_reason(e))
                _record(idx, None, failure_reason(e))
            except Exception:
                for pending in futs:
                    pending.cancel()
                raise
    return results
