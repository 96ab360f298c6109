import numpy as np
import pytest

from stagedcausal.causal.models import EstimationError
from stagedcausal.core.workers import map_ordered


def flaky(x):
    if x == 2:
        raise EstimationError("two is bad")
    if x == 3:
        raise np.linalg.LinAlgError("")
    if x == 4:
        return 1 // (x - 4)
    return x * 10


@pytest.mark.parametrize("threads", [1, 3])
def test_failures_are_captured_in_order(threads):
    seen = []
    outcomes = map_ordered(flaky, [0, 1, 2, 3, 4, 5], max_workers=threads, on_done=lambda d, t: seen.append((d, t)))
    assert [v for v, _ in outcomes] == [0, 10, None, None, None, 50]
    assert outcomes[2] == (None, "two is bad")
    assert outcomes[3] == (None, "LinAlgError")
    assert outcomes[4][1] == "integer division or modulo by zero"
    assert seen[-1] == (6, 6)


@pytest.mark.parametrize("threads", [1, 3])
@pytest.mark.parametrize("error", [TypeError, KeyError, AttributeError])
def test_programming_errors_propagate(threads, error):
    def buggy(x):
        if x == 1:
            raise error("bug")
        return x

    with pytest.raises(error):
        map_ordered(buggy, [0, 1, 2], max_workers=threads)
