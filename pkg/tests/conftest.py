import pytest

from geomseries.planner import AutoPlanner


@pytest.fixture(scope="session")
def auto_planner():
    # shared factor-split memo; reads are idempotent so sharing is safe
    return AutoPlanner()


def brute_series(n: int, x):
    """Independent oracle: literal sum of the first n powers."""
    total = x**0
    for k in range(1, n):
        total = total + x**k
    return total


def poly_mul(a: list, b: list) -> list:
    """Schoolbook convolution over exact ints (test-side reference)."""
    out = [0] * (len(a) + len(b) - 1)
    for i, c in enumerate(a):
        if c:
            for j, d in enumerate(b):
                out[i + j] += c * d
    return out


def poly_add(a: list, b: list) -> list:
    out = [0] * max(len(a), len(b))
    for i, c in enumerate(a):
        out[i] += c
    for i, c in enumerate(b):
        out[i] += c
    return out
