from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from hotelling.core import Segment, validate


def pair_up(xs, flags):
    """Co-locate ``xs[i]`` with ``xs[i-1]`` where ``flags[i]`` is set, never stacking three."""
    xs = sorted(xs)
    out = list(xs)
    for i in range(1, len(out)):
        if flags[i] and not (i >= 2 and out[i - 1] == out[i - 2]):
            out[i] = out[i - 1]
    return out


def random_config(rng: np.random.Generator, n: int, segment: Segment | None = None, pair_prob: float = 0.35):
    a, b = (segment.a, segment.b) if segment else (0.0, 1.0)
    xs = rng.uniform(a, b, size=n)
    flags = rng.random(n) < pair_prob
    return validate(pair_up(xs, flags), segment or Segment(0.0, 1.0))


unit_floats = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def configurations(draw, min_n: int = 1, max_n: int = 8):
    n = draw(st.integers(min_n, max_n))
    xs = draw(st.lists(unit_floats, min_size=n, max_size=n, unique=True))
    flags = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    return validate(pair_up(xs, flags))


probabilities = st.floats(0.0, 1.0, allow_nan=False)
open_probabilities = st.floats(0.01, 0.99, allow_nan=False)


# -- acceptance reporting -------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, str]] = {}


class criterion:
    """Record PASS/FAIL for one acceptance criterion; failures still propagate."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        ACCEPTANCE[self.number] = (status, self.title)
        print(f"[{status}] criterion {self.number}: {self.title}")
        return False


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, title = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}")
