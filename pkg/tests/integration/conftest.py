from __future__ import annotations

import os
from typing import Callable

import pytest

from udw_transparency.cli import RunConfig, run_search
from udw_transparency.transparency_search import Intersection

Nearest = Callable[[float, float], Intersection | None]


@pytest.fixture(scope="session")
def published_search() -> list[Intersection]:
    _, intersections = run_search(RunConfig(), threads=os.cpu_count() or 1)

    return intersections


@pytest.fixture(scope="session")
def nearest(published_search: list[Intersection]) -> Nearest:
    """Lowest-residual certified intersection within 0.02 of (v_c, T_a) on both axes."""

    def find(v_c: float, T_a: float) -> Intersection | None:
        close = [
            i
            for i in published_search
            if i.certified and abs(i.v_c - v_c) <= 0.02 and abs(i.T_a - T_a) <= 0.02
        ]

        return min(close, key=lambda i: i.residual, default=None)

    return find


@pytest.fixture(scope="session")
def published_pair(nearest: Nearest) -> list[Intersection]:
    first, second = nearest(0.66, 2.94), nearest(0.46, 4.06)
    assert first is not None and second is not None

    return [first, second]
