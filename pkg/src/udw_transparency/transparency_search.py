"""Search the (v_c, T_a) plane for cycles that are both periodic and transparent.

Every grid node is turned into a four-segment periodic cycle with
`solve_periodic_cycle`; nodes where no physical cycle exists are masked.  The zero
curves of Re I^- and Im I^- are traced with marching squares, and cells crossed by
both families seed a damped Newton polish on (Re I^-, Im I^-).
"""

from __future__ import annotations

import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import cached_property, partial
from itertools import combinations, groupby
from typing import Iterable, Iterator, Sequence

import numpy as np
from numpy.typing import NDArray

from udw_transparency.errors import (
    InadmissibleParams,
    InsufficientIntersections,
    LabelNotFound,
    PolishDiverged,
    UnphysicalGammaB,
    VelocityBoundViolated,
)
from udw_transparency.phase_integrals import cycle_integrals, minus_integral
from udw_transparency.trajectory import (
    CycleSpec,
    PeriodicityParams,
    concat_intervals,
    solve_periodic_cycle,
)

log = logging.getLogger(__name__)

SCAN_HEADER = ("v_c", "T_a", "re_Iminus", "im_Iminus", "physical")
INTERSECTION_HEADER = ("label", "v_c", "T_a", "residual", "v_b", "T_b", "gamma_b")

# Edge keys: ("v", i, j) joins nodes (i, j)-(i+1, j); ("T", i, j) joins (i, j)-(i, j+1).
EdgeKey = tuple[str, int, int]
Polyline = NDArray[np.float64]


@dataclass(frozen=True)
class SearchGrid:
    omega: float
    k: float
    m: int
    n: int
    v_c_range: tuple[float, float] = (0.4, 0.9)
    T_a_range: tuple[float, float] = (0.0, 6.0)
    resolution: tuple[int, int] = (256, 256)

    def __post_init__(self) -> None:
        (v_lo, v_hi), (t_lo, t_hi) = self.v_c_range, self.T_a_range

        if not 0 <= v_lo < v_hi <= 1:
            raise ValueError(
                f"v_c range must satisfy 0 <= lo < hi <= 1: {self.v_c_range}"
            )
        if not 0 <= t_lo < t_hi:
            raise ValueError(f"T_a range must satisfy 0 <= lo < hi: {self.T_a_range}")
        if min(self.resolution) < 8:
            raise ValueError(f"Resolution must be at least 8 per axis: {self.resolution}")

    @property
    def v_c_nodes(self) -> NDArray[np.float64]:
        return _cell_centres(self.v_c_range, self.resolution[0])

    @property
    def T_a_nodes(self) -> NDArray[np.float64]:
        return _cell_centres(self.T_a_range, self.resolution[1])

    @property
    def spacing(self) -> tuple[float, float]:
        (v_lo, v_hi), (t_lo, t_hi) = self.v_c_range, self.T_a_range
        return (v_hi - v_lo) / self.resolution[0], (t_hi - t_lo) / self.resolution[1]

    def contains(self, v_c: float, T_a: float) -> bool:
        (v_lo, v_hi), (t_lo, t_hi) = self.v_c_range, self.T_a_range
        return v_lo < v_c < v_hi and t_lo < T_a < t_hi

    def params(self, v_c: float, T_a: float) -> PeriodicityParams:
        return PeriodicityParams(
            omega=self.omega, k=self.k, m=self.m, n=self.n, T_a=T_a, v_c=v_c
        )


def _cell_centres(bounds: tuple[float, float], count: int) -> NDArray[np.float64]:
    lo, hi = bounds
    return lo + (np.arange(count) + 0.5) * (hi - lo) / count


@dataclass(frozen=True, eq=False)
class ScanField:
    """I^- sampled on a grid; `values[i, j]` belongs to (v_c[i], T_a[j])."""

    grid: SearchGrid
    v_c: NDArray[np.float64]
    T_a: NDArray[np.float64]
    values: NDArray[np.complex128]
    physical: NDArray[np.bool_]


@dataclass(frozen=True, eq=False)
class ZeroCurves:
    real: tuple[Polyline, ...]
    imag: tuple[Polyline, ...]
    real_cells: frozenset[tuple[int, int]]
    imag_cells: frozenset[tuple[int, int]]
    field: ScanField


@dataclass(frozen=True)
class Intersection:
    """A polished zero of I^-, certified while its residual is within `polish_tol`."""

    v_c: float
    T_a: float
    residual: float
    params: PeriodicityParams
    label: str = ""
    polish_tol: float = 1e-10

    @cached_property
    def cycle(self) -> CycleSpec:
        return solve_periodic_cycle(self.params)

    @cached_property
    def gamma_b_ok(self) -> bool:
        """Whether the parameters still solve to a cycle with a physical return leg."""
        try:
            self.cycle
        except (InadmissibleParams, VelocityBoundViolated, UnphysicalGammaB):
            return False

        return True

    @property
    def certified(self) -> bool:
        return self.residual <= self.polish_tol and self.gamma_b_ok

    @property
    def v_b(self) -> float:
        return self.cycle.segments[1].velocity

    @property
    def T_b(self) -> float:
        return self.cycle.segments[1].coord_duration

    @property
    def gamma_b(self) -> float:
        return self.cycle.segments[1].gamma


@dataclass(frozen=True)
class TransparentPair:
    first: Intersection
    second: Intersection
    cycle: CycleSpec
    I_minus: complex
    I_plus: complex
    trivially_cancelling: bool


def evaluate_node(grid: SearchGrid, v_c: float, T_a: float) -> complex | None:
    """I^- of the periodic cycle at (v_c, T_a), or None where no physical cycle exists."""
    try:
        cycle = solve_periodic_cycle(grid.params(v_c, T_a))
    except (InadmissibleParams, VelocityBoundViolated, UnphysicalGammaB):
        return None

    return minus_integral(cycle, grid.omega, grid.k)


def _scan_row(grid: SearchGrid, v_c: float) -> list[complex | None]:
    return [evaluate_node(grid, float(v_c), float(T_a)) for T_a in grid.T_a_nodes]


def scan(grid: SearchGrid, *, threads: int = 1) -> ScanField:
    """Evaluate I^- at every grid node.

    Rows of constant v_c are farmed out to `threads` worker processes (0 means one
    per CPU); results are placed by index, so the field does not depend on
    scheduling.
    """
    v_nodes, t_nodes = grid.v_c_nodes, grid.T_a_nodes
    log.info(
        "Scanning %d x %d grid for omega=%s, k=%s, m=%d, n=%d",
        len(v_nodes),
        len(t_nodes),
        grid.omega,
        grid.k,
        grid.m,
        grid.n,
    )

    if threads == 1:
        rows = [_scan_row(grid, v_c) for v_c in v_nodes]
    else:
        with ProcessPoolExecutor(max_workers=threads or None) as pool:
            rows = list(pool.map(partial(_scan_row, grid), v_nodes))

    values = np.full((len(v_nodes), len(t_nodes)), complex(math.nan, math.nan))
    physical = np.zeros(values.shape, dtype=bool)

    for i, row in enumerate(rows):
        for j, value in enumerate(row):
            if value is not None:
                values[i, j] = value
                physical[i, j] = True

    log.info("%d of %d nodes admit a physical cycle", physical.sum(), physical.size)

    return ScanField(
        grid=grid, v_c=v_nodes, T_a=t_nodes, values=values, physical=physical
    )


def _edge_point(
    f: NDArray[np.float64],
    v: NDArray[np.float64],
    t: NDArray[np.float64],
    key: EdgeKey,
) -> tuple[float, float]:
    axis, i, j = key
    i2, j2 = (i + 1, j) if axis == "v" else (i, j + 1)
    fa, fb = f[i, j], f[i2, j2]
    s = fa / (fa - fb)

    return v[i] + s * (v[i2] - v[i]), t[j] + s * (t[j2] - t[j])


def _cell_segments(
    f: NDArray[np.float64], above: NDArray[np.bool_], i: int, j: int
) -> list[tuple[EdgeKey, EdgeKey]]:
    corners = (above[i, j], above[i + 1, j], above[i + 1, j + 1], above[i, j + 1])
    edges: tuple[EdgeKey, ...] = (
        ("v", i, j),
        ("T", i + 1, j),
        ("v", i, j + 1),
        ("T", i, j),
    )
    crossed = [edges[e] for e in range(4) if corners[e] != corners[(e + 1) % 4]]

    if len(crossed) == 2:
        return [(crossed[0], crossed[1])]
    if len(crossed) == 4:
        # Saddle: decide which diagonal is connected from the cell-centre average.
        centre = 0.25 * (f[i, j] + f[i + 1, j] + f[i + 1, j + 1] + f[i, j + 1]) >= 0
        if centre == corners[0]:
            return [(edges[0], edges[1]), (edges[2], edges[3])]
        return [(edges[3], edges[0]), (edges[1], edges[2])]

    return []


def _chain(segments: Sequence[tuple[EdgeKey, EdgeKey]]) -> list[list[EdgeKey]]:
    touching: dict[EdgeKey, list[int]] = {}

    for index, (a, b) in enumerate(segments):
        touching.setdefault(a, []).append(index)
        touching.setdefault(b, []).append(index)

    visited: set[int] = set()
    chains = []

    for start, (a, b) in enumerate(segments):
        if start in visited:
            continue

        visited.add(start)
        chain = deque([a, b])

        for grow_right in (True, False):
            while True:
                end = chain[-1] if grow_right else chain[0]
                following = [s for s in touching[end] if s not in visited]

                if not following:
                    break

                visited.add(following[0])
                p, q = segments[following[0]]
                nxt = q if p == end else p

                if grow_right:
                    chain.append(nxt)
                else:
                    chain.appendleft(nxt)

        chains.append(list(chain))

    return chains


def _contour(
    f: NDArray[np.float64],
    valid: NDArray[np.bool_],
    v: NDArray[np.float64],
    t: NDArray[np.float64],
) -> tuple[tuple[Polyline, ...], frozenset[tuple[int, int]]]:
    above = f >= 0
    segments: list[tuple[EdgeKey, EdgeKey]] = []
    cells: set[tuple[int, int]] = set()
    n_v, n_t = f.shape

    for i in range(n_v - 1):
        for j in range(n_t - 1):
            if not valid[i : i + 2, j : j + 2].all():
                continue
            if cell := _cell_segments(f, above, i, j):
                segments.extend(cell)
                cells.add((i, j))

    polylines = tuple(
        np.array([_edge_point(f, v, t, key) for key in chain])
        for chain in _chain(segments)
    )

    return polylines, frozenset(cells)


def extract_zero_curves(field: ScanField) -> ZeroCurves:
    """Trace the Re I^- = 0 and Im I^- = 0 curves of a scanned field.

    Cells with any unphysical corner are skipped.  Each polyline is an (N, 2) array
    of (v_c, T_a) points.
    """
    real, real_cells = _contour(field.values.real, field.physical, field.v_c, field.T_a)
    imag, imag_cells = _contour(field.values.imag, field.physical, field.v_c, field.T_a)
    log.info("Traced %d Re and %d Im zero curves", len(real), len(imag))

    return ZeroCurves(
        real=real, imag=imag, real_cells=real_cells, imag_cells=imag_cells, field=field
    )


def _residual_vector(grid: SearchGrid, point: NDArray[np.float64]) -> NDArray[np.float64]:
    value = evaluate_node(grid, float(point[0]), float(point[1]))

    if value is None:
        raise PolishDiverged(f"Left the physical region at (v_c, T_a) = {tuple(point)}")

    return np.array([value.real, value.imag])


def polish(
    grid: SearchGrid,
    seed: tuple[float, float],
    polish_tol: float = 1e-10,
    *,
    max_iterations: int = 50,
) -> tuple[float, float, float]:
    """Damped Newton iteration on (Re I^-, Im I^-) starting from `seed`.

    The Jacobian is a central finite difference with steps of 1e-7 times each
    axis span; a step that increases the residual is halved until it does not.

    Returns
    -------
    (v_c, T_a, residual)

    Raises
    ------
    PolishDiverged
        if the iteration leaves the physical region, cannot reduce the residual, or
        does not reach `polish_tol` within `max_iterations`
    """
    spans = np.array([np.ptp(grid.v_c_range), np.ptp(grid.T_a_range)], dtype=float)
    steps = 1e-7 * spans
    point = np.array(seed, dtype=float)
    residual = _residual_vector(grid, point)

    for _ in range(max_iterations):
        if np.linalg.norm(residual) < polish_tol:
            break

        jacobian = np.column_stack(
            [
                (
                    _residual_vector(grid, point + h * unit)
                    - _residual_vector(grid, point - h * unit)
                )
                / (2 * h)
                for h, unit in zip(steps, np.eye(2))
            ]
        )

        try:
            step = np.linalg.solve(jacobian, -residual)
        except np.linalg.LinAlgError as e:
            raise PolishDiverged(f"Singular Jacobian at {tuple(point)}") from e

        damping = 1.0

        while True:
            trial = point + damping * step
            try:
                trial_residual = _residual_vector(grid, trial)
            except PolishDiverged:
                trial_residual = None

            if trial_residual is not None and np.linalg.norm(
                trial_residual
            ) < np.linalg.norm(residual):
                break

            damping *= 0.5

            if damping < 1e-10:
                raise PolishDiverged(
                    f"Cannot reduce |I-| = {np.linalg.norm(residual)} at {tuple(point)}"
                )

        point, residual = trial, trial_residual

    norm = float(np.linalg.norm(residual))

    if not norm < polish_tol:
        raise PolishDiverged(
            f"|I-| = {norm} after {max_iterations} iterations from seed {seed}"
        )

    return float(point[0]), float(point[1]), norm


def find_intersections(
    curves: ZeroCurves, polish_tol: float = 1e-10
) -> list[Intersection]:
    """Polish every cell crossed by both zero-curve families into an intersection.

    Candidates that diverge are dropped with a warning.  Polished points closer
    than one grid cell are merged, keeping the lowest residual (ties go to the
    smaller v_c, then the smaller T_a).  Survivors are labelled P1, P2, ... in
    ascending (T_a, v_c) order.
    """
    field = curves.field
    grid = field.grid
    dv, dt = grid.spacing
    polished: list[tuple[float, float, float]] = []

    for i, j in sorted(curves.real_cells & curves.imag_cells):
        seed = (
            0.5 * (field.v_c[i] + field.v_c[i + 1]),
            0.5 * (field.T_a[j] + field.T_a[j + 1]),
        )

        try:
            v_c, T_a, residual = polish(grid, seed, polish_tol)
        except PolishDiverged as e:
            log.warning("Dropping candidate cell (%d, %d): %s", i, j, e)
            continue

        if not grid.contains(v_c, T_a):
            log.warning(
                "Dropping candidate cell (%d, %d): converged outside the grid at %s",
                i,
                j,
                (v_c, T_a),
            )
            continue

        polished.append((v_c, T_a, residual))

    kept: list[tuple[float, float, float]] = []

    for v_c, T_a, residual in sorted(polished, key=lambda p: (p[2], p[0], p[1])):
        if all(abs(v_c - u) >= dv or abs(T_a - s) >= dt for u, s, _ in kept):
            kept.append((v_c, T_a, residual))

    kept.sort(key=lambda p: (p[1], p[0]))

    return [
        Intersection(
            v_c=v_c,
            T_a=T_a,
            residual=residual,
            params=grid.params(v_c, T_a),
            label=f"P{index}",
            polish_tol=polish_tol,
        )
        for index, (v_c, T_a, residual) in enumerate(kept, start=1)
    ]


def _family(intersection: Intersection) -> tuple[float, float, int, int]:
    p = intersection.params
    return p.omega, p.k, p.m, p.n


def make_pair(
    first: Intersection, second: Intersection, polish_tol: float = 1e-10
) -> TransparentPair:
    """Concatenate two certified intervals into one two-interval trajectory.

    Raises
    ------
    InsufficientIntersections
        if the intervals do not share (omega, k, m, n)
    """
    if _family(first) != _family(second):
        raise InsufficientIntersections(
            f"Cannot pair {first.label} {_family(first)} with"
            f" {second.label} {_family(second)}"
        )

    omega, k, _, _ = _family(first)
    cycle = concat_intervals([first.cycle, second.cycle])
    integrals = cycle_integrals(cycle, omega, k)

    if not abs(integrals.I_minus) < 2 * polish_tol:
        log.warning(
            "Pair %s+%s is not transparent: |I-| = %s",
            first.label,
            second.label,
            abs(integrals.I_minus),
        )

    return TransparentPair(
        first=first,
        second=second,
        cycle=cycle,
        I_minus=integrals.I_minus,
        I_plus=integrals.I_plus,
        trivially_cancelling=abs(integrals.I_plus) < 1e-12,
    )


def pair_intervals(
    intersections: Iterable[Intersection], polish_tol: float = 1e-10
) -> list[TransparentPair]:
    """Every unordered pair of certified intersections sharing (omega, k, m, n).

    Raises
    ------
    InsufficientIntersections
        if no family holds at least two certified intersections
    """
    certified = sorted((i for i in intersections if i.certified), key=_family)
    pairs = [
        make_pair(first, second, polish_tol)
        for _, family in groupby(certified, key=_family)
        for first, second in combinations(list(family), 2)
    ]

    if not pairs:
        raise InsufficientIntersections(
            "Pairing needs at least two certified intersections with equal"
            " (omega, k, m, n)"
        )

    return pairs


def select(
    intersections: Sequence[Intersection], labels: Sequence[str]
) -> list[Intersection]:
    """Look up intersections by label, preserving the order of `labels`.

    Raises
    ------
    LabelNotFound
        if a label matches no intersection
    """
    by_label = {i.label: i for i in intersections}

    if missing := [label for label in labels if label not in by_label]:
        raise LabelNotFound(
            f"Unknown intersection label(s) {missing}; known: {sorted(by_label)}"
        )

    return [by_label[label] for label in labels]


def scan_rows(field: ScanField) -> Iterator[tuple[float, float, float, float, int]]:
    for i, v_c in enumerate(field.v_c):
        for j, T_a in enumerate(field.T_a):
            value = field.values[i, j]
            physical = int(field.physical[i, j])
            yield float(v_c), float(T_a), value.real, value.imag, physical


def intersection_rows(
    intersections: Iterable[Intersection],
) -> Iterator[tuple[str, float, float, float, float, float, float]]:
    for i in intersections:
        yield i.label, i.v_c, i.T_a, i.residual, i.v_b, i.T_b, i.gamma_b
