"""Piecewise-inertial worldlines in 1+1 dimensions (units with c = 1).

A worldline is an ordered sequence of inertial `Segment`s.  Each segment is
parameterized by its coordinate duration; its proper duration follows from the
Lorentz factor.  `build_cycle` accumulates the (tau, t, x) anchor at the start of
every segment, and `solve_periodic_cycle` solves the cyclicity and periodicity
constraints for the four-segment cycle

    rest (T_a) -> +v_b (T_b) -> -v_c (T_c) -> rest (T_a)

so that the total proper time is n*pi/omega and the total coordinate time is
m*pi/k.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from itertools import accumulate
from typing import Any, Mapping, NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from udw_transparency.errors import (
    EmptySegmentList,
    InadmissibleParams,
    InvalidSegment,
    NonCyclicInterval,
    UnphysicalGammaB,
    VelocityBoundViolated,
    VelocityOutOfRange,
)

log = logging.getLogger(__name__)

CYCLIC_TOLERANCE = 1e-12


class Anchor(NamedTuple):
    """Proper time, coordinate time and position at the start of a segment."""

    tau: float
    t: float
    x: float


@dataclass(frozen=True)
class Segment:
    velocity: float
    coord_duration: float

    def __post_init__(self) -> None:
        # Written as negations so that NaN is rejected too.
        if not abs(self.velocity) < 1:
            raise VelocityOutOfRange(
                f"Segment velocity must satisfy |v| < 1, got {self.velocity}"
            )
        if not self.coord_duration > 0:
            raise InvalidSegment(
                f"Segment coordinate duration must be positive, got {self.coord_duration}"
            )

    @property
    def gamma(self) -> float:
        return 1.0 / math.sqrt(1.0 - self.velocity**2)

    @property
    def proper_duration(self) -> float:
        return self.coord_duration / self.gamma

    def advance(self, anchor: Anchor) -> Anchor:
        """Return the anchor reached after traversing this segment from `anchor`."""
        return Anchor(
            tau=anchor.tau + self.proper_duration,
            t=anchor.t + self.coord_duration,
            x=anchor.x + self.velocity * self.coord_duration,
        )


@dataclass(frozen=True)
class CycleSpec:
    """A worldline made of inertial segments with cumulative anchors.

    `anchors[s]` is the (tau, t, x) point at which `segments[s]` starts, and `end`
    is the point reached after the last segment.  A cycle without segments is a
    zero-duration window whose `end` is also its start.
    """

    segments: tuple[Segment, ...]
    anchors: tuple[Anchor, ...]
    end: Anchor

    def __post_init__(self) -> None:
        if len(self.anchors) != len(self.segments):
            raise ValueError(
                f"Expected one anchor per segment, got {len(self.anchors)} anchors"
                f" for {len(self.segments)} segments"
            )

    @property
    def start(self) -> Anchor:
        return self.anchors[0] if self.anchors else self.end

    @property
    def is_cyclic(self) -> bool:
        return abs(self.end.x - self.start.x) < CYCLIC_TOLERANCE

    @property
    def proper_duration(self) -> float:
        return self.end.tau - self.start.tau

    @property
    def coord_duration(self) -> float:
        return self.end.t - self.start.t

    def to_json(self) -> dict[str, Any]:
        start = self.start
        return {
            "segments": [
                {"v": segment.velocity, "T": segment.coord_duration}
                for segment in self.segments
            ],
            "t0": start.t,
            "x0": start.x,
            "tau0": start.tau,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> CycleSpec:
        segments = [Segment(float(s["v"]), float(s["T"])) for s in data["segments"]]

        return build_cycle(
            segments,
            t0=float(data.get("t0", 0.0)),
            x0=float(data.get("x0", 0.0)),
            tau0=float(data.get("tau0", 0.0)),
        )


@dataclass(frozen=True)
class PeriodicityParams:
    """Parameters of the four-segment periodic cycle.

    `omega` is the qubit gap, `k` the mode frequency, `m` and `n` the integers
    fixing the coordinate period m*pi/k and the proper period n*pi/omega, `T_a`
    the coordinate duration of each rest segment and `v_c` the return speed.
    """

    omega: float
    k: float
    m: int
    n: int
    T_a: float
    v_c: float

    def __post_init__(self) -> None:
        if not (self.omega > 0 and self.k > 0):
            raise InadmissibleParams(
                f"Gap and mode frequency must be positive: omega={self.omega},"
                f" k={self.k}"
            )
        if self.m < 1 or self.n < 1:
            raise InadmissibleParams(
                f"Period multiples must be positive integers: m={self.m}, n={self.n}"
            )
        if not self.T_a > 0:
            raise InadmissibleParams(f"Rest duration must be positive: T_a={self.T_a}")
        if not 0 < self.v_c < 1:
            raise VelocityOutOfRange(f"Return speed must lie in (0, 1): v_c={self.v_c}")

    @property
    def n_o(self) -> float:
        return math.pi * self.n / self.omega

    @property
    def m_k(self) -> float:
        return math.pi * self.m / self.k

    @property
    def admissible(self) -> bool:
        return self.m_k > 2 * self.T_a and self.n_o > 2 * self.T_a

    @property
    def gamma_c(self) -> float:
        return 1.0 / math.sqrt(1.0 - self.v_c**2)

    def at(self, *, v_c: float, T_a: float) -> PeriodicityParams:
        """Return a copy of these parameters at another (v_c, T_a) point."""
        return replace(self, v_c=v_c, T_a=T_a)


def build_cycle(
    segments: Sequence[Segment],
    *,
    t0: float = 0.0,
    x0: float = 0.0,
    tau0: float = 0.0,
) -> CycleSpec:
    """Accumulate segment anchors starting from (tau0, t0, x0).

    Raises
    ------
    EmptySegmentList
        if `segments` is empty
    """
    if not segments:
        raise EmptySegmentList("Cannot build a cycle from an empty list of segments")

    origin = Anchor(tau=tau0, t=t0, x=x0)
    points = tuple(
        accumulate(
            segments, lambda anchor, segment: segment.advance(anchor), initial=origin
        )
    )

    return CycleSpec(segments=tuple(segments), anchors=points[:-1], end=points[-1])


def rest_cycle(
    proper_duration: float, *, t0: float = 0.0, tau0: float = 0.0
) -> CycleSpec:
    """Single v = 0 segment lasting `proper_duration`; the detuned control cycle."""
    return build_cycle([Segment(0.0, proper_duration)], t0=t0, tau0=tau0)


def gamma_c_lower_bound(p: PeriodicityParams) -> float:
    """Lower bound on the return-segment Lorentz factor.

    A physical solution (gamma_b > 1) of the periodicity constraints exists only
    when gamma_c exceeds

        (m_k - n_o)^2 / (2 (m_k - 2 T_a) (n_o - 2 T_a)) + 1

    Raises
    ------
    InadmissibleParams
        if either rest-time slack `m_k - 2 T_a` or `n_o - 2 T_a` is not positive
    """
    coord_slack = p.m_k - 2 * p.T_a
    proper_slack = p.n_o - 2 * p.T_a

    if coord_slack <= 0 or proper_slack <= 0:
        raise InadmissibleParams(
            f"Rest segments leave no room for motion: m_k - 2T_a = {coord_slack},"
            f" n_o - 2T_a = {proper_slack}"
        )

    return (p.m_k - p.n_o) ** 2 / (2 * coord_slack * proper_slack) + 1


def velocity_lower_bound(p: PeriodicityParams) -> float:
    """Speed form of `gamma_c_lower_bound`: v_c must exceed this value."""
    bound = gamma_c_lower_bound(p)
    return math.sqrt(1.0 - 1.0 / bound**2)


def solve_periodic_cycle(p: PeriodicityParams) -> CycleSpec:
    """Solve the cyclicity and periodicity constraints for the four-segment cycle.

    The outbound segment (speed v_b, duration T_b) and the return segment (speed
    v_c, duration T_c = v_b T_b / v_c) are fixed by requiring

        2 T_a + T_b / gamma_b + T_c / gamma_c = n_o
        2 T_a + T_b + T_c                     = m_k

    Parameters
    ----------
    p:
        periodicity parameters; `p.v_c` must exceed `velocity_lower_bound(p)`

    Returns
    -------
    The cycle starting at the origin, rest/outbound/return/rest.

    Raises
    ------
    InadmissibleParams
        if the rest segments alone exceed either period
    VelocityBoundViolated
        if v_c does not exceed the lower bound
    UnphysicalGammaB
        if the constraints force gamma_b <= 1 (including m/k <= n/omega, where the
        proper period would not be shorter than the coordinate period)
    """
    bound = gamma_c_lower_bound(p)
    gamma_c = p.gamma_c

    if not gamma_c > bound:
        raise VelocityBoundViolated(
            f"Return speed v_c={p.v_c} must exceed {velocity_lower_bound(p)}"
            f" (gamma_c={gamma_c} <= {bound})"
        )

    surplus = p.m_k - p.n_o

    if not surplus > 0:
        raise UnphysicalGammaB(
            f"Coordinate period {p.m_k} must exceed proper period {p.n_o}"
        )

    ratio = (p.m_k - 2 * p.T_a) / surplus
    c = 2 * ratio * (1 - ratio) * (1 - gamma_c)
    gamma_b = (c + gamma_c) / (c - 1) if c != 1 else math.inf

    if not (math.isfinite(gamma_b) and gamma_b > 1):
        raise UnphysicalGammaB(f"Outbound Lorentz factor is unphysical: {gamma_b}")

    inv_b = 1.0 / gamma_b
    v_b = math.sqrt((1.0 - inv_b) * (1.0 + inv_b))
    T_b = surplus / (1 - inv_b + (v_b / p.v_c) * (1 - 1 / gamma_c))
    T_c = v_b * T_b / p.v_c

    return build_cycle(
        [
            Segment(0.0, p.T_a),
            Segment(v_b, T_b),
            Segment(-p.v_c, T_c),
            Segment(0.0, p.T_a),
        ]
    )


def constraint_residuals(cycle: CycleSpec, p: PeriodicityParams) -> tuple[float, float]:
    """Absolute residuals of the proper-time and coordinate-time period constraints."""
    proper = math.fsum(segment.proper_duration for segment in cycle.segments)
    coord = math.fsum(segment.coord_duration for segment in cycle.segments)

    return abs(proper - p.n_o), abs(coord - p.m_k)


def concat_intervals(intervals: Sequence[CycleSpec], repeats: int = 1) -> CycleSpec:
    """Chain cyclic intervals end-to-start, `repeats` times over.

    The result starts where the first interval starts.  Because anchors carry
    absolute (tau, t, x), the phase accumulated by earlier intervals is carried
    into later ones without further bookkeeping.

    Raises
    ------
    NonCyclicInterval
        if any interval does not return to its starting position
    """
    if repeats < 1:
        raise ValueError(f"Repeat count must be a positive integer, got {repeats}")
    if not intervals:
        raise EmptySegmentList("Cannot concatenate an empty list of intervals")

    for index, interval in enumerate(intervals):
        if not interval.is_cyclic:
            raise NonCyclicInterval(
                f"Interval {index} ends at x={interval.end.x},"
                f" not at its start x={interval.start.x}"
            )

    start = intervals[0].start
    segments = [
        segment
        for _ in range(repeats)
        for interval in intervals
        for segment in interval.segments
    ]

    return build_cycle(segments, t0=start.t, x0=start.x, tau0=start.tau)


def sample_worldline(
    cycle: CycleSpec, points_per_segment: int = 1000
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Sample (tau, t, x) along a worldline, `points_per_segment` per segment.

    The final anchor is appended so the returned arrays close the worldline.
    """
    if points_per_segment < 1:
        raise ValueError(f"Need at least one point per segment, got {points_per_segment}")

    taus, ts, xs = [], [], []

    for segment, anchor in zip(cycle.segments, cycle.anchors):
        u = np.linspace(0.0, segment.proper_duration, points_per_segment, endpoint=False)
        taus.append(anchor.tau + u)
        ts.append(anchor.t + segment.gamma * u)
        xs.append(anchor.x + segment.gamma * segment.velocity * u)

    end = cycle.end
    taus.append(np.array([end.tau]))
    ts.append(np.array([end.t]))
    xs.append(np.array([end.x]))

    return np.concatenate(taus), np.concatenate(ts), np.concatenate(xs)
