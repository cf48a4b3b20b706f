"""Phase integrals I_{s1 s2} of a detector moving along a piecewise-inertial cycle.

For signs s1, s2 in {+1, -1} the integrals are

    I_{s1 s2} = integral dtau exp(i s1 omega tau + i s2 k (t(tau) - x(tau)))

where s1 selects sigma^+ (+1) or sigma^- (-1) and s2 selects a^dagger (+1) or
a (-1).  I_{+-} is the resonant amplitude I^- and I_{++} the non-resonant
amplitude I^+.  Within an inertial segment the exponent is linear in tau, so every
segment contributes a closed-form sinc term; `quadrature_I` integrates the raw
integrand numerically and serves as an independent check.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from functools import cache
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy import integrate

from udw_transparency.errors import (
    InsufficientDetectors,
    QuadratureNonConvergent,
    TransparencyAssertionFailed,
)
from udw_transparency.trajectory import Anchor, CycleSpec, Segment

log = logging.getLogger(__name__)

Sign = Literal[1, -1]
SIGNS: tuple[Sign, Sign] = (1, -1)
SIGN_PAIRS: tuple[tuple[Sign, Sign], ...] = ((1, 1), (1, -1), (-1, 1), (-1, -1))

SERIES_THRESHOLD = 1e-6
GAUSS_ORDER = 32


@dataclass(frozen=True)
class DetectorLayout:
    """Rigid offsets a_j of each detector along x, relative to detector 0."""

    offsets: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        if not self.offsets:
            raise ValueError("A detector layout needs at least one detector")
        if not all(math.isfinite(a) for a in self.offsets):
            raise ValueError(f"Detector offsets must be finite: {self.offsets}")
        if self.offsets[0] != 0:
            raise ValueError(f"Detector 0 must sit at offset 0, got {self.offsets[0]}")

    @classmethod
    def pair(cls, spacing: float = 0.0) -> DetectorLayout:
        return cls((0.0, spacing))

    def __len__(self) -> int:
        return len(self.offsets)


@dataclass(frozen=True)
class PhaseIntegralSet:
    I_pp: complex
    I_pm: complex
    I_mp: complex
    I_mm: complex
    omega: float
    k: float
    detector_index: int = 0

    def __getitem__(self, signs: tuple[int, int]) -> complex:
        return {
            (1, 1): self.I_pp,
            (1, -1): self.I_pm,
            (-1, 1): self.I_mp,
            (-1, -1): self.I_mm,
        }[signs]

    @property
    def I_plus(self) -> complex:
        return self.I_pp

    @property
    def I_minus(self) -> complex:
        return self.I_pm

    def is_transparent(self, tol: float = 1e-8) -> bool:
        return abs(self.I_pm) < tol

    def shifted(self, offset: float, *, detector_index: int) -> PhaseIntegralSet:
        """Integrals of an identical detector displaced rigidly by `offset`.

        Only the field phase changes: each I_{s1 s2} picks up exp(-i s2 k offset).
        """
        plus, minus = cmath.exp(-1j * self.k * offset), cmath.exp(1j * self.k * offset)

        return PhaseIntegralSet(
            I_pp=self.I_pp * plus,
            I_pm=self.I_pm * minus,
            I_mp=self.I_mp * plus,
            I_mm=self.I_mm * minus,
            omega=self.omega,
            k=self.k,
            detector_index=detector_index,
        )


def detuning(segment: Segment, omega: float, k: float, s1: int, s2: int) -> float:
    """Rate of change of the integrand phase with proper time inside `segment`."""
    return s1 * omega + s2 * k * segment.gamma * (1 - segment.velocity)


def anchor_phase(anchor: Anchor, omega: float, k: float, s1: int, s2: int) -> float:
    return s1 * omega * anchor.tau + s2 * k * (anchor.t - anchor.x)


def segment_I(
    segment: Segment, anchor: Anchor, omega: float, k: float, s1: int, s2: int
) -> complex:
    """Closed-form contribution of one inertial segment to I_{s1 s2}.

    With w the segment detuning and x = w * dtau this is

        exp(i phase0) * exp(i x / 2) * sin(x / 2) / (w / 2)

    and, for |x| < 1e-6, the cubic series dtau * (1 + i x/2 - x^2/6 - i x^3/24).
    """
    w = detuning(segment, omega, k, s1, s2)
    dtau = segment.proper_duration
    x = w * dtau

    if abs(x) < SERIES_THRESHOLD:
        factor = dtau * (1 + 0.5j * x - x**2 / 6 - 1j * x**3 / 24)
    else:
        factor = cmath.exp(0.5j * x) * math.sin(x / 2) / (w / 2)

    return cmath.exp(1j * anchor_phase(anchor, omega, k, s1, s2)) * factor


def cycle_integrals(
    cycle: CycleSpec,
    omega: float,
    k: float,
    offset: float = 0.0,
    *,
    detector_index: int = 0,
) -> PhaseIntegralSet:
    """Sum `segment_I` over a cycle for all four sign pairs.

    `offset` displaces the detector rigidly along x, multiplying each integral by
    exp(-i s2 k offset).
    """
    values = {
        (s1, s2): sum(
            (
                segment_I(segment, anchor, omega, k, s1, s2)
                for segment, anchor in zip(cycle.segments, cycle.anchors)
            ),
            start=0j,
        )
        * cmath.exp(-1j * s2 * k * offset)
        for s1, s2 in SIGN_PAIRS
    }

    return PhaseIntegralSet(
        I_pp=values[1, 1],
        I_pm=values[1, -1],
        I_mp=values[-1, 1],
        I_mm=values[-1, -1],
        omega=omega,
        k=k,
        detector_index=detector_index,
    )


def minus_integral(cycle: CycleSpec, omega: float, k: float) -> complex:
    """I^- alone; the quantity driven to zero by the transparency search."""
    return sum(
        (
            segment_I(segment, anchor, omega, k, 1, -1)
            for segment, anchor in zip(cycle.segments, cycle.anchors)
        ),
        start=0j,
    )


def _quad(f, a: float, b: float, *, rel_tol: float, abs_tol: float, limit: int) -> float:
    result = integrate.quad(
        f, a, b, epsrel=rel_tol, epsabs=abs_tol, limit=limit, full_output=1
    )

    # quad appends an explanatory message only when it fails to converge
    if len(result) > 3:
        raise QuadratureNonConvergent(
            f"Adaptive quadrature failed on [{a}, {b}]: {result[3]}"
        )

    return result[0]


def quadrature_I(
    cycle: CycleSpec,
    omega: float,
    k: float,
    s1: int,
    s2: int,
    rel_tol: float = 1e-10,
    *,
    offset: float = 0.0,
    limit: int = 200,
) -> complex:
    """Integrate exp(i s1 omega tau + i s2 k (t - x)) numerically, segment by segment.

    Each segment is integrated with adaptive Gauss-Kronrod quadrature
    (`scipy.integrate.quad`) over its real and imaginary parts.  Absolute
    tolerance is `rel_tol` times a thousandth of the segment duration, the scale
    of an integrand of unit modulus.

    Raises
    ------
    ValueError
        if `rel_tol` is outside (1e-14, 1e-3)
    QuadratureNonConvergent
        if a segment needs more than `limit` subdivisions
    """
    if not 1e-14 < rel_tol < 1e-3:
        raise ValueError(f"Relative tolerance must lie in (1e-14, 1e-3), got {rel_tol}")

    total = 0j

    for segment, anchor in zip(cycle.segments, cycle.anchors):
        gamma, v = segment.gamma, segment.velocity

        def phase(u: float) -> float:
            t = anchor.t + gamma * u
            x = anchor.x + gamma * v * u
            return s1 * omega * (anchor.tau + u) + s2 * k * (t - x)

        dtau = segment.proper_duration
        abs_tol = rel_tol * 1e-3 * dtau
        re, im = (
            _quad(
                lambda u: part(phase(u)),
                0.0,
                dtau,
                rel_tol=rel_tol,
                abs_tol=abs_tol,
                limit=limit,
            )
            for part in (math.cos, math.sin)
        )
        total += complex(re, im)

    return total * cmath.exp(-1j * s2 * k * offset)


def _partial(
    segment: Segment,
    anchor: Anchor,
    omega: float,
    k: float,
    s1: int,
    s2: int,
    u: NDArray[np.float64],
) -> NDArray[np.complex128]:
    """In-segment integral from the segment start to proper-time offsets `u`."""
    w = detuning(segment, omega, k, s1, s2)
    x = w * u
    closed = np.exp(0.5j * x) * np.sin(x / 2) / ((w if w != 0 else 1.0) / 2)
    series = u * (1 + 0.5j * x - x**2 / 6 - 1j * x**3 / 24)

    return cmath.exp(1j * anchor_phase(anchor, omega, k, s1, s2)) * np.where(
        np.abs(x) < SERIES_THRESHOLD, series, closed
    )


def _integrand(
    segment: Segment,
    anchor: Anchor,
    omega: float,
    k: float,
    s1: int,
    s2: int,
    u: NDArray[np.float64],
) -> NDArray[np.complex128]:
    w = detuning(segment, omega, k, s1, s2)
    return np.exp(1j * (anchor_phase(anchor, omega, k, s1, s2) + w * u))


def running_integral(
    cycle: CycleSpec, omega: float, k: float, s1: int, s2: int, tau: float
) -> complex:
    """I_{s1 s2} accumulated from the cycle start up to proper time `tau`."""
    if not cycle.segments or tau <= cycle.start.tau:
        return 0j

    total = 0j

    for segment, anchor in zip(cycle.segments, cycle.anchors):
        if tau >= anchor.tau + segment.proper_duration:
            total += segment_I(segment, anchor, omega, k, s1, s2)
        else:
            u = np.array([tau - anchor.tau])
            return total + complex(_partial(segment, anchor, omega, k, s1, s2, u)[0])

    return total


@cache
def _gauss_legendre(order: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    return np.polynomial.legendre.leggauss(order)


def _ordered_estimate(
    cycle: CycleSpec,
    omega: float,
    k: float,
    first: tuple[int, int],
    second: tuple[int, int],
    panels: int,
) -> complex:
    nodes, weights = _gauss_legendre(GAUSS_ORDER)
    prefix = 0j
    total = 0j

    for segment, anchor in zip(cycle.segments, cycle.anchors):
        width = segment.proper_duration / panels
        left = width * np.arange(panels)[:, None]
        u = (left + 0.5 * width * (nodes + 1)).ravel()
        w = np.tile(0.5 * width * weights, panels)
        inner = prefix + _partial(segment, anchor, omega, k, *second, u)
        outer = _integrand(segment, anchor, omega, k, *first, u)
        total += complex(np.sum(w * outer * inner))
        prefix += segment_I(segment, anchor, omega, k, *second)

    return total


def ordered_integral(
    cycle: CycleSpec,
    omega: float,
    k: float,
    first: tuple[int, int],
    second: tuple[int, int],
    *,
    first_offset: float = 0.0,
    second_offset: float = 0.0,
    rel_tol: float = 1e-10,
    max_refinements: int = 12,
) -> complex:
    """Proper-time-ordered integral of (dI_first / dtau) * I_second(tau).

    `first` and `second` are sign pairs (s1, s2) and (s3, s4); the offsets
    displace the corresponding detectors.  Each segment is integrated with
    composite Gauss-Legendre quadrature of order 32, doubling the panel count
    until successive estimates agree to `rel_tol`.

    Raises
    ------
    QuadratureNonConvergent
        if `max_refinements` doublings do not reach `rel_tol`
    """
    if not cycle.segments:
        return 0j

    floor = 1e-6 * cycle.proper_duration**2
    previous = _ordered_estimate(cycle, omega, k, first, second, 1)

    for level in range(1, max_refinements + 1):
        current = _ordered_estimate(cycle, omega, k, first, second, 2**level)

        if abs(current - previous) <= rel_tol * max(abs(current), floor):
            shift = first[1] * first_offset + second[1] * second_offset
            phase = cmath.exp(-1j * k * shift)
            return current * phase

        previous = current

    raise QuadratureNonConvergent(
        f"Ordered integral {first}x{second} did not converge to {rel_tol}"
        f" after {max_refinements} refinements"
    )


def compute_M(
    cycle: CycleSpec,
    omega: float,
    k: float,
    layout: DetectorLayout,
    *,
    transparent: bool = False,
    transparency_tol: float = 1e-8,
    rel_tol: float = 1e-10,
) -> complex:
    """Second-order two-detector vacuum amplitude M.

    M = (I1_{++} I2_{+-} + I2_{++} I1_{+-})
        - 2 integral dtau (dI1_{+-}/dtau I2_{++} + dI2_{+-}/dtau I1_{++})

    With `transparent` set, the boundary product is checked to be below
    `transparency_tol` and dropped.

    Raises
    ------
    InsufficientDetectors
        if `layout` holds fewer than two detectors
    TransparencyAssertionFailed
        if `transparent` is set but the boundary product is not negligible
    """
    if len(layout) < 2:
        raise InsufficientDetectors(
            f"M couples two detectors; layout has {len(layout)}"
        )

    a1, a2 = layout.offsets[:2]
    I1 = cycle_integrals(cycle, omega, k, a1, detector_index=0)
    I2 = cycle_integrals(cycle, omega, k, a2, detector_index=1)
    boundary = I1.I_pp * I2.I_pm + I2.I_pp * I1.I_pm

    if transparent:
        if abs(boundary) >= transparency_tol:
            raise TransparencyAssertionFailed(
                f"Boundary term |I1++ I2+- + I2++ I1+-| = {abs(boundary)}"
                f" is not below {transparency_tol}"
            )
        boundary = 0j

    mixed = sum(
        (
            ordered_integral(
                cycle,
                omega,
                k,
                (1, -1),
                (1, 1),
                first_offset=a,
                second_offset=b,
                rel_tol=rel_tol,
            )
            for a, b in ((a1, a2), (a2, a1))
        ),
        start=0j,
    )

    return boundary - 2 * mixed

