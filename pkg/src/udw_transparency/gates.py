"""Effective second-order Hamiltonian and single-qubit gates driven by the field.

Sign conventions follow `phase_integrals`: a^{+1} is a^dagger and a^{-1} is a.  The
antisymmetric symbol has eps[-1, +1] = +1 and eps[+1, -1] = -1.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from enum import StrEnum, auto
from itertools import product
from typing import Any, Mapping, NamedTuple, Sequence

import numpy as np

from udw_transparency.errors import DriveCeilingExceeded, Unreachable, ZeroRotation
from udw_transparency.phase_integrals import (
    SIGN_PAIRS,
    SIGNS,
    DetectorLayout,
    ordered_integral,
)
from udw_transparency.trajectory import CycleSpec

log = logging.getLogger(__name__)

EPSILON: Mapping[tuple[int, int], int] = {(-1, 1): 1, (1, -1): -1, (1, 1): 0, (-1, -1): 0}


class FieldKind(StrEnum):
    VACUUM = auto()
    COHERENT = auto()
    SQUEEZED = auto()


@dataclass(frozen=True)
class FieldMoments:
    """First and second moments of a single bosonic mode."""

    a: complex
    a_dag: complex
    aa: complex
    a_dag_a_dag: complex
    a_dag_a: float
    a_a_dag: float

    def first(self, s: int) -> complex:
        return self.a_dag if s == 1 else self.a

    def second(self, left: int, right: int) -> complex:
        """Uncentred <a^left a^right>."""
        return {
            (1, 1): self.a_dag_a_dag,
            (1, -1): complex(self.a_dag_a),
            (-1, 1): complex(self.a_a_dag),
            (-1, -1): self.aa,
        }[left, right]

    def centred(self, left: int, right: int) -> complex:
        """Centred A_{left right} = <a^left a^right> - <a^left><a^right>."""
        return self.second(left, right) - self.first(left) * self.first(right)

    @property
    def A_mp(self) -> float:
        return self.centred(-1, 1).real

    @property
    def A_pm(self) -> float:
        return self.centred(1, -1).real

    @property
    def A_pp(self) -> complex:
        return self.centred(1, 1)

    @property
    def A_mm(self) -> complex:
        return self.centred(-1, -1)


@dataclass(frozen=True)
class FieldState:
    kind: FieldKind = FieldKind.VACUUM
    alpha: complex = 0j
    r: float = 0.0
    phi: float = 0.0

    def __post_init__(self) -> None:
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise ValueError(f"Squeezing parameter must be finite and >= 0, got {self.r}")
        if not (math.isfinite(self.phi) and cmath.isfinite(self.alpha)):
            raise ValueError(f"Field parameters must be finite: {self}")

        object.__setattr__(self, "kind", FieldKind(self.kind))
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "phi", self.phi % (2 * math.pi))

    @classmethod
    def vacuum(cls) -> FieldState:
        return cls()

    @classmethod
    def coherent(cls, alpha: complex) -> FieldState:
        return cls(FieldKind.COHERENT, alpha=alpha)

    @classmethod
    def squeezed(cls, r: float, phi: float = 0.0) -> FieldState:
        return cls(FieldKind.SQUEEZED, r=r, phi=phi)


def field_moments(f: FieldState) -> FieldMoments:
    """Moment table of a vacuum, coherent or squeezed-vacuum mode.

    The squeezed vacuum is S(r, phi)|0> with S = exp(r/2 (e^{-i phi} a^2 - e^{i phi}
    a^dagger^2)), so that <a a> = -sinh(2r) e^{i phi} / 2 and <a^dagger a> = sinh^2 r.
    """
    match f.kind:
        case FieldKind.COHERENT:
            alpha = f.alpha
            n = abs(alpha) ** 2
            return FieldMoments(
                a=alpha,
                a_dag=alpha.conjugate(),
                aa=alpha**2,
                a_dag_a_dag=alpha.conjugate() ** 2,
                a_dag_a=n,
                a_a_dag=n + 1,
            )
        case FieldKind.SQUEEZED:
            aa = -0.5 * math.sinh(2 * f.r) * cmath.exp(1j * f.phi)
            return FieldMoments(
                a=0j,
                a_dag=0j,
                aa=aa,
                a_dag_a_dag=aa.conjugate(),
                a_dag_a=math.sinh(f.r) ** 2,
                a_a_dag=math.cosh(f.r) ** 2,
            )
        case _:
            return FieldMoments(
                a=0j, a_dag=0j, aa=0j, a_dag_a_dag=0j, a_dag_a=0.0, a_a_dag=1.0
            )


@dataclass(frozen=True)
class EffHamCoeffs:
    """Coefficients of the second-order effective Hamiltonian.

    `A[j, k, s1, s3]` couples detectors j and k; `B[j, s2, s4]` multiplies the
    field bilinear a^{s4} a^{s2} of detector j.  `cycle_T` is the proper duration
    of one cycle.  `delta` is filled by `contracted`.
    """

    A: Mapping[tuple[int, int, int, int], complex]
    B: Mapping[tuple[int, int, int], complex]
    cycle_T: float
    detectors: int
    delta: Mapping[int, complex] | None = field(default=None)

    def contracted(self, f: FieldState) -> EffHamCoeffs:
        return EffHamCoeffs(
            A=self.A,
            B=self.B,
            cycle_T=self.cycle_T,
            detectors=self.detectors,
            delta=contract_delta(self, f),
        )


def compute_AB(
    cycle: CycleSpec,
    omega: float,
    k: float,
    layout: DetectorLayout,
    *,
    rel_tol: float = 1e-10,
) -> EffHamCoeffs:
    """Effective-Hamiltonian coefficients A and B of a cycle.

        A^{(jk)}_{s1 s3} = -1/2 sum_{s2 s4} int (dI_{j,s1s2}/dtau) I_{k,s3s4} eps_{s2 s4}
        B^{(j)}_{s2 s4}  = +1/2 sum_{s1 s3} int (dI_{j,s1s2}/dtau) I_{j,s3s4} eps_{s1 s3}

    The sixteen ordered integrals are evaluated once for detector 0; other
    detectors differ only by the offset phases exp(-i s k a).

    Raises
    ------
    QuadratureNonConvergent
        propagated from `ordered_integral`
    """
    base = {
        (first, second): ordered_integral(cycle, omega, k, first, second, rel_tol=rel_tol)
        for first, second in product(SIGN_PAIRS, repeat=2)
    }
    offsets = layout.offsets

    def ordered(j: int, s1: int, s2: int, l: int, s3: int, s4: int) -> complex:
        phase = cmath.exp(-1j * k * (s2 * offsets[j] + s4 * offsets[l]))
        return base[(s1, s2), (s3, s4)] * phase

    detectors = range(len(layout))
    A = {
        (j, l, s1, s3): -0.5
        * sum(
            (
                ordered(j, s1, s2, l, s3, s4) * EPSILON[s2, s4]
                for s2, s4 in product(SIGNS, repeat=2)
            ),
            start=0j,
        )
        for j, l in product(detectors, repeat=2)
        for s1, s3 in product(SIGNS, repeat=2)
    }
    B = {
        (j, s2, s4): 0.5
        * sum(
            (
                ordered(j, s1, s2, j, s3, s4) * EPSILON[s1, s3]
                for s1, s3 in product(SIGNS, repeat=2)
            ),
            start=0j,
        )
        for j in detectors
        for s2, s4 in product(SIGNS, repeat=2)
    }

    return EffHamCoeffs(A=A, B=B, cycle_T=cycle.proper_duration, detectors=len(layout))


def contract_delta(coeffs: EffHamCoeffs, f: FieldState) -> dict[int, complex]:
    """Field-contracted detuning of each detector.

        delta_j = sum_{s2 s4} [B^{(j)}_{s2 s4} <a^{s4} a^{s2}>
                               - 1/2 A^{(jj)}_{s2 s4} eps_{s2 s4}]
    """
    moments = field_moments(f)

    return {
        j: sum(
            (
                coeffs.B[j, s2, s4] * moments.second(s4, s2)
                - 0.5 * coeffs.A[j, j, s2, s4] * EPSILON[s2, s4]
                for s2, s4 in product(SIGNS, repeat=2)
            ),
            start=0j,
        )
        for j in range(coeffs.detectors)
    }


def pair_coupling(
    coeffs: EffHamCoeffs, j: int, k: int, lam: float
) -> dict[tuple[int, int], complex]:
    """Coefficients of sigma_j^{s1} sigma_k^{s3} in the detector-detector Hamiltonian."""
    if not coeffs.cycle_T > 0:
        raise ValueError("Pair coupling is undefined for a zero-duration cycle")

    scale = 1j * lam**2 / coeffs.cycle_T

    return {
        (s1, s3): scale * (coeffs.A[j, k, s1, s3] + coeffs.A[k, j, s1, s3])
        for s1, s3 in product(SIGNS, repeat=2)
    }


class Rotation(NamedTuple):
    axis: tuple[float, float, float]
    angle: float


def _check_coupling(lam: float) -> None:
    if not 0 < lam <= 0.1:
        raise ValueError(f"Coupling must lie in (0, 0.1], got {lam}")


def single_qubit_rotation(
    I_plus: complex, delta: complex, alpha: complex, lam: float, cycles: int = 1
) -> Rotation:
    """Bloch rotation applied by `cycles` transparent cycles under a coherent drive.

    The axis is proportional to (Re[a* I+], -Im[a* I+], lam |delta| sgn(Im delta)),
    the last entry being -i lam delta for purely imaginary delta, and the angle is
    2 lam sqrt(|a* I+|^2 + lam^2 |delta|^2) per cycle.

    Raises
    ------
    ZeroRotation
        if both the drive and the detuning vanish
    """
    _check_coupling(lam)

    if cycles < 1:
        raise ValueError(f"Cycle count must be a positive integer, got {cycles}")

    drive = complex(alpha).conjugate() * I_plus
    z = lam * abs(delta) * (1.0 if complex(delta).imag >= 0 else -1.0)
    n = np.array([drive.real, -drive.imag, z])
    norm = float(np.linalg.norm(n))

    if norm == 0:
        raise ZeroRotation("Neither the drive nor the detuning rotates the qubit")

    axis = n / norm

    return Rotation(
        axis=(float(axis[0]), float(axis[1]), float(axis[2])),
        angle=2 * lam * norm * cycles,
    )


@dataclass(frozen=True)
class GatePlan:
    alpha: complex
    cycles: int
    axis: tuple[float, float, float]
    angle: float
    tilt_diagnostic: float

    def to_json(self) -> dict[str, Any]:
        return {
            "alpha_re": self.alpha.real,
            "alpha_im": self.alpha.imag,
            "cycles": self.cycles,
            "axis": list(self.axis),
            "angle": self.angle,
            "tilt_diagnostic": self.tilt_diagnostic,
        }


def plan_gate(
    target_axis: Sequence[float],
    target_angle: float,
    I_plus: complex,
    delta: complex,
    lam: float,
    max_cycles: int,
    *,
    drive_ceiling: float = 100.0,
) -> GatePlan:
    """Choose a coherent amplitude and cycle count realizing a target rotation.

    The phase of alpha sets the in-plane direction (arg alpha* = psi - arg I+,
    where psi is the phase that makes alpha* I+ point along the target), and |alpha|
    is chosen so that `cycles` cycles accumulate exactly `target_angle`.  The
    smallest cycle count keeping |alpha| <= `drive_ceiling` wins.  The angle
    between the realized and the requested axis (nonzero when delta tilts the
    axis out of the plane) is reported as `tilt_diagnostic`.

    Raises
    ------
    Unreachable
        if the target needs more sigma^z than lam * delta supplies, or the angle per
        cycle is below the detuning floor 2 lam^2 |delta|
    DriveCeilingExceeded
        if no cycle count up to `max_cycles` keeps |alpha| within the ceiling
    """
    _check_coupling(lam)

    axis = np.asarray(target_axis, dtype=float)
    length = float(np.linalg.norm(axis))

    if axis.shape != (3,) or length == 0:
        raise ValueError(f"Target axis must be a nonzero 3-vector, got {target_axis}")
    if not 0 < target_angle < 2 * math.pi:
        raise ValueError(f"Target angle must lie in (0, 2 pi), got {target_angle}")
    if abs(I_plus) == 0:
        raise ValueError("A vanishing I+ cannot drive a rotation")
    if max_cycles < 1:
        raise ValueError(f"Maximum cycle count must be positive, got {max_cycles}")

    axis = axis / length
    in_plane = math.hypot(axis[0], axis[1])
    z_supply = lam * abs(delta)
    z_sign = 1.0 if complex(delta).imag >= 0 else -1.0

    if abs(axis[2]) > 1e-9 and (z_supply == 0 or z_sign * axis[2] < 0):
        raise Unreachable(
            f"Axis {tuple(axis)} needs a sigma^z component that"
            f" lam * delta = {lam * delta} cannot supply"
        )
    if in_plane < 1e-12 and z_supply == 0:
        raise Unreachable("A pure sigma^z target needs a nonzero detuning")

    if in_plane < 1e-12:
        per_cycle = 2 * lam * z_supply
        exact = target_angle / per_cycle
        cycles = round(exact)

        if not (1 <= cycles <= max_cycles and abs(exact - cycles) < 1e-9):
            raise Unreachable(
                f"Detuning alone rotates by {per_cycle} per cycle; {target_angle}"
                f" is not a multiple within {max_cycles} cycles"
            )
        alpha = 0j
    else:
        psi = math.atan2(-axis[1], axis[0])

        for cycles in range(1, max_cycles + 1):
            radicand = (target_angle / (2 * lam * cycles)) ** 2 - z_supply**2

            if radicand <= 0:
                raise Unreachable(
                    f"Angle per cycle {target_angle / cycles} is below the detuning"
                    f" floor {2 * lam * z_supply}"
                )

            magnitude = math.sqrt(radicand) / abs(I_plus)

            if magnitude <= drive_ceiling:
                break
        else:
            raise DriveCeilingExceeded(
                f"|alpha| would exceed {drive_ceiling} for every cycle count up to"
                f" {max_cycles}"
            )

        alpha = magnitude * cmath.exp(1j * (cmath.phase(I_plus) - psi))

    realized = single_qubit_rotation(I_plus, delta, alpha, lam, cycles)
    tilt = math.acos(min(1.0, max(-1.0, float(np.dot(realized.axis, axis)))))

    if abs(axis[2]) > abs(realized.axis[2]) + 1e-9:
        raise Unreachable(
            f"Axis {tuple(axis)} needs more sigma^z than the realized"
            f" {realized.axis[2]}"
        )

    if tilt > 0:
        log.debug("Realized axis %s is tilted by %s from target", realized.axis, tilt)

    return GatePlan(
        alpha=alpha,
        cycles=cycles,
        axis=realized.axis,
        angle=realized.angle,
        tilt_diagnostic=tilt,
    )
