"""Perturbative two-qubit final state and its negativity.

The two-qubit basis is ordered {|00>, |10>, |01>, |11>}, i.e. basis index
q1 + 2 q2, where q1 is the state of detector 1.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from enum import StrEnum, auto
from typing import Any, Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from udw_transparency.errors import ThetaDegenerate, TransparencyRequired
from udw_transparency.gates import FieldKind, FieldState, field_moments
from udw_transparency.phase_integrals import PhaseIntegralSet

log = logging.getLogger(__name__)

SWEEP_HEADER = ("Theta", "r", "negativity", "negativity_vacuum", "r_opt")
MATRIX_TOLERANCE = 1e-12


class NegativityMethod(StrEnum):
    NUMERIC = auto()
    CLOSED_FORM = auto()


class Frame(StrEnum):
    """Frame of the second-order two-qubit state.

    `LAB` is the state in the detectors' own basis, built from uncentred field
    moments.  `LOCAL` conjugates it by the product of single-detector unitaries
    that absorbs the field's displacement, leaving centred moments only.
    Negativity is the same in both frames.
    """

    LAB = auto()
    LOCAL = auto()


@dataclass(frozen=True, eq=False)
class TwoQubitDensityMatrix:
    matrix: NDArray[np.complex128]

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.complex128)

        if matrix.shape != (4, 4):
            raise ValueError(f"Two-qubit state must be 4x4, got {matrix.shape}")
        if not np.allclose(matrix, matrix.conj().T, rtol=0, atol=MATRIX_TOLERANCE):
            raise ValueError("Density matrix is not Hermitian")
        if abs(np.trace(matrix) - 1) > MATRIX_TOLERANCE:
            raise ValueError(f"Density matrix trace is {np.trace(matrix)}, not 1")

        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_pure(cls, state: ArrayLike) -> TwoQubitDensityMatrix:
        psi = np.asarray(state, dtype=np.complex128)
        psi = psi / np.linalg.norm(psi)

        return cls(np.outer(psi, psi.conj()))

    @property
    def eigenvalues(self) -> NDArray[np.float64]:
        return np.linalg.eigvalsh(self.matrix)

    def is_perturbatively_positive(self, lam: float) -> bool:
        """Whether every eigenvalue is at least -10 lam^3."""
        return bool(self.eigenvalues.min() >= -10 * lam**3)

    def to_json(self) -> list[list[list[float]]]:
        return [[[z.real, z.imag] for z in row] for row in self.matrix.tolist()]


@dataclass(frozen=True)
class NegativityReport:
    negativity: float
    lambda1: complex
    lambda2: complex
    lambda3: complex
    lambda4: complex
    M: complex
    Theta: float
    method: NegativityMethod

    @property
    def eigenvalues(self) -> tuple[complex, complex, complex, complex]:
        return (self.lambda1, self.lambda2, self.lambda3, self.lambda4)


def _check_transparent(integrals: PhaseIntegralSet, tol: float) -> None:
    if abs(integrals.I_pm) >= tol:
        raise TransparencyRequired(
            f"Detector {integrals.detector_index} is not transparent:"
            f" |I_+-| = {abs(integrals.I_pm)}"
        )


def build_rho_f(
    integrals: Sequence[PhaseIntegralSet],
    f: FieldState,
    lam: float,
    M: complex,
    *,
    tol: float = 1e-8,
    frame: Frame = Frame.LAB,
) -> TwoQubitDensityMatrix:
    """Second-order reduced state of two ground-state detectors after one cycle.

    Parameters
    ----------
    integrals
        phase integrals of detector 1 and detector 2
    f
        initial field state
    lam
        coupling, at most 0.05
    M
        mixed two-detector integral from `compute_M`
    frame
        `Frame.LAB` keeps the O(lam) coherences and uncentred moments.
        `Frame.LOCAL` uses centred moments, has no O(lam) coherences and carries
        the leading lam^4 population of |11>, which keeps the partial transpose
        free of spurious O(lam^4) negative eigenvalues.

    Raises
    ------
    TransparencyRequired
        if either detector has |I_+-| >= `tol`
    """
    if len(integrals) != 2:
        raise ValueError(f"Expected integrals for two detectors, got {len(integrals)}")
    if not 0 <= lam <= 0.05:
        raise ValueError(f"Coupling must lie in [0, 0.05], got {lam}")

    first, second = integrals

    for detector in integrals:
        _check_transparent(detector, tol)

    if frame is Frame.LOCAL:
        return _local_frame_state(first, second, f, lam, M)

    moments = field_moments(f)
    aad = moments.a_a_dag
    lam2 = lam**2

    rho = np.zeros((4, 4), dtype=np.complex128)
    rho[0, 0] = 1 - lam2 * (first.I_mm * first.I_pp + second.I_mm * second.I_pp) * aad

    rho[1, 0] = -1j * lam * first.I_pp * moments.a_dag
    rho[2, 0] = -1j * lam * second.I_pp * moments.a_dag
    rho[0, 1] = 1j * lam * first.I_mm * moments.a
    rho[0, 2] = 1j * lam * second.I_mm * moments.a

    rho[1, 1] = lam2 * first.I_pp * first.I_mm * aad
    rho[2, 2] = lam2 * second.I_pp * second.I_mm * aad
    rho[1, 2] = lam2 * first.I_pp * second.I_mm * aad
    rho[2, 1] = lam2 * second.I_pp * first.I_mm * aad

    rho[3, 0] = 0.5 * lam2 * M - lam2 * first.I_pp * second.I_pp * moments.a_dag_a_dag
    rho[0, 3] = rho[3, 0].conjugate()

    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real

    return TwoQubitDensityMatrix(rho)


def _local_frame_state(
    first: PhaseIntegralSet,
    second: PhaseIntegralSet,
    f: FieldState,
    lam: float,
    M: complex,
) -> TwoQubitDensityMatrix:
    moments = field_moments(f)
    A_mp, A_pp = moments.A_mp, moments.A_pp
    lam2 = lam**2
    both = first.I_pp * second.I_pp
    # |11> amplitude is lam^2 (M/2 - I1 I2 b^dagger^2) on the centred field
    ee = lam2 * (0.5 * M - both * A_pp)
    pair_norm = abs(moments.A_mm) ** 2 + 2 * A_mp**2

    rho = np.zeros((4, 4), dtype=np.complex128)
    rho[1, 1] = lam2 * abs(first.I_pp) ** 2 * A_mp
    rho[2, 2] = lam2 * abs(second.I_pp) ** 2 * A_mp
    rho[1, 2] = lam2 * first.I_pp * second.I_mm * A_mp
    rho[2, 1] = rho[1, 2].conjugate()
    rho[3, 0] = ee
    rho[0, 3] = ee.conjugate()
    rho[3, 3] = lam2**2 * (
        0.25 * abs(M) ** 2
        - (M.conjugate() * both * A_pp).real
        + abs(both) ** 2 * pair_norm
    )
    rho[0, 0] = 1 - (rho[1, 1] + rho[2, 2] + rho[3, 3]).real

    return TwoQubitDensityMatrix(rho)


def partial_transpose(rho: TwoQubitDensityMatrix) -> NDArray[np.complex128]:
    """Partial transpose on detector 1 (the low bit of the basis index).

    >>> bell = TwoQubitDensityMatrix.from_pure([1, 0, 0, 1])
    >>> partial_transpose(bell).real * 2
    array([[1., 0., 0., 0.],
           [0., 0., 1., 0.],
           [0., 1., 0., 0.],
           [0., 0., 0., 1.]])
    """
    # axes are (q2, q1, q2', q1')
    return rho.matrix.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def negativity_numeric(
    rho: TwoQubitDensityMatrix, *, M: complex = 0j, Theta: float = math.nan
) -> NegativityReport:
    """Negativity from the spectrum of the partial transpose.

    Eigenvalues come back in ascending order, so `lambda1` is the most negative.
    `M` and `Theta` are carried into the report unchanged.
    """
    spectrum = np.linalg.eigvalsh(partial_transpose(rho))
    negativity = float(-spectrum[spectrum < 0].sum())
    l1, l2, l3, l4 = (complex(x) for x in spectrum)

    return NegativityReport(
        negativity=negativity,
        lambda1=l1,
        lambda2=l2,
        lambda3=l3,
        lambda4=l4,
        M=M,
        Theta=Theta,
        method=NegativityMethod.NUMERIC,
    )


def stimulation_phase(
    M: complex, theta: float, f: FieldState, offset_phase: float
) -> float:
    """Relative phase Theta = arg M - 2 theta + phi + k a, wrapped into (-pi, pi]."""
    phi = f.phi if f.kind is FieldKind.SQUEEZED else 0.0
    Theta = cmath.phase(M) - 2 * theta + phi + offset_phase

    return math.pi - (math.pi - Theta) % (2 * math.pi)


def squeezing_bracket(r: float, Theta: float) -> float:
    """f(r, Theta) = cosh^2 r - sinh(2r) cos(Theta) / 2."""
    return math.cosh(r) ** 2 - 0.5 * math.sinh(2 * r) * math.cos(Theta)


def negativity_closed_form(
    M: complex,
    I: float,
    theta: float,
    f: FieldState,
    lam: float,
    offset_phase: float = 0.0,
) -> NegativityReport:
    """Leading-order negativity of two transparent detectors.

        N = max(0, lam^2 [|(|M| + I^2 sinh(2r) e^{-i Theta})| / 2 - I^2 cosh^2 r])

    Wherever |M| + I^2 sinh(2r) cos(Theta) >= 0 and sin(Theta) = 0 this equals

        N = max(0, lam^2/2 [|M| - 2 I^2 (cosh^2 r - sinh(2r) cos(Theta) / 2)])

    and elsewhere the latter is its first-order expansion in I^2 sinh(2r) / |M|.
    Vacuum and coherent fields use r = 0; the field's displacement drops out at
    this order.

    >>> report = negativity_closed_form(0.5, 0.1, 0.0, FieldState.vacuum(), 0.01)
    >>> round(report.negativity, 12)
    2.4e-05
    """
    Theta = stimulation_phase(M, theta, f, offset_phase)
    r = f.r if f.kind is FieldKind.SQUEEZED else 0.0
    lam2 = lam**2
    local = lam2 * I**2 * math.cosh(r) ** 2
    coupling = 0.5 * lam2 * abs(abs(M) + I**2 * math.sinh(2 * r) * cmath.exp(-1j * Theta))

    lambda1 = local - coupling
    lambda2 = local + coupling
    lambda4 = 0.0
    lambda3 = 1 - lambda1 - lambda2 - lambda4

    return NegativityReport(
        negativity=max(0.0, -lambda1),
        lambda1=complex(lambda1),
        lambda2=complex(lambda2),
        lambda3=complex(lambda3),
        lambda4=complex(lambda4),
        M=complex(M),
        Theta=Theta,
        method=NegativityMethod.CLOSED_FORM,
    )


def gg_dagger_expectation(I: float, lam: float, f: FieldState, Theta: float) -> float:
    """Expectation of g g^dagger for the collective mode seen by both detectors.

    Built from centred moments, lam^2 I^2 (A_-+ + A_+- + 2 Re[A_-- e^{i(Theta - phi)}]),
    which for a squeezed vacuum is lam^2 I^2 (cosh^2 r + sinh^2 r - sinh(2r) cos Theta).

    >>> gg_dagger_expectation(0.5, 0.1, FieldState.vacuum(), 0.0)
    0.0025
    """
    moments = field_moments(f)
    phi = f.phi if f.kind is FieldKind.SQUEEZED else 0.0
    squeeze = 2 * (moments.A_mm * cmath.exp(1j * (Theta - phi))).real

    return max(0.0, lam**2 * I**2 * (moments.A_mp + moments.A_pm + squeeze))


def optimal_squeezing(Theta: float) -> float:
    """Squeezing that minimizes cosh^2 r - sinh(2r) cos(Theta) / 2.

    The stationary point satisfies tanh(2r) = cos(Theta).  A negative result
    means the optimum lies on the phi + pi branch with squeezing |r_min|.

    Raises
    ------
    ThetaDegenerate
        if |cos Theta| = 1, where the bracket has no interior optimum

    >>> round(optimal_squeezing(math.pi / 3), 4)
    0.2747
    """
    c = math.cos(Theta)

    if abs(c) >= 1 - 1e-15:
        raise ThetaDegenerate(f"cos(Theta) = {c}: no interior optimum")

    return float(0.5 * np.arctanh(c))


@dataclass(frozen=True)
class SweepRow:
    Theta: float
    r: float
    phi: float
    negativity: float
    negativity_vacuum: float
    r_opt: float

    def as_row(self) -> tuple[float, float, float, float, float]:
        return (self.Theta, self.r, self.negativity, self.negativity_vacuum, self.r_opt)


@dataclass(frozen=True)
class NegativitySweep:
    rows: tuple[SweepRow, ...]
    argmax: dict[float, float]

    def table(self) -> Iterator[tuple[float, float, float, float, float]]:
        return (row.as_row() for row in self.rows)


def negativity_vs_r_sweep(
    M: complex,
    I: float,
    theta: float,
    Theta_grid: Sequence[float],
    r_grid: Sequence[float],
    lam: float,
) -> NegativitySweep:
    """Closed-form negativity over a (Theta, r) grid.

    For each Theta the squeezing phase phi = Theta - arg M + 2 theta is the one
    that produces that Theta with zero offset.  `argmax` maps each Theta to the r
    of largest negativity (the first on ties).
    """
    if not Theta_grid or not r_grid:
        raise ValueError("Sweep grids must be non-empty")

    vacuum = negativity_closed_form(M, I, theta, FieldState.vacuum(), lam).negativity
    rows: list[SweepRow] = []
    argmax: dict[float, float] = {}

    for Theta in Theta_grid:
        phi = Theta - cmath.phase(M) + 2 * theta

        try:
            r_opt = optimal_squeezing(Theta)
        except ThetaDegenerate:
            r_opt = math.nan

        best = (-math.inf, math.nan)

        for r in r_grid:
            report = negativity_closed_form(
                M, I, theta, FieldState.squeezed(r, phi), lam
            )
            rows.append(
                SweepRow(
                    Theta=Theta,
                    r=r,
                    phi=phi % (2 * math.pi),
                    negativity=report.negativity,
                    negativity_vacuum=vacuum,
                    r_opt=r_opt,
                )
            )

            if report.negativity > best[0]:
                best = (report.negativity, r)

        argmax[Theta] = best[1]

    log.info("Swept %d Theta values over %d squeezings", len(Theta_grid), len(r_grid))

    return NegativitySweep(rows=tuple(rows), argmax=argmax)


def purity(rho: TwoQubitDensityMatrix) -> float:
    return float(np.trace(rho.matrix @ rho.matrix).real)


def purity_prediction(
    integrals: Sequence[PhaseIntegralSet], f: FieldState, lam: float
) -> float:
    """Leading-order purity 1 - 2 lam^2 A_-+ sum_j I_{j,--} I_{j,++}."""
    weight = sum((abs(s.I_pp) ** 2 for s in integrals), start=0.0)

    return 1 - 2 * lam**2 * field_moments(f).A_mp * weight


def rho_to_json(rho: TwoQubitDensityMatrix) -> dict[str, Any]:
    return {"basis": ["00", "10", "01", "11"], "matrix": rho.to_json()}
