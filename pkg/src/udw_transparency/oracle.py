"""Exact evolution of detectors coupled to one truncated bosonic mode.

The joint Hilbert space is detector_{n-1} (x) ... (x) detector_0 (x) field, with each
detector in {|0>, |1>} (ground first) and the field in Fock levels 0..n_max.  The
interaction-picture Hamiltonian along the worldline is

    H(tau) = lam sum_j sum_{s1 s2}
             exp(i s1 omega tau + i s2 k (t - x - a_j)) sigma_j^{s1} a^{s2}

and is integrated segment by segment with a fourth-order Magnus scheme.
"""

from __future__ import annotations

import cmath
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial, reduce
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import linalg, special

from udw_transparency.entanglement import (
    TwoQubitDensityMatrix,
    build_rho_f,
    negativity_closed_form,
    negativity_numeric,
)
from udw_transparency.errors import StepNonConvergence, TruncationLeakage, ZeroRotation
from udw_transparency.gates import (
    FieldKind,
    FieldState,
    compute_AB,
    contract_delta,
    field_moments,
    single_qubit_rotation,
)
from udw_transparency.phase_integrals import (
    DetectorLayout,
    PhaseIntegralSet,
    compute_M,
    cycle_integrals,
)
from udw_transparency.trajectory import CycleSpec, rest_cycle

log = logging.getLogger(__name__)

MIN_SLOPE = 2.7
SQUEEZE_FIDELITY = 1 - 1e-10
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=np.complex128)

# Gauss-Legendre nodes of the two-point rule on [0, 1]
_GAUSS = (0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6)


@dataclass(frozen=True)
class FockConfig:
    n_max: int = 32
    lam: float = 0.005
    steps_per_segment: int = 4096
    richardson_tol: float = 1e-9
    max_doublings: int = 4
    leakage_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.n_max < 4:
            raise ValueError(f"Truncation must keep at least 5 levels, got {self.n_max}")
        if self.steps_per_segment < 1 or self.max_doublings < 1:
            raise ValueError(
                f"Step count and doublings must be positive: {self.steps_per_segment},"
                f" {self.max_doublings}"
            )
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"Coupling must be finite and >= 0, got {self.lam}")

    @property
    def levels(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True, eq=False)
class ExactResult:
    psi: NDArray[np.complex128]
    rho: NDArray[np.complex128]
    steps_per_segment: int
    norm_drift: float
    leakage: float

    @property
    def excitation(self) -> NDArray[np.float64]:
        """Excited-state population of each detector, detector 0 first."""
        n = int(round(math.log2(self.rho.shape[0])))
        populations = np.diag(self.rho).real.reshape((2,) * n)

        # axis 0 is detector n-1
        return np.array(
            [populations.take(1, axis=n - 1 - j).sum() for j in range(n)], dtype=float
        )

    def two_qubit_state(self) -> TwoQubitDensityMatrix:
        if self.rho.shape != (4, 4):
            raise ValueError(f"Expected a two-detector state, got {self.rho.shape}")

        rho = 0.5 * (self.rho + self.rho.conj().T)

        return TwoQubitDensityMatrix(rho / np.trace(rho).real)


def annihilation(levels: int) -> NDArray[np.complex128]:
    return np.diag(np.sqrt(np.arange(1, levels)), 1).astype(np.complex128)


def coherent_amplitudes(alpha: complex, levels: int) -> NDArray[np.complex128]:
    """Fock amplitudes exp(-|alpha|^2/2) alpha^n / sqrt(n!), truncated."""
    psi = np.zeros(levels, dtype=np.complex128)

    if alpha == 0:
        psi[0] = 1
        return psi

    n = np.arange(levels)
    log_modulus = (
        -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * special.gammaln(n + 1)
    )

    return np.exp(log_modulus + 1j * n * cmath.phase(alpha))


def squeezed_amplitudes(r: float, phi: float, levels: int) -> NDArray[np.complex128]:
    """Even-photon amplitudes of S(r, phi)|0>.

    c_{2n} = (-e^{i phi} tanh r)^n sqrt((2n)!) / (2^n n!) / sqrt(cosh r)
    """
    psi = np.zeros(levels, dtype=np.complex128)
    n = np.arange((levels + 1) // 2)
    log_modulus = (
        0.5 * special.gammaln(2 * n + 1)
        - n * math.log(2)
        - special.gammaln(n + 1)
        - 0.5 * math.log(math.cosh(r))
    )
    ratio = -cmath.exp(1j * phi) * math.tanh(r)
    psi[::2] = np.exp(log_modulus) * ratio**n

    return psi


def squeeze_state(r: float, phi: float, levels: int) -> NDArray[np.complex128]:
    """S(r, phi)|0> from the matrix exponential of the truncated generator.

    Raises
    ------
    TruncationLeakage
        if, for r <= 1.5, the overlap with the analytic amplitudes is below
        1 - 1e-10
    """
    a = annihilation(levels)
    a_dag = a.conj().T
    generator = (
        0.5 * r * (cmath.exp(-1j * phi) * a @ a - cmath.exp(1j * phi) * a_dag @ a_dag)
    )
    psi = linalg.expm(generator)[:, 0]

    if r <= 1.5:
        overlap = abs(np.vdot(squeezed_amplitudes(r, phi, levels), psi)) ** 2

        if overlap < SQUEEZE_FIDELITY:
            raise TruncationLeakage(
                f"Squeezed state r={r} is poorly represented in {levels} levels:"
                f" fidelity {overlap}"
            )

    return psi


def initial_field(f: FieldState, levels: int) -> NDArray[np.complex128]:
    n_max = levels - 1

    match f.kind:
        case FieldKind.COHERENT:
            alpha = abs(f.alpha)
            if n_max < alpha**2 + 10 * alpha + 20:
                raise TruncationLeakage(f"n_max={n_max} is too small for |alpha|={alpha}")
            psi = coherent_amplitudes(f.alpha, levels)
        case FieldKind.SQUEEZED:
            if n_max < 20 * math.cosh(f.r) ** 2:
                raise TruncationLeakage(f"n_max={n_max} is too small for r={f.r}")
            psi = squeeze_state(f.r, f.phi, levels)
        case _:
            psi = np.zeros(levels, dtype=np.complex128)
            psi[0] = 1

    return psi / np.linalg.norm(psi)


def _leakage(psi: NDArray[np.complex128], levels: int) -> float:
    field = np.abs(psi.reshape(-1, levels)) ** 2

    return float(field[:, -2:].sum())


def _raising_operators(n: int, levels: int) -> list[NDArray[np.complex128]]:
    """sigma_j^+ (x) 1_field for each detector j, in the joint space."""
    eye2 = np.eye(2, dtype=np.complex128)
    operators = []

    for j in range(n):
        factors = [eye2] * n
        factors[n - 1 - j] = SIGMA_PLUS
        operators.append(reduce(np.kron, factors))

    return [np.kron(op, np.eye(levels)) for op in operators]


@dataclass(frozen=True, eq=False)
class _Hamiltonian:
    """H(tau) from the products sigma_j^+ a^dagger and sigma_j^+ a."""

    up_create: list[NDArray[np.complex128]]
    up_annihilate: list[NDArray[np.complex128]]
    offsets: tuple[float, ...]
    omega: float
    k: float
    lam: float

    @classmethod
    def build(
        cls,
        n: int,
        levels: int,
        layout: DetectorLayout,
        omega: float,
        k: float,
        lam: float,
    ) -> _Hamiltonian:
        a = annihilation(levels)
        raising = _raising_operators(n, levels)
        create = np.kron(np.eye(2**n), a.conj().T)
        destroy = np.kron(np.eye(2**n), a)

        return cls(
            up_create=[sigma @ create for sigma in raising],
            up_annihilate=[sigma @ destroy for sigma in raising],
            offsets=layout.offsets[:n],
            omega=omega,
            k=k,
            lam=lam,
        )

    def __call__(self, tau: float, light_cone: float) -> NDArray[np.complex128]:
        """H at proper time `tau` where t - x equals `light_cone`."""
        X = np.zeros_like(self.up_create[0])

        for create, destroy, a in zip(self.up_create, self.up_annihilate, self.offsets):
            phase = self.k * (light_cone - a)
            X += cmath.exp(1j * (self.omega * tau + phase)) * create
            X += cmath.exp(1j * (self.omega * tau - phase)) * destroy

        return self.lam * (X + X.conj().T)


def _propagate(
    psi: NDArray[np.complex128], cycle: CycleSpec, H: _Hamiltonian, steps: int
) -> NDArray[np.complex128]:
    for segment, anchor in zip(cycle.segments, cycle.anchors):
        h = segment.proper_duration / steps
        slope = segment.gamma * (1 - segment.velocity)
        u0 = anchor.t - anchor.x

        for step in range(steps):
            s1, s2 = ((step + g) * h for g in _GAUSS)
            A1 = -1j * H(anchor.tau + s1, u0 + slope * s1)
            A2 = -1j * H(anchor.tau + s2, u0 + slope * s2)
            exponent = 0.5 * h * (A1 + A2) + (math.sqrt(3) * h**2 / 12) * (
                A2 @ A1 - A1 @ A2
            )
            psi = linalg.expm(exponent) @ psi

    return psi


def evolve_exact(
    cycle: CycleSpec,
    omega: float,
    k: float,
    layout: DetectorLayout,
    f: FieldState,
    cfg: FockConfig,
    n_detectors: int = 2,
    *,
    excited: Sequence[int] = (),
) -> ExactResult:
    """Integrate the joint state over one traversal of `cycle`.

    Detectors start in the ground state except those listed in `excited`.  The
    step count doubles from `cfg.steps_per_segment` until successive final states
    differ by less than `cfg.richardson_tol` in norm.

    Raises
    ------
    TruncationLeakage
        if the top two Fock levels hold `cfg.leakage_tol` or more, initially or
        finally
    StepNonConvergence
        if `cfg.max_doublings` doublings do not converge
    """
    if n_detectors not in (1, 2) or len(layout) < n_detectors:
        raise ValueError(
            f"Cannot evolve {n_detectors} detectors with a layout of {len(layout)}"
        )

    levels = cfg.levels
    detectors = np.zeros(2**n_detectors, dtype=np.complex128)
    detectors[sum(1 << j for j in excited)] = 1
    psi0 = np.kron(detectors, initial_field(f, levels))

    if (leakage := _leakage(psi0, levels)) >= cfg.leakage_tol:
        raise TruncationLeakage(f"Initial state leaks {leakage} into the top levels")

    H = _Hamiltonian.build(n_detectors, levels, layout, omega, k, cfg.lam)
    steps = cfg.steps_per_segment

    if cfg.lam == 0 or not cycle.segments:
        psi = psi0
    else:
        psi = _propagate(psi0, cycle, H, steps)

        for _ in range(cfg.max_doublings):
            refined = _propagate(psi0, cycle, H, 2 * steps)
            change = float(np.linalg.norm(refined - psi))
            psi, steps = refined, 2 * steps
            log.debug("%d steps per segment: change %s", steps, change)

            if change < cfg.richardson_tol:
                break
        else:
            raise StepNonConvergence(
                f"Final state still changes by {change} at {steps} steps per segment"
            )

    if (leakage := _leakage(psi, levels)) >= cfg.leakage_tol:
        raise TruncationLeakage(f"Final state leaks {leakage} into the top levels")

    matrix = psi.reshape(2**n_detectors, levels)

    return ExactResult(
        psi=psi,
        rho=matrix @ matrix.conj().T,
        steps_per_segment=steps,
        norm_drift=abs(float(np.linalg.norm(psi)) - 1),
        leakage=leakage,
    )


def excitation_probability(
    integrals: PhaseIntegralSet, f: FieldState, lam: float
) -> float:
    """First-order excitation probability of a ground-state detector.

        lam^2 (|I+|^2 <a a^dagger> + |I-|^2 <a^dagger a> + 2 Re[conj(I+) I- <a a>])

    >>> integrals = PhaseIntegralSet(2j, 0j, 0j, -2j, omega=1.2, k=1.0)
    >>> excitation_probability(integrals, FieldState.vacuum(), 0.01)
    0.0004
    """
    m = field_moments(f)
    I_plus, I_minus = integrals.I_plus, integrals.I_minus
    cross = 2 * (I_plus.conjugate() * I_minus * m.aa).real

    return lam**2 * (
        abs(I_plus) ** 2 * m.a_a_dag + abs(I_minus) ** 2 * m.a_dag_a + cross
    )


def _single_detector_state(
    integrals: PhaseIntegralSet, f: FieldState, lam: float
) -> NDArray[np.complex128]:
    m = field_moments(f)
    p = excitation_probability(integrals, f, lam)
    coherence = -1j * lam * (integrals.I_plus * m.a_dag + integrals.I_minus * m.a)

    return np.array([[1 - p, coherence.conjugate()], [coherence, p]], dtype=np.complex128)


@dataclass(frozen=True)
class ConvergenceReport:
    lambdas: list[float]
    max_err: list[float]
    fit_slope: float
    excitation_err: list[float]
    negativity_err: list[float]
    angle_err: list[float]
    leakage: float
    passed: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "lambdas": self.lambdas,
            "max_err": self.max_err,
            "fit_slope": self.fit_slope,
            "excitation_err": self.excitation_err,
            "negativity_err": self.negativity_err,
            "angle_err": self.angle_err,
            "leakage": self.leakage,
            "passed": self.passed,
        }


def bloch_polar_angle(rho: NDArray[np.complex128]) -> float:
    """Angle between the Bloch vector of a one-qubit state and the ground pole.

    >>> bloch_polar_angle(np.array([[0.5, 0.5], [0.5, 0.5]]))
    1.5707963267948966
    """
    return math.atan2(2 * abs(rho[1, 0]), (rho[0, 0] - rho[1, 1]).real)


def error_shrinks(
    lambdas: Sequence[float], errors: Sequence[float], *, order: int, floor: float
) -> bool:
    """Whether each error falls at least like lam^order between successive couplings.

    Errors at or below `floor` count as converged.  An empty error list passes.

    >>> error_shrinks([0.02, 0.01], [1.6e-7, 1e-8], order=3, floor=1e-12)
    True
    >>> error_shrinks([0.02, 0.01], [4e-6, 1e-6], order=3, floor=1e-12)
    False
    """
    ranked = sorted(zip(lambdas, errors), reverse=True)

    return all(
        small_err <= floor or small_err * (big / small) ** order <= big_err
        for (big, big_err), (small, small_err) in zip(ranked, ranked[1:])
    )


def _check_progression(lambdas: Sequence[float]) -> None:
    if len(lambdas) < 3 or min(lambdas) <= 0:
        raise ValueError(f"Need at least three positive couplings, got {lambdas}")

    ratios = np.asarray(lambdas[1:]) / np.asarray(lambdas[:-1])

    if not np.allclose(ratios, ratios[0], rtol=1e-9, atol=0):
        raise ValueError(f"Couplings must form a geometric progression: {lambdas}")


def validate_perturbative(
    cycle: CycleSpec,
    omega: float,
    k: float,
    layout: DetectorLayout,
    f: FieldState,
    lambdas: Sequence[float],
    *,
    cfg: FockConfig = FockConfig(),
    threads: int = 1,
) -> ConvergenceReport:
    """Compare exact evolutions against the second-order predictions.

    Two-detector layouts are checked against `build_rho_f` and the closed-form
    negativity.  One-detector layouts are checked against the first-order
    single-qubit state and, for a coherent drive, the Bloch angle of
    `single_qubit_rotation`.  The report passes when the log-log slope of the
    max-entry error is at least 2.7, the excitation and negativity errors shrink at
    least 8x per halving of the coupling and the angle error at least 4x.
    """
    _check_progression(lambdas)

    n = min(len(layout), 2)
    base = cycle_integrals(cycle, omega, k)
    integrals = [
        base.shifted(a, detector_index=j) for j, a in enumerate(layout.offsets[:n])
    ]

    evolve = partial(evolve_exact, cycle, omega, k, layout, f, n_detectors=n)
    configs = [replace(cfg, lam=lam) for lam in lambdas]

    if threads == 1:
        results = [evolve(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=threads or None) as executor:
            results = list(executor.map(evolve, configs))

    M = compute_M(cycle, omega, k, layout) if n == 2 else 0j
    delta = (
        contract_delta(compute_AB(cycle, omega, k, DetectorLayout()), f)[0]
        if n == 1 and f.kind is FieldKind.COHERENT
        else None
    )

    max_err: list[float] = []
    excitation_err: list[float] = []
    negativity_err: list[float] = []
    angle_err: list[float] = []

    for lam, result in zip(lambdas, results):
        p_exact = float(result.excitation[0])
        excitation_err.append(abs(p_exact - excitation_probability(integrals[0], f, lam)))

        if n == 2:
            predicted = build_rho_f(integrals, f, lam, M).matrix
            exact_N = negativity_numeric(result.two_qubit_state()).negativity
            closed = negativity_closed_form(
                M,
                abs(base.I_plus),
                cmath.phase(base.I_plus),
                f,
                lam,
                offset_phase=k * layout.offsets[1],
            )
            negativity_err.append(abs(exact_N - closed.negativity))
        else:
            predicted = _single_detector_state(integrals[0], f, lam)

        max_err.append(float(np.abs(result.rho - predicted).max()))

        if delta is not None:
            try:
                rotation = single_qubit_rotation(base.I_plus, delta, f.alpha, lam)
            except ZeroRotation:
                continue
            exact_angle = bloch_polar_angle(result.rho)
            angle_err.append(abs(exact_angle - rotation.angle))

    errors = np.maximum(max_err, np.finfo(float).tiny)
    slope = float(np.polyfit(np.log(lambdas), np.log(errors), 1)[0])
    leakage = max(r.leakage for r in results)
    floor = 10 * cfg.richardson_tol
    shrinking = (
        error_shrinks(lambdas, excitation_err, order=3, floor=floor)
        and error_shrinks(lambdas, negativity_err, order=3, floor=floor)
        and error_shrinks(lambdas, angle_err, order=2, floor=floor)
    )

    log.info("Error slope %.3f over couplings %s", slope, list(lambdas))

    if not shrinking:
        log.warning("Observable errors do not shrink with the coupling")

    return ConvergenceReport(
        lambdas=list(lambdas),
        max_err=max_err,
        fit_slope=slope,
        excitation_err=excitation_err,
        negativity_err=negativity_err,
        angle_err=angle_err,
        leakage=leakage,
        passed=slope >= MIN_SLOPE and shrinking,
    )


@dataclass(frozen=True)
class SuppressionReport:
    certified: float
    control: float
    ratio: float

    def to_json(self) -> dict[str, float]:
        return {"certified": self.certified, "control": self.control, "ratio": self.ratio}


def resonant_suppression(
    cycle: CycleSpec,
    omega: float,
    k: float,
    cfg: FockConfig,
    *,
    control: CycleSpec | None = None,
) -> SuppressionReport:
    """Spontaneous emission of an excited detector in vacuum, certified vs control.

    From |1, 0> the only first-order path is the resonant sigma^- a^dagger term, so
    a transparent cycle suppresses the decay.  The control defaults to a detector
    at rest for the same proper time.
    """
    control = control or rest_cycle(cycle.proper_duration)
    layout = DetectorLayout()

    def emission(c: CycleSpec) -> float:
        vacuum = FieldState.vacuum()
        result = evolve_exact(c, omega, k, layout, vacuum, cfg, 1, excited=(0,))

        return float(result.rho[0, 0].real)

    certified, reference = emission(cycle), emission(control)
    ratio = math.inf if certified == 0 else reference / certified

    return SuppressionReport(certified=certified, control=reference, ratio=ratio)
