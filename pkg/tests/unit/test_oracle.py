import math

import numpy as np
import pytest

from udw_transparency.errors import StepNonConvergence, TruncationLeakage
from udw_transparency.gates import FieldState
from udw_transparency.oracle import (
    FockConfig,
    annihilation,
    bloch_polar_angle,
    coherent_amplitudes,
    error_shrinks,
    evolve_exact,
    excitation_probability,
    initial_field,
    resonant_suppression,
    squeeze_state,
    squeezed_amplitudes,
    validate_perturbative,
)
from udw_transparency.phase_integrals import DetectorLayout, PhaseIntegralSet
from udw_transparency.trajectory import CycleSpec, rest_cycle

SMALL = FockConfig(n_max=6, steps_per_segment=256, richardson_tol=1e-8)


def test_annihilation() -> None:
    a = annihilation(4)

    assert np.allclose(np.diag(a, 1), np.sqrt([1, 2, 3]))
    assert np.allclose(a.conj().T @ a, np.diag([0, 1, 2, 3]))


def test_coherent_amplitudes() -> None:
    psi = coherent_amplitudes(1 + 1j, 40)
    populations = np.abs(psi) ** 2

    assert populations.sum() == pytest.approx(1, abs=1e-12)
    assert populations @ np.arange(40) == pytest.approx(2)
    assert coherent_amplitudes(0j, 5) == pytest.approx([1, 0, 0, 0, 0])


def test_squeeze_state_matches_analytic_amplitudes() -> None:
    psi = squeeze_state(0.5, 0.3, 60)
    analytic = squeezed_amplitudes(0.5, 0.3, 60)

    assert abs(np.vdot(analytic, psi)) ** 2 == pytest.approx(1, abs=1e-10)
    assert np.allclose(psi[1::2], 0)
    assert abs(psi[2]) ** 2 == pytest.approx(
        math.tanh(0.5) ** 2 / (2 * math.cosh(0.5)), rel=1e-8
    )


def test_initial_field_rejects_small_truncation() -> None:
    with pytest.raises(TruncationLeakage):
        initial_field(FieldState.coherent(5.0), 5)
    with pytest.raises(TruncationLeakage):
        initial_field(FieldState.squeezed(1.0), 20)

    assert np.linalg.norm(initial_field(FieldState.squeezed(0.2), 25)) == pytest.approx(1)


def test_zero_coupling_is_identity(transparent_rest: CycleSpec, omega, k) -> None:
    cfg = FockConfig(n_max=6, lam=0.0)
    result = evolve_exact(
        transparent_rest,
        omega,
        k,
        DetectorLayout.pair(),
        FieldState.vacuum(),
        cfg,
        excited=(1,),
    )

    assert result.excitation == pytest.approx([0, 1])
    assert result.norm_drift == pytest.approx(0, abs=1e-15)
    assert result.steps_per_segment == cfg.steps_per_segment


def test_evolution_is_unitary(transparent_rest: CycleSpec, omega, k) -> None:
    cfg = FockConfig(n_max=6, lam=0.02, steps_per_segment=256, richardson_tol=1e-8)
    result = evolve_exact(
        transparent_rest, omega, k, DetectorLayout.pair(), FieldState.vacuum(), cfg
    )

    assert result.norm_drift < 1e-10
    assert np.trace(result.rho).real == pytest.approx(1, abs=1e-10)
    assert result.leakage < cfg.leakage_tol


def test_vacuum_excitation_matches_first_order(
    transparent_rest: CycleSpec, rest_integrals: PhaseIntegralSet, omega, k
) -> None:
    cfg = FockConfig(n_max=6, lam=0.01, steps_per_segment=256, richardson_tol=1e-8)
    result = evolve_exact(
        transparent_rest, omega, k, DetectorLayout(), FieldState.vacuum(), cfg, 1
    )
    predicted = excitation_probability(rest_integrals, FieldState.vacuum(), 0.01)

    assert predicted == pytest.approx(1e-4 * abs(rest_integrals.I_plus) ** 2)
    assert result.excitation[0] == pytest.approx(predicted, rel=1e-3)


def test_step_doubling_gives_up() -> None:
    cfg = FockConfig(
        n_max=4, lam=0.05, steps_per_segment=1, max_doublings=1, richardson_tol=1e-14
    )

    with pytest.raises(StepNonConvergence):
        evolve_exact(rest_cycle(20.0), 1.3, 1.0, DetectorLayout(), FieldState(), cfg, 1)


def test_evolve_exact_validates_detector_count(transparent_rest: CycleSpec) -> None:
    with pytest.raises(ValueError):
        evolve_exact(
            transparent_rest, 1.3, 1.0, DetectorLayout(), FieldState(), SMALL, 2
        )


def test_second_order_state_converges(
    transparent_rest: CycleSpec, pair_layout: DetectorLayout, omega, k
) -> None:
    cfg = FockConfig(n_max=6, steps_per_segment=1024, richardson_tol=1e-11)
    report = validate_perturbative(
        transparent_rest,
        omega,
        k,
        pair_layout,
        FieldState.vacuum(),
        [0.04, 0.02, 0.01],
        cfg=cfg,
    )
    excitation = report.excitation_err

    assert report.passed
    assert report.fit_slope >= 2.7
    assert excitation[0] / excitation[1] >= 8
    assert excitation[1] / excitation[2] >= 8
    assert report.negativity_err[-1] < 1e-7
    assert report.to_json()["passed"] is True


def test_validation_fails_when_excitation_error_stalls(
    monkeypatch, transparent_rest: CycleSpec, pair_layout: DetectorLayout, omega, k
) -> None:
    def biased(integrals: PhaseIntegralSet, f: FieldState, lam: float) -> float:
        return 1.01 * lam**2 * abs(integrals.I_plus) ** 2

    monkeypatch.setattr("udw_transparency.oracle.excitation_probability", biased)
    cfg = FockConfig(n_max=6, steps_per_segment=1024, richardson_tol=1e-11)
    report = validate_perturbative(
        transparent_rest,
        omega,
        k,
        pair_layout,
        FieldState.vacuum(),
        [0.04, 0.02, 0.01],
        cfg=cfg,
    )

    assert report.fit_slope >= 2.7
    assert not report.passed


def test_error_shrinks() -> None:
    lambdas = [0.01, 0.02, 0.04]

    assert error_shrinks(lambdas, [1e-8, 1.6e-7, 2.56e-6], order=3, floor=0.0)
    assert not error_shrinks(lambdas, [1e-8, 1.6e-7, 2.56e-6], order=5, floor=0.0)
    assert error_shrinks(lambdas, [1e-12, 2e-12, 1e-6], order=3, floor=1e-11)
    assert not error_shrinks(lambdas, [1e-9, 2e-9, 1e-6], order=3, floor=1e-11)
    assert error_shrinks(lambdas, [], order=3, floor=0.0)


def test_bloch_polar_angle() -> None:
    angle = 0.3
    psi = np.array([math.cos(angle / 2), 1j * math.sin(angle / 2)])
    mixed = 0.9 * np.outer(psi, psi.conj()) + 0.1 * np.eye(2) / 2

    assert bloch_polar_angle(np.outer(psi, psi.conj())) == pytest.approx(angle)
    assert bloch_polar_angle(mixed) == pytest.approx(angle)
    assert bloch_polar_angle(np.diag([0.0, 1.0])) == pytest.approx(math.pi)


def test_validate_perturbative_needs_geometric_couplings(
    transparent_rest: CycleSpec, pair_layout: DetectorLayout, omega, k
) -> None:
    with pytest.raises(ValueError):
        validate_perturbative(
            transparent_rest, omega, k, pair_layout, FieldState(), [0.02, 0.01]
        )
    with pytest.raises(ValueError):
        validate_perturbative(
            transparent_rest, omega, k, pair_layout, FieldState(), [0.03, 0.02, 0.005]
        )


def test_transparent_window_suppresses_emission(
    transparent_rest: CycleSpec, omega, k
) -> None:
    control = rest_cycle(1.5 * transparent_rest.proper_duration)
    report = resonant_suppression(transparent_rest, omega, k, SMALL, control=control)

    assert report.control > 1e-4
    assert report.ratio >= 100
    assert report.to_json()["ratio"] == report.ratio
