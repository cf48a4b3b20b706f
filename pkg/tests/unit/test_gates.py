import cmath
import math

import pytest

from udw_transparency.errors import DriveCeilingExceeded, Unreachable, ZeroRotation
from udw_transparency.gates import (
    EffHamCoeffs,
    FieldKind,
    FieldState,
    compute_AB,
    contract_delta,
    field_moments,
    pair_coupling,
    plan_gate,
    single_qubit_rotation,
)
from udw_transparency.phase_integrals import DetectorLayout
from udw_transparency.trajectory import CycleSpec


def test_vacuum_moments() -> None:
    moments = field_moments(FieldState.vacuum())

    assert moments.A_mp == 1
    assert moments.A_pm == 0
    assert moments.A_pp == 0


def test_coherent_moments_are_vacuum_fluctuations() -> None:
    moments = field_moments(FieldState.coherent(2 - 1j))

    assert moments.a == 2 - 1j
    assert moments.second(1, -1) == pytest.approx(5)
    assert moments.A_mp == pytest.approx(1)
    assert moments.A_pm == pytest.approx(0)
    assert moments.A_mm == pytest.approx(0)


def test_squeezed_moments() -> None:
    moments = field_moments(FieldState.squeezed(1.0))

    assert moments.A_pp == pytest.approx(-0.5 * math.sinh(2), abs=1e-12)
    assert moments.A_pp.real == pytest.approx(-1.8134, abs=1e-4)
    assert moments.A_pm == pytest.approx(math.sinh(1) ** 2)
    assert moments.A_mp - moments.A_pm == pytest.approx(1)


def test_field_state_normalizes_phase() -> None:
    state = FieldState.squeezed(0.5, 3 * math.pi)

    assert state.kind is FieldKind.SQUEEZED
    assert state.phi == pytest.approx(math.pi)


@pytest.mark.parametrize("changes", [{"r": -0.1}, {"phi": math.inf}, {"alpha": math.nan}])
def test_field_state_validation(changes) -> None:
    with pytest.raises(ValueError):
        FieldState(**changes)


def test_single_qubit_rotation_axes() -> None:
    drive = single_qubit_rotation(1.0, 0j, 1.0, 0.01)
    quadrature = single_qubit_rotation(1.0, 0j, 1j, 0.01, cycles=3)
    detuned = single_qubit_rotation(1.0, -2j, 0j, 0.01)

    assert drive.axis == pytest.approx((1, 0, 0))
    assert drive.angle == pytest.approx(0.02)
    assert quadrature.axis == pytest.approx((0, 1, 0))
    assert quadrature.angle == pytest.approx(0.06)
    assert detuned.axis == pytest.approx((0, 0, -1))
    assert detuned.angle == pytest.approx(2 * 0.01 * 0.02)


def test_single_qubit_rotation_errors() -> None:
    with pytest.raises(ZeroRotation):
        single_qubit_rotation(1.0, 0j, 0j, 0.01)
    with pytest.raises(ValueError):
        single_qubit_rotation(1.0, 0j, 1.0, 0.2)
    with pytest.raises(ValueError):
        single_qubit_rotation(1.0, 0j, 1.0, 0.01, cycles=0)


@pytest.mark.parametrize("axis", [(1, 0, 0), (0, 1, 0), (1, -1, 0), (-1, 0.5, 0)])
def test_plan_gate_in_plane(axis) -> None:
    I_plus = cmath.exp(0.7j)
    plan = plan_gate(axis, math.pi / 2, I_plus, 0j, 0.01, 10)
    norm = math.hypot(axis[0], axis[1])

    assert plan.cycles == 1
    assert plan.angle == pytest.approx(math.pi / 2)
    assert plan.axis == pytest.approx((axis[0] / norm, axis[1] / norm, 0), abs=1e-12)
    assert plan.tilt_diagnostic == pytest.approx(0, abs=1e-7)
    assert abs(plan.alpha) == pytest.approx(math.pi / 4 / 0.01)


def test_plan_gate_takes_more_cycles_under_ceiling() -> None:
    plan = plan_gate((1, 0, 0), math.pi, 1.0, 0j, 0.01, 3)

    assert plan.cycles == 2
    assert abs(plan.alpha) == pytest.approx(math.pi / 4 / 0.01)
    assert plan.to_json()["cycles"] == 2

    with pytest.raises(DriveCeilingExceeded):
        plan_gate((1, 0, 0), math.pi, 1.0, 0j, 0.01, 1)


def test_plan_gate_reports_tilt() -> None:
    plan = plan_gate((1, 0, 0), math.pi / 2, 1.0, 1j, 0.01, 10)

    assert plan.angle == pytest.approx(math.pi / 2)
    assert plan.tilt_diagnostic > 0
    assert plan.axis[2] > 0


def test_plan_gate_pure_detuning() -> None:
    plan = plan_gate((0, 0, 1), 1e-3, 1.0, 1j, 0.01, 10)

    assert plan.alpha == 0
    assert plan.cycles == 5
    assert plan.angle == pytest.approx(1e-3)


@pytest.mark.parametrize(
    "axis, angle, delta",
    [
        ((0, 0, 1), 1e-3, 0j),
        ((1, 0, 1), 1.0, -1j),
        ((0, 0, 1), 1.5e-3, 1j),
        ((1, 0, 0), 1e-5, 1j),
    ],
)
def test_plan_gate_unreachable(axis, angle, delta) -> None:
    with pytest.raises(Unreachable):
        plan_gate(axis, angle, 1.0, delta, 0.01, 1)


def test_effective_hamiltonian_coefficients(
    transparent_rest: CycleSpec, pair_layout: DetectorLayout, omega, k
) -> None:
    pair = compute_AB(transparent_rest, omega, k, pair_layout)
    single = compute_AB(transparent_rest, omega, k, DetectorLayout())

    assert len(pair.A) == 16
    assert len(pair.B) == 8
    assert pair.cycle_T == pytest.approx(transparent_rest.proper_duration)
    assert pair.A[0, 0, 1, -1] == pytest.approx(single.A[0, 0, 1, -1])
    assert pair.A[1, 1, -1, 1] == pytest.approx(pair.A[0, 0, -1, 1])

    coupling = pair_coupling(pair, 0, 1, 0.01)

    assert coupling == pytest.approx(pair_coupling(pair, 1, 0, 0.01))


def test_contract_delta_depends_on_field(
    transparent_rest: CycleSpec, omega, k
) -> None:
    coeffs = compute_AB(transparent_rest, omega, k, DetectorLayout())
    vacuum = contract_delta(coeffs, FieldState.vacuum())
    squeezed = coeffs.contracted(FieldState.squeezed(0.5)).delta

    assert set(vacuum) == {0}
    assert squeezed is not None
    assert squeezed[0] != pytest.approx(vacuum[0])


def test_pair_coupling_needs_duration() -> None:
    coeffs = EffHamCoeffs(A={}, B={}, cycle_T=0.0, detectors=2)

    with pytest.raises(ValueError):
        pair_coupling(coeffs, 0, 1, 0.01)
