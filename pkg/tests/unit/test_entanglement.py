import cmath
import math

import numpy as np
import pytest

from udw_transparency.entanglement import (
    SWEEP_HEADER,
    Frame,
    NegativityMethod,
    TwoQubitDensityMatrix,
    build_rho_f,
    gg_dagger_expectation,
    negativity_closed_form,
    negativity_numeric,
    negativity_vs_r_sweep,
    optimal_squeezing,
    purity,
    purity_prediction,
    rho_to_json,
    squeezing_bracket,
    stimulation_phase,
)
from udw_transparency.errors import ThetaDegenerate, TransparencyRequired
from udw_transparency.gates import FieldState
from udw_transparency.phase_integrals import (
    DetectorLayout,
    PhaseIntegralSet,
    compute_M,
    cycle_integrals,
)
from udw_transparency.trajectory import CycleSpec

QUARTER_TURNS = [0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi]


def test_build_rho_f_vacuum_entries(synthetic_pair) -> None:
    rho = build_rho_f(synthetic_pair, FieldState.vacuum(), 0.01, 0.5)

    assert rho.matrix[0, 0] == pytest.approx(1 - 2e-6)
    assert rho.matrix[1, 1] == pytest.approx(1e-6)
    assert rho.matrix[1, 2] == pytest.approx(1e-6)
    assert rho.matrix[3, 0] == pytest.approx(2.5e-5)
    assert rho.matrix[3, 3] == 0
    assert np.trace(rho.matrix) == pytest.approx(1)
    assert rho.is_perturbatively_positive(0.01)


def test_local_frame_entries(synthetic_pair) -> None:
    rho = build_rho_f(synthetic_pair, FieldState.vacuum(), 0.01, 0.5, frame=Frame.LOCAL)

    assert rho.matrix[1, 0] == 0
    assert rho.matrix[1, 2] == pytest.approx(1e-6)
    assert rho.matrix[3, 0] == pytest.approx(2.5e-5)
    # lam^4 (|M|^2 / 4 + 2 |I1 I2|^2)
    assert rho.matrix[3, 3].real == pytest.approx(1e-8 * (0.0625 + 2e-4))
    assert np.trace(rho.matrix) == pytest.approx(1, abs=1e-15)
    assert rho.eigenvalues.min() > -1e-15


def test_local_frame_removes_displacement(synthetic_pair) -> None:
    coherent = build_rho_f(
        synthetic_pair, FieldState.coherent(3 - 4j), 0.01, 0.5, frame=Frame.LOCAL
    )
    vacuum = build_rho_f(
        synthetic_pair, FieldState.vacuum(), 0.01, 0.5, frame=Frame.LOCAL
    )
    lab = build_rho_f(synthetic_pair, FieldState.coherent(3 - 4j), 0.01, 0.5)

    np.testing.assert_allclose(coherent.matrix, vacuum.matrix, rtol=0, atol=1e-15)
    assert abs(lab.matrix[1, 0]) == pytest.approx(0.01 * 0.1 * 5)


def test_numeric_negativity_matches_closed_form_in_vacuum(synthetic_pair) -> None:
    rho = build_rho_f(synthetic_pair, FieldState.vacuum(), 0.01, 0.5, frame=Frame.LOCAL)
    numeric = negativity_numeric(rho)
    closed = negativity_closed_form(0.5, 0.1, math.pi / 2, FieldState.vacuum(), 0.01)

    assert numeric.method is NegativityMethod.NUMERIC
    assert numeric.lambda1.real < 0
    assert numeric.negativity == pytest.approx(closed.negativity, rel=1e-9)
    assert closed.negativity == pytest.approx(2.4e-5)


def test_numeric_negativity_matches_closed_form_when_squeezing_aligned(
    synthetic_pair,
) -> None:
    # theta = pi/2 and phi = pi give Theta = 0
    squeezed = FieldState.squeezed(0.3, math.pi)
    rho = build_rho_f(synthetic_pair, squeezed, 0.01, 0.5, frame=Frame.LOCAL)
    closed = negativity_closed_form(0.5, 0.1, math.pi / 2, squeezed, 0.01)
    numeric = negativity_numeric(rho)

    assert closed.Theta == pytest.approx(0, abs=1e-12)
    assert numeric.negativity == pytest.approx(closed.negativity, rel=1e-9)


@pytest.fixture
def rest_pair(
    transparent_rest: CycleSpec, omega: float, k: float, pair_layout: DetectorLayout
) -> tuple[list[PhaseIntegralSet], complex]:
    first = cycle_integrals(transparent_rest, omega, k)
    M = compute_M(transparent_rest, omega, k, pair_layout, transparent=True)

    return [first, first.shifted(0.0, detector_index=1)], M


@pytest.mark.parametrize("r", [0.0, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("Theta", QUARTER_TURNS)
def test_numeric_and_closed_form_agree_over_squeezing_grid(
    rest_pair, r: float, Theta: float
) -> None:
    lam = 0.01
    integrals, M = rest_pair
    I_plus = integrals[0].I_pp
    theta = cmath.phase(I_plus)
    squeezed = FieldState.squeezed(r, Theta - cmath.phase(M) + 2 * theta)

    rho = build_rho_f(integrals, squeezed, lam, M, frame=Frame.LOCAL)
    numeric = negativity_numeric(rho)
    closed = negativity_closed_form(M, abs(I_plus), theta, squeezed, lam)

    assert cmath.exp(1j * closed.Theta) == pytest.approx(cmath.exp(1j * Theta), abs=1e-9)
    assert abs(numeric.negativity - closed.negativity) <= 1e-10 + 5 * lam**3


def test_build_rho_f_requires_transparency() -> None:
    leaky = PhaseIntegralSet(0.1j, 1e-3, 1e-3, -0.1j, omega=1.3, k=1.0)

    with pytest.raises(TransparencyRequired):
        build_rho_f([leaky, leaky], FieldState.vacuum(), 0.01, 0.5)


def test_build_rho_f_validates_inputs(synthetic_pair) -> None:
    with pytest.raises(ValueError):
        build_rho_f(synthetic_pair[:1], FieldState.vacuum(), 0.01, 0.5)
    with pytest.raises(ValueError):
        build_rho_f(synthetic_pair, FieldState.vacuum(), 0.1, 0.5)


def test_density_matrix_validation() -> None:
    with pytest.raises(ValueError):
        TwoQubitDensityMatrix(np.eye(3) / 3)
    with pytest.raises(ValueError):
        TwoQubitDensityMatrix(np.eye(4) / 2)
    with pytest.raises(ValueError):
        TwoQubitDensityMatrix(np.diag([1, 0, 0, 0]) + np.triu(np.ones((4, 4)), 1) * 0.1)


def test_density_matrix_is_read_only() -> None:
    rho = TwoQubitDensityMatrix.from_pure([1, 0, 0, 1])

    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 0


def test_bell_state_negativity() -> None:
    bell = TwoQubitDensityMatrix.from_pure([0, 1, 1, 0])

    assert negativity_numeric(bell).negativity == pytest.approx(0.5)
    assert purity(bell) == pytest.approx(1)
    assert rho_to_json(bell)["basis"] == ["00", "10", "01", "11"]


def test_stimulation_phase_wraps() -> None:
    squeezed = FieldState.squeezed(0.5, 0.25)

    assert stimulation_phase(-1.0, 0.0, FieldState.vacuum(), 0.0) == pytest.approx(
        math.pi
    )
    assert stimulation_phase(1j, math.pi, squeezed, 0.0) == pytest.approx(
        math.pi / 2 + 0.25
    )
    assert stimulation_phase(1.0, 0.0, squeezed, 0.1) == pytest.approx(0.35)


def test_squeezing_bracket() -> None:
    assert squeezing_bracket(0.0, 1.234) == 1
    assert squeezing_bracket(0.4, 0.0) == pytest.approx((1 + math.exp(-0.8)) / 2)


def test_optimal_squeezing_minimizes_bracket() -> None:
    for Theta in (0.3, math.pi / 3, 1.2):
        r = optimal_squeezing(Theta)
        best = squeezing_bracket(r, Theta)

        assert best <= squeezing_bracket(r + 0.01, Theta)
        assert best <= squeezing_bracket(r - 0.01, Theta)

    assert optimal_squeezing(math.pi / 2) == pytest.approx(0)
    assert optimal_squeezing(2.0) < 0


@pytest.mark.parametrize("Theta", [0.0, math.pi, 2 * math.pi])
def test_optimal_squeezing_degenerate(Theta: float) -> None:
    with pytest.raises(ThetaDegenerate):
        optimal_squeezing(Theta)


def test_closed_form_clamps_at_zero() -> None:
    report = negativity_closed_form(0.01, 1.0, 0.0, FieldState.vacuum(), 0.01)

    assert report.negativity == 0
    assert report.lambda1.real > 0
    assert sum(report.eigenvalues) == pytest.approx(1)


def test_gg_dagger_expectation_squeezed() -> None:
    value = gg_dagger_expectation(0.5, 0.1, FieldState.squeezed(0.5), 0.0)

    assert value == pytest.approx(0.0025 * math.exp(-1))


def test_purity_prediction(synthetic_pair) -> None:
    rho = build_rho_f(synthetic_pair, FieldState.vacuum(), 0.01, 0.5)
    predicted = purity_prediction(synthetic_pair, FieldState.vacuum(), 0.01)

    assert predicted == pytest.approx(1 - 4e-6)
    assert purity(rho) == pytest.approx(predicted, abs=1e-8)


def test_negativity_sweep() -> None:
    r_grid = [0.05 * i for i in range(21)]
    Theta_grid = [0.0, math.pi / 3, math.pi]
    sweep = negativity_vs_r_sweep(0.5, 0.1, 0.0, Theta_grid, r_grid, 0.01)
    rows = list(sweep.table())
    unsqueezed = [row for row in sweep.rows if row.r == 0]

    assert len(rows) == 3 * 21
    assert all(len(row) == len(SWEEP_HEADER) for row in rows)
    assert all(row.negativity == row.negativity_vacuum for row in unsqueezed)
    assert sweep.argmax[0.0] == r_grid[-1]
    assert sweep.argmax[math.pi] == 0
    assert sweep.argmax[math.pi / 3] == pytest.approx(0.2747, abs=0.05)
    assert math.isnan(sweep.rows[0].r_opt)
    assert sweep.rows[21].r_opt == pytest.approx(0.2747, abs=1e-4)


def test_negativity_sweep_rejects_empty_grid() -> None:
    with pytest.raises(ValueError):
        negativity_vs_r_sweep(0.5, 0.1, 0.0, [], [0.0], 0.01)


@pytest.mark.parametrize("alpha", [1.0, 5.0, 20j])
def test_coherent_stimulation_gives_no_gain(synthetic_pair, alpha: complex) -> None:
    lam = 0.01
    vacuum = build_rho_f(synthetic_pair, FieldState.vacuum(), lam, 0.5, frame=Frame.LOCAL)
    stimulated = build_rho_f(
        synthetic_pair, FieldState.coherent(alpha), lam, 0.5, frame=Frame.LOCAL
    )
    baseline = negativity_numeric(vacuum).negativity

    assert baseline > 0
    assert negativity_numeric(stimulated).negativity - baseline < 5 * lam**3


@pytest.mark.parametrize("alpha", [1.0, 5.0, 20j])
def test_purity_prediction_for_coherent_fields(rest_pair, alpha: complex) -> None:
    lam = 0.01
    integrals, M = rest_pair
    coherent = FieldState.coherent(alpha)
    rho = build_rho_f(integrals, coherent, lam, M, frame=Frame.LOCAL)
    predicted = purity_prediction(integrals, coherent, lam)

    assert predicted == pytest.approx(
        purity_prediction(integrals, FieldState.vacuum(), lam), abs=1e-15
    )
    assert purity(rho) == pytest.approx(predicted, abs=1e-7)


def test_lab_frame_purity_for_weak_coherent_field(synthetic_pair) -> None:
    coherent = FieldState.coherent(1.0)
    rho = build_rho_f(synthetic_pair, coherent, 0.01, 0.5)

    assert purity(rho) == pytest.approx(
        purity_prediction(synthetic_pair, coherent, 0.01), abs=1e-8
    )


@pytest.mark.parametrize("Theta", [math.pi / 3, math.pi / 2 - 0.3, math.pi / 2 + 0.3])
def test_optimal_squeezing_matches_fine_scan(Theta: float) -> None:
    # |M| >> I^2 keeps the exact modulus within 1e-4 of its expansion's optimum
    lam = 0.01
    r_opt = optimal_squeezing(Theta)
    phi = Theta if r_opt >= 0 else Theta + math.pi
    r_grid = np.linspace(0.0, 3.0, 30001)
    negativity = [
        negativity_closed_form(1e4, 1.0, 0.0, FieldState.squeezed(r, phi), lam).negativity
        for r in r_grid
    ]

    assert r_grid[int(np.argmax(negativity))] == pytest.approx(abs(r_opt), abs=2e-4)
