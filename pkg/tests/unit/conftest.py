import math

import pytest

from udw_transparency.phase_integrals import (
    DetectorLayout,
    PhaseIntegralSet,
    cycle_integrals,
)
from udw_transparency.trajectory import CycleSpec, PeriodicityParams, rest_cycle

# Detuned gap and mode: a detector at rest for 2 pi / (omega - k) sees I^- = 0.
OMEGA = 1.3
K = 1.0


@pytest.fixture
def omega() -> float:
    return OMEGA


@pytest.fixture
def k() -> float:
    return K


@pytest.fixture
def published_params() -> PeriodicityParams:
    return PeriodicityParams(omega=1.2, k=1.0, m=16, n=15, T_a=2.94, v_c=0.66)


@pytest.fixture
def transparent_rest() -> CycleSpec:
    """A rest window spanning one full beat of omega - k."""
    return rest_cycle(2 * math.pi / (OMEGA - K))


@pytest.fixture
def pair_layout() -> DetectorLayout:
    return DetectorLayout.pair()


@pytest.fixture
def rest_integrals(transparent_rest: CycleSpec) -> PhaseIntegralSet:
    return cycle_integrals(transparent_rest, OMEGA, K)


@pytest.fixture
def synthetic_pair() -> list[PhaseIntegralSet]:
    """Two co-located transparent detectors with I+ = 0.1 i."""
    integrals = PhaseIntegralSet(0.1j, 0j, 0j, -0.1j, omega=OMEGA, k=K)

    return [integrals, integrals.shifted(0.0, detector_index=1)]
