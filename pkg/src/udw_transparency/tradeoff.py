"""Gate time against decoherence time for entangling gates built from harvesting.

All prefactors are taken as 1, so times are meaningful up to O(1) factors; the
ratios and their monotonic behaviour are what the analysis is about.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import Iterator, Sequence

from udw_transparency.entanglement import squeezing_bracket
from udw_transparency.errors import GateUnreachable

log = logging.getLogger(__name__)

TRADEOFF_HEADER = (
    "M_abs",
    "I_plus_abs",
    "r",
    "Theta",
    "tau_gate",
    "tau_dec",
    "ratio",
    "feasible",
    "regime",
)
M_DOMINANCE = 10.0
PERTURBATIVE_LIMIT = 0.1


class Regime(StrEnum):
    M_DOMINANT = "M_dominant"
    COMPARABLE = "comparable"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class TradeoffInputs:
    M_abs: float
    I_plus_abs: float
    r: float = 0.0
    Theta: float = 0.0
    lam: float = 0.01
    T_cycle: float = 1.0
    N_star: float = 1.0

    def __post_init__(self) -> None:
        values = (self.M_abs, self.I_plus_abs, self.r, self.Theta, self.lam)

        if not all(math.isfinite(v) for v in (*values, self.T_cycle, self.N_star)):
            raise ValueError(f"Trade-off inputs must be finite: {self}")
        if self.M_abs < 0 or self.I_plus_abs < 0 or self.r < 0:
            raise ValueError(f"|M|, |I+| and r must be non-negative: {self}")
        if not 0 < self.lam <= 0.1:
            raise ValueError(f"Coupling must lie in (0, 0.1], got {self.lam}")
        if self.T_cycle <= 0 or self.N_star <= 0:
            raise ValueError(f"Cycle time and goal negativity must be positive: {self}")

        if not self.perturbative:
            log.warning(
                "lambda^2 max(|M|, |I+|^2) = %s exceeds %s; second-order results"
                " are unreliable",
                self.lam**2 * max(self.M_abs, self.I_plus_abs**2),
                PERTURBATIVE_LIMIT,
            )

    @property
    def perturbative(self) -> bool:
        return self.lam**2 * max(self.M_abs, self.I_plus_abs**2) <= PERTURBATIVE_LIMIT

    @property
    def negativity_per_cycle(self) -> float:
        bracket = squeezing_bracket(self.r, self.Theta)

        return 0.5 * self.lam**2 * (self.M_abs - 2 * self.I_plus_abs**2 * bracket)


def decoherence_per_cycle(lam: float, I_plus_abs: float, r: float) -> float:
    """Excitation probability through the non-resonant channel in one cycle.

    >>> decoherence_per_cycle(0.01, 2.0, 1.0)
    0.000952439
    """
    return lam**2 * I_plus_abs**2 * math.cosh(r) ** 2


def tau_gate(inputs: TradeoffInputs) -> float:
    """Proper time to accumulate the goal negativity.

    Raises
    ------
    GateUnreachable
        if the negativity gained per cycle is not positive
    """
    gain = inputs.negativity_per_cycle

    if gain <= 0:
        raise GateUnreachable(
            f"Negativity per cycle is {gain}: |M| = {inputs.M_abs} does not beat the"
            f" local noise 2 |I+|^2 f = {inputs.M_abs - 2 * gain / inputs.lam**2}"
        )

    return inputs.N_star * inputs.T_cycle / gain


def tau_dec(inputs: TradeoffInputs) -> float:
    """Proper time until a detector decoheres; infinite when I+ vanishes.

    >>> tau_dec(TradeoffInputs(M_abs=1.0, I_plus_abs=1.0, T_cycle=100.0))
    1000000.0
    """
    p = decoherence_per_cycle(inputs.lam, inputs.I_plus_abs, inputs.r)

    return math.inf if p == 0 else inputs.T_cycle / p


@dataclass(frozen=True)
class Feasibility:
    ratio: float
    feasible: bool
    regime: Regime
    tau_gate: float
    tau_dec: float


def feasibility(inputs: TradeoffInputs) -> Feasibility:
    """Compare the gate time with the decoherence time.

    The ratio comes straight from the two times.  An unreachable gate is reported
    as an infeasible regime with infinite ratio rather than raised.
    """
    decoherence = tau_dec(inputs)

    try:
        gate = tau_gate(inputs)
    except GateUnreachable:
        return Feasibility(
            ratio=math.inf,
            feasible=False,
            regime=Regime.INFEASIBLE,
            tau_gate=math.inf,
            tau_dec=decoherence,
        )

    ratio = gate / decoherence
    regime = (
        Regime.M_DOMINANT
        if inputs.M_abs > M_DOMINANCE * inputs.I_plus_abs**2
        else Regime.COMPARABLE
    )

    return Feasibility(
        ratio=ratio,
        feasible=ratio < 1 and math.isfinite(gate),
        regime=regime,
        tau_gate=gate,
        tau_dec=decoherence,
    )


@dataclass(frozen=True)
class TradeoffRow:
    inputs: TradeoffInputs
    result: Feasibility

    def as_row(self) -> tuple[float, float, float, float, float, float, float, int, str]:
        return (
            self.inputs.M_abs,
            self.inputs.I_plus_abs,
            self.inputs.r,
            self.inputs.Theta,
            self.result.tau_gate,
            self.result.tau_dec,
            self.result.ratio,
            int(self.result.feasible),
            str(self.result.regime),
        )


def tradeoff_sweep(
    I_plus_abs: float,
    M_ratios: Sequence[float],
    r_grid: Sequence[float],
    *,
    Theta: float = 0.0,
    lam: float = 0.01,
    T_cycle: float = 1.0,
    N_star: float = 1.0,
) -> Iterator[TradeoffRow]:
    """Feasibility for |M| = ratio * |I+|^2 over every (ratio, r), in row-major order."""
    for ratio in M_ratios:
        for r in r_grid:
            inputs = TradeoffInputs(
                M_abs=ratio * I_plus_abs**2,
                I_plus_abs=I_plus_abs,
                r=r,
                Theta=Theta,
                lam=lam,
                T_cycle=T_cycle,
                N_star=N_star,
            )
            yield TradeoffRow(inputs, feasibility(inputs))
