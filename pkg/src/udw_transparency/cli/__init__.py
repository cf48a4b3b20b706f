from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    field_validator,
)

from udw_transparency.errors import InsufficientIntersections
from udw_transparency.gates import FieldKind, FieldState
from udw_transparency.oracle import FockConfig
from udw_transparency.transparency_search import (
    Intersection,
    ScanField,
    SearchGrid,
    extract_zero_curves,
    find_intersections,
    scan,
    select,
)
from udw_transparency.trajectory import CycleSpec, concat_intervals


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class TrajectoryConfig(Section):
    omega: PositiveFloat = 1.2
    k: PositiveFloat = 1.0
    m: PositiveInt = 16
    n: PositiveInt = 15


class SearchConfig(Section):
    v_c_range: tuple[float, float] = (0.4, 0.9)
    T_a_range: tuple[float, float] = (0.0, 6.0)
    resolution: tuple[PositiveInt, PositiveInt] = (256, 256)
    polish_tol: PositiveFloat = 1e-10
    labels: list[str] = []


class FieldConfig(Section):
    kind: FieldKind = FieldKind.VACUUM
    alpha: tuple[float, float] = (0.0, 0.0)
    r: NonNegativeFloat = 0.0
    phi: float = 0.0

    def state(self) -> FieldState:
        return FieldState(self.kind, alpha=complex(*self.alpha), r=self.r, phi=self.phi)


class CouplingConfig(Section):
    lam: float = Field(0.01, alias="lambda", gt=0, le=0.05)
    detector_spacing: float = 0.0


class OracleConfig(Section):
    n_max: int = Field(32, ge=4)
    steps_per_segment: PositiveInt = 4096
    lambdas: list[PositiveFloat] = Field([0.02, 0.01, 0.005], min_length=3)
    richardson_tol: PositiveFloat = 1e-9

    @field_validator("lambdas")
    @classmethod
    def geometric(cls, lambdas: list[float]) -> list[float]:
        ratios = [b / a for a, b in zip(lambdas, lambdas[1:])]

        if any(not math.isclose(r, ratios[0], rel_tol=1e-9) for r in ratios):
            raise ValueError(f"lambdas must form a geometric progression: {lambdas}")

        return lambdas

    def fock(self) -> FockConfig:
        return FockConfig(
            n_max=self.n_max,
            steps_per_segment=self.steps_per_segment,
            richardson_tol=self.richardson_tol,
        )


class NegativityConfig(Section):
    Theta_grid: list[float] = Field(
        [0.0, math.pi / 4, math.pi / 3, math.pi / 2, 3 * math.pi / 4, math.pi],
        min_length=1,
    )
    r_grid: list[NonNegativeFloat] = Field(
        [0.05 * i for i in range(41)], min_length=1
    )


class TradeoffConfig(Section):
    M_ratios: list[NonNegativeFloat] = Field(
        [1.0, 2.0, 2.5, 5.0, 10.0, 20.0, 100.0], min_length=1
    )
    r_grid: list[NonNegativeFloat] = Field([0.0, 0.25, 0.5, 1.0], min_length=1)
    Theta: float = 0.0
    N_star: PositiveFloat = 1.0


class RunConfig(Section):
    trajectory: TrajectoryConfig = TrajectoryConfig()
    search: SearchConfig = SearchConfig()
    field: FieldConfig = FieldConfig()
    coupling: CouplingConfig = CouplingConfig()
    oracle: OracleConfig = OracleConfig()
    negativity: NegativityConfig = NegativityConfig()
    tradeoff: TradeoffConfig = TradeoffConfig()

    @classmethod
    def load(cls, path: Path | None) -> RunConfig:
        """Read a JSON config; a missing path means all defaults."""
        return cls() if path is None else cls.model_validate_json(path.read_text())

    def grid(self) -> SearchGrid:
        t, s = self.trajectory, self.search

        return SearchGrid(
            omega=t.omega,
            k=t.k,
            m=t.m,
            n=t.n,
            v_c_range=s.v_c_range,
            T_a_range=s.T_a_range,
            resolution=s.resolution,
        )


def format_value(value: Any) -> str:
    """Format a CSV cell; floats always carry 17 significant digits.

    >>> format_value(0.1)
    '0.10000000000000001'
    >>> format_value(True), format_value(3), format_value("P1")
    ('1', '3', 'P1')
    """
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return "%.17g" % value

    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """Write `rows` under `header`; returns the number of data rows."""
    count = 0

    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)

        for row in rows:
            writer.writerow([format_value(value) for value in row])
            count += 1

    return count


def run_search(
    config: RunConfig, *, threads: int = 1
) -> tuple[ScanField, list[Intersection]]:
    grid = config.grid()
    field = scan(grid, threads=threads)
    curves = extract_zero_curves(field)
    intersections = find_intersections(curves, config.search.polish_tol)

    return field, intersections


def resolve_labels(
    intersections: Sequence[Intersection], labels: Sequence[str]
) -> list[Intersection]:
    """Intersections named by `labels`, or the first two certified ones.

    Raises
    ------
    LabelNotFound
        if a label matches no intersection
    InsufficientIntersections
        if no labels are given and fewer than two intersections are certified
    """
    if labels:
        return select(intersections, labels)

    certified = [i for i in intersections if i.certified]

    if len(certified) < 2:
        raise InsufficientIntersections(
            f"Need two certified intersections, found {len(certified)}"
        )

    return certified[:2]


def resolve_trajectory(
    config: RunConfig, labels: Sequence[str], *, threads: int = 1
) -> tuple[list[Intersection], CycleSpec]:
    """Search, pick the labelled intervals and concatenate them."""
    _, intersections = run_search(config, threads=threads)

    if not intersections:
        raise InsufficientIntersections("The search found no transparent intervals")

    chosen = resolve_labels(intersections, labels or config.search.labels)

    return chosen, concat_intervals([i.cycle for i in chosen])
