from __future__ import annotations

import argparse
import cmath
import json
import logging
import os
import sys
from enum import IntEnum
from pathlib import Path
from typing import Sequence

from udw_transparency.cli import (
    RunConfig,
    resolve_trajectory,
    run_search,
    write_csv,
)
from udw_transparency.entanglement import SWEEP_HEADER, negativity_vs_r_sweep
from udw_transparency.errors import (
    InsufficientIntersections,
    LabelNotFound,
    StepNonConvergence,
    TransparencyAssertionFailed,
    TransparencyRequired,
    TruncationLeakage,
)
from udw_transparency.oracle import resonant_suppression, validate_perturbative
from udw_transparency.phase_integrals import DetectorLayout, compute_M, cycle_integrals
from udw_transparency.tradeoff import TRADEOFF_HEADER, tradeoff_sweep
from udw_transparency.trajectory import CycleSpec, sample_worldline
from udw_transparency.transparency_search import (
    INTERSECTION_HEADER,
    SCAN_HEADER,
    intersection_rows,
    scan_rows,
)

TRANSPARENCY_TOL = 1e-8


class ExitCode(IntEnum):
    OK = 0
    CONFIG = 2
    NO_INTERSECTIONS = 3
    UNKNOWN_LABEL = 4
    NOT_TRANSPARENT = 5
    VALIDATION = 6


def _transparent_pair(
    config: RunConfig, labels: Sequence[str], threads: int
) -> tuple[CycleSpec, complex, complex]:
    """Resolve the labelled trajectory and return it with its M and I+.

    Raises
    ------
    TransparencyRequired
        if the concatenated trajectory has |I-| >= 1e-8
    """
    t = config.trajectory
    chosen, cycle = resolve_trajectory(config, labels, threads=threads)
    integrals = cycle_integrals(cycle, t.omega, t.k)

    if not integrals.is_transparent(TRANSPARENCY_TOL):
        raise TransparencyRequired(
            f"Trajectory {'+'.join(i.label for i in chosen)} has"
            f" |I-| = {abs(integrals.I_minus)}"
        )

    layout = DetectorLayout.pair(config.coupling.detector_spacing)
    M = compute_M(cycle, t.omega, t.k, layout, transparent=True)

    print(
        f"Trajectory {'+'.join(i.label for i in chosen)}:"
        f" |I+| = {abs(integrals.I_plus):.6g}, |M| = {abs(M):.6g}"
    )

    return cycle, M, integrals.I_plus


def cmd_search(config: RunConfig, out: Path, threads: int) -> ExitCode:
    field, intersections = run_search(config, threads=threads)
    write_csv(out / "scan.csv", SCAN_HEADER, scan_rows(field))
    write_csv(
        out / "intersections.csv", INTERSECTION_HEADER, intersection_rows(intersections)
    )

    certified = [i for i in intersections if i.certified]

    for i in certified:
        print(
            f"{i.label}: v_c={i.v_c:.6f} T_a={i.T_a:.6f} v_b={i.v_b:.6f}"
            f" T_b={i.T_b:.6f} residual={i.residual:.3g}"
        )

    if not certified:
        print("No transparent intervals found")
        return ExitCode.NO_INTERSECTIONS

    return ExitCode.OK


def cmd_trajectory(
    config: RunConfig, out: Path, threads: int, labels: Sequence[str]
) -> ExitCode:
    chosen, cycle = resolve_trajectory(config, labels, threads=threads)
    tau, t, x = sample_worldline(cycle)
    rows = write_csv(out / "worldline.csv", ("tau", "t", "x"), zip(tau, t, x))
    print(f"Wrote {rows} worldline points for {'+'.join(i.label for i in chosen)}")

    return ExitCode.OK


def cmd_negativity(
    config: RunConfig, out: Path, threads: int, labels: Sequence[str]
) -> ExitCode:
    _, M, I_plus = _transparent_pair(config, labels, threads)
    sweep = negativity_vs_r_sweep(
        M,
        abs(I_plus),
        cmath.phase(I_plus),
        config.negativity.Theta_grid,
        config.negativity.r_grid,
        config.coupling.lam,
    )
    write_csv(out / "negativity.csv", SWEEP_HEADER, sweep.table())

    for Theta, r in sweep.argmax.items():
        print(f"Theta={Theta:.6f}: negativity peaks at r={r:.6g}")

    return ExitCode.OK


def cmd_tradeoff(
    config: RunConfig, out: Path, threads: int, labels: Sequence[str]
) -> ExitCode:
    cycle, M, I_plus = _transparent_pair(config, labels, threads)
    settings = config.tradeoff
    I_abs = abs(I_plus)
    ratios = list(settings.M_ratios)

    if I_abs > 0:
        ratios.insert(0, abs(M) / I_abs**2)

    rows = tradeoff_sweep(
        I_abs,
        ratios,
        settings.r_grid,
        Theta=settings.Theta,
        lam=config.coupling.lam,
        T_cycle=cycle.proper_duration,
        N_star=settings.N_star,
    )
    count = write_csv(out / "tradeoff.csv", TRADEOFF_HEADER, (r.as_row() for r in rows))
    print(f"Wrote {count} trade-off rows")

    return ExitCode.OK


def cmd_oracle_check(
    config: RunConfig, out: Path, threads: int, labels: Sequence[str]
) -> ExitCode:
    t = config.trajectory
    cycle, _, _ = _transparent_pair(config, labels, threads)
    cfg = config.oracle.fock()
    layout = DetectorLayout.pair(config.coupling.detector_spacing)

    try:
        report = validate_perturbative(
            cycle,
            t.omega,
            t.k,
            layout,
            config.field.state(),
            config.oracle.lambdas,
            cfg=cfg,
            threads=threads,
        )
        suppression = resonant_suppression(cycle, t.omega, t.k, cfg)
    except (TruncationLeakage, StepNonConvergence) as e:
        print(f"Oracle failed: {e}")
        (out / "oracle.json").write_text(json.dumps({"passed": False, "error": str(e)}))
        return ExitCode.VALIDATION

    document = {**report.to_json(), "suppression": suppression.to_json()}
    (out / "oracle.json").write_text(json.dumps(document, indent=2))
    print(f"Error slope {report.fit_slope:.3f}; suppression x{suppression.ratio:.3g}")

    return ExitCode.OK if report.passed else ExitCode.VALIDATION


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="udw-transparency",
        description="Transparent detector trajectories, gates and entanglement.",
    )
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument(
        "--threads", type=int, default=1, help="worker processes (0 = one per CPU)"
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")

    commands = p.add_subparsers(dest="command", required=True)
    commands.add_parser("search", help="scan for transparent intervals")

    for name, text in (
        ("trajectory", "sample the worldline of selected intervals"),
        ("negativity", "sweep negativity against squeezing"),
        ("tradeoff", "tabulate gate time against decoherence time"),
        ("oracle-check", "validate perturbative results by exact evolution"),
    ):
        sub = commands.add_parser(name, help=text)
        sub.add_argument(
            "--labels", nargs="+", default=[], help="intersection labels, e.g. P1 P2"
        )

    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.threads < 0:
        print(f"--threads must be >= 0, got {args.threads}", file=sys.stderr)
        return ExitCode.CONFIG

    threads = args.threads or os.cpu_count() or 1

    try:
        config = RunConfig.load(args.config)
        config.grid()
    except (OSError, ValueError) as e:
        print(f"Invalid configuration: {e}", file=sys.stderr)
        return ExitCode.CONFIG

    args.out.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "search":
            return cmd_search(config, args.out, threads)

        command = {
            "trajectory": cmd_trajectory,
            "negativity": cmd_negativity,
            "tradeoff": cmd_tradeoff,
            "oracle-check": cmd_oracle_check,
        }[args.command]

        return command(config, args.out, threads, args.labels)
    except InsufficientIntersections as e:
        print(e, file=sys.stderr)
        return ExitCode.NO_INTERSECTIONS
    except LabelNotFound as e:
        print(e, file=sys.stderr)
        return ExitCode.UNKNOWN_LABEL
    except (TransparencyRequired, TransparencyAssertionFailed) as e:
        print(e, file=sys.stderr)
        return ExitCode.NOT_TRANSPARENT


if __name__ == "__main__":
    sys.exit(main())
