"""Command line front end.

Subcommands reproduce the amplification curves and run the planning and
simulation workflows, emitting CSV (grids, transcripts) or JSON
(structured plans).  Every command is deterministic given its flags and
seed; CSV output is byte-stable and starts with a versioned schema
comment line.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Optional, Sequence

import numpy as np

from . import npa
from .games import (
    chsh_game,
    input_distribution_from_source,
    magic_square_game,
    mermin_game,
    uniform_distribution,
)
from .protocol import InfeasibleSlackError, plan_protocol, threshold_gap, threshold_success
from .simulator import AdversarialDevice, HonestDevice, attack_suite, estimate_output_bias, run_protocol
from .sources import ExtremalSource, canonical_mermin_source, constant_sign
from .strategies import (
    NoiseModel,
    classical_value,
    ghz_mermin_strategy,
    magic_square_quantum_strategy,
    quantum_success,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

MONOTONICITY_SLACK = 1e-5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the contract here wants 1."""

    def error(self, message: str):
        raise UsageError(message)


def parse_grid(text: str) -> list[float]:
    """Either a single value `v` or a sweep `a:b:n` (n points, inclusive)."""
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise UsageError(f"grid must be 'v' or 'a:b:n', got {text!r}")
    a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise UsageError(f"grid needs at least one point, got {n}")
    return [float(v) for v in np.linspace(a, b, n)]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _emit(
    rows: list[dict],
    fieldnames: list[str],
    schema: str,
    fmt: str,
    out,
    comments: Optional[list[str]] = None,
) -> None:
    if fmt == "json":
        payload = {"schema": schema, "rows": rows}
        if comments:
            payload["notes"] = comments
        out.write(json.dumps(payload, indent=2, default=_fmt) + "\n")
        return
    out.write(f"# schema: {schema}\n")
    writer = csv.DictWriter(out, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in fieldnames})
    for line in comments or []:
        out.write(f"# {line}\n")


def cmd_game_value(name: str, epsilon: float, tolerance: float) -> list[dict]:
    """Classical value by enumeration and a quantum reference value under
    the source-induced input distribution."""
    if name == "chsh":
        game = chsh_game()
        dist = (
            uniform_distribution(game)
            if epsilon == 0.0
            else input_distribution_from_source(game, ExtremalSource(epsilon, constant_sign(+1)))
        )
        c, _ = classical_value(game, dist)
        q = npa.max_success_probability(game, dist, npa.LEVEL_Q2, npa.SolverSettings(tolerance=tolerance))
    elif name == "mermin":
        game = mermin_game()
        dist = input_distribution_from_source(game, canonical_mermin_source(epsilon))
        c, _ = classical_value(game, dist)
        q = quantum_success(ghz_mermin_strategy(), game, dist)
    elif name == "magic-square":
        if epsilon != 0.0:
            raise UsageError("magic-square inputs are trits; only epsilon=0 is defined")
        game = magic_square_game()
        dist = uniform_distribution(game)
        c, _ = classical_value(game, dist)
        q = quantum_success(magic_square_quantum_strategy(), game, dist)
    else:
        raise UsageError(f"unknown game {name!r} (chsh, mermin, magic-square)")
    return [{"game": name, "epsilon": epsilon, "classical": c, "quantum": q}]


def cmd_figure1(eps_grid: list[float], ps_grid: list[float], tolerance: float) -> tuple[list[dict], list[str]]:
    """Output-bias bound over an (epsilon, success floor) grid."""
    settings = npa.SolverSettings(tolerance=tolerance)
    rows = []
    for eps in eps_grid:
        for ps in ps_grid:
            row = {"epsilon": eps, "p_s": ps, "eps_prime": None, "status": "ok"}
            try:
                row["eps_prime"] = npa.eps_prime(eps, ps, settings=settings)
            except npa.InfeasibleSuccessError:
                row["status"] = "infeasible"
            except npa.SolverFailureError:
                row["status"] = "solver_failure"
            rows.append(row)
    violations = 0
    for eps in eps_grid:
        col = [r["eps_prime"] for r in rows if r["epsilon"] == eps and r["eps_prime"] is not None]
        pss = [r["p_s"] for r in rows if r["epsilon"] == eps and r["eps_prime"] is not None]
        order = np.argsort(pss)
        seq = [col[i] for i in order]
        violations += sum(1 for u, v in zip(seq, seq[1:]) if v > u + MONOTONICITY_SLACK)
    return rows, [f"monotonicity_violations_in_p_s: {violations}"]


def cmd_figure2(eps_grid: list[float], tolerance: float) -> list[dict]:
    """Critical success probability for amplification at target eps'=eps."""
    rows = []
    for eps in eps_grid:
        row = {"epsilon": eps, "p_crit": None, "status": "ok"}
        try:
            row["p_crit"] = npa.critical_success(eps, eps, tolerance)
        except (npa.BracketingError, npa.SolverFailureError, ValueError) as exc:
            row["status"] = f"failed: {exc}"
        rows.append(row)
    return rows


def cmd_figure3(eps_grid: list[float], delta: float, x: float, tolerance: float) -> list[dict]:
    """Sufficient success threshold chained from the critical curve.

    threshold_margin is 1 - p_threshold computed without cancellation;
    it stays positive (the curve sits strictly below 1) even where the
    threshold itself rounds to 1 in double precision.
    """
    rows = []
    for base in cmd_figure2(eps_grid, tolerance):
        row = {
            "epsilon": base["epsilon"],
            "p_crit": base["p_crit"],
            "p_threshold": None,
            "threshold_margin": None,
            "status": base["status"],
        }
        if base["p_crit"] is not None:
            row["p_threshold"] = threshold_success(base["p_crit"], base["epsilon"], delta, x)
            row["threshold_margin"] = threshold_gap(base["p_crit"], base["epsilon"], delta, x)
        rows.append(row)
    return rows


def cmd_plan(
    epsilon: float, eps_prime: float, delta: float, x: Optional[float], tolerance: float
) -> dict:
    params = plan_protocol(epsilon, eps_prime, delta, x, bisection_tol=tolerance)
    return {
        "epsilon": params.epsilon,
        "eps_prime_target": params.eps_prime_target,
        "delta": params.delta,
        "x": params.x,
        "n_rounds": params.n_rounds,
        "p_crit": params.p_crit,
        "p_threshold": params.p_threshold,
        "confidence": params.delta**2,
    }


def cmd_simulate(
    epsilon: float,
    eps_prime: float,
    delta: float,
    x: Optional[float],
    device_name: str,
    visibility: float,
    runs: int,
    seed: int,
    tolerance: float,
) -> tuple[list[dict], list[str]]:
    params = plan_protocol(epsilon, eps_prime, delta, x, bisection_tol=tolerance)
    if device_name == "honest":
        device = HonestDevice(ghz_mermin_strategy(), NoiseModel(visibility))
    else:
        suite = attack_suite()
        if device_name not in suite:
            known = ", ".join(["honest", *suite])
            raise UsageError(f"unknown device {device_name!r} (known: {known})")
        device = AdversarialDevice(suite[device_name])

    rows = []
    seeds = np.random.SeedSequence(seed).spawn(runs)
    for i, s in enumerate(seeds):
        run = run_protocol(params, device, np.random.default_rng(s))
        rows.append(
            {
                "run": i,
                "p_est": run.p_est,
                "p_avg": run.p_avg,
                "aborted": run.aborted,
                "selected_round": run.selected_round,
                "output_bit": run.output_bit,
                "source_bits_used": run.source_bits_used,
                "selection_draws": run.selection_draws,
                "aggregated": run.aggregated,
            }
        )
    est = estimate_output_bias(params, device, runs, seed)
    summary = [
        f"n_rounds: {params.n_rounds}",
        f"p_threshold: {_fmt(params.p_threshold)}",
        f"abort_rate: {_fmt(est.abort_rate)}",
        f"emitted: {est.emitted}",
        f"p_zero: {_fmt(est.p_zero)}",
        f"bias: {_fmt(est.bias)}",
        f"bias_ci: {_fmt(est.bias_interval[0]) if est.bias_interval else ''}"
        f"..{_fmt(est.bias_interval[1]) if est.bias_interval else ''}",
    ]
    return rows, summary


def _build_parser() -> _Parser:
    parser = _Parser(prog="randamp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser) -> None:
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--tolerance", type=float, default=None)

    p = sub.add_parser("game-value", help="classical and quantum values of one game")
    p.add_argument("game", choices=("chsh", "mermin", "magic-square"))
    p.add_argument("--epsilon", type=float, default=0.0)
    common(p)

    p = sub.add_parser("figure1", help="output-bias bound over (epsilon, success floor)")
    p.add_argument("--grid", default="0.1:0.45:3", help="epsilon grid a:b:n")
    p.add_argument("--ps", default="0.96:1.0:3", help="success floor grid a:b:n or value")
    common(p)

    p = sub.add_parser("figure2", help="critical success probability curve")
    p.add_argument("--grid", default="0.1:0.45:3", help="epsilon grid a:b:n")
    common(p)

    p = sub.add_parser("figure3", help="sufficient success threshold curve")
    p.add_argument("--grid", default="0.1:0.45:3", help="epsilon grid a:b:n")
    p.add_argument("--delta", type=float, default=0.99)
    p.add_argument("--x", type=float, default=0.0)
    common(p)

    p = sub.add_parser("plan", help="derive full protocol parameters")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--eps-prime", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--x", type=float, default=None)
    common(p)

    p = sub.add_parser("simulate", help="plan and execute protocol runs")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--eps-prime", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--x", type=float, default=None)
    p.add_argument("--device", default="honest")
    p.add_argument("--visibility", type=float, default=1.0)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    common(p)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    tolerance = args.tolerance
    buffer = io.StringIO()
    try:
        if args.command == "game-value":
            rows = cmd_game_value(args.game, args.epsilon, tolerance or 1e-8)
            _emit(rows, ["game", "epsilon", "classical", "quantum"], "randamp-game-value v1",
                  args.format or "csv", buffer)
        elif args.command == "figure1":
            rows, notes = cmd_figure1(parse_grid(args.grid), parse_grid(args.ps), tolerance or 1e-8)
            if all(r["status"] != "ok" for r in rows):
                raise npa.SolverFailureError("every grid cell failed")
            _emit(rows, ["epsilon", "p_s", "eps_prime", "status"], "randamp-figure1 v1",
                  args.format or "csv", buffer, notes)
        elif args.command == "figure2":
            rows = cmd_figure2(parse_grid(args.grid), tolerance or 1e-4)
            if all(r["status"] != "ok" for r in rows):
                raise npa.SolverFailureError("every grid cell failed")
            _emit(rows, ["epsilon", "p_crit", "status"], "randamp-figure2 v1",
                  args.format or "csv", buffer)
        elif args.command == "figure3":
            rows = cmd_figure3(parse_grid(args.grid), args.delta, args.x, tolerance or 1e-4)
            if all(r["status"] != "ok" for r in rows):
                raise npa.SolverFailureError("every grid cell failed")
            _emit(rows, ["epsilon", "p_crit", "p_threshold", "threshold_margin", "status"],
                  "randamp-figure3 v1", args.format or "csv", buffer)
        elif args.command == "plan":
            plan = cmd_plan(args.epsilon, args.eps_prime, args.delta, args.x, tolerance or 1e-4)
            if (args.format or "json") == "json":
                buffer.write(json.dumps({"schema": "randamp-plan v1", **plan}, indent=2) + "\n")
            else:
                _emit([plan], list(plan.keys()), "randamp-plan v1", "csv", buffer)
        elif args.command == "simulate":
            rows, summary = cmd_simulate(
                args.epsilon, args.eps_prime, args.delta, args.x,
                args.device, args.visibility, args.runs, args.seed, tolerance or 1e-4,
            )
            _emit(
                rows,
                ["run", "p_est", "p_avg", "aborted", "selected_round", "output_bit",
                 "source_bits_used", "selection_draws", "aggregated"],
                "randamp-simulate v1", args.format or "csv", buffer, summary,
            )
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleSlackError as exc:
        print(f"numerical failure: {exc} (maximal feasible x: {_fmt(exc.x_max)})", file=sys.stderr)
        return EXIT_NUMERICAL
    except (npa.SolverFailureError, npa.BracketingError, npa.InfeasibleSuccessError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    text = buffer.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
