"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 circuit parse error,
3 numerical guard failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence, TextIO

from . import __version__
from .circuit import Circuit, CircuitParseError, parse_angle, parse_circuit
from .compiler import ControlSchedule, PhysicalParams, compile_circuit
from .envelope_sim import apply_schedule, final_probabilities, run_shots
from .errors import NumericalGuardError, PendulumError
from .experiments import (
    OPTIMAL_CHSH_A,
    OPTIMAL_CHSH_B,
    fig3_trace,
    run_anticorrelation,
    run_bitflip_demo,
    run_chsh,
)
from .newton_sim import IntegratorConfig, NewtonRunner, simulate_schedule, sweep_gates
from .qstate import EnvelopeState, fidelity, init_ground, probabilities
from .rng import shot_rng

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 1, 2, 3
MONOTONE_FLOOR = 1e-12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit(2), which we reserve
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [parse_angle(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _dump(obj, out: TextIO) -> None:
    out.write(json.dumps(obj) + "\n")


def _load_circuit(path: str) -> Circuit:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return parse_circuit(text)
    except CircuitParseError as exc:
        exc.path = path
        raise


def _params(ratio: float) -> PhysicalParams:
    if not 0 < ratio < 1:
        raise UsageError(f"--ratio must lie in (0, 1), got {ratio}")
    return PhysicalParams.from_ratio(ratio)


def _open_out(path: Optional[str], default: TextIO) -> TextIO:
    return default if path in (None, "-") else open(path, "w", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands

def cmd_run(args, out: TextIO) -> int:
    circuit = _load_circuit(args.circuit)
    if args.shots < 1:
        raise UsageError("--shots must be >= 1")
    if args.backend == "envelope":
        results = run_shots(circuit, args.shots, args.seed, args.threads)
        rows = [
            (r.outcomes, [rec.to_json() for rec in r.records], final_probabilities(r)) for r in results
        ]
    else:
        params = _params(args.ratio)
        runner = NewtonRunner(compile_circuit(circuit, params), params, IntegratorConfig(args.steps_per_period))

        def one(i: int):
            state, records = runner.run(shot_rng(args.seed, i))
            return (
                [r.outcome for r in records],
                [r.to_json() for r in records],
                [float(p) for p in probabilities(state)],
            )

        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                rows = list(pool.map(one, range(args.shots)))
        else:
            rows = [one(i) for i in range(args.shots)]
    for i, (outcomes, records, probs) in enumerate(rows):
        _dump(
            {
                "shot": i,
                "seed": args.seed,
                "backend": args.backend,
                "outcomes": outcomes,
                "records": records,
                "final_probabilities": probs,
            },
            out,
        )
    return EXIT_OK


def cmd_compile(args, out: TextIO) -> int:
    circuit = _load_circuit(args.circuit)
    sched = compile_circuit(circuit, _params(args.ratio))
    target = _open_out(args.output, out)
    try:
        target.write(json.dumps(sched.to_json(), indent=2) + "\n")
    finally:
        if target is not out:
            target.close()
    return EXIT_OK


def cmd_newton(args, out: TextIO) -> int:
    try:
        sched = ControlSchedule.from_json(json.loads(Path(args.schedule).read_text(encoding="utf-8")))
    except OSError as exc:
        raise UsageError(f"cannot read {args.schedule}: {exc.strerror}") from exc
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"{args.schedule} is not a schedule file: {exc}") from exc
    if sched.has_measurements:
        raise UsageError("schedule contains measurements; use 'run --backend newton' instead")
    params = sched.params or PhysicalParams()
    if args.ratio is not None:
        target = _params(args.ratio)
        # same rotation angles at a different control budget
        sched = sched.scaled(target.delta_omega_budget / params.delta_omega_budget)
        params = sched.params or target
    if args.state:
        initial = EnvelopeState.from_json(json.loads(Path(args.state).read_text(encoding="utf-8")))
    else:
        initial = init_ground(sched.n_qubits)
    cfg = IntegratorConfig(args.steps_per_period)
    result = simulate_schedule(initial, sched, params, cfg, record_trace=True)
    oracle, _ = apply_schedule(initial, sched)
    Path(args.trace).write_text(result.trace.to_csv(), encoding="utf-8")
    summary = {
        "schedule": str(args.schedule),
        "n_qubits": sched.n_qubits,
        "ratio": params.ratio,
        "steps_per_period": cfg.steps_per_carrier_period,
        "final_state": result.state.to_json(),
        "oracle_state": oracle.to_json(),
        "final_fidelity": fidelity(oracle, result.state),
        "final_energy": result.norm_squared,
        "max_energy_drift_per_period": result.max_drift_per_period,
        "max_rounding_residual": max((s.rounding_residual for s in result.segments), default=0.0),
        "segments": [
            {
                "label": s.label,
                "steps": s.steps,
                "rounding_residual": s.rounding_residual,
                "phase_residual": s.phase_residual,
                "energy_drift_per_period": s.relative_drift_per_period,
            }
            for s in result.segments
        ],
        "trace_file": str(args.trace),
    }
    _dump(summary, out)
    return EXIT_OK


def cmd_chsh(args, out: TextIO) -> int:
    if args.angles is not None:
        if len(args.angles) != 4:
            raise UsageError("--angles needs four values a1,a2,b1,b2")
        a, b = args.angles[:2], args.angles[2:]
    else:
        a, b = OPTIMAL_CHSH_A, OPTIMAL_CHSH_B
    if not args.exact and args.shots < 100:
        raise UsageError("--shots must be >= 100 per setting")
    _dump(run_chsh(a, b, args.shots, args.seed, exact=args.exact).to_json(), out)
    return EXIT_OK


def cmd_anticorr(args, out: TextIO) -> int:
    if len(args.axis) != 2:
        raise UsageError("--axis takes theta,phi")
    if args.shots < 1:
        raise UsageError("--shots must be >= 1")
    _dump(run_anticorrelation(args.axis[0], args.axis[1], args.shots, args.seed).to_json(), out)
    return EXIT_OK


def cmd_fig3(args, out: TextIO) -> int:
    report = fig3_trace()
    _dump(report, out)
    return EXIT_OK if report["ok"] else EXIT_NUMERIC


def cmd_bitflip(args, out: TextIO) -> int:
    if args.flip.strip().lower() in ("", "none"):
        flips: list[int] = []
    else:
        try:
            flips = [int(t) for t in args.flip.split(",")]
        except ValueError as exc:
            raise UsageError(f"--flip takes qubit indices or 'none', got {args.flip!r}") from exc
    try:
        report = run_bitflip_demo(flips, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _dump(report, out)
    return EXIT_OK


def cmd_sweep(args, out: TextIO) -> int:
    ratios = args.ratios
    if any(not 0 < r < 1 for r in ratios):
        raise UsageError("--ratios must lie in (0, 1)")
    qubits = [int(q) for q in args.qubits.split(",")]
    cfg = IntegratorConfig(args.steps_per_period)
    sweeps = sweep_gates(ratios, qubits, args.states, args.seed, cfg, threads=args.threads)

    def monotone(vals: Sequence[float]) -> bool:
        # gates exact to rounding sit on a noise floor and count as non-increasing
        return all(b <= a + MONOTONE_FLOOR for a, b in zip(vals, vals[1:]))

    gates = []
    for s in sweeps:
        d = s.to_json()
        d["monotone_mean"] = monotone(s.mean)
        gates.append(d)
    _dump(
        {
            "ratios": list(ratios),
            "steps_per_period": cfg.steps_per_carrier_period,
            "states_per_gate": args.states,
            "seed": args.seed,
            "gates": gates,
            "min_fidelity": min(min(g["min_fidelity"]) for g in gates),
        },
        out,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pendulum-qubits", description="Qubits, gates and measurements on coupled pendulums.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def threads(sp):
        sp.add_argument("--threads", type=int, default=1, help="worker threads (output order is fixed)")

    sp = sub.add_parser("run", help="run a circuit file and emit one JSON line per shot")
    sp.add_argument("circuit")
    sp.add_argument("--shots", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--backend", choices=("envelope", "newton"), default="envelope")
    sp.add_argument("--ratio", type=float, default=0.01, help="delta_omega / omega0 (newton backend)")
    sp.add_argument("--steps-per-period", type=int, default=200)
    threads(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compile", help="compile a circuit into a control schedule (JSON)")
    sp.add_argument("circuit")
    sp.add_argument("--ratio", type=float, default=0.01)
    sp.add_argument("-o", "--output", default=None)
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("newton", help="integrate a schedule with the Newtonian pendulum model")
    sp.add_argument("--schedule", required=True)
    sp.add_argument("--ratio", type=float, default=None, help="rescale the schedule to this control budget")
    sp.add_argument("--steps-per-period", type=int, default=200)
    sp.add_argument("--state", default=None, help="initial envelope state JSON (default: ground)")
    sp.add_argument("--trace", default="newton_trace.csv", help="CSV energy trace output path")
    sp.set_defaults(func=cmd_newton)

    sp = sub.add_parser("chsh", help="CHSH value of the singlet")
    sp.add_argument("--shots", type=int, default=10_000, help="shots per setting")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--exact", action="store_true", help="use exact outcome distributions")
    sp.add_argument("--angles", type=_float_list, default=None, help="a1,a2,b1,b2 in radians or pi-multiples")
    sp.set_defaults(func=cmd_chsh)

    sp = sub.add_parser("anticorr", help="measure a singlet along a common axis")
    sp.add_argument("--axis", type=_float_list, default=[0.0, 0.0], help="theta,phi")
    sp.add_argument("--shots", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_anticorr)

    sp = sub.add_parser("fig3", help="walk through Y measurements of a singlet")
    sp.set_defaults(func=cmd_fig3)

    sp = sub.add_parser("bitflip", help="3-qubit bit-flip repetition code")
    sp.add_argument("--flip", default="none", help="qubit(s) to flip, e.g. 1 or 1,2, or 'none'")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_bitflip)

    sp = sub.add_parser("sweep", help="Newtonian vs envelope infidelity of every primitive gate")
    sp.add_argument("--ratios", type=_float_list, default=[0.04, 0.02, 0.01])
    sp.add_argument("--steps-per-period", type=int, default=200)
    sp.add_argument("--states", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--qubits", default="1,2", help="register sizes to sweep")
    threads(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except CircuitParseError as exc:
        path = getattr(exc, "path", "<circuit>")
        for d in exc.diagnostics:
            err.write(f"{path}:{d.line}:{d.column}: error: {d.message}\n")
        return EXIT_PARSE
    except NumericalGuardError as exc:
        err.write(f"numerical guard: {exc}\n")
        return EXIT_NUMERIC
    except (UsageError, PendulumError, ValueError, OSError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
