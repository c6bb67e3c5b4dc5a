"""Command-line entry point: ``iidgen <command> <scenario> [options]``.

Scenarios are file paths or bundled names (example1, example1_noise,
example2). Exit status is 0 on success, 2 for configuration errors and 3 for
numerical failures (including infeasible synthesis).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .analysis import norm_report
from .config import Scenario, gains_fragment, load_scenario
from .errors import BudgetExhausted, ConfigError, IIDError, InsufficientWindow, NumericalFailure
from .generator import build_augmented
from .oracle import solve_sylvester
from .sim import SimTrace, deviation_amplitude, simulate
from .synthesis import synthesize, verify_gains


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17e")


def format_metrics(metrics: dict) -> str:
    lines = []
    for key, value in metrics.items():
        if key == "poles":
            for k, p in enumerate(value):
                lines.append(f"pole_{k}_re = {format_value(p.real)}")
                lines.append(f"pole_{k}_im = {format_value(p.imag)}")
        else:
            lines.append(f"{key} = {format_value(value)}")
    return "\n".join(lines) + "\n"


def parse_metrics(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if line.strip():
            key, _, value = line.partition(" = ")
            out[key] = value
    return out


def trace_columns(trace: SimTrace) -> tuple:
    """Header names and data matrix of a trace, one row per time step."""
    l = trace.xi.shape[1]
    m, n = trace.m, trace.n
    names = ["t"]
    names += [f"w{k}_{i}" for k in range(l) for i in range(m)]
    names += [f"v{i}" for i in range(m)]
    names += [f"eta_hat{i}" for i in range(n)]
    names += ["e"]
    names += [f"y{i}" for i in range(n)]
    names += [f"xi{k}" for k in range(l)]
    cols = [trace.times[:, None]]
    cols += [trace.w[k] for k in range(l)]
    cols += [trace.x, trace.y, trace.xi]
    return names, np.hstack(cols)


def write_trace_csv(path, trace: SimTrace, stride: int = 1):
    names, data = trace_columns(trace)
    np.savetxt(path, data[::stride], fmt="%.17g", delimiter=",", header=",".join(names), comments="")


def read_trace_csv(path) -> tuple:
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return names, data


def _generator(scenario: Scenario):
    if scenario.gains is None:
        raise ConfigError("scenario has no gains; run `synthesize` first", "gains")
    return build_augmented(scenario.exosystems[0].S, scenario.plant.frozen_A, scenario.gains,
                           scenario.plant.N_list)


def _report_metrics(report) -> dict:
    return {
        "stable": report.stable,
        "h2": report.h2,
        "hinf": report.hinf,
        "hinf_lower": report.hinf_bracket[0],
        "peak_frequency": report.peak_frequency,
        "region_ok": report.region_ok,
        "poles": list(report.poles),
    }


def _write(out, name, text):
    if out is None:
        return
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def cmd_simulate(scenario: Scenario, args) -> int:
    gen = _generator(scenario)
    report = norm_report(gen, scenario.region)
    noise = scenario.noise
    if scenario.noise_at_peak:
        noise = dataclasses.replace(noise, frequency=report.peak_frequency)
    trace = simulate(gen, scenario.exosystems, scenario.plant, scenario.horizon, scenario.dt, noise)
    metrics = {"horizon": scenario.horizon, "dt": scenario.dt,
               "tail_bound": trace.tail_bound, "max_state": trace.max_state}
    if noise.kind != "none" and noise.amplitude > 0:
        nominal = simulate(gen, scenario.exosystems, scenario.plant, scenario.horizon, scenario.dt)
        metrics["noise_frequency"] = noise.frequency
        metrics["noise_deviation"] = deviation_amplitude(trace, nominal)
        metrics["noise_gain_bound"] = noise.amplitude * sum(report.channel_hinf)
    metrics.update(_report_metrics(report))
    text = format_metrics(metrics)
    if args.out is not None:
        _write(args.out, "metrics.txt", text)
        write_trace_csv(Path(args.out) / "trace.csv", trace, args.stride)
    sys.stdout.write(text)
    return 0


def cmd_synthesize(scenario: Scenario, args) -> int:
    spec = scenario.synthesis_spec()
    result = synthesize(scenario, spec)
    metrics = {"feasible": result.feasible, "objective": result.objective,
               "iterations": result.iterations, "gamma0": spec.gamma0, "nu0": spec.nu0}
    metrics.update(_report_metrics(result.achieved))
    text = format_metrics(metrics)
    fragment = gains_fragment(result.gains)
    _write(args.out, "metrics.txt", text)
    _write(args.out, "gains.yaml", fragment)
    sys.stdout.write(fragment + text)
    if not result.feasible:
        raise BudgetExhausted(f"no feasible gains within {spec.budget} evaluations "
                              "(best penalty point written)", result)
    return 0


def cmd_verify(scenario: Scenario, args) -> int:
    if scenario.gains is None:
        raise ConfigError("scenario has no gains to verify", "gains")
    spec = scenario.synthesis_spec()
    report = verify_gains(scenario, scenario.gains, spec)
    satisfied = bool(report.stable and report.region_ok
                     and report.hinf < spec.gamma0 and report.h2 < spec.nu0)
    metrics = {"constraints_met": satisfied, "gamma0": spec.gamma0, "nu0": spec.nu0}
    metrics.update(_report_metrics(report))
    text = format_metrics(metrics)
    _write(args.out, "metrics.txt", text)
    sys.stdout.write(text)
    return 0


def cmd_norms(scenario: Scenario, args) -> int:
    gen = _generator(scenario)
    report = norm_report(gen, scenario.region)
    rows = [f"{'channel':>8} {'h2':>14} {'hinf':>14}"]
    for k, (h2, hinf) in enumerate(zip(report.channel_h2, report.channel_hinf)):
        rows.append(f"{k:>8} {h2:>14.6g} {hinf:>14.6g}")
    rows.append(f"{'worst':>8} {report.h2:>14.6g} {report.hinf:>14.6g}")
    rows.append(f"hinf bracket [{report.hinf_bracket[0]:.9g}, {report.hinf_bracket[1]:.9g}] "
                f"peak at w = {report.peak_frequency:.6g}")
    rows.append(f"stable: {report.stable}   poles in region: {report.region_ok}")
    if scenario.plant.time_varying:
        rows.append("(norms of the frozen plant)")
    _write(args.out, "metrics.txt", format_metrics(_report_metrics(report)))
    sys.stdout.write("\n".join(rows) + "\n")
    return 0


def cmd_oracle(scenario: Scenario, args) -> int:
    plant = scenario.plant
    sols = [solve_sylvester(exo.S, plant.frozen_A, N, exo.E)
            for exo, N in zip(scenario.exosystems, plant.N_list)]
    metrics = {}
    for k, sol in enumerate(sols):
        for i, j in np.ndindex(sol.Pi.shape):
            metrics[f"Pi{k}_{i}_{j}"] = sol.Pi[i, j]
        metrics[f"residual{k}"] = sol.residual
        metrics[f"condition{k}"] = sol.condition_estimate
    if args.trace is not None:
        if plant.time_varying:
            raise ConfigError("certification needs a constant plant; A(t) has no exact solution",
                              "plant.A_expr")
        metrics["certified_sup"] = _certify_csv(args.trace, scenario, sols, args.settle)
    text = format_metrics(metrics)
    if plant.time_varying:
        sys.stderr.write("note: Pi computed for frozen_A; the time-varying plant has no exact Pi\n")
    _write(args.out, "metrics.txt", text)
    sys.stdout.write(text)
    return 0


def _certify_csv(path, scenario: Scenario, sols, settle: float) -> float:
    try:
        names, data = read_trace_csv(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read trace: {exc}", str(path)) from None
    m = scenario.exosystems[0].m
    try:
        t = data[:, names.index("t")]
        eta = data[:, [names.index(f"eta_hat{i}") for i in range(scenario.plant.n)]]
        ws = [data[:, [names.index(f"w{k}_{i}") for i in range(m)]] for k in range(len(sols))]
    except ValueError:
        raise ConfigError("trace columns do not match the scenario", str(path)) from None
    mask = t >= settle * t[-1]
    if t[-1] <= 0 or mask.sum() < 2:
        raise InsufficientWindow("trace too short to certify")
    target = sum(w[mask] @ sol.Pi.T for w, sol in zip(ws, sols))
    return float(np.linalg.norm(eta[mask] - target, axis=1).max())


COMMANDS = {
    "simulate": cmd_simulate,
    "synthesize": cmd_synthesize,
    "verify-gains": cmd_verify,
    "norms": cmd_norms,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iidgen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("scenario", help="scenario file or bundled name")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        if name == "simulate":
            p.add_argument("--dt", type=float, default=None)
            p.add_argument("--horizon", type=float, default=None)
            p.add_argument("--stride", type=int, default=1, help="write every k-th CSV row")
        if name == "synthesize":
            p.add_argument("--budget", type=int, default=None)
        if name == "oracle":
            p.add_argument("--trace", default=None, help="trace CSV written by simulate")
            p.add_argument("--settle", type=float, default=0.5,
                           help="fraction of the horizon skipped before certifying")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "stride", 1) < 1:
            raise ConfigError("must be >= 1", "--stride")
        scenario = load_scenario(args.scenario).with_overrides(
            dt=getattr(args, "dt", None), horizon=getattr(args, "horizon", None),
            seed=args.seed, budget=getattr(args, "budget", None))
        for issue in scenario.report.warnings:
            sys.stderr.write(f"warning: {issue}\n")
        return COMMANDS[args.command](scenario, args)
    except IIDError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        wrapped = NumericalFailure(str(exc))
        sys.stderr.write(f"error: NumericalFailure: {wrapped}\n")
        return wrapped.exit_code
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
