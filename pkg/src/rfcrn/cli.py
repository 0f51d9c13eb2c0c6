"""Command-line front end: config parsing, experiment orchestration, CSV output.

Subcommands: solve, evaluate, simulate, sweep-static, sweep-idle, oracle,
policy-map.  All outputs are byte-deterministic given the same config and
seed.  Exit codes: 0 success; 2 configuration/validation error (argparse
usage errors also exit 2); 3 solver non-convergence; 4 failed simulation
agreement check.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import sys
from dataclasses import dataclass
from importlib import resources
from typing import IO, Dict, Iterator, List, Sequence, Tuple

import numpy as np

from .model import ChannelParams, ModelConfig, State, build_model
from .simulate import REPORT_CSV_COLUMNS, SimConfig, simulate
from .solver import (
    MultichainError,
    Policy,
    PolicyFormatError,
    SolveResult,
    best_static_policy,
    evaluate_policy,
    load_policy,
    oracle_enumerate,
    save_policy,
    solve_rvi,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "default_config_path",
    "parse_grid",
    "run_sweep_static",
    "run_policy_map",
    "run_sweep_idle",
    "run_simulate",
    "main",
]

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NO_CONVERGENCE = 3
EXIT_AGREEMENT_FAILED = 4

EXPERIMENT_KINDS = (
    "solve",
    "evaluate",
    "simulate",
    "sweep-static",
    "sweep-idle",
    "oracle",
    "policy-map",
)

_MODEL_KEYS = ("queue_capacity", "energy_capacity", "tx_cost", "arrival_prob", "channels")
_CHANNEL_KEYS = ("idle_prob", "tx_success_prob", "harvest_success_prob")


class ConfigError(ValueError):
    """A configuration file or experiment setting is invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated experiment: model, kind, and kind-specific settings."""

    model: ModelConfig
    kind: str
    params: Dict[str, object]

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"unknown experiment kind {self.kind!r}; "
                f"expected one of {', '.join(EXPERIMENT_KINDS)}"
            )


def default_config_path() -> str:
    """Path of the packaged default model configuration."""
    return str(resources.files("rfcrn").joinpath("default_config.json"))


def _require_int(raw: object, key: str, minimum: int) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(f"{key} must be an integer, got {raw!r}")
    if raw < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {raw}")
    return raw


def _require_prob(raw: object, key: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{key} must be a number, got {raw!r}")
    value = float(raw)
    if not (0.0 <= value <= 1.0):
        raise ConfigError(f"{key} must lie in [0, 1], got {value}")
    return value


def parse_config(path: str) -> ModelConfig:
    """Read and validate a JSON model configuration.

    Schema (all keys required, no others allowed): queue_capacity,
    energy_capacity, tx_cost, arrival_prob, and a non-empty channels list
    whose entries carry idle_prob, tx_success_prob, harvest_success_prob.
    Every rejection names the offending key.
    """
    try:
        with open(path, "r") as handle:
            raw = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be an object")
    for key in _MODEL_KEYS:
        if key not in raw:
            raise ConfigError(f"missing key: {key}")
    for key in raw:
        if key not in _MODEL_KEYS:
            raise ConfigError(f"unknown key: {key}")

    queue_capacity = _require_int(raw["queue_capacity"], "queue_capacity", 0)
    energy_capacity = _require_int(raw["energy_capacity"], "energy_capacity", 0)
    tx_cost = _require_int(raw["tx_cost"], "tx_cost", 1)
    arrival_prob = _require_prob(raw["arrival_prob"], "arrival_prob")

    channels_raw = raw["channels"]
    if not isinstance(channels_raw, list) or not channels_raw:
        raise ConfigError("channels must be a non-empty list")
    channels = []
    for i, entry in enumerate(channels_raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"channels[{i}] must be an object")
        for key in _CHANNEL_KEYS:
            if key not in entry:
                raise ConfigError(f"missing key: channels[{i}].{key}")
        for key in entry:
            if key not in _CHANNEL_KEYS:
                raise ConfigError(f"unknown key: channels[{i}].{key}")
        channels.append(
            ChannelParams(
                idle_prob=_require_prob(entry["idle_prob"], f"channels[{i}].idle_prob"),
                tx_success_prob=_require_prob(
                    entry["tx_success_prob"], f"channels[{i}].tx_success_prob"
                ),
                harvest_success_prob=_require_prob(
                    entry["harvest_success_prob"],
                    f"channels[{i}].harvest_success_prob",
                ),
            )
        )
    if energy_capacity > 0 and tx_cost > energy_capacity:
        raise ConfigError(
            f"tx_cost ({tx_cost}) must not exceed energy_capacity ({energy_capacity})"
        )
    return ModelConfig(
        channels=tuple(channels),
        queue_capacity=queue_capacity,
        energy_capacity=energy_capacity,
        tx_cost=tx_cost,
        arrival_prob=arrival_prob,
    )


def parse_grid(spec: str, name: str = "grid") -> List[float]:
    """Parse a sweep grid: `start:stop:count` (inclusive) or `v1,v2,...`.

    Values must be finite, within [0, 1], and strictly ascending.
    """
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ValueError("expected start:stop:count")
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ValueError("count must be >= 1")
            values = [float(v) for v in np.linspace(start, stop, count)]
        else:
            values = [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {spec!r} ({exc})") from exc
    if not values:
        raise ConfigError(f"{name}: empty grid")
    for v in values:
        if not np.isfinite(v) or not (0.0 <= v <= 1.0):
            raise ConfigError(f"{name}: value {v} outside [0, 1]")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{name}: values must be strictly ascending")
    return values


def _fmt(value: float) -> str:
    return f"{value:.12g}"


@contextlib.contextmanager
def _open_out(path: str | None) -> Iterator[IO[str]]:
    """Output stream for `--out`; '-' or absent means stdout."""
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as handle:
            yield handle


def _with_idle_prob(model: ModelConfig, idle_prob: float) -> ModelConfig:
    first = dataclasses.replace(model.channels[0], idle_prob=idle_prob)
    return dataclasses.replace(model, channels=(first,) + model.channels[1:])


def run_sweep_static(
    model: ModelConfig, arrival_probs: Sequence[float], p_grid: Sequence[float]
) -> List[Tuple[float, float, float]]:
    """Exact static-policy throughput for every (arrival_prob, p) pair.

    p is the probability of selecting channel 0; channel 1 gets 1 - p.
    Rows come back in sweep order: (arrival_prob, p, throughput).
    """
    if model.n_channels != 2:
        raise ConfigError(
            f"sweep-static requires a two-channel model, got {model.n_channels}"
        )
    rows = []
    for alpha in arrival_probs:
        tm = build_model(dataclasses.replace(model, arrival_prob=alpha))
        for p in p_grid:
            policy = Policy.static((p, 1.0 - p), model.n_states)
            rows.append((alpha, p, evaluate_policy(tm, policy)))
    return rows


def run_policy_map(
    model: ModelConfig,
    tolerance: float = 1e-9,
    max_iterations: int = 1_000_000,
    damping: float = 0.5,
) -> Tuple[List[Tuple[int, int, int, Tuple[float, ...]]], SolveResult]:
    """Optimal channel choice per state: rows (energy, queue, channel, probs)."""
    result = solve_rvi(
        build_model(model),
        tolerance=tolerance,
        max_iterations=max_iterations,
        damping=damping,
    )
    rows = []
    for idx in range(model.n_states):
        state = model.state_at(idx)
        probs = tuple(float(p) for p in result.policy.probabilities[idx])
        channel = int(result.policy.channel_indices()[idx])
        rows.append((state.energy, state.queue, channel, probs))
    return rows, result


def run_sweep_idle(
    model: ModelConfig,
    idle_grid: Sequence[float],
    static_grid: Sequence[float],
    tolerance: float = 1e-9,
    max_iterations: int = 1_000_000,
    damping: float = 0.5,
) -> List[Tuple[float, float, float, float]]:
    """Optimal vs best-static throughput as channel 0's idle probability varies.

    Rows: (idle_prob_1, optimal_throughput, best_static_throughput,
    best_static_p) where p is again the channel-0 selection probability.
    Raises RuntimeError if any solve fails to converge.
    """
    if model.n_channels != 2:
        raise ConfigError(
            f"sweep-idle requires a two-channel model, got {model.n_channels}"
        )
    mixing = [(p, 1.0 - p) for p in static_grid]
    rows = []
    for eta1 in idle_grid:
        tm = build_model(_with_idle_prob(model, eta1))
        result = solve_rvi(
            tm, tolerance=tolerance, max_iterations=max_iterations, damping=damping
        )
        if not result.converged:
            raise RuntimeError(
                f"solver did not converge at idle_prob_1={eta1} "
                f"(span residual {result.span_residual:.3e})"
            )
        static_gain, static_w = best_static_policy(tm, mixing)
        rows.append((eta1, result.gain, static_gain, float(static_w[0])))
    return rows


def run_simulate(
    model: ModelConfig,
    policy: Policy,
    sim: SimConfig,
    check_tolerance: float | None = None,
):
    """Simulate a policy; optionally check agreement with the exact gain.

    Returns (report, analytic_gain, agreement_ok); the last two are None
    when no check was requested.
    """
    report = simulate(model, policy, sim)
    if check_tolerance is None:
        return report, None, None
    analytic = evaluate_policy(build_model(model), policy)
    ok = abs(report.throughput_estimate - analytic) <= check_tolerance
    return report, analytic, ok


# ---------------------------------------------------------------------------
# Subcommand handlers (one per ExperimentConfig.kind).
# ---------------------------------------------------------------------------


def _parse_initial_state(spec: str) -> State:
    parts = spec.split(",")
    if len(parts) != 2:
        raise ConfigError(f"initial state must be 'energy,queue', got {spec!r}")
    try:
        return State(energy=int(parts[0]), queue=int(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"initial state must be 'energy,queue', got {spec!r}") from exc


def _cmd_solve(exp: ExperimentConfig) -> int:
    p = exp.params
    with _open_out(p["out"]) as out:
        result = solve_rvi(
            build_model(exp.model),
            tolerance=p["tolerance"],
            max_iterations=p["max_iterations"],
            damping=p["damping"],
        )
        if not result.converged:
            print(
                f"error: no convergence after {result.iterations} iterations "
                f"(span residual {result.span_residual:.6g})",
                file=sys.stderr,
            )
            return EXIT_NO_CONVERGENCE
        print(f"gain: {_fmt(result.gain)}")
        print(f"iterations: {result.iterations}")
        print(f"span_residual: {_fmt(result.span_residual)}")
        if out is not sys.stdout:
            save_policy(exp.model, result.policy, out)
    return EXIT_OK


def _cmd_evaluate(exp: ExperimentConfig) -> int:
    policy = load_policy(exp.model, exp.params["policy"])
    gain = evaluate_policy(build_model(exp.model), policy)
    print(f"gain: {_fmt(gain)}")
    if exp.params["out"] is not None:
        with _open_out(exp.params["out"]) as out:
            out.write("gain\n")
            out.write(_fmt(gain) + "\n")
    return EXIT_OK


def _cmd_simulate(exp: ExperimentConfig) -> int:
    p = exp.params
    policy = load_policy(exp.model, p["policy"])
    sim = SimConfig(
        slots=p["slots"],
        seed=p["seed"],
        initial_state=_parse_initial_state(p["initial"]),
        replications=p["replications"],
        burn_in=p["burn_in"],
    )
    with _open_out(p["out"]) as out:
        report, analytic, ok = run_simulate(
            exp.model, policy, sim, check_tolerance=p["tolerance"]
        )
        if out is not sys.stdout:
            out.write(",".join(REPORT_CSV_COLUMNS) + "\n")
            out.write(report.to_csv_row() + "\n")
        print(report.to_text(), end="")
        if analytic is not None:
            print(f"analytic_gain: {_fmt(analytic)}")
            print(f"agreement: {'pass' if ok else 'fail'}")
            if not ok:
                print(
                    f"error: |simulated - analytic| = "
                    f"{abs(report.throughput_estimate - analytic):.6g} exceeds "
                    f"{p['tolerance']:.6g}",
                    file=sys.stderr,
                )
                return EXIT_AGREEMENT_FAILED
    return EXIT_OK


def _cmd_sweep_static(exp: ExperimentConfig) -> int:
    p = exp.params
    with _open_out(p["out"]) as out:
        rows = run_sweep_static(exp.model, p["arrivals"], p["grid"])
        out.write("arrival_prob,p,throughput\n")
        for alpha, prob, gain in rows:
            out.write(f"{_fmt(alpha)},{_fmt(prob)},{_fmt(gain)}\n")
    return EXIT_OK


def _cmd_sweep_idle(exp: ExperimentConfig) -> int:
    p = exp.params
    with _open_out(p["out"]) as out:
        try:
            rows = run_sweep_idle(
                exp.model,
                p["grid"],
                p["static_grid"],
                tolerance=p["tolerance"],
                max_iterations=p["max_iterations"],
                damping=p["damping"],
            )
        except RuntimeError as exc:
            if isinstance(exc, MultichainError):
                raise
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NO_CONVERGENCE
        out.write("idle_prob_1,optimal_throughput,best_static_throughput,best_static_p\n")
        for eta1, opt, static, best_p in rows:
            out.write(f"{_fmt(eta1)},{_fmt(opt)},{_fmt(static)},{_fmt(best_p)}\n")
    return EXIT_OK


def _cmd_oracle(exp: ExperimentConfig) -> int:
    p = exp.params
    with _open_out(p["out"]) as out:
        gain, policy = oracle_enumerate(build_model(exp.model), budget=p["budget"])
        print(f"gain: {_fmt(gain)}")
        if out is not sys.stdout:
            save_policy(exp.model, policy, out)
    return EXIT_OK


def _cmd_policy_map(exp: ExperimentConfig) -> int:
    p = exp.params
    with _open_out(p["out"]) as out:
        rows, result = run_policy_map(
            exp.model,
            tolerance=p["tolerance"],
            max_iterations=p["max_iterations"],
            damping=p["damping"],
        )
        if not result.converged:
            print(
                f"error: no convergence after {result.iterations} iterations "
                f"(span residual {result.span_residual:.6g})",
                file=sys.stderr,
            )
            return EXIT_NO_CONVERGENCE
        header = "energy,queue,channel," + ",".join(
            f"p_ch{a}" for a in range(exp.model.n_channels)
        )
        out.write(header + "\n")
        for energy, queue, channel, probs in rows:
            probs_text = ",".join(_fmt(v) for v in probs)
            out.write(f"{energy},{queue},{channel},{probs_text}\n")
    return EXIT_OK


_HANDLERS = {
    "solve": _cmd_solve,
    "evaluate": _cmd_evaluate,
    "simulate": _cmd_simulate,
    "sweep-static": _cmd_sweep_static,
    "sweep-idle": _cmd_sweep_idle,
    "oracle": _cmd_oracle,
    "policy-map": _cmd_policy_map,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfcrn",
        description=(
            "Channel-selection optimization for an RF-energy-harvesting "
            "transmitter: exact model, average-reward solver, Monte Carlo "
            "validation, experiment sweeps."
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        metavar="FILE",
        default=None,
        help="model configuration JSON (default: packaged two-channel model)",
    )
    common.add_argument(
        "--out",
        metavar="FILE",
        default=None,
        help="output file ('-' for stdout)",
    )
    solver_opts = argparse.ArgumentParser(add_help=False)
    solver_opts.add_argument("--tolerance", type=float, default=1e-9,
                             help="span convergence threshold (default 1e-9)")
    solver_opts.add_argument("--max-iterations", type=int, default=1_000_000,
                             help="iteration cap (default 1000000)")
    solver_opts.add_argument("--damping", type=float, default=0.5,
                             help="update damping in (0, 1] (default 0.5)")

    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("solve", parents=[common, solver_opts],
                   help="solve for the optimal policy; --out writes a policy file")

    p_eval = sub.add_parser("evaluate", parents=[common],
                            help="exact average throughput of a policy file")
    p_eval.add_argument("--policy", metavar="FILE", required=True)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="Monte Carlo run of a policy file")
    p_sim.add_argument("--policy", metavar="FILE", required=True)
    p_sim.add_argument("--slots", type=int, default=1_000_000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--replications", type=int, default=1)
    p_sim.add_argument("--initial", metavar="E,Q", default="0,0")
    p_sim.add_argument("--burn-in", type=int, default=0, dest="burn_in")
    p_sim.add_argument("--tolerance", type=float, default=None,
                       help="check |simulated - analytic| against this bound")

    p_ss = sub.add_parser("sweep-static", parents=[common],
                          help="static-policy throughput vs channel-0 selection probability")
    p_ss.add_argument("--arrivals", default="0.2,0.5",
                      help="comma list of arrival probabilities (default 0.2,0.5)")
    p_ss.add_argument("--grid", default="0:1:21",
                      help="p grid, start:stop:count or comma list (default 0:1:21)")

    p_si = sub.add_parser("sweep-idle", parents=[common, solver_opts],
                          help="optimal vs best-static throughput as channel 0 idle probability varies")
    p_si.add_argument("--grid", default="0.05:0.95:19",
                      help="idle-probability grid (default 0.05:0.95:19)")
    p_si.add_argument("--static-grid", default="0:1:21", dest="static_grid",
                      help="static p grid per point (default 0:1:21)")

    p_or = sub.add_parser("oracle", parents=[common],
                          help="exhaustive deterministic-policy maximum (small instances)")
    p_or.add_argument("--budget", type=int, default=1_000_000,
                      help="max number of policies to enumerate (default 1000000)")

    sub.add_parser("policy-map", parents=[common, solver_opts],
                   help="per-state optimal channel map as CSV")
    return parser


def _experiment_from_args(args: argparse.Namespace, model: ModelConfig) -> ExperimentConfig:
    params: Dict[str, object] = {"out": args.out}
    kind = args.command
    if kind in ("solve", "sweep-idle", "policy-map"):
        if not args.tolerance or args.tolerance <= 0:
            raise ConfigError(f"tolerance must be > 0, got {args.tolerance}")
        if not (0.0 < args.damping <= 1.0):
            raise ConfigError(f"damping must lie in (0, 1], got {args.damping}")
        params.update(
            tolerance=args.tolerance,
            max_iterations=args.max_iterations,
            damping=args.damping,
        )
    if kind == "evaluate":
        params["policy"] = args.policy
    if kind == "simulate":
        params.update(
            policy=args.policy,
            slots=args.slots,
            seed=args.seed,
            replications=args.replications,
            initial=args.initial,
            burn_in=args.burn_in,
            tolerance=args.tolerance,
        )
    if kind == "sweep-static":
        params["arrivals"] = parse_grid(args.arrivals, "arrivals")
        params["grid"] = parse_grid(args.grid, "grid")
    if kind == "sweep-idle":
        params["grid"] = parse_grid(args.grid, "grid")
        params["static_grid"] = parse_grid(args.static_grid, "static-grid")
    if kind == "oracle":
        params["budget"] = args.budget
    return ExperimentConfig(model=model, kind=kind, params=params)


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config_path = args.config if args.config else default_config_path()
        model = parse_config(config_path)
        exp = _experiment_from_args(args, model)
        return _HANDLERS[exp.kind](exp)
    except MultichainError as exc:
        print(f"error: degenerate configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (ConfigError, PolicyFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
