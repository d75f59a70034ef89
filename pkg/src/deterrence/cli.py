"""Command-line front end.

    deterrence <command> [--config PATH] [--out DIR] [--format csv|json] [--seed U64]

Exit status: 0 success, 1 invalid arguments or configuration, 2 solver
failure (including a cutoff search that finds no interior root).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import config as cfgmod
from .equilibrium import analyze, corner_test, v_safe
from .global_games import SolverError, solve_cutoff
from .sensitivity import calibration_report, fmt, iso_csv, iso_curves, tornado, tornado_csv
from .simulation import SEED_LIMIT, simulate

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_SOLVER = 2

COMMANDS = ("corner", "thresholds", "vsafe", "cutoff", "simulate", "tornado", "iso", "calibrate")
_CSV_DEFAULT = ("tornado", "iso")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < SEED_LIMIT:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deterrence", description="Cost-of-collusion deterrence analysis.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON experiment config (defaults to the baseline)")
    parser.add_argument("--out", default=".", help="output directory (created if missing)")
    parser.add_argument("--format", choices=("csv", "json"), help="report format")
    parser.add_argument("--seed", type=_seed, help="overrides the config seed")
    return parser


@dataclass(frozen=True)
class RunConfig:
    command: str
    config_path: str | None
    out_dir: Path
    seed: int | None
    format: str

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        fmt_ = args.format or ("csv" if args.command in _CSV_DEFAULT else "json")
        return cls(args.command, args.config, Path(args.out), args.seed, fmt_)


def _clean(value):
    """JSON-safe copy: tuples to lists, non-finite floats to null."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _flatten(value, prefix: str = "") -> list[tuple[str, object]]:
    if isinstance(value, dict):
        rows = []
        for k in sorted(value):
            rows.extend(_flatten(value[k], f"{prefix}.{k}" if prefix else str(k)))
        return rows
    if isinstance(value, list):
        return [(prefix, json.dumps(value))]
    return [(prefix, value)]


def _scalar(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt(value)
    return str(value)


def render_json(command: str, echo: dict, result: dict) -> str:
    doc = {"command": command, "config": echo, "result": result}
    return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def render_kv_csv(result: dict) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["field", "value"])
    for key, value in _flatten(_clean(result)):
        writer.writerow([key, _scalar(value)])
    return out.getvalue()


def _money(billions: float) -> str:
    if abs(billions) >= 1000:
        return f"${billions / 1000:.2f}T"
    return f"${billions:.2f}B"


def _cmd_corner(exp, run):
    report = corner_test(exp.model_params())
    summary = (
        f"corner: all_join={str(report.all_join_is_equilibrium).lower()} "
        f"no_join={str(report.no_join_is_equilibrium).lower()} "
        f"U_J(1)={report.u_join_at_one:.6g}"
    )
    return report.to_dict(), None, summary, EXIT_OK


def _cmd_thresholds(exp, run):
    report = analyze(exp.model_params())
    summary = (
        f"thresholds: K*={report.K_star} q*={report.q_star:.6g} "
        f"V_safe={_money(report.V_safe)} ({report.threshold_method})"
    )
    return report.to_dict(), None, summary, EXIT_OK


def _cmd_vsafe(exp, run):
    p = exp.model_params()
    value = v_safe(p)
    result = {"V_safe": value, "V_safe_T": value / 1000.0, "K": p.K, "p_K": p.p_K, "q": p.q, "beta": p.beta, "F_eff": p.F_eff}
    summary = f"V_safe ≈ {_money(value)} (beta={p.beta:g}, K={p.K}, p_K={p.p_K:.6g}, F_eff={p.F_eff:g})"
    return result, None, summary, EXIT_OK


def _cmd_calibrate(exp, run):
    report = calibration_report(exp.model_params())
    by_beta = ", ".join(f"beta={k}: {_money(v)}" for k, v in report.V_safe_by_beta.items())
    summary = f"V_safe ≈ {_money(report.V_safe)} ({by_beta}; q={100 * report.q:.2f}%)"
    return report.to_dict(), None, summary, EXIT_OK


def _cmd_cutoff(exp, run):
    solution = solve_cutoff(exp.game_spec())
    result = asdict(solution)
    if solution.found:
        summary = (
            f"cutoff: interior tau={solution.tau:.8g} residual={solution.residual:.3g} "
            f"theta*={solution.theta_star:.6g} limit={solution.limit_cutoff:.6g}"
        )
        return result, None, summary, EXIT_OK
    summary = f"cutoff: no interior root ({solution.status}) on [{solution.bracket[0]:.6g}, {solution.bracket[1]:.6g}]"
    return result, None, summary, EXIT_SOLVER


def _cmd_simulate(exp, run):
    seed = run.seed if run.seed is not None else exp.cfg["seed"]
    if seed is None:
        raise cfgmod.ConfigError("seed: required for simulate (set it in the config or pass --seed)")
    exp.cfg["seed"] = seed
    tau = None
    sim = exp.cfg["sim"]
    if sim["strategy"] == "cutoff" and sim["tau"] is None:
        solution = solve_cutoff(exp.game_spec())
        if not solution.found:
            raise SolverError(f"no interior equilibrium cutoff ({solution.status}) to simulate")
        tau = solution.tau
    result = simulate(exp.sim_config(seed, tau))
    summary = (
        f"simulate: N={result.replications} seed={seed} strategy={result.strategy} "
        f"mean payoff={result.mean_realized_payoff:.6g} ± {result.mean_realized_payoff_se:.3g}"
    )
    if result.deviation_gain is not None:
        summary += f" deviation gain={result.deviation_gain:.4g} ± {result.deviation_gain_se:.3g}"
    return result.to_dict(), None, summary, EXIT_OK


def _cmd_tornado(exp, run):
    sweep = tornado(exp.sweep_spec())
    rows = [dict(asdict(r), width=r.width) for r in sweep.tornado]
    widest = rows[0]["parameter"] if rows else "none"
    summary = f"tornado: {len(rows)} parameters on {sweep.spec.metric}, widest band {widest}"
    return {"metric": sweep.spec.metric, "rows": rows}, tornado_csv(sweep), summary, EXIT_OK


def _cmd_iso(exp, run):
    sweep = iso_curves(exp.sweep_spec(), exp.levels)
    curves = [{"level": c.level, "points": [list(p) for p in c.points]} for c in sweep.iso]
    total = sum(len(c["points"]) for c in curves)
    summary = f"iso: {len(curves)} levels, {total} contour points"
    return {"curves": curves}, iso_csv(sweep), summary, EXIT_OK


_HANDLERS = {
    "corner": _cmd_corner,
    "thresholds": _cmd_thresholds,
    "vsafe": _cmd_vsafe,
    "cutoff": _cmd_cutoff,
    "simulate": _cmd_simulate,
    "tornado": _cmd_tornado,
    "iso": _cmd_iso,
    "calibrate": _cmd_calibrate,
}


def _write(run: RunConfig, text: str) -> Path:
    try:
        run.out_dir.mkdir(parents=True, exist_ok=True)
        path = run.out_dir / f"{run.command}.{run.format}"
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise cfgmod.ConfigError(f"out: cannot write to {run.out_dir}: {exc.strerror}") from None
    return path


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        run_cfg = RunConfig.from_args(args)
        exp = cfgmod.Experiment(cfgmod.load(run_cfg.config_path))
        if run_cfg.seed is not None:
            exp.cfg["seed"] = run_cfg.seed
        result, table, summary, status = _HANDLERS[run_cfg.command](exp, run_cfg)
        if run_cfg.format == "json":
            text = render_json(run_cfg.command, exp.cfg, result)
        else:
            text = table if table is not None else render_kv_csv(result)
        path = _write(run_cfg, text)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"{summary} -> {path}")
    return status


def main() -> None:
    sys.exit(run())
