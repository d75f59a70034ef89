"""Calibration study: baseline table, tornado bands and V_safe iso-curves.

Currency is in billions of dollars throughout. Detection is parameterised by
the coalition-level rate p_K; whenever K or p_K moves, the per-member q is
re-solved so that p(K) = p_K holds.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np

from .equilibrium import (
    EquilibriumReport,
    analyze,
    corner_test,
    q_from_coalition_detection,
    v_safe,
    v_safe_formula,
)
from .model import ExplicitSanctions, ModelParams, baseline_params

Metric = Literal["V_safe", "u_join_at_one", "K_star", "q_star"]
PARAMETERS = ("F_eff", "p_K", "beta", "K")

DEFAULT_RANGES: dict[str, tuple[float, float]] = {
    "F_eff": (100.0, 135.0),
    "p_K": (0.05, 0.20),
    "beta": (0.03, 0.10),
    "K": (3, 7),
}


@dataclass(frozen=True)
class SweepSpec:
    baseline: ModelParams
    ranges: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_RANGES))
    grid: tuple[int, int] = (101, 101)  # (beta points, p_K points)
    metric: Metric = "V_safe"

    def __post_init__(self) -> None:
        if self.metric not in ("V_safe", "u_join_at_one", "K_star", "q_star"):
            raise ValueError(f"sweep: unknown metric {self.metric!r}")
        if min(self.grid) < 2:
            raise ValueError("sweep: grid needs at least 2 points per axis")
        for name, (low, high) in self.ranges.items():
            if name not in PARAMETERS:
                raise ValueError(f"sweep: unknown parameter {name!r}")
            value = parameter_value(self.baseline, name)
            slack = 1e-9 * max(1.0, abs(value))
            if low > value + slack:
                raise ValueError(f"sweep: {name} low end {low} exceeds baseline {value}")
            if high < value - slack:
                raise ValueError(f"sweep: {name} high end {high} is below baseline {value}")
            if name == "K" and (int(low) != low or int(high) != high):
                raise ValueError("sweep: K range must be integers")


def parameter_value(params: ModelParams, name: str) -> float:
    if name == "F_eff":
        return params.F_eff
    if name == "p_K":
        return params.p_K
    if name == "beta":
        return params.beta
    if name == "K":
        return params.K
    raise ValueError(f"unknown sweep parameter {name!r}")


def perturb(params: ModelParams, name: str, value: float) -> ModelParams:
    """Move one calibration parameter, holding the others at their values in ``params``."""
    if name == "F_eff":
        return params.with_(sanctions=params.sanctions.scaled(value / params.F_eff))
    if name == "p_K":
        return params.with_(q=q_from_coalition_detection(value, params.K))
    if name == "beta":
        return params.with_(beta=value)
    if name == "K":
        K = int(value)
        n = max(params.n, K)
        # F_eff held fixed: the coalition draws from a homogeneous pool.
        return params.with_(
            n=n,
            K=K,
            q=q_from_coalition_detection(params.p_K, K),
            sanctions=ExplicitSanctions.uniform(params.F_eff, n),
            pre_coordination_size=None,
        )
    raise ValueError(f"unknown sweep parameter {name!r}")


def evaluate_metric(params: ModelParams, metric: Metric) -> float:
    if metric == "V_safe":
        return v_safe(params)
    if metric == "u_join_at_one":
        return corner_test(params).u_join_at_one
    report = analyze(params)
    value = report.K_star if metric == "K_star" else report.q_star
    return float("nan") if value is None else float(value)


@dataclass(frozen=True)
class TornadoRow:
    parameter: str
    low_value: float
    low_metric: float
    high_value: float
    high_metric: float
    baseline_metric: float

    @property
    def width(self) -> float:
        return abs(self.high_metric - self.low_metric)


@dataclass(frozen=True)
class IsoCurve:
    level: float
    points: list[tuple[float, float]]  # (beta, p_K)


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    tornado: list[TornadoRow] = field(default_factory=list)
    iso: list[IsoCurve] = field(default_factory=list)


def tornado(spec: SweepSpec) -> SweepResult:
    base = spec.baseline
    baseline_metric = evaluate_metric(base, spec.metric)
    rows = []
    for name, (low, high) in spec.ranges.items():
        rows.append(
            TornadoRow(
                parameter=name,
                low_value=float(low),
                low_metric=evaluate_metric(perturb(base, name, low), spec.metric),
                high_value=float(high),
                high_metric=evaluate_metric(perturb(base, name, high), spec.metric),
                baseline_metric=baseline_metric,
            )
        )
    rows.sort(key=lambda r: -r.width if math.isfinite(r.width) else math.inf)
    return SweepResult(spec=spec, tornado=rows)


def v_safe_grid(spec: SweepSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """V_safe on the (beta, p_K) grid; returns (betas, p_Ks, values[p_K, beta])."""
    b_lo, b_hi = spec.ranges.get("beta", DEFAULT_RANGES["beta"])
    p_lo, p_hi = spec.ranges.get("p_K", DEFAULT_RANGES["p_K"])
    betas = np.linspace(b_lo, b_hi, spec.grid[0])
    p_Ks = np.linspace(p_lo, p_hi, spec.grid[1])
    base = spec.baseline
    values = v_safe_formula(base.K, p_Ks[:, None], betas[None, :], base.F_eff)
    return betas, p_Ks, values


def _contour(xs: np.ndarray, ys: np.ndarray, z: np.ndarray, level: float) -> list[tuple[float, float]]:
    """Level-set crossings on every grid edge, linearly interpolated.

    ``z[j, i]`` is the value at ``(xs[i], ys[j])``. Points are returned
    sorted by y then x; for a monotone surface this traces the curve.
    """
    d = z - level
    found: set[tuple[float, float]] = set()

    def crossing(a0, a1, f0, f1):
        if f0 == f1:
            return a0
        return a0 + (a1 - a0) * f0 / (f0 - f1)

    rows, cols = d.shape
    for j in range(rows):
        for i in range(cols):
            if d[j, i] == 0:
                found.add((float(xs[i]), float(ys[j])))
            if i + 1 < cols and d[j, i] * d[j, i + 1] < 0:
                found.add((float(crossing(xs[i], xs[i + 1], d[j, i], d[j, i + 1])), float(ys[j])))
            if j + 1 < rows and d[j, i] * d[j + 1, i] < 0:
                found.add((float(xs[i]), float(crossing(ys[j], ys[j + 1], d[j, i], d[j + 1, i]))))
    return sorted(found, key=lambda p: (p[1], p[0]))


def iso_curves(spec: SweepSpec, levels: Sequence[float]) -> SweepResult:
    """Contours V_safe(beta, p_K) = L for each level L.

    A level outside the grid's range gives an empty polyline.
    """
    if any(not L > 0 for L in levels):
        raise ValueError("iso levels must be > 0")
    betas, p_Ks, values = v_safe_grid(spec)
    curves = [IsoCurve(float(L), _contour(betas, p_Ks, values, L)) for L in levels]
    return SweepResult(spec=spec, iso=curves)


def iso_beta(level: float, p_K, K: int, F_eff: float):
    """beta on the V_safe = level contour at coalition detection p_K."""
    return K * F_eff / level * p_K / (1.0 - p_K)


CALIBRATION_BETAS = (0.055, 0.06, 0.065)


@dataclass(frozen=True)
class CalibrationReport:
    n: int
    K: int
    p_K: float
    q: float
    p_tilde: float
    F_eff: float
    beta: float
    V: float
    omega: float
    V_safe: float
    V_safe_T: float
    V_safe_by_beta: dict[str, float]
    V_safe_by_beta_T: dict[str, float]
    corner_at_V_safe: EquilibriumReport
    thresholds_at_V: EquilibriumReport

    def to_dict(self) -> dict:
        return asdict(self)


def calibration_report(baseline: ModelParams | None = None) -> CalibrationReport:
    """Baseline table: q from p_K, F_eff, omega, V_safe across beta, corner at V_safe."""
    base = baseline_params() if baseline is None else baseline
    vs = v_safe(base)
    by_beta = {f"{b:g}": v_safe(base.with_(beta=b)) for b in CALIBRATION_BETAS}
    return CalibrationReport(
        n=base.n,
        K=base.K,
        p_K=base.p_K,
        q=base.q,
        p_tilde=base.p_tilde,
        F_eff=base.F_eff,
        beta=base.beta,
        V=base.V,
        omega=base.omega,
        V_safe=vs,
        V_safe_T=vs / 1000.0,
        V_safe_by_beta=by_beta,
        V_safe_by_beta_T={k: v / 1000.0 for k, v in by_beta.items()},
        corner_at_V_safe=corner_test(base.with_(V=vs)),
        thresholds_at_V=analyze(base),
    )


def fmt(value: float) -> str:
    """Nine significant digits; NaN stays NaN."""
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.9g}"


TORNADO_HEADER = ["parameter", "low_value", "low_metric", "high_value", "high_metric", "baseline_metric"]
ISO_HEADER = ["level", "beta", "p_k"]


def tornado_csv(result: SweepResult) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TORNADO_HEADER)
    for r in result.tornado:
        writer.writerow(
            [r.parameter, fmt(r.low_value), fmt(r.low_metric), fmt(r.high_value), fmt(r.high_metric), fmt(r.baseline_metric)]
        )
    return out.getvalue()


def iso_csv(result: SweepResult) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ISO_HEADER)
    for curve in result.iso:
        for beta, p_K in curve.points:
            writer.writerow([fmt(curve.level), fmt(beta), fmt(p_K)])
    return out.getvalue()
