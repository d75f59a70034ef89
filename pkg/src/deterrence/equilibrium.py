"""Complete-information collusion game.

Covers the binomial success probability, the joiner payoff and its two
decompositions, the corner equilibria, Zipf closed forms, deterrence
thresholds and the safe stock bound.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .model import ModelParams, ZipfSanctions


def _binomial_tail_coeffs(n: int, K: int) -> tuple[int, list[int]]:
    trials = n - 1
    lo = K - 1
    return trials, [math.comb(trials, j) for j in range(lo, trials + 1)]


def success_prob(n: int, K: int, alpha):
    """Pr[Bin(n-1, alpha) >= K-1]: enough of the other providers join.

    Accepts a scalar or an array of beliefs. The tail is summed term by term
    with exact binomial coefficients.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not 1 <= K <= n:
        raise ValueError(f"K must satisfy 1 <= K <= n={n}, got {K}")
    a = np.asarray(alpha, dtype=float)
    if np.any((a < 0) | (a > 1)) or np.any(np.isnan(a)):
        raise ValueError("alpha must lie in [0, 1]")
    trials, coeffs = _binomial_tail_coeffs(n, K)
    b = 1.0 - a
    total = np.zeros_like(a)
    for offset, c in enumerate(coeffs):
        j = K - 1 + offset
        total = total + c * a**j * b ** (trials - j)
    # Exact corners regardless of rounding in the sum.
    total = np.where(a == 1.0, 1.0, total)
    total = np.where(a == 0.0, 1.0 if K == 1 else 0.0, total)
    total = np.clip(total, 0.0, 1.0)
    return float(total) if total.ndim == 0 else total


def laplacian_success_prob(n: int, K: int) -> float:
    """Mean of success_prob over a uniform belief on [0, 1].

    The number of other joiners is then uniform on {0, ..., n-1}.
    """
    return (n - K + 1) / n


@dataclass(frozen=True)
class PayoffBreakdown:
    alpha: float
    pi: float
    p_bar: float
    expected_prize: float
    expected_sanction: float
    u_join: float
    attempt_cost: float
    success_bonus: float

    @property
    def u_join_decomposed(self) -> float:
        """Attempt-cost / success-bonus form of the same payoff."""
        return -self.attempt_cost + self.pi * self.success_bonus


def payoff_terms(params: ModelParams, pi, omega=None):
    """Vectorised payoff pieces given success probabilities ``pi``.

    ``omega`` overrides the flow prize (the global game makes it depend on
    the fundamental). Returns ``(expected_prize, expected_sanction, p_bar)``.
    """
    omega = params.omega if omega is None else omega
    p_K, p_tilde, F = params.p_K, params.p_tilde, params.F_eff
    p_bar = p_tilde + pi * (p_K - p_tilde)
    prize = pi * (1.0 - p_K) / params.K * omega
    return prize, p_bar * F, p_bar


def expected_join_payoff(params: ModelParams, pi, omega=None):
    prize, sanction, _ = payoff_terms(params, pi, omega)
    return prize - sanction


def joiner_payoff(params: ModelParams, alpha: float) -> PayoffBreakdown:
    """Expected payoff from joining when each other provider joins w.p. ``alpha``."""
    pi = success_prob(params.n, params.K, alpha)
    prize, sanction, p_bar = payoff_terms(params, pi)
    F = params.F_eff
    bonus = (1.0 - params.p_K) / params.K * params.omega - (
        params.p_K - params.p_tilde
    ) * F
    return PayoffBreakdown(
        alpha=float(alpha),
        pi=pi,
        p_bar=p_bar,
        expected_prize=prize,
        expected_sanction=sanction,
        u_join=prize - sanction,
        attempt_cost=params.p_tilde * F,
        success_bonus=bonus,
    )


def group_rationality(params: ModelParams) -> bool:
    """Odds condition omega / (K F_eff) > q / (1 - q)."""
    lhs = params.omega / (params.K * params.F_eff)
    return lhs > params.q / (1.0 - params.q)


def corner_value(params: ModelParams) -> float:
    """U_J(1) = (1 - p_K)/K * omega - p_K * F_eff."""
    p_K = params.p_K
    return (1.0 - p_K) / params.K * params.omega - p_K * params.F_eff


def zipf_corner_value(omega: float, C: float, q: float, K: int) -> float:
    """U_J(1) under an odd-n Zipf profile, where F_eff = C / K."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    _check_q(q)
    return ((omega + C) * (1.0 - q) ** K - C) / K


def _check_q(q: float) -> None:
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")


def _check_threshold_inputs(omega: float, C: float) -> None:
    if omega < 0:
        raise ValueError(f"omega must be >= 0, got {omega}")
    if not C > 0:
        raise ValueError(f"C must be > 0, got {C}")


def deterrence_K_threshold(omega: float, C: float, q: float) -> float:
    """Real-valued K above which all-join fails (odd-n Zipf regime)."""
    _check_threshold_inputs(omega, C)
    _check_q(q)
    return math.log(C / (omega + C)) / math.log(1.0 - q)


def min_deterring_K(omega: float, C: float, q: float) -> int:
    """Smallest integer K >= 1 with (omega + C)(1 - q)^K <= C."""
    k = max(1, math.ceil(deterrence_K_threshold(omega, C, q)))
    # ceil can overshoot by one when the threshold lands on an integer.
    if k > 1 and zipf_corner_value(omega, C, q, k - 1) <= 0:
        k -= 1
    while zipf_corner_value(omega, C, q, k) > 0:
        k += 1
    return k


def deterrence_q_threshold(omega: float, C: float, K: int) -> float:
    """Per-member detection rate at which all-join stops paying (odd-n Zipf)."""
    _check_threshold_inputs(omega, C)
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return 1.0 - (C / (omega + C)) ** (1.0 / K)


def v_safe_formula(K, p_K, beta, F_eff):
    """K p_K F_eff / ((1 - p_K) beta); broadcasts over arrays."""
    return K / ((1.0 - p_K) * beta) * p_K * F_eff


def v_safe(params: ModelParams) -> float:
    """Largest stock for which joining loses even with assured success."""
    p_K = params.p_K
    if p_K >= 1.0:
        raise ValueError("p_K == 1: safe stock bound is undefined")
    return float(v_safe_formula(params.K, p_K, params.beta, params.F_eff))


def q_from_coalition_detection(p_K: float, K: int) -> float:
    """Per-member rate q with 1 - (1 - q)^K = p_K."""
    if not 0.0 < p_K < 1.0:
        raise ValueError(f"p_K must lie in (0, 1), got {p_K}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return 1.0 - (1.0 - p_K) ** (1.0 / K)


ThresholdMethod = Literal["zipf_closed_form", "integer_search"]


@dataclass(frozen=True)
class EquilibriumReport:
    no_join_is_equilibrium: bool
    all_join_is_equilibrium: bool
    u_join_at_one: float
    group_rationality_holds: bool | None = None
    K_star: int | None = None
    K_threshold: float | None = None
    q_star: float | None = None
    V_safe: float | None = None
    threshold_method: ThresholdMethod | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def corner_test(params: ModelParams) -> EquilibriumReport:
    """Check both symmetric corner profiles.

    No-join is always an equilibrium: the attempt cost makes a lone joiner's
    payoff non-positive. All-join survives iff U_J(1) >= 0.
    """
    u1 = corner_value(params)
    return EquilibriumReport(
        no_join_is_equilibrium=True,
        all_join_is_equilibrium=u1 >= 0,
        u_join_at_one=u1,
    )


def _is_odd_zipf(params: ModelParams) -> bool:
    return isinstance(params.sanctions, ZipfSanctions) and params.n % 2 == 1


def _search_K_star(params: ModelParams) -> int | None:
    for K in range(1, params.n + 1):
        candidate = params.with_(K=K, pre_coordination_size=None)
        if corner_value(candidate) <= 0:
            return K
    return None


def q_star_at(omega: float, F_eff: float, K: int) -> float:
    """Smallest q making U_J(1) <= 0 at fixed K and F_eff.

    Solves (1 - p_K) omega / K = p_K F_eff, giving p_K = omega / (omega + K F_eff).
    With F_eff = C / K this is the Zipf closed form.
    """
    if omega <= 0:
        return 0.0
    return 1.0 - (K * F_eff / (omega + K * F_eff)) ** (1.0 / K)


def analyze(params: ModelParams) -> EquilibriumReport:
    """Corner test plus group rationality, thresholds and V_safe.

    Under an odd-n Zipf profile K_star comes from the closed form (and may
    exceed n, as it implicitly rescales n with K). Otherwise it is found by
    scanning K = 1..n at fixed n, q and profile, and is None if no admissible
    K deters.
    """
    corner = corner_test(params)
    if _is_odd_zipf(params):
        C = params.sanctions.C
        omega = params.omega
        K_threshold = deterrence_K_threshold(omega, C, params.q)
        K_star = min_deterring_K(omega, C, params.q)
        method: ThresholdMethod = "zipf_closed_form"
    else:
        K_threshold = None
        K_star = _search_K_star(params)
        method = "integer_search"
    return EquilibriumReport(
        no_join_is_equilibrium=corner.no_join_is_equilibrium,
        all_join_is_equilibrium=corner.all_join_is_equilibrium,
        u_join_at_one=corner.u_join_at_one,
        group_rationality_holds=group_rationality(params),
        K_star=K_star,
        K_threshold=K_threshold,
        q_star=q_star_at(params.omega, params.F_eff, params.K),
        V_safe=v_safe(params),
        threshold_method=method,
    )
