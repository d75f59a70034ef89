"""Random parameter generators shared by property tests and the acceptance suite."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st
from scipy.stats import binom

from deterrence.equilibrium import joiner_payoff
from deterrence.model import ExplicitSanctions, ModelParams, ZipfSanctions, majority_threshold


def random_params(rng: np.random.Generator, group_rational: bool = False, margin: float = 1e-3) -> ModelParams:
    """A random valid parameter set; optionally conditioned on group rationality."""
    n = int(rng.integers(2, 13))
    K = int(rng.integers(1, n + 1))
    q = float(rng.uniform(0.005, 0.4))
    beta = float(rng.uniform(0.01, 1.0))
    kind = rng.integers(3)
    if kind == 0:
        sanctions = ExplicitSanctions.uniform(float(rng.uniform(1, 500)), n)
    elif kind == 1:
        sanctions = ExplicitSanctions(tuple(rng.uniform(1, 500, n)))
    else:
        sanctions = ZipfSanctions(float(rng.uniform(1, 500)))
    p = ModelParams(n, K, q, beta, 1.0, sanctions)
    if group_rational:
        # omega / (K F) must exceed q / (1 - q); scale the odds up by a random factor.
        odds = q / (1 - q) * (1 + margin + rng.exponential(3.0))
        omega = odds * K * p.F_eff
    else:
        omega = float(rng.uniform(0, 20)) * K * p.F_eff * q
    return p.with_(V=omega / beta)


def random_odd_zipf(rng: np.random.Generator) -> ModelParams:
    n = int(rng.choice([3, 5, 7, 9, 11, 13, 15, 21]))
    K = majority_threshold(n)
    q = float(rng.uniform(0.005, 0.5))
    C = float(rng.uniform(0.5, 1000))
    omega = float(rng.uniform(0.01, 50)) * C
    return ModelParams(n, K, q, 1.0, omega, ZipfSanctions(C))


@st.composite
def params_strategy(draw, group_rational: bool = False):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_params(np.random.default_rng(seed), group_rational=group_rational)


@st.composite
def odd_zipf_strategy(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_odd_zipf(np.random.default_rng(seed))


def monotonicity_check(p: ModelParams, points: int = 100) -> tuple[int, int]:
    """Count adjacent alpha-grid pairs where u_join fails to increase.

    The exact increment comes from scipy's binomial tails (whichever tail is
    small, so it keeps full precision). ``resolution`` bounds the rounding
    error of evaluating u_join in doubles: a few ulps of each term, with pi
    itself only resolvable to an ulp of 1. A step counts as a violation when
    it is not positive although the exact increment exceeds that resolution,
    or when it is negative by more than the resolution.

    Returns ``(violations, excused)``, where ``excused`` counts non-positive
    steps whose exact increment is below the resolution.
    """
    alphas = np.linspace(0.01, 0.99, points)
    parts = [joiner_payoff(p, a) for a in alphas]
    u = np.array([b.u_join for b in parts])
    bonus = (1 - p.p_K) / p.K * p.omega - (p.p_K - p.p_tilde) * p.F_eff
    terms = np.array([abs(b.expected_prize) + abs(b.expected_sanction) for b in parts]) + abs(bonus)
    win = binom.sf(p.K - 2, p.n - 1, alphas)
    fail = binom.cdf(p.K - 2, p.n - 1, alphas)
    d_pi = np.where(win[1:] <= 0.5, np.diff(win), -np.diff(fail))
    du = np.diff(u)
    exact = d_pi * bonus
    resolution = 4 * np.finfo(float).eps * np.maximum(terms[:-1], terms[1:])
    violations = ((du <= 0) & (exact > resolution)) | (du < -resolution)
    excused = (du <= 0) & ~violations
    return int(violations.sum()), int(excused.sum())
