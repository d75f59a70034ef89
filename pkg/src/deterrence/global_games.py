"""Dispersed-information version of the collusion game.

The fundamental theta drives the flow prize through a strictly increasing
``prize_map``; sanctions do not depend on theta. Provider i sees
``s_i = theta + eps_i`` with Normal noise of scale ``sigma`` and joins iff
``s_i >= tau``. A symmetric cutoff equilibrium is a tau at which a provider
with signal exactly tau is indifferent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr

from .equilibrium import expected_join_payoff, laplacian_success_prob, success_prob
from .model import ModelParams


class SolverError(RuntimeError):
    """Numerical failure: quadrature did not converge or no root exists."""


@dataclass(frozen=True)
class NormalPrior:
    mean: float
    std: float

    def __post_init__(self) -> None:
        if not self.std > 0:
            raise ValueError(f"prior std must be > 0, got {self.std}")


@dataclass(frozen=True)
class UniformPrior:
    """Bounded prior; ``lo == hi`` gives a point mass (test mode only)."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo <= self.hi:
            raise ValueError(f"uniform prior needs lo <= hi, got [{self.lo}, {self.hi}]")


Prior = NormalPrior | UniformPrior


@dataclass(frozen=True)
class IdentityPrize:
    """omega(theta) = theta: the fundamental is the extractable flow."""

    def __call__(self, theta):
        return theta

    def inverse(self, omega: float) -> float:
        return omega


@dataclass(frozen=True)
class ExponentialPrize:
    """omega(theta) = scale * exp(theta), with scale = beta * V."""

    scale: float

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValueError(f"exponential prize scale must be > 0, got {self.scale}")

    def __call__(self, theta):
        return self.scale * np.exp(theta)

    def inverse(self, omega: float) -> float:
        if omega <= 0:
            raise SolverError("exponential prize map never reaches omega <= 0")
        return math.log(omega / self.scale)


PrizeMap = IdentityPrize | ExponentialPrize


@dataclass(frozen=True)
class SolverOptions:
    xtol: float = 1e-8  # relative, on tau
    ftol: float = 1e-12  # relative to max(|omega(tau)|, F_eff)
    nodes: int = 64
    initial_halfwidth: float = 2.0  # in units of sigma
    max_expansions: int = 60
    monotone_grid: int = 50
    max_iterations: int = 400


@dataclass(frozen=True)
class GlobalGameSpec:
    base: ModelParams
    prior: Prior
    sigma: float
    prize_map: PrizeMap = field(default_factory=IdentityPrize)
    noise: Literal["normal"] = "normal"
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.noise != "normal":
            raise ValueError(f"noise family must be 'normal', got {self.noise!r}")
        grid = np.linspace(-50.0, 50.0, 201)
        if isinstance(self.prior, NormalPrior):
            grid = self.prior.mean + self.prior.std * grid / 10.0
        else:
            grid = np.linspace(self.prior.lo - 1.0, self.prior.hi + 1.0, 201)
        values = np.asarray(self.prize_map(grid), dtype=float)
        if not np.all(np.diff(values) > 0):
            raise ValueError("prize_map must be strictly increasing in theta")

    def omega(self, theta):
        return self.prize_map(theta)


def belief_given_cutoff(theta, tau, sigma):
    """Probability another provider's signal clears ``tau`` when the state is ``theta``."""
    return ndtr((np.asarray(theta, dtype=float) - tau) / sigma)


def posterior_normal(prior: NormalPrior, sigma: float, signal: float) -> tuple[float, float]:
    """Conjugate Normal posterior (mean, std) of theta given one signal."""
    v0, v1 = prior.std**2, sigma**2
    mean = (prior.mean * v1 + signal * v0) / (v0 + v1)
    std = math.sqrt(v0 * v1 / (v0 + v1))
    return mean, std


def payoff_at_state(spec: GlobalGameSpec, theta, tau):
    """U_J at state theta when every other provider uses cutoff ``tau``."""
    base = spec.base
    alpha = belief_given_cutoff(theta, tau, spec.sigma)
    pi = success_prob(base.n, base.K, alpha)
    return expected_join_payoff(base, pi, spec.omega(theta))


def _hermite_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    return x, w / w.sum()


def conditional_payoff_at_signal(spec: GlobalGameSpec, tau: float) -> float:
    """E[U_J | s_i = tau] when all other providers use cutoff ``tau``.

    Normal prior: the posterior is Normal and the expectation is a fixed
    Gauss-Hermite sum. Uniform prior: the posterior is a truncated Normal
    integrated adaptively.
    """
    prior = spec.prior
    if isinstance(prior, NormalPrior):
        mean, std = posterior_normal(prior, spec.sigma, tau)
        x, w = _hermite_rule(spec.solver.nodes)
        values = payoff_at_state(spec, mean + std * x, tau)
        return float(np.dot(w, values))
    if prior.lo == prior.hi:
        return float(payoff_at_state(spec, prior.lo, tau))
    return _uniform_posterior_expectation(spec, prior, tau)


def _uniform_posterior_expectation(spec: GlobalGameSpec, prior: UniformPrior, tau: float) -> float:
    # Posterior of theta is Normal(tau, sigma) truncated to [lo, hi].
    sigma = spec.sigma
    nearest = min(max(tau, prior.lo), prior.hi)
    d = tau - nearest
    # Beyond this distance from ``nearest`` the relative weight is below e^-50.
    reach = 10.0 * sigma if d == 0 else min(10.0 * sigma, 50.0 * sigma**2 / abs(d))
    lo = max(prior.lo, nearest - reach) - nearest
    hi = min(prior.hi, nearest + reach) - nearest
    if hi - lo <= 1e-9 * sigma:
        return float(payoff_at_state(spec, nearest, tau))

    # Integrate over the offset x = theta - nearest so nodes keep full
    # precision when the posterior is a thin sliver. The exponent is
    # (tau-nearest)^2 - (tau-theta)^2 in factored form; its maximum is 0.
    def weight(x):
        return math.exp(0.5 * x * (2.0 * d - x) / sigma**2)

    limit = 200
    mass, err_m = integrate.quad(weight, lo, hi, limit=limit, epsabs=0.0, epsrel=1e-10)
    scale = mass * max(spec.base.F_eff, abs(float(spec.omega(nearest))), 1.0)
    num, err_n = integrate.quad(
        lambda x: weight(x) * float(payoff_at_state(spec, nearest + x, tau)),
        lo,
        hi,
        limit=limit,
        epsabs=1e-12 * scale,
        epsrel=1e-10,
    )
    if not mass > 0 or err_m > 1e-8 * mass or err_n > 1e-8 * scale:
        raise SolverError(
            f"adaptive quadrature did not converge at tau={tau} "
            f"(limit={limit} subintervals, bracket=[{prior.lo}, {prior.hi}])"
        )
    return num / mass


def theta_star(spec: GlobalGameSpec) -> float:
    """State at which all-join breaks even: (1 - p_K)/K omega = p_K F_eff."""
    base = spec.base
    target = base.K * base.p_K * base.F_eff / (1.0 - base.p_K)
    if isinstance(spec.prize_map, IdentityPrize):
        return target
    return _invert_prize(spec, target)


def limit_cutoff(spec: GlobalGameSpec) -> float:
    """Vanishing-noise limit of the equilibrium cutoff.

    At the limit the marginal provider's belief about the share of other
    joiners is uniform, so the cutoff solves
    ``-p_tilde F + Pbar (c omega - (p_K - p_tilde) F) = 0`` with
    ``Pbar = (n - K + 1) / n`` and ``c = (1 - p_K) / K``. It coincides with
    :func:`theta_star` only when ``p_tilde == 0``.
    """
    base = spec.base
    F, p_K, p_t = base.F_eff, base.p_K, base.p_tilde
    share = laplacian_success_prob(base.n, base.K)
    target = (p_t * F / share + (p_K - p_t) * F) * base.K / (1.0 - p_K)
    if isinstance(spec.prize_map, IdentityPrize):
        return target
    return _invert_prize(spec, target)


def _invert_prize(spec: GlobalGameSpec, target: float) -> float:
    try:
        guess = spec.prize_map.inverse(target)
    except SolverError:
        raise SolverError(f"prize map cannot reach omega={target}") from None
    f = lambda t: float(spec.omega(t)) - target
    lo, hi = guess - 1.0, guess + 1.0
    for _ in range(100):
        if f(lo) <= 0 <= f(hi):
            return optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        lo, hi = lo - (hi - lo), hi + (hi - lo)
    raise SolverError(f"no root of omega(theta) = {target} found")


Outcome = Literal["interior", "always_deterred", "always_collusive", "no_sign_change"]


@dataclass(frozen=True)
class CutoffSolution:
    status: Outcome
    tau: float | None
    residual: float | None
    theta_star: float
    limit_cutoff: float
    iterations: int
    bracket: tuple[float, float]
    monotone: Literal["increasing", "decreasing", "neither"] | None = None
    converged: bool = False

    @property
    def found(self) -> bool:
        return self.status == "interior"


def _classify(values: list[float]) -> Outcome:
    if all(v < 0 for v in values):
        return "always_deterred"
    if all(v > 0 for v in values):
        return "always_collusive"
    return "no_sign_change"


def monotonicity(spec: GlobalGameSpec, lo: float, hi: float, points: int | None = None):
    """Direction of the conditional payoff on a grid over [lo, hi]."""
    grid = np.linspace(lo, hi, points or spec.solver.monotone_grid)
    values = np.array([conditional_payoff_at_signal(spec, t) for t in grid])
    steps = np.diff(values)
    if np.all(steps > 0):
        return "increasing", grid, values
    if np.all(steps < 0):
        return "decreasing", grid, values
    return "neither", grid, values


def solve_cutoff(spec: GlobalGameSpec) -> CutoffSolution:
    """Find the equilibrium cutoff by bisection on the indifference condition.

    The bracket starts around the vanishing-noise limit and doubles until the
    conditional payoff changes sign. If it never does, the result is
    classified rather than raised.
    """
    opts = spec.solver
    t_star = theta_star(spec)
    t_lim = limit_cutoff(spec)
    D = lambda t: conditional_payoff_at_signal(spec, t)

    center = t_lim
    half = opts.initial_halfwidth * spec.sigma
    lo, hi = center - half, center + half
    f_lo, f_hi = D(lo), D(hi)
    seen = [f_lo, f_hi]
    expansions = 0
    while f_lo * f_hi > 0 and expansions < opts.max_expansions:
        half *= 2.0
        lo, hi = center - half, center + half
        f_lo, f_hi = D(lo), D(hi)
        seen += [f_lo, f_hi]
        expansions += 1
    if f_lo * f_hi > 0:
        return CutoffSolution(
            status=_classify(seen),
            tau=None,
            residual=None,
            theta_star=t_star,
            limit_cutoff=t_lim,
            iterations=expansions,
            bracket=(lo, hi),
        )

    bracket = (lo, hi)
    direction, _, _ = monotonicity(spec, lo, hi)
    F = spec.base.F_eff
    iterations = 0
    if f_lo == 0:
        tau, f_tau = lo, f_lo
    elif f_hi == 0:
        tau, f_tau = hi, f_hi
    else:
        while True:
            iterations += 1
            tau = 0.5 * (lo + hi)
            f_tau = D(tau)
            scale = max(abs(float(spec.omega(tau))), F, 1e-300)
            width_ok = (hi - lo) <= opts.xtol * max(1.0, abs(tau))
            if f_tau == 0 or (width_ok and abs(f_tau) <= opts.ftol * scale):
                break
            if tau in (lo, hi) or iterations >= opts.max_iterations:
                break
            if (f_tau < 0) == (f_lo < 0):
                lo, f_lo = tau, f_tau
            else:
                hi, f_hi = tau, f_tau
    scale = max(abs(float(spec.omega(tau))), F, 1e-300)
    return CutoffSolution(
        status="interior",
        tau=tau,
        residual=f_tau,
        theta_star=t_star,
        limit_cutoff=t_lim,
        iterations=iterations,
        bracket=bracket,
        monotone=direction,
        converged=abs(f_tau) <= opts.xtol * scale,
    )
