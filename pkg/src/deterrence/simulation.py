"""Agent-based Monte Carlo check of the analytic payoffs.

Each replication draws a state, the providers' join decisions, the success
of the attempt and one detection draw per joiner. A joiner is caught with
probability p_K if the attempt succeeds and p_tilde otherwise, which gives
the same unconditional detection rate as the analytic payoff.

Randomness comes from counter-based Philox streams: block ``b`` of stream
``s`` is keyed by the master seed with its counter offset by ``b`` and ``s``,
so results do not depend on evaluation order or worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
from scipy import stats

from .global_games import GlobalGameSpec, NormalPrior, UniformPrior, posterior_normal
from .model import ModelParams

SEED_LIMIT = 1 << 64
_SIM_STREAM = 0
_DEVIATION_STREAM = 1


@dataclass(frozen=True)
class Strategy:
    kind: Literal["cutoff", "always", "never", "random"]
    value: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "cutoff":
            if self.value is None or math.isnan(self.value):
                raise ValueError("strategy: cutoff needs a value tau")
        elif self.kind == "random":
            if self.value is None or not 0.0 <= self.value <= 1.0:
                raise ValueError("strategy: random join probability must lie in [0, 1]")
        elif self.kind not in ("always", "never"):
            raise ValueError(f"strategy: unknown kind {self.kind!r}")

    @classmethod
    def cutoff(cls, tau: float) -> Strategy:
        return cls("cutoff", float(tau))

    @classmethod
    def always(cls) -> Strategy:
        return cls("always")

    @classmethod
    def never(cls) -> Strategy:
        return cls("never")

    @classmethod
    def random(cls, alpha: float) -> Strategy:
        return cls("random", float(alpha))

    def describe(self) -> str:
        return self.kind if self.value is None else f"{self.kind}:{self.value!r}"


@dataclass(frozen=True)
class SimConfig:
    """Simulation inputs.

    Supply ``game`` for the dispersed-information setting (required by cutoff
    strategies); otherwise ``params`` fixes the prize at ``params.omega``.
    ``theta`` pins the state instead of drawing it from the prior.
    """

    replications: int
    seed: int
    strategy: Strategy
    params: ModelParams | None = None
    game: GlobalGameSpec | None = None
    theta: float | None = None
    block_size: int = 1 << 16
    workers: int = 1

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if not 0 <= self.seed < SEED_LIMIT:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if (self.params is None) == (self.game is None):
            raise ValueError("exactly one of params or game must be given")
        if self.strategy.kind == "cutoff" and self.game is None:
            raise ValueError("strategy: cutoff play needs a global game (signal noise)")
        if self.block_size < 1 or self.workers < 1:
            raise ValueError("block_size and workers must be >= 1")

    @property
    def base(self) -> ModelParams:
        return self.game.base if self.game is not None else self.params


@dataclass(frozen=True)
class SimResult:
    replications: int
    seed: int
    strategy: str
    empirical_join_rate: float
    empirical_success_rate: float
    empirical_success_rate_se: float
    empirical_detection_rate: float
    empirical_detection_rate_se: float
    detection_rate_success: float | None
    detection_rate_success_se: float | None
    detection_rate_failure: float | None
    detection_rate_failure_se: float | None
    mean_realized_payoff: float
    mean_realized_payoff_se: float
    joiner_observations: int
    excess_joiners: int
    deviation_gain: float | None = None
    deviation_gain_se: float | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, float) and not math.isfinite(value):
                out[key] = None
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)


@dataclass(frozen=True)
class DeviationEstimate:
    gain: float
    se: float
    replications: int


def block_generator(seed: int, block: int, stream: int = _SIM_STREAM) -> np.random.Generator:
    counter = (block << 192) | (stream << 160)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def _blocks(replications: int, size: int) -> list[tuple[int, int]]:
    count = -(-replications // size)
    return [(b, min(size, replications - b * size)) for b in range(count)]


def _run_blocks(config: SimConfig, worker, stream: int) -> list:
    tasks = _blocks(config.replications, config.block_size)
    run = lambda task: worker(block_generator(config.seed, task[0], stream), task[1])
    if config.workers == 1:
        return [run(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(run, tasks))


def _draw_theta(config: SimConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    if config.theta is not None:
        return np.full(size, float(config.theta))
    prior = config.game.prior
    if isinstance(prior, NormalPrior):
        return prior.mean + prior.std * rng.standard_normal(size)
    return rng.uniform(prior.lo, prior.hi, size)


# Column layout of the per-replication tally matrix.
_M, _S, _DET, _DET_S, _DET_F, _FAIL, _PAY, _EXCESS = range(8)


def _tally_block(config: SimConfig, rng: np.random.Generator, size: int):
    base = config.base
    n, K = base.n, base.K
    strategy = config.strategy

    if config.game is not None:
        theta = _draw_theta(config, rng, size)
        omega = np.asarray(config.game.omega(theta), dtype=float)
    else:
        omega = np.full(size, base.omega)

    if strategy.kind == "always":
        joins = np.ones((size, n), dtype=bool)
    elif strategy.kind == "never":
        joins = np.zeros((size, n), dtype=bool)
    elif strategy.kind == "random":
        joins = rng.random((size, n)) < strategy.value
    else:
        signals = theta[:, None] + config.game.sigma * rng.standard_normal((size, n))
        joins = signals >= strategy.value

    m = joins.sum(axis=1)
    success = m >= K
    det_p = np.where(success, base.p_K, base.p_tilde)
    detected = joins & (rng.random((size, n)) < det_p[:, None])

    share = np.where(success, omega / K, 0.0)
    payoff = np.where(detected, -base.F_eff, share[:, None]) * joins

    det = detected.sum(axis=1)
    rows = np.empty((size, 8))
    rows[:, _M] = m
    rows[:, _S] = np.where(success, m, 0)
    rows[:, _DET] = det
    rows[:, _DET_S] = np.where(success, det, 0)
    rows[:, _DET_F] = np.where(success, 0, det)
    rows[:, _FAIL] = np.where(success, 0, m)
    rows[:, _PAY] = payoff.sum(axis=1)
    rows[:, _EXCESS] = np.where(success, m - K, 0)
    return rows.sum(axis=0), rows.T @ rows


def _ratio(sums, cross, num: int, den: int, N: int):
    """Ratio-of-sums estimator with its delta-method standard error."""
    a, b = sums[num], sums[den]
    if b == 0:
        return None, None
    r = a / b
    resid = cross[num, num] - 2 * r * cross[num, den] + r * r * cross[den, den]
    if N < 2:
        return r, float("nan")
    var = max(resid, 0.0) / (N * (N - 1)) / (b / N) ** 2
    return float(r), float(math.sqrt(var))


def simulate(config: SimConfig) -> SimResult:
    """Run the replications and summarise per-joiner outcomes.

    Rates and the mean payoff are ratios over all joiner observations, so
    they estimate quantities conditional on joining. Joiners beyond K in a
    successful attempt are counted in ``excess_joiners``; every joiner of a
    successful attempt receives omega / K.
    """
    parts = _run_blocks(config, lambda rng, size: _tally_block(config, rng, size), _SIM_STREAM)
    sums = np.zeros(8)
    cross = np.zeros((8, 8))
    for s, c in parts:
        sums += s
        cross += c
    N = config.replications
    n = config.base.n

    def zero_if_none(value):
        return 0.0 if value is None else value

    success, success_se = _ratio(sums, cross, _S, _M, N)
    detection, detection_se = _ratio(sums, cross, _DET, _M, N)
    det_s, det_s_se = _ratio(sums, cross, _DET_S, _S, N)
    det_f, det_f_se = _ratio(sums, cross, _DET_F, _FAIL, N)
    payoff, payoff_se = _ratio(sums, cross, _PAY, _M, N)

    deviation = None
    if config.strategy.kind == "cutoff" and math.isfinite(config.strategy.value):
        deviation = estimate_deviation_gain(config)

    return SimResult(
        replications=N,
        seed=config.seed,
        strategy=config.strategy.describe(),
        empirical_join_rate=float(sums[_M] / (N * n)),
        empirical_success_rate=zero_if_none(success),
        empirical_success_rate_se=zero_if_none(success_se),
        empirical_detection_rate=zero_if_none(detection),
        empirical_detection_rate_se=zero_if_none(detection_se),
        detection_rate_success=det_s,
        detection_rate_success_se=det_s_se,
        detection_rate_failure=det_f,
        detection_rate_failure_se=det_f_se,
        mean_realized_payoff=zero_if_none(payoff),
        mean_realized_payoff_se=zero_if_none(payoff_se),
        joiner_observations=int(sums[_M]),
        excess_joiners=int(sums[_EXCESS]),
        deviation_gain=None if deviation is None else deviation.gain,
        deviation_gain_se=None if deviation is None else deviation.se,
    )


def _posterior_draws(game: GlobalGameSpec, tau: float, rng: np.random.Generator, size: int):
    prior = game.prior
    if isinstance(prior, NormalPrior):
        mean, std = posterior_normal(prior, game.sigma, tau)
        return mean + std * rng.standard_normal(size)
    assert isinstance(prior, UniformPrior)
    if prior.lo == prior.hi:
        return np.full(size, prior.lo)
    a, b = (prior.lo - tau) / game.sigma, (prior.hi - tau) / game.sigma
    return stats.truncnorm.rvs(a, b, loc=tau, scale=game.sigma, size=size, random_state=rng)


def _deviation_block(config: SimConfig, rng: np.random.Generator, size: int):
    game = config.game
    base = game.base
    tau = config.strategy.value
    theta = _posterior_draws(game, tau, rng, size)
    others = theta[:, None] + game.sigma * rng.standard_normal((size, base.n - 1))
    success = (others >= tau).sum(axis=1) >= base.K - 1
    det_p = np.where(success, base.p_K, base.p_tilde)
    detected = rng.random(size) < det_p
    omega = np.asarray(game.omega(theta), dtype=float)
    join = np.where(detected, -base.F_eff, np.where(success, omega / base.K, 0.0))
    # Abstaining earns exactly zero on the same draws.
    abstain = np.zeros(size)
    gain = join - abstain
    return gain.sum(), (gain * gain).sum()


def estimate_deviation_gain(config: SimConfig) -> DeviationEstimate:
    """Payoff from joining minus abstaining for a provider whose signal equals the cutoff.

    Both branches share the posterior state draw and the other providers'
    signals (common random numbers). Near an equilibrium cutoff the gain is
    zero up to sampling error.
    """
    if config.strategy.kind != "cutoff" or config.game is None:
        raise ValueError("deviation gain needs a cutoff strategy and a global game")
    if not math.isfinite(config.strategy.value):
        raise ValueError("deviation gain needs a finite cutoff")
    parts = _run_blocks(
        config, lambda rng, size: _deviation_block(config, rng, size), _DEVIATION_STREAM
    )
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    N = config.replications
    mean = total / N
    if N < 2:
        return DeviationEstimate(float(mean), float("nan"), N)
    var = max(total_sq - N * mean * mean, 0.0) / (N - 1)
    return DeviationEstimate(float(mean), float(math.sqrt(var / N)), N)
