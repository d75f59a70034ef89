"""Model primitives: providers, thresholds, detection, prize and sanctions.

Currency values are plain floats; the calibration code works in billions of
dollars, but nothing here assumes a unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


def majority_threshold(n: int) -> int:
    """Simple-majority coalition size, floor(n/2) + 1."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return n // 2 + 1


def detection_prob(q: float, m: int) -> float:
    """Probability that a size-``m`` coalition is detected.

    Each member is caught independently with probability ``q``, so the
    coalition escapes only if every member does.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if m < 0:
        raise ValueError(f"coalition size m must be >= 0, got {m}")
    return 1.0 - (1.0 - q) ** m


def flow_prize(beta: float, V: float) -> float:
    """Capturable flow ``beta * V`` out of a secured stock ``V``."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if V < 0:
        raise ValueError(f"V must be >= 0, got {V}")
    return beta * V


class SanctionProfile:
    """Per-provider sanction scales, stored in descending (rank) order."""

    def values(self, n: int) -> tuple[float, ...]:
        raise NotImplementedError

    def scaled(self, factor: float) -> SanctionProfile:
        raise NotImplementedError

    def validate_for(self, n: int) -> None:
        pass


@dataclass(frozen=True)
class ExplicitSanctions(SanctionProfile):
    """A concrete list of sanctions; input order is discarded."""

    F: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(f) for f in self.F)
        if not values:
            raise ValueError("sanctions: explicit profile must be nonempty")
        if any(not f > 0 or not math.isfinite(f) for f in values):
            raise ValueError("sanctions: every F must be finite and > 0")
        object.__setattr__(self, "F", tuple(sorted(values, reverse=True)))

    @classmethod
    def uniform(cls, F: float, n: int) -> ExplicitSanctions:
        return cls((F,) * n)

    def values(self, n: int) -> tuple[float, ...]:
        self.validate_for(n)
        return self.F

    def scaled(self, factor: float) -> ExplicitSanctions:
        return ExplicitSanctions(tuple(f * factor for f in self.F))

    def validate_for(self, n: int) -> None:
        if len(self.F) != n:
            raise ValueError(
                f"sanctions: explicit profile has {len(self.F)} entries but n={n}"
            )


@dataclass(frozen=True)
class ZipfSanctions(SanctionProfile):
    """Rank-size law F_(r) = C / r."""

    C: float

    def __post_init__(self) -> None:
        if not self.C > 0 or not math.isfinite(self.C):
            raise ValueError(f"sanctions: Zipf scale C must be > 0, got {self.C}")

    def values(self, n: int) -> tuple[float, ...]:
        return tuple(self.C / r for r in range(1, n + 1))

    def scaled(self, factor: float) -> ZipfSanctions:
        return ZipfSanctions(self.C * factor)


@dataclass(frozen=True)
class Coalition:
    """The cheapest size-K coalition.

    ``member_indices`` are 0-based positions in the descending sanction
    profile, so index 0 is the provider with the largest F.
    """

    member_indices: frozenset[int]
    binding_F: float

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(sorted(i + 1 for i in self.member_indices))


def _check_K(n: int, K: int) -> None:
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not 1 <= K <= n:
        raise ValueError(f"K must satisfy 1 <= K <= n={n}, got {K}")


def effective_sanction(profile: SanctionProfile, n: int, K: int) -> float:
    """Sanction of the binding member of the cheapest coalition, F_(n-K+1)."""
    _check_K(n, K)
    return profile.values(n)[n - K]


def select_coalition(profile: SanctionProfile, n: int, K: int) -> Coalition:
    """Pick the K lowest-sanction providers; ties go to the lowest index."""
    _check_K(n, K)
    values = profile.values(n)
    order = sorted(range(n), key=lambda i: (values[i], i))
    members = order[:K]
    return Coalition(frozenset(members), max(values[i] for i in members))


@dataclass(frozen=True)
class ModelParams:
    """Primitives of the collusion game.

    ``pre_coordination_size`` is the number of members exposed before the
    coalition executes; ``None`` means the default ``K - 1``.
    """

    n: int
    K: int
    q: float
    beta: float
    V: float
    sanctions: SanctionProfile = field(repr=True)
    pre_coordination_size: int | None = None

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ValueError(f"n must be an integer, got {self.n!r}")
        if isinstance(self.K, bool) or int(self.K) != self.K:
            raise ValueError(f"K must be an integer, got {self.K!r}")
        _check_K(self.n, self.K)
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.V >= 0 or not math.isfinite(self.V):
            raise ValueError(f"V must be finite and >= 0, got {self.V}")
        if not isinstance(self.sanctions, SanctionProfile):
            raise ValueError("sanctions must be a SanctionProfile")
        self.sanctions.validate_for(self.n)
        m = self.pre_coordination_size
        if m is not None and not 0 <= m <= self.K:
            raise ValueError(
                f"pre_coordination_size must satisfy 0 <= m <= K={self.K}, got {m}"
            )

    @classmethod
    def from_coalition_detection(
        cls,
        n: int,
        K: int,
        p_K: float,
        beta: float,
        V: float,
        sanctions: SanctionProfile,
        pre_coordination_size: int | None = None,
    ) -> ModelParams:
        """Build params from a coalition-level detection probability."""
        if not 0.0 < p_K < 1.0:
            raise ValueError(f"p_K must lie in (0, 1), got {p_K}")
        q = 1.0 - (1.0 - p_K) ** (1.0 / K)
        return cls(n, K, q, beta, V, sanctions, pre_coordination_size)

    @property
    def pre_size(self) -> int:
        m = self.pre_coordination_size
        return self.K - 1 if m is None else m

    @property
    def p_K(self) -> float:
        return detection_prob(self.q, self.K)

    @property
    def p_tilde(self) -> float:
        return detection_prob(self.q, self.pre_size)

    @property
    def omega(self) -> float:
        return flow_prize(self.beta, self.V)

    @property
    def F_eff(self) -> float:
        return effective_sanction(self.sanctions, self.n, self.K)

    def coalition(self) -> Coalition:
        return select_coalition(self.sanctions, self.n, self.K)

    def with_(self, **changes) -> ModelParams:
        return replace(self, **changes)


def baseline_params(V: float = 1190.0) -> ModelParams:
    """Back-of-the-envelope calibration in $B: n=5, K=3, p_K=0.15, beta=0.06, F_eff=135."""
    return ModelParams.from_coalition_detection(
        n=5,
        K=3,
        p_K=0.15,
        beta=0.06,
        V=V,
        sanctions=ExplicitSanctions.uniform(135.0, 5),
    )


