"""Closed-form discrepancy and mixing bounds as plain evaluators.

Every evaluator returns a float.  :func:`evaluate` wraps any of them in a
:class:`BoundReport` that echoes its inputs, for the CLI and the harness.
Logarithms are natural unless written ``log2``.  Lower bounds clamp at 0.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import asdict, dataclass, field

__all__ = [
    "BoundReport",
    "BoundDomainError",
    "markov_tstep_bound",
    "main1_upper_threshold",
    "main1_failure_probability",
    "main1_lower_threshold",
    "universal_disc_bound",
    "lambda_disc_bound",
    "cycle_tail_bound",
    "cycle_l2_lower",
    "torus_l2_lower",
    "expander_l2_lower",
    "worstcase_disc_lower",
    "REGISTRY",
    "evaluate",
]

ASYMPTOTIC = "asymptotic, hidden constant c is user-supplied"


class BoundDomainError(ValueError):
    """An evaluator was called outside the domain of its formula."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise BoundDomainError(msg)


def markov_tstep_bound(alpha: float, beta: float, pi_max: float, pi_min: float, t: float) -> float:
    """Upper bound on ``|P^t[x, y] - pi[y]|`` for an irreducible chain.

    ``(pi_max/pi_min)^(3/2) * 2/(sqrt(beta)*alpha) * sqrt((1-beta+alpha)/(alpha*t))``
    """
    _require(0 < alpha <= 1 and 0 < beta <= 1, "alpha and beta must lie in (0, 1]")
    _require(t >= 1, "t must be >= 1")
    _require(pi_max >= pi_min > 0, "need pi_max >= pi_min > 0")
    ratio = (pi_max / pi_min) ** 1.5
    return ratio * 2 / (math.sqrt(beta) * alpha) * math.sqrt((1 - beta + alpha) / (alpha * t))


def main1_upper_threshold(delta: float, kappa: float, sigma: float, n: int, pair_dist: float) -> float:
    """Load-gap threshold exceeded with probability at most ``2e^(-delta^2) + 2/n^2``."""
    _require(delta > 0 and kappa > 0 and sigma > 0, "delta, kappa, sigma must be positive")
    _require(n >= 2 and pair_dist >= 0, "need n >= 2 and pair_dist >= 0")
    log_n = math.log(n)
    return delta * math.sqrt(128) * kappa * sigma * log_n * pair_dist + math.sqrt(48 * log_n)


def main1_failure_probability(delta: float, n: int) -> float:
    _require(delta > 0 and n >= 2, "need delta > 0 and n >= 2")
    return 2 * math.exp(-delta * delta) + 2 / n**2


def main1_lower_threshold(sigma: float, n: int, pair_dist: float) -> float:
    """Load gap reached with probability at least 1/16 (clamped at 0)."""
    _require(sigma > 1, "sigma must exceed 1 (log2 sigma > 0)")
    _require(n >= 2 and pair_dist >= 0, "need n >= 2 and pair_dist >= 0")
    value = sigma / (2 * math.sqrt(2 * math.log2(sigma))) * pair_dist - math.sqrt(48 * math.log(n))
    return max(value, 0.0)


def universal_disc_bound(t: float, sigma: float, n: int, c: float = 1.0) -> float:
    """``c * t^(-1/4) * sigma * log(n)^(3/2) + sqrt(log n)``."""
    _require(t >= 1 and sigma >= 0 and n >= 2 and c > 0, "need t >= 1, sigma >= 0, n >= 2, c > 0")
    log_n = math.log(n)
    return c * t**-0.25 * sigma * log_n**1.5 + math.sqrt(log_n)


def lambda_disc_bound(lam: float, t: float, sigma: float, n: int, c: float = 1.0) -> float:
    """``c * lam^(t/4) * sigma * log(n)^(3/2) + sqrt(log n)``; ``0^(t/4) = 0``."""
    _require(0 <= lam < 1, "lambda must lie in [0, 1)")
    _require(t >= 1 and sigma >= 0 and n >= 2 and c > 0, "need t >= 1, sigma >= 0, n >= 2, c > 0")
    log_n = math.log(n)
    decay = 0.0 if lam == 0 else lam ** (t / 4)
    return c * decay * sigma * log_n**1.5 + math.sqrt(log_n)


def cycle_tail_bound(delta: float, t: float) -> float:
    """Mass of ``M^t[u, .]`` at cycle distance ``>= delta``: ``2 exp(-(delta-2)^2 / (8t))``.

    Underflows to 0 deep in the tail.
    """
    _require(delta > 2, "delta must exceed 2")
    _require(t >= 1, "t must be >= 1")
    return 2 * math.exp(-((delta - 2) ** 2) / (8 * t))


def cycle_l2_lower(t: float, n: int | None = None) -> float:
    """``1/(160 sqrt(t))``, a lower bound on ``||M^t[., u] - 1/n||_2^2`` for the cycle.

    Valid for ``t >= 10``; when ``n`` is given, also requires ``20 sqrt(t) < n/2``.
    """
    _require(t >= 10, "t must be >= 10")
    if n is not None:
        _require(20 * math.sqrt(t) < n / 2, f"need 20*sqrt(t) < n/2 (t={t}, n={n})")
    return 1 / (160 * math.sqrt(t))


def torus_l2_lower(t: float, r: int, side: int | None = None) -> float:
    # per-axis product of the cycle constant; this constant is a modelling choice
    _require(r >= 1, "r must be >= 1")
    return cycle_l2_lower(t, side) ** r


def expander_l2_lower(t: int, d: int) -> float:
    """``2^(-d*t)``: smallest possible positive entry of ``M^t``."""
    _require(t >= 1 and d >= 1, "need t >= 1 and d >= 1")
    _require(d * t <= 60, "d*t must be <= 60 for exact representation")
    return 2.0 ** (-d * t)


def worstcase_disc_lower(kind: str, K: float, n: int, t: float) -> float:
    """Discrepancy lower bound for the half-loaded worst-case input, clamped at 0.

    Cycle: ``K/8 * (1 - exp(-n^2/(2048 t))) - sqrt(48 log n)``; ``torus2d``
    uses ``n`` in place of ``n^2``.
    """
    _require(t >= 1, "t must be >= 1")
    _require(n >= 2 and K > 0, "need n >= 2 and K > 0")
    if kind == "cycle":
        size = float(n) ** 2
    elif kind == "torus2d":
        size = float(n)
    else:
        raise BoundDomainError(f"unsupported kind {kind!r}; use 'cycle' or 'torus2d'")
    value = K / 8 * (1 - math.exp(-size / (2048 * t))) - math.sqrt(48 * math.log(n))
    return max(value, 0.0)


@dataclass
class BoundReport:
    name: str
    inputs: dict
    value: float
    side: str
    caveat: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class _Entry:
    func: object
    side: str
    caveat: str = ""
    params: tuple[str, ...] = field(default=())


def _entry(func, side: str, caveat: str = "") -> _Entry:
    return _Entry(func, side, caveat, tuple(inspect.signature(func).parameters))


REGISTRY: dict[str, _Entry] = {
    "markov_tstep_bound": _entry(markov_tstep_bound, "upper"),
    "main1_upper_threshold": _entry(
        main1_upper_threshold, "upper",
        "exceeded with probability <= 2exp(-delta^2) + 2n^-2; kappa configurable"),
    "main1_failure_probability": _entry(main1_failure_probability, "upper"),
    "main1_lower_threshold": _entry(
        main1_lower_threshold, "lower", "reached with probability >= 1/16; clamped at 0"),
    "universal_disc_bound": _entry(universal_disc_bound, "upper", ASYMPTOTIC),
    "lambda_disc_bound": _entry(lambda_disc_bound, "upper", ASYMPTOTIC),
    "cycle_tail_bound": _entry(cycle_tail_bound, "upper"),
    "cycle_l2_lower": _entry(cycle_l2_lower, "lower"),
    "torus_l2_lower": _entry(
        torus_l2_lower, "lower", "per-axis product of the cycle constant (constant is ours)"),
    "expander_l2_lower": _entry(expander_l2_lower, "lower"),
    "worstcase_disc_lower": _entry(worstcase_disc_lower, "lower", "holds w.p. >= 1 - 1/n; clamped at 0"),
}


def evaluate(name: str, **params) -> BoundReport:
    """Evaluate bound ``name`` with keyword parameters and wrap the result."""
    try:
        entry = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown bound {name!r}; known: {sorted(REGISTRY)}") from None
    unknown = set(params) - set(entry.params)
    if unknown:
        raise BoundDomainError(f"{name} got unexpected parameters {sorted(unknown)}")
    value = entry.func(**params)
    return BoundReport(name=name, inputs=dict(params), value=float(value),
                       side=entry.side, caveat=entry.caveat)
