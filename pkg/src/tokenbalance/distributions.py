"""Average-case initial loads from exponentially concentrated distributions.

Four integer families are supported: discrete uniform on ``{0, ..., 2K}``,
binomial ``Bin(m, p)`` with ``p <= 1/2``, geometric on ``{1, 2, ...}`` with
mean ``1/p``, and Poisson.  A distribution is exponentially concentrated if
``P[|X - mu| >= delta*sigma] <= exp(-kappa*delta)`` for some ``kappa > 0``;
:func:`concentration_report` audits that empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DistributionSpec",
    "ConcentrationReport",
    "moments",
    "sample_vector",
    "concentration_report",
    "parse_distribution",
]

FAMILIES = ("uniform", "binomial", "geometric", "poisson")


@dataclass(frozen=True)
class DistributionSpec:
    family: str
    K: int = 0
    m: int = 0
    p: float = 0.0
    mu: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "uniform" and (self.K < 0 or int(self.K) != self.K):
            raise ValueError(f"uniform K must be a non-negative integer, got {self.K}")
        if self.family == "binomial" and not (self.m >= 1 and 0 < self.p <= 0.5):
            raise ValueError(f"binomial needs m >= 1 and 0 < p <= 1/2, got m={self.m}, p={self.p}")
        if self.family == "geometric" and not 0 < self.p <= 1:
            raise ValueError(f"geometric needs 0 < p <= 1, got p={self.p}")
        if self.family == "poisson" and not self.mu > 0:
            raise ValueError(f"poisson needs mu > 0, got mu={self.mu}")

    @classmethod
    def uniform(cls, K: int) -> "DistributionSpec":
        return cls("uniform", K=K)

    @classmethod
    def binomial(cls, m: int, p: float) -> "DistributionSpec":
        return cls("binomial", m=m, p=p)

    @classmethod
    def geometric(cls, p: float) -> "DistributionSpec":
        return cls("geometric", p=p)

    @classmethod
    def poisson(cls, mu: float) -> "DistributionSpec":
        return cls("poisson", mu=mu)

    def __str__(self) -> str:
        if self.family == "uniform":
            return f"uniform:{self.K}"
        if self.family == "binomial":
            return f"binomial:{self.m}:{self.p}"
        if self.family == "geometric":
            return f"geometric:{self.p}"
        return f"poisson:{self.mu}"


def parse_distribution(text: str) -> DistributionSpec:
    """Parse ``uniform:K``, ``binomial:m:p``, ``geometric:p`` or ``poisson:mu``."""
    family, *args = text.strip().split(":")
    try:
        if family == "uniform" and len(args) == 1:
            return DistributionSpec.uniform(int(args[0]))
        if family == "binomial" and len(args) == 2:
            return DistributionSpec.binomial(int(args[0]), float(args[1]))
        if family == "geometric" and len(args) == 1:
            return DistributionSpec.geometric(float(args[0]))
        if family == "poisson" and len(args) == 1:
            return DistributionSpec.poisson(float(args[0]))
    except ValueError as exc:
        raise ValueError(f"bad distribution {text!r}: {exc}") from None
    raise ValueError(f"bad distribution {text!r}")


def moments(spec: DistributionSpec) -> tuple[float, float]:
    """Exact mean and standard deviation."""
    if spec.family == "uniform":
        K = spec.K
        return float(K), math.sqrt(K * (K + 1) / 3)
    if spec.family == "binomial":
        return spec.m * spec.p, math.sqrt(spec.m * spec.p * (1 - spec.p))
    if spec.family == "geometric":
        return 1 / spec.p, math.sqrt((1 - spec.p) / spec.p**2)
    return float(spec.mu), math.sqrt(spec.mu)


def sample_vector(spec: DistributionSpec, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. draws as an int64 array, reproducible for a given seed."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    if spec.family == "uniform":
        out = rng.integers(0, 2 * spec.K, size=n, endpoint=True)
    elif spec.family == "binomial":
        out = rng.binomial(spec.m, spec.p, size=n)
    elif spec.family == "geometric":
        out = rng.geometric(spec.p, size=n)
    else:
        out = rng.poisson(spec.mu, size=n)
    return out.astype(np.int64)


@dataclass
class ConcentrationReport:
    """Empirical tails ``P[|X - mu| >= delta*sigma]`` over a delta grid.

    ``kappa_hat`` is the least-squares slope (through the origin) of
    ``-log(tail)`` against ``delta`` over grid points with a positive tail.
    ``flagged`` lists deltas whose tail exceeds ``exp(-kappa_hat*delta)`` by
    more than three binomial standard errors.
    """

    deltas: np.ndarray
    tails: np.ndarray
    kappa_hat: float
    samples: int
    flagged: list[float] = field(default_factory=list)


def concentration_report(
    spec: DistributionSpec, deltas, samples: int, seed: int
) -> ConcentrationReport:
    if samples < 10_000:
        raise ValueError(f"need at least 10^4 samples, got {samples}")
    deltas = np.asarray(sorted(deltas), dtype=float)
    mu, sigma = moments(spec)
    dev = np.sort(np.abs(sample_vector(spec, samples, seed) - mu))
    # count of |X - mu| >= delta*sigma, via the sorted deviations
    counts = samples - np.searchsorted(dev, deltas * sigma, side="left")
    tails = counts / samples
    mask = (tails > 0) & (deltas > 0)
    if mask.any():
        y = -np.log(tails[mask])
        x = deltas[mask]
        kappa = float((x @ y) / (x @ x))
    else:
        kappa = math.inf
    se = np.sqrt(np.maximum(tails * (1 - tails), 1.0 / samples) / samples)
    bound = np.exp(-kappa * deltas)
    flagged = [float(d) for d, p, b, e in zip(deltas, tails, bound, se) if p > b + 3 * e]
    return ConcentrationReport(deltas, tails, kappa, samples, flagged)
