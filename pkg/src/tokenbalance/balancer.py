"""Continuous and discrete balancing processes on a matching schedule.

Discrete rounding coins are counter based.  The coin for edge ``e`` (its
position in the matching, which is sorted by smaller endpoint) at global
matching step ``k`` is the top bit of
``mix64(mix64(seed) + (k * 2**32 + e) * GOLDEN)``.  A coin of 1 gives the
excess token to the smaller endpoint.  Runs are therefore bit-reproducible
whatever order edges or repetitions are processed in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .markov import _average_pairs
from .seeding import GOLDEN, MASK64, mix64, mix64_array
from .topology import MatchingSchedule, TopologyKind, TopologySpec, node_distance

__all__ = [
    "OverflowGuardError",
    "WorstCaseSpec",
    "DiscreteProcess",
    "run_continuous",
    "run_discrete",
    "run_discrete_matchings",
    "discrepancy",
    "worst_case_input",
    "discrete_continuous_deviation",
]

OVERFLOW_LIMIT = 1 << 62


class OverflowGuardError(ValueError):
    """Loads are negative or large enough to risk int64 overflow."""


def discrepancy(x) -> float:
    """Maximum minus minimum load; for 2-D input, one value per row."""
    x = np.asarray(x)
    if x.size == 0:
        raise ValueError("discrepancy of an empty load vector")
    d = x.max(axis=-1) - x.min(axis=-1)
    return d.item() if d.ndim == 0 else d


def _check_discrete(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.integer):
        raise TypeError(f"discrete loads must be integers, got dtype {x.dtype}")
    x = x.astype(np.int64)
    if x.size and x.min() < 0:
        raise OverflowGuardError("discrete loads must be non-negative")
    if x.size and x.shape[-1] * int(x.max()) >= OVERFLOW_LIMIT:
        raise OverflowGuardError(
            f"n * max load = {x.shape[-1] * int(x.max())} exceeds the 2^62 overflow guard"
        )
    return x


def _check_length(s: MatchingSchedule, x: np.ndarray) -> None:
    if x.shape[-1] != s.n:
        raise ValueError(f"load vector length {x.shape[-1]} does not match schedule n={s.n}")


def run_continuous(s: MatchingSchedule, xi0, t: int) -> np.ndarray:
    """Perfect averaging for ``t`` rounds (``t*d`` matchings, forward order)."""
    xi = np.array(xi0, dtype=float)
    _check_length(s, xi)
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    for _ in range(t):
        for a, b in s.edge_arrays:
            _average_pairs(xi, a, b, xi)
    return xi


class DiscreteProcess:
    """Discrete balancing state for one or more independent runs.

    ``loads`` has shape ``(R, n)``; row ``i`` is driven by ``seeds[i]``.
    ``step`` counts matchings applied so far, so ``step // d`` is the number
    of completed rounds.  Advancing in pieces gives exactly the same loads as
    advancing in one go.
    """

    def __init__(self, s: MatchingSchedule, loads, seeds) -> None:
        x = _check_discrete(np.atleast_2d(loads))
        _check_length(s, x)
        seeds = np.atleast_1d(np.asarray(seeds, dtype=object))
        if len(seeds) != x.shape[0]:
            raise ValueError(f"{x.shape[0]} load rows but {len(seeds)} seeds")
        self.schedule = s
        self.loads = np.ascontiguousarray(x)
        self.step = 0
        self._keys = np.array([mix64(int(z)) for z in seeds], dtype=np.uint64)[:, None]
        self._edge_terms = [
            (np.arange(a.size, dtype=np.uint64) * np.uint64(GOLDEN)) for a, _ in s.edge_arrays
        ]

    @property
    def rounds(self) -> int:
        return self.step // self.schedule.d

    def _coins(self, step: int, m: int) -> np.ndarray:
        step_term = np.uint64(((step << 32) * GOLDEN) & MASK64)
        z = mix64_array(self._keys + step_term + self._edge_terms[m])
        return (z >> np.uint64(63)).astype(np.int64)

    def advance_matchings(self, count: int) -> np.ndarray:
        if count < 0:
            raise ValueError(f"count must be non-negative, got {count}")
        d = self.schedule.d
        pairs = self.schedule.edge_arrays
        x = self.loads
        for step in range(self.step, self.step + count):
            m = step % d
            a, b = pairs[m]
            total = x[:, a] + x[:, b]
            half = total >> 1
            odd = total & 1
            extra = odd * self._coins(step, m)
            x[:, a] = half + extra
            x[:, b] = half + odd - extra
        self.step += count
        return x

    def advance_rounds(self, count: int) -> np.ndarray:
        """Apply ``count`` rounds; the process must sit on a round boundary."""
        if self.step % self.schedule.d:
            raise ValueError("process is mid-round; use advance_matchings")
        return self.advance_matchings(count * self.schedule.d)


def run_discrete_matchings(s: MatchingSchedule, x0, k: int, seed: int) -> np.ndarray:
    """Discrete process after ``k`` individual matchings."""
    proc = DiscreteProcess(s, np.asarray(x0)[None, :], [seed])
    return proc.advance_matchings(k)[0].copy()


def run_discrete(s: MatchingSchedule, x0, t: int, seed: int) -> np.ndarray:
    """Discrete process with random orientation after ``t`` rounds."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return run_discrete_matchings(s, x0, t * s.d, seed)


@dataclass(frozen=True)
class WorstCaseSpec:
    topology: TopologySpec
    K: int

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")


def worst_case_input(spec: WorstCaseSpec) -> np.ndarray:
    """Half the nodes carry ``2K`` tokens, the rest none.

    Cycle: nodes ``0 .. n/2-1``.  Torus: the ``n/2`` nodes closest to node 0
    (ties by index).  Hypercube: nodes whose highest bit is set, so only the
    last matching of a round moves load between the halves.
    """
    topo = spec.topology
    n = topo.n
    x = np.zeros(n, dtype=np.int64)
    if topo.kind is TopologyKind.CYCLE:
        x[: n // 2] = 2 * spec.K
    elif topo.kind is TopologyKind.TORUS:
        dist = np.array([node_distance(topo, 0, v) for v in range(n)])
        x[np.argsort(dist, kind="stable")[: n // 2]] = 2 * spec.K
    elif topo.kind is TopologyKind.HYPERCUBE:
        x[n // 2 :] = 2 * spec.K
    else:
        raise ValueError(f"no worst-case input defined for {topo.kind.value}")
    return _check_discrete(x)


def discrete_continuous_deviation(s: MatchingSchedule, x0, t: int, seed: int) -> float:
    """``max_w |x_w - xi_w|`` after ``t`` rounds of both processes from ``x0``."""
    x0 = _check_discrete(np.asarray(x0))
    x = run_discrete(s, x0, t, seed)
    xi = run_continuous(s, x0.astype(float), t)
    return float(np.max(np.abs(x - xi)))
