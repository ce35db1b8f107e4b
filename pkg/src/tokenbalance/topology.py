"""Matching schedules for cycles, tori, hypercubes and random-matching expanders.

A schedule is a period of ``d`` matchings applied cyclically; one round is
one pass over all ``d`` matchings.  Torus nodes are indexed row-major over
``[0, side-1]^r`` where ``side = n**(1/r)``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "TopologyKind",
    "TopologySpec",
    "MatchingSchedule",
    "ScheduleError",
    "build_schedule",
    "validate_schedule",
    "node_distance",
    "load_schedule",
    "save_schedule",
]

Pair = tuple[int, int]


class ScheduleError(ValueError):
    """A topology or schedule violates its structural constraints."""


class TopologyKind(str, Enum):
    CYCLE = "cycle"
    TORUS = "torus"
    HYPERCUBE = "hypercube"
    EXPANDER = "expander"


def _integer_root(n: int, r: int) -> int | None:
    side = round(n ** (1.0 / r))
    for cand in (side - 1, side, side + 1):
        if cand > 0 and cand**r == n:
            return cand
    return None


@dataclass(frozen=True)
class TopologySpec:
    """Parameters of one of the four supported graph families.

    Raises ScheduleError on construction when the family's constraints fail:
    cycles need even ``n >= 4``; tori need ``n**(1/r)`` to be an even integer
    of at least 4; hypercubes need a power of two; expanders need even ``n``
    and ``d_exp >= 3``.
    """

    kind: TopologyKind
    n: int
    r: int = 1
    d_exp: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TopologyKind(self.kind))
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ScheduleError(f"n must be a positive integer, got {n!r}")
        if self.kind is TopologyKind.CYCLE:
            if n < 4 or n % 2:
                raise ScheduleError(f"cycle requires even n >= 4, got n={n}")
        elif self.kind is TopologyKind.TORUS:
            if self.r < 1:
                raise ScheduleError(f"torus dimension r must be >= 1, got r={self.r}")
            side = _integer_root(n, self.r)
            if side is None:
                raise ScheduleError(f"torus requires n^(1/r) integer, got n={n}, r={self.r}")
            if side < 4 or side % 2:
                raise ScheduleError(
                    f"torus side length n^(1/r)={side} must be even and >= 4"
                )
        elif self.kind is TopologyKind.HYPERCUBE:
            if n < 2 or n & (n - 1):
                raise ScheduleError(f"hypercube requires n a power of two >= 2, got n={n}")
        elif self.kind is TopologyKind.EXPANDER:
            if n < 2 or n % 2:
                raise ScheduleError(f"expander requires even n >= 2, got n={n}")
            if self.d_exp < 3:
                raise ScheduleError(f"expander requires d_exp >= 3, got d_exp={self.d_exp}")

    @property
    def side(self) -> int:
        """Torus side length (``n`` for a cycle)."""
        if self.kind is TopologyKind.TORUS:
            return _integer_root(self.n, self.r)  # type: ignore[return-value]
        return self.n

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "n": int(self.n), "r": int(self.r),
                "d_exp": int(self.d_exp), "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, data: dict) -> "TopologySpec":
        return cls(kind=TopologyKind(data["kind"]), n=int(data["n"]),
                   r=int(data.get("r", 1)), d_exp=int(data.get("d_exp", 0)),
                   seed=int(data.get("seed", 0)))


@dataclass(frozen=True)
class MatchingSchedule:
    """An ordered period of matchings over nodes ``0..n-1``.

    Each matching is stored as a tuple of pairs ``(a, b)`` with ``a < b``,
    sorted by ``a``.  ``edge_arrays`` caches the same pairs as index arrays.
    """

    n: int
    matchings: tuple[tuple[Pair, ...], ...]
    topology: TopologySpec | None = None
    _arrays: tuple[tuple[np.ndarray, np.ndarray], ...] = field(
        default=(), repr=False, compare=False
    )

    def __post_init__(self) -> None:
        norm = tuple(
            tuple(sorted((min(a, b), max(a, b)) for a, b in m)) for m in self.matchings
        )
        object.__setattr__(self, "matchings", norm)
        arrays = []
        for m in norm:
            a = np.fromiter((p[0] for p in m), dtype=np.intp, count=len(m))
            b = np.fromiter((p[1] for p in m), dtype=np.intp, count=len(m))
            a.setflags(write=False)
            b.setflags(write=False)
            arrays.append((a, b))
        object.__setattr__(self, "_arrays", tuple(arrays))

    @property
    def d(self) -> int:
        return len(self.matchings)

    @property
    def edge_arrays(self) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
        """Per matching, the arrays of smaller and larger endpoints."""
        return self._arrays

    def to_dict(self) -> dict:
        out = {
            "n": int(self.n),
            "d": self.d,
            "matchings": [[[a, b] for a, b in m] for m in self.matchings],
        }
        if self.topology is not None:
            out["topology"] = self.topology.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MatchingSchedule":
        topo = data.get("topology")
        sched = cls(
            n=int(data["n"]),
            matchings=tuple(tuple((int(a), int(b)) for a, b in m) for m in data["matchings"]),
            topology=TopologySpec.from_dict(topo) if topo else None,
        )
        if "d" in data and int(data["d"]) != sched.d:
            raise ScheduleError(f"declared d={data['d']} but {sched.d} matchings given")
        return sched


def _cycle_matchings(n: int) -> list[list[Pair]]:
    odd = [(j, (j + 1) % n) for j in range(1, n, 2)]
    even = [(j, (j + 1) % n) for j in range(0, n, 2)]
    return [odd, even]


def _torus_matchings(side: int, r: int) -> list[list[Pair]]:
    # Axis 0 moves along a row (stride 1); axis r-1 has the largest stride.
    n = side**r
    coords = np.indices((side,) * r).reshape(r, -1).T  # row-major, last coord fastest
    out: list[list[Pair]] = []
    for axis in range(r):
        stride = side**axis
        c = coords[:, r - 1 - axis]
        for parity in (1, 0):
            sel = np.nonzero(c % 2 == parity)[0]
            partner = np.where(c[sel] == side - 1, sel - (side - 1) * stride, sel + stride)
            out.append([(int(a), int(b)) for a, b in zip(sel, partner)])
    assert all(len(m) == n // 2 for m in out)
    return out


def _hypercube_matchings(n: int) -> list[list[Pair]]:
    dim = n.bit_length() - 1
    return [[(u, u | (1 << i)) for u in range(n) if not u & (1 << i)] for i in range(dim)]


def _expander_matchings(n: int, d: int, seed: int) -> list[list[Pair]]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(d):
        perm = rng.permutation(n)
        out.append([(int(perm[2 * k]), int(perm[2 * k + 1])) for k in range(n // 2)])
    return out


def build_schedule(spec: TopologySpec) -> MatchingSchedule:
    """Construct the canonical matching schedule for ``spec``.

    Cycle: odd-edge matching then even-edge matching.  Torus: the same two
    matchings along each axis in turn, ``2r`` in total.  Hypercube: dimension
    exchange, matching ``i`` flips bit ``i``.  Expander: ``d_exp`` independent
    uniform perfect matchings drawn from ``spec.seed``.
    """
    kind = spec.kind
    if kind is TopologyKind.CYCLE:
        ms = _cycle_matchings(spec.n)
    elif kind is TopologyKind.TORUS:
        ms = _torus_matchings(spec.side, spec.r)
    elif kind is TopologyKind.HYPERCUBE:
        ms = _hypercube_matchings(spec.n)
    else:
        ms = _expander_matchings(spec.n, spec.d_exp, spec.seed)
    return MatchingSchedule(n=spec.n, matchings=tuple(tuple(m) for m in ms), topology=spec)


def validate_schedule(s: MatchingSchedule) -> list[str]:
    """Return every structural violation of ``s``; an empty list means valid."""
    problems = []
    if s.d < 1:
        problems.append("schedule has no matchings")
    for i, m in enumerate(s.matchings):
        seen: dict[int, int] = {}
        for a, b in m:
            for node in (a, b):
                if not 0 <= node < s.n:
                    problems.append(f"matching {i}: node {node} out of range [0, {s.n - 1}]")
            if a == b:
                problems.append(f"matching {i}: self-loop at node {a}")
                continue
            for node in (a, b):
                seen[node] = seen.get(node, 0) + 1
        for node, count in sorted(seen.items()):
            if count > 1:
                problems.append(f"matching {i}: node {node} matched {count} times")
    return problems


def _check_node(spec: TopologySpec, u: int) -> None:
    if not 0 <= u < spec.n:
        raise IndexError(f"node {u} out of range [0, {spec.n - 1}]")


def _cycle_dist(a: int, b: int, n: int) -> int:
    x, y = min(a, b), max(a, b)
    return min(y - x, x + n - y)


def node_distance(spec: TopologySpec, u: int, v: int) -> int:
    """Graph distance between nodes ``u`` and ``v``.

    Cycle: ``min(|u-v|, n-|u-v|)``; torus: sum of per-axis cycle distances;
    hypercube: Hamming distance; expander: BFS over the union of matchings.
    """
    _check_node(spec, u)
    _check_node(spec, v)
    if spec.kind is TopologyKind.CYCLE:
        return _cycle_dist(u, v, spec.n)
    if spec.kind is TopologyKind.TORUS:
        side, total = spec.side, 0
        for _ in range(spec.r):
            total += _cycle_dist(u % side, v % side, side)
            u //= side
            v //= side
        return total
    if spec.kind is TopologyKind.HYPERCUBE:
        return bin(u ^ v).count("1")
    return _bfs_distance(build_schedule(spec), u, v)


def _bfs_distance(s: MatchingSchedule, u: int, v: int) -> int:
    adj: list[list[int]] = [[] for _ in range(s.n)]
    for m in s.matchings:
        for a, b in m:
            adj[a].append(b)
            adj[b].append(a)
    dist = {u: 0}
    queue = deque([u])
    while queue:
        w = queue.popleft()
        if w == v:
            return dist[w]
        for z in adj[w]:
            if z not in dist:
                dist[z] = dist[w] + 1
                queue.append(z)
    raise ValueError(f"nodes {u} and {v} are disconnected")


def save_schedule(s: MatchingSchedule, path: str | Path) -> None:
    Path(path).write_text(json.dumps(s.to_dict()))


def load_schedule(path: str | Path) -> MatchingSchedule:
    """Read a schedule JSON document ``{n, d, matchings, [topology]}``.

    Raises ScheduleError if the document describes an invalid schedule.
    """
    sched = MatchingSchedule.from_dict(json.loads(Path(path).read_text()))
    problems = validate_schedule(sched)
    if problems:
        raise ScheduleError("; ".join(problems))
    return sched
