"""Evolving-set process over a finite Markov chain.

From a subset ``S`` the next state is ``{y : Q(S, y)/pi[y] >= U}`` with
``Q(S, y) = sum_{x in S} pi[x] P[x, y]`` and ``U`` uniform.  Simulation draws
``U`` from ``(0, 1]`` so the empty set and the full set stay absorbing.

Subsets are boolean masks of length ``n``.  Because ``pi(S_next)`` is a
piecewise-constant function of ``U`` with breakpoints at the thresholds
``Q(S, y)/pi[y]``, one-step expectations and variances are computed exactly by
sorting the thresholds.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from .markov import MarkovChain

__all__ = [
    "EvolvingSetState",
    "AbsorptionParams",
    "Trajectory",
    "as_mask",
    "thresholds",
    "boundary_flow",
    "evolve_step",
    "exact_step_expectation",
    "exact_step_variance",
    "simulate_to_absorption",
    "absorption_times",
    "estimate_tstep_probability",
    "estimate_tstep_row",
    "absorption_tail_bound",
    "growth_bound_check",
]


def as_mask(chain: MarkovChain, S) -> np.ndarray:
    """Boolean membership mask from a mask or an iterable of states."""
    if isinstance(S, np.ndarray) and S.dtype == bool:
        if S.shape != (chain.n,):
            raise ValueError(f"mask has shape {S.shape}, expected ({chain.n},)")
        return S
    mask = np.zeros(chain.n, dtype=bool)
    idx = np.fromiter((int(v) for v in S), dtype=np.intp) if isinstance(S, Iterable) else np.array([S])
    if idx.size and (idx.min() < 0 or idx.max() >= chain.n):
        raise IndexError(f"state out of range [0, {chain.n - 1}]")
    mask[idx] = True
    return mask


@dataclass
class EvolvingSetState:
    members: np.ndarray
    pi_mass: float
    t: int = 0

    @classmethod
    def of(cls, chain: MarkovChain, S, t: int = 0) -> "EvolvingSetState":
        mask = as_mask(chain, S)
        return cls(mask, float(chain.pi[mask].sum()), t)

    def check(self, chain: MarkovChain) -> bool:
        return abs(self.pi_mass - float(chain.pi[self.members].sum())) <= 1e-12

    @property
    def absorbed(self) -> bool:
        return not self.members.any() or bool(self.members.all())


def thresholds(chain: MarkovChain, S) -> np.ndarray:
    """``Q(S, y)/pi[y]`` for every state ``y`` (values lie in [0, 1])."""
    mask = as_mask(chain, S)
    weights = np.where(mask, chain.pi, 0.0)
    q = chain.P.T @ weights
    return np.clip(q / chain.pi, 0.0, 1.0)


def boundary_flow(chain: MarkovChain, S) -> float:
    """``Q(S, S^c)``: stationary flow leaving ``S`` in one step."""
    mask = as_mask(chain, S)
    q = chain.P.T @ np.where(mask, chain.pi, 0.0)
    return float(q[~mask].sum())


def evolve_step(chain: MarkovChain, S, u: float) -> np.ndarray:
    """Successor ``{y : Q(S, y)/pi[y] >= u}`` as a mask.

    ``u = 0`` returns every state, as the definition's ``>=`` implies.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"u must lie in [0, 1], got {u}")
    return thresholds(chain, S) >= u


def _segment_integral(theta: np.ndarray, pi: np.ndarray, lo: float, hi: float, power: int) -> float:
    # integral over u in (lo, hi] of pi({y : theta_y >= u}) ** power
    order = np.argsort(theta)
    th = theta[order]
    suffix = np.concatenate([np.cumsum(pi[order][::-1])[::-1], [0.0]])
    cuts = np.unique(np.concatenate([[lo, hi], th[(th > lo) & (th < hi)]]))
    right = cuts[1:]
    mass = suffix[np.searchsorted(th, right, side="left")]
    return float(np.sum(np.diff(cuts) * mass**power))


def exact_step_expectation(chain: MarkovChain, S) -> tuple[float, float, float]:
    """Exact ``E[pi(S')]``, ``E[pi(S') | U <= beta]`` and ``E[pi(S') | U > beta]``.

    Absorbing ``S`` (empty or full) returns ``pi(S)`` three times.  The last
    component is NaN when ``beta = 1``.
    """
    mask = as_mask(chain, S)
    mass = float(chain.pi[mask].sum())
    if not mask.any() or mask.all():
        return mass, mass, mass
    theta = thresholds(chain, mask)
    beta = chain.beta
    total = _segment_integral(theta, chain.pi, 0.0, 1.0, 1)
    low = _segment_integral(theta, chain.pi, 0.0, beta, 1) / beta
    high = (_segment_integral(theta, chain.pi, beta, 1.0, 1) / (1 - beta)) if beta < 1 else math.nan
    return total, low, high


def exact_step_variance(chain: MarkovChain, S) -> float:
    """Exact ``Var(pi(S'))`` for one step from ``S``."""
    mask = as_mask(chain, S)
    if not mask.any() or mask.all():
        return 0.0
    theta = thresholds(chain, mask)
    m1 = _segment_integral(theta, chain.pi, 0.0, 1.0, 1)
    m2 = _segment_integral(theta, chain.pi, 0.0, 1.0, 2)
    return max(m2 - m1 * m1, 0.0)


@dataclass
class Trajectory:
    """One evolving-set run from ``{x}``.

    ``steps`` holds ``(t, |S_t|, pi(S_t))`` for ``t = 0 .. tau`` (or
    ``max_t``); ``tau`` is None when the run was not absorbed.
    """

    steps: list[tuple[int, int, float]] = field(default_factory=list)
    absorbed: bool = False
    tau: int | None = None

    @property
    def final_mass(self) -> float:
        return self.steps[-1][2]


def _draw_u(rng: np.random.Generator, size=None):
    return 1.0 - rng.random(size)


def simulate_to_absorption(chain: MarkovChain, x: int, max_t: int, seed: int) -> Trajectory:
    rng = np.random.default_rng(seed)
    state = EvolvingSetState.of(chain, [x])
    traj = Trajectory(steps=[(0, 1, state.pi_mass)])
    for t in range(1, max_t + 1):
        if state.absorbed:
            break
        mask = thresholds(chain, state.members) >= _draw_u(rng)
        state = EvolvingSetState(mask, float(chain.pi[mask].sum()), t)
        traj.steps.append((t, int(mask.sum()), state.pi_mass))
    if state.absorbed:
        traj.absorbed = True
        traj.tau = state.t
    return traj


def _batch_step(chain: MarkovChain, sets: np.ndarray, u: np.ndarray) -> np.ndarray:
    weights = sets * chain.pi
    q = (chain.P.T @ weights.T).T
    return q / chain.pi >= u[:, None]


def _simulate_batch(chain: MarkovChain, x: int, trials: int, steps: int, rng) -> np.ndarray:
    sets = np.zeros((trials, chain.n), dtype=bool)
    sets[:, x] = True
    for _ in range(steps):
        sets = _batch_step(chain, sets, _draw_u(rng, trials))
    return sets


def absorption_times(
    chain: MarkovChain, x: int, trials: int, max_t: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Absorption times and outcomes for ``trials`` independent runs from ``{x}``.

    Returns ``(tau, full)``: ``tau[i]`` is the hitting time of the empty or
    full set (``-1`` if not absorbed by ``max_t``) and ``full[i]`` says the run
    ended in the full set.
    """
    rng = np.random.default_rng(seed)
    sets = np.zeros((trials, chain.n), dtype=bool)
    sets[:, x] = True
    tau = np.full(trials, -1, dtype=np.int64)
    full = np.zeros(trials, dtype=bool)
    active = np.arange(trials)
    for t in range(1, max_t + 1):
        if active.size == 0:
            break
        # one uniform per trial per step keeps each run's stream fixed
        u = _draw_u(rng, trials)[active]
        new = _batch_step(chain, sets[active], u)
        sets[active] = new
        sizes = new.sum(axis=1)
        done = (sizes == 0) | (sizes == chain.n)
        tau[active[done]] = t
        full[active[done]] = sizes[done] == chain.n
        active = active[~done]
    return tau, full


def estimate_tstep_row(
    chain: MarkovChain, x: int, t: int, trials: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Estimate ``P^t[x, :]`` as ``pi[y]/pi[x] * P(y in S_t)`` with standard errors."""
    if trials < 1000:
        raise ValueError(f"need at least 10^3 trials, got {trials}")
    scale = chain.pi / chain.pi[x]
    if t == 0:
        est = np.zeros(chain.n)
        est[x] = 1.0
        return est, np.zeros(chain.n)
    rng = np.random.default_rng(seed)
    freq = _simulate_batch(chain, x, trials, t, rng).mean(axis=0)
    se = scale * np.sqrt(freq * (1 - freq) / trials)
    return scale * freq, se


def estimate_tstep_probability(
    chain: MarkovChain, x: int, y: int, t: int, trials: int, seed: int
) -> tuple[float, float]:
    est, se = estimate_tstep_row(chain, x, t, trials, seed)
    return float(est[y]), float(se[y])


@dataclass(frozen=True)
class AbsorptionParams:
    """Inputs to the absorption-time tail bound for runs started at ``{x}``.

    ``step_std = sqrt(beta) * pi_min * alpha`` bounds the one-step standard
    deviation of ``pi(S_t)`` from below; ``growth_factor`` bounds the ratio
    ``pi(S_{t+1}) / pi(S_t)`` from above.
    """

    M0: float
    step_std: float
    growth_factor: float

    @classmethod
    def from_chain(cls, chain: MarkovChain, x: int) -> "AbsorptionParams":
        a, b = chain.alpha, chain.beta
        return cls(
            M0=float(chain.pi[x]),
            step_std=math.sqrt(b) * chain.pi_min * a,
            growth_factor=((1 - b) / a + 1) * chain.pi_max / chain.pi_min,
        )


def absorption_tail_bound(params: AbsorptionParams, t: float) -> float:
    """``min(1, 2 M0/step_std * sqrt(growth_factor / t))`` bounding ``P[tau > t]``."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    return min(1.0, 2 * params.M0 / params.step_std * math.sqrt(params.growth_factor / t))


def growth_bound_check(chain: MarkovChain, S) -> list[str]:
    """Check the one-step growth bounds against the largest successor of ``S``.

    The largest successor (``U`` tending to 0) is every state with a positive
    threshold.  Returns violation messages; empty means both bounds hold.
    """
    mask = as_mask(chain, S)
    if not mask.any() or mask.all():
        raise ValueError("S must be a proper non-empty subset")
    succ = thresholds(chain, mask) > 0
    factor = (1 - chain.beta) / chain.alpha + 1
    problems = []
    mass, succ_mass = chain.pi[mask].sum(), chain.pi[succ].sum()
    limit = factor * chain.pi_max / chain.pi_min * mass
    if succ_mass > limit * (1 + 1e-12):
        problems.append(f"pi(successor)={succ_mass:.6g} exceeds bound {limit:.6g}")
    if succ.sum() > factor * mask.sum() * (1 + 1e-12):
        problems.append(f"|successor|={succ.sum()} exceeds bound {factor * mask.sum():.6g}")
    return problems
