"""Round-matrix linear algebra for matching schedules.

The round matrix is ``M = M(1) M(2) ... M(d)``.  Loads evolve as row vectors
(``xi M``), so a balancing run applies the matchings in forward order.  Columns
``M^t e_u`` are obtained by applying the matchings in *reverse* order to the
indicator ``e_u``; every matching matrix is symmetric, so both directions use
the same pairwise averaging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .topology import MatchingSchedule

__all__ = [
    "ConvergenceError",
    "MarkovChain",
    "apply_matching",
    "tstep_column",
    "tstep_matrix",
    "l2_to_uniform",
    "pair_column_distance",
    "second_eigenvalue",
    "round_matrix",
    "as_markov_chain",
    "lazy_cycle_chain",
]

MAX_EIGEN_N = 1 << 16


class ConvergenceError(RuntimeError):
    """Power iteration hit its cap; carries the last iterate and residual."""

    def __init__(self, message: str, estimate: float, vector: np.ndarray, residual: float):
        super().__init__(message)
        self.estimate = estimate
        self.vector = vector
        self.residual = residual


def apply_matching(v: np.ndarray, pairs: tuple[np.ndarray, np.ndarray], out: np.ndarray | None = None) -> np.ndarray:
    """Replace both endpoints of every matched pair by their mean.

    ``v`` may be 1-D (one vector) or 2-D, in which case the last axis indexes
    nodes and each row is averaged independently.  ``pairs`` holds the arrays
    of first and second endpoints (see ``MatchingSchedule.edge_arrays``).
    Pass ``out=v`` to update in place.
    """
    a, b = pairs
    v = np.asarray(v, dtype=float)
    if a.size and max(int(a.max()), int(b.max())) >= v.shape[-1]:
        raise ValueError(f"matching references node beyond vector length {v.shape[-1]}")
    return _average_pairs(v, a, b, v.copy() if out is None else out)


def _average_pairs(v: np.ndarray, a: np.ndarray, b: np.ndarray, out: np.ndarray) -> np.ndarray:
    mean = 0.5 * (v[..., a] + v[..., b])
    out[..., a] = mean
    out[..., b] = mean
    return out


def _apply_round_to_columns(s: MatchingSchedule, cols: np.ndarray, t: int) -> np.ndarray:
    # cols: (k, n) where each row is a column vector of the matrix being multiplied.
    reversed_pairs = s.edge_arrays[::-1]
    for _ in range(t):
        for a, b in reversed_pairs:
            _average_pairs(cols, a, b, cols)
    return cols


def tstep_column(s: MatchingSchedule, u: int, t: int) -> np.ndarray:
    """Column ``u`` of ``M^t`` (``M^t e_u``), by vector iteration in O(t d n)."""
    if not 0 <= u < s.n:
        raise IndexError(f"node {u} out of range [0, {s.n - 1}]")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    col = np.zeros((1, s.n))
    col[0, u] = 1.0
    return _apply_round_to_columns(s, col, t)[0]


def tstep_matrix(s: MatchingSchedule, t: int, columns: np.ndarray | None = None) -> np.ndarray:
    """Dense ``M^t`` restricted to ``columns`` (all by default).

    Returned with shape ``(n, len(columns))`` so ``result[:, j]`` is
    ``M^t e_{columns[j]}``.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    cols = np.arange(s.n) if columns is None else np.asarray(columns)
    work = np.zeros((len(cols), s.n))
    work[np.arange(len(cols)), cols] = 1.0
    return _apply_round_to_columns(s, work, t).T


def step_columns(s: MatchingSchedule, cols: np.ndarray, rounds: int = 1) -> np.ndarray:
    """Advance a ``(n, k)`` block of columns of ``M^t`` to ``M^(t+rounds)`` in place."""
    work = np.ascontiguousarray(cols.T)
    _apply_round_to_columns(s, work, rounds)
    cols[...] = work.T
    return cols


def l2_to_uniform(c: np.ndarray) -> float:
    """Euclidean distance ``||c - 1/n||_2`` (not squared)."""
    c = np.asarray(c, dtype=float)
    return float(np.linalg.norm(c - 1.0 / c.size))


def pair_column_distance(s: MatchingSchedule, u: int, v: int, t: int) -> float:
    """``||M^t e_u - M^t e_v||_2``."""
    for node in (u, v):
        if not 0 <= node < s.n:
            raise IndexError(f"node {node} out of range [0, {s.n - 1}]")
    if u == v:
        return 0.0
    cols = tstep_matrix(s, t, np.array([u, v]))
    return float(np.linalg.norm(cols[:, 0] - cols[:, 1]))


def second_eigenvalue(
    s: MatchingSchedule,
    rtol: float = 1e-10,
    max_iter: int = 200_000,
    seed: int = 0,
) -> float:
    """Second largest eigenvalue of ``M M^T``.

    Power iteration on ``M M^T`` with the uniform direction projected out
    (it is the top eigenvector, eigenvalue 1).  Stops once the Rayleigh
    quotient changes by less than ``rtol`` relative between iterations and
    the relative residual is below ``sqrt(rtol)``.
    """
    n = s.n
    if n > MAX_EIGEN_N:
        raise ValueError(f"n={n} exceeds the power-iteration guard {MAX_EIGEN_N}")
    if n == 1:
        return 0.0
    fwd = s.edge_arrays
    rev = fwd[::-1]

    def mmt(x: np.ndarray) -> np.ndarray:
        # M^T x: row-vector convention, forward order; then M y: reverse order.
        y = x.copy()
        for a, b in fwd:
            _average_pairs(y, a, b, y)
        for a, b in rev:
            _average_pairs(y, a, b, y)
        return y

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x -= x.mean()
    x /= np.linalg.norm(x)
    rho = 0.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        y = mmt(x)
        y -= y.mean()
        new_rho = float(x @ y)
        norm = np.linalg.norm(y)
        if norm < 1e-300:
            return 0.0
        residual = float(np.linalg.norm(y - new_rho * x))
        converged = abs(new_rho - rho) <= rtol * max(abs(new_rho), 1e-300)
        if converged and residual <= np.sqrt(rtol) * max(new_rho, 1e-300):
            return min(max(new_rho, 0.0), 1.0)
        if new_rho < 1e-15 and it > 2:
            return 0.0
        rho = new_rho
        x = y / norm
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations", rho, x, residual
    )


def _matching_matrix(n: int, pairs: tuple[np.ndarray, np.ndarray]) -> sp.csr_array:
    a, b = pairs
    diag = np.ones(n)
    diag[a] = 0.5
    diag[b] = 0.5
    rows = np.concatenate([np.arange(n), a, b])
    cols = np.concatenate([np.arange(n), b, a])
    vals = np.concatenate([diag, np.full(a.size, 0.5), np.full(a.size, 0.5)])
    return sp.csr_array((vals, (rows, cols)), shape=(n, n))


def round_matrix(s: MatchingSchedule) -> sp.csr_array:
    """Sparse round matrix ``M(1) M(2) ... M(d)``."""
    m = sp.identity(s.n, format="csr")
    for pairs in s.edge_arrays:
        m = m @ _matching_matrix(s.n, pairs)
    m = sp.csr_array(m)
    m.eliminate_zeros()
    return m


@dataclass(frozen=True)
class MarkovChain:
    """Finite chain with sparse transition matrix ``P`` and stationary ``pi``.

    ``alpha`` is the smallest positive off-diagonal entry and ``beta`` the
    smallest diagonal entry of ``P``.
    """

    P: sp.csr_array
    pi: np.ndarray
    alpha: float
    beta: float

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def pi_min(self) -> float:
        return float(self.pi.min())

    @property
    def pi_max(self) -> float:
        return float(self.pi.max())

    @classmethod
    def from_matrix(cls, P, pi: np.ndarray | None = None) -> "MarkovChain":
        """Build a chain from a (dense or sparse) row-stochastic matrix.

        ``pi`` defaults to the solution of ``pi P = pi``.  Raises ValueError if
        rows do not sum to one within 1e-12.
        """
        P = sp.csr_array(P, dtype=float)
        P.eliminate_zeros()
        n = P.shape[0]
        rows = np.asarray(P.sum(axis=1)).ravel()
        if np.any(np.abs(rows - 1.0) > 1e-12):
            raise ValueError("transition rows must sum to 1")
        if pi is None:
            pi = _stationary(P)
        pi = np.asarray(pi, dtype=float)
        if pi.shape != (n,) or np.any(pi <= 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("stationary vector must be positive and sum to 1")
        diag = P.diagonal()
        coo = P.tocoo()
        off = coo.data[(coo.row != coo.col) & (coo.data > 0)]
        alpha = float(off.min()) if off.size else 0.0
        return cls(P=P, pi=pi, alpha=alpha, beta=float(diag.min()))


def _stationary(P: sp.csr_array) -> np.ndarray:
    n = P.shape[0]
    a = (P.T - sp.identity(n, format="csr")).toarray()
    a[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(a, rhs)
    return pi / pi.sum()


def as_markov_chain(s: MatchingSchedule) -> MarkovChain:
    """The round matrix as a Markov chain with uniform stationary distribution."""
    return MarkovChain.from_matrix(round_matrix(s), pi=np.full(s.n, 1.0 / s.n))


def lazy_cycle_chain(n: int) -> MarkovChain:
    """Lazy simple random walk on the n-cycle: stay 1/2, each neighbour 1/4."""
    if n < 3:
        raise ValueError(f"lazy cycle requires n >= 3, got {n}")
    idx = np.arange(n)
    rows = np.concatenate([idx, idx, idx])
    cols = np.concatenate([idx, (idx + 1) % n, (idx - 1) % n])
    vals = np.concatenate([np.full(n, 0.5), np.full(n, 0.25), np.full(n, 0.25)])
    P = sp.csr_array((vals, (rows, cols)), shape=(n, n))
    return MarkovChain.from_matrix(P, pi=np.full(n, 1.0 / n))
