"""Network topologies, doubly stochastic mixing matrices, and consensus acceleration.

A mixing matrix W encodes one round of neighbor averaging.  Its quality is
measured by the spectral gap rho = ||W - J||_2^2 (squared spectral norm off
the consensus direction, J = averaging matrix): smaller rho means faster
mixing.  The accelerated matrix M_T turns T momentum-boosted gossip rounds
into a single effective mixing matrix with a much smaller gap.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

TOPOLOGY_KINDS = ("ring", "path", "star", "complete", "random")
WEIGHT_SCHEMES = ("metropolis", "lazy_max_degree")

_RANDOM_GRAPH_RETRIES = 100
_POWER_ITERATION_CAP = 100_000
_DENSE_EIG_MAX_N = 256


class DisconnectedGraphError(ValueError):
    """Random topology stayed disconnected after the bounded retry budget."""


class PowerIterationError(RuntimeError):
    """Power iteration failed to reach tolerance within its iteration cap."""


def _is_connected(adjacency: np.ndarray) -> bool:
    n = adjacency.shape[0]
    if n == 1:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(adjacency[i]):
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


@dataclass(frozen=True)
class Topology:
    """Undirected connected communication graph.

    ``adjacency`` is symmetric boolean with a zero diagonal; self-loops are
    implied (every node always hears itself through the mixing diagonal).
    """

    kind: str
    n: int
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.shape != (self.n, self.n):
            raise ValueError(f"adjacency must be {self.n}x{self.n}, got {adj.shape}")
        if adj.diagonal().any():
            raise ValueError("adjacency diagonal must be zero (self-loops are implied)")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if not _is_connected(adj):
            raise DisconnectedGraphError(f"{self.kind} graph on {self.n} nodes is not connected")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


def build_topology(kind: str, n: int, seed: int | None = None,
                   edge_probability: float | None = None) -> Topology:
    """Construct a connected topology of the given kind on n nodes.

    ``random`` draws Erdos-Renyi graphs (requires ``edge_probability`` in
    (0, 1] and a seed) and retries until connected, failing after a bounded
    number of attempts.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"node count must be a positive integer, got {n!r}")
    if kind not in TOPOLOGY_KINDS:
        raise ValueError(f"unknown topology kind {kind!r}, expected one of {TOPOLOGY_KINDS}")

    adj = np.zeros((n, n), dtype=bool)
    if kind == "ring":
        for i in range(n):
            j = (i + 1) % n
            if i != j:
                adj[i, j] = adj[j, i] = True
    elif kind == "path":
        for i in range(n - 1):
            adj[i, i + 1] = adj[i + 1, i] = True
    elif kind == "star":
        for i in range(1, n):
            adj[0, i] = adj[i, 0] = True
    elif kind == "complete":
        adj[:] = ~np.eye(n, dtype=bool)
    else:  # random
        if edge_probability is None or not (0.0 < edge_probability <= 1.0):
            raise ValueError("random topology requires edge_probability in (0, 1]")
        if seed is None:
            raise ValueError("random topology requires a seed")
        rng = np.random.default_rng(seed)
        for _ in range(_RANDOM_GRAPH_RETRIES):
            upper = rng.random((n, n)) < edge_probability
            adj = np.triu(upper, k=1)
            adj = adj | adj.T
            if _is_connected(adj):
                break
        else:
            raise DisconnectedGraphError(
                f"no connected graph with edge_probability={edge_probability} "
                f"after {_RANDOM_GRAPH_RETRIES} draws")
    return Topology(kind=kind, n=n, adjacency=adj)


@dataclass(frozen=True)
class MixingMatrix:
    """Doubly stochastic weight matrix with its cached spectral gap."""

    W: np.ndarray
    rho: float

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @classmethod
    def from_weights(cls, W: np.ndarray, tol: float = 1e-12,
                     require_contraction: bool = True) -> "MixingMatrix":
        """Validate double stochasticity / symmetry and cache the spectral gap.

        ``require_contraction`` rejects rho >= 1, which for a single-round
        matrix on a connected graph signals a construction bug.  Accelerated
        matrices may overshoot rho 1 transiently at off-design round counts,
        so their factory disables the check.
        """
        W = np.asarray(W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"weight matrix must be square, got shape {W.shape}")
        row_err = np.abs(W.sum(axis=1) - 1.0).max()
        col_err = np.abs(W.sum(axis=0) - 1.0).max()
        if row_err > tol or col_err > tol:
            raise ValueError(
                f"weight matrix is not doubly stochastic: row error {row_err:.3e}, "
                f"column error {col_err:.3e} (tol {tol:.1e})")
        if not np.allclose(W, W.T, atol=tol, rtol=0.0):
            raise ValueError("weight matrix must be symmetric")
        rho = spectral_gap(W)
        if require_contraction and rho >= 1.0:
            raise ValueError(f"spectral gap rho={rho} >= 1; matrix does not contract "
                             "off the consensus direction (disconnected graph?)")
        return cls(W=W, rho=rho)


def _weights_array(W) -> np.ndarray:
    return W.W if isinstance(W, MixingMatrix) else np.asarray(W, dtype=np.float64)


def metropolis_weights(topology: Topology) -> MixingMatrix:
    """Metropolis-Hastings weights: w_ij = 1/(1 + max(deg_i, deg_j)) on edges.

    Symmetric and doubly stochastic on any undirected graph; the diagonal
    absorbs the remaining mass.
    """
    n = topology.n
    deg = topology.degrees
    W = np.zeros((n, n))
    for i in range(n):
        for j in topology.neighbors(i):
            if j > i:
                w = 1.0 / (1.0 + max(deg[i], deg[j]))
                W[i, j] = W[j, i] = w
    for i in range(n):
        W[i, i] = 1.0 - W[i].sum()
    return MixingMatrix.from_weights(W)


def lazy_max_degree_weights(topology: Topology) -> MixingMatrix:
    """Uniform lazy max-degree weights: w_ij = 1/(2 d_max) on edges.

    All eigenvalues are nonnegative (diagonal >= 1/2), which some analyses
    prefer; mixing is generally slower than Metropolis.
    """
    n = topology.n
    deg = topology.degrees
    d_max = int(deg.max()) if n > 1 else 0
    if d_max == 0:
        return MixingMatrix.from_weights(np.eye(n))
    W = topology.adjacency.astype(np.float64) / (2.0 * d_max)
    W[np.arange(n), np.arange(n)] = 1.0 - deg / (2.0 * d_max)
    return MixingMatrix.from_weights(W)


WEIGHT_BUILDERS = {
    "metropolis": metropolis_weights,
    "lazy_max_degree": lazy_max_degree_weights,
}


def averaging_matrix(n: int) -> np.ndarray:
    """The rank-one averaging matrix J with all entries 1/n."""
    return np.full((n, n), 1.0 / n)


def spectral_gap(W, method: str = "auto", tol: float = 1e-12,
                 max_iters: int = _POWER_ITERATION_CAP) -> float:
    """Squared spectral norm of W - J, i.e. rho = ||W - J||_2^2 in [0, 1).

    For symmetric W this is the square of the largest-magnitude eigenvalue
    away from the all-ones direction.  ``method`` is "dense" (symmetric
    eigendecomposition), "power" (power iteration on (W-J)^2 with relative
    tolerance ``tol``), or "auto" (dense for small n).
    """
    W = _weights_array(W)
    n = W.shape[0]
    B = W - averaging_matrix(n)
    if method == "auto":
        method = "dense" if n <= _DENSE_EIG_MAX_N else "power"
    if method == "dense":
        eigs = np.linalg.eigvalsh(B)
        return float(np.abs(eigs).max() ** 2)
    if method != "power":
        raise ValueError(f"unknown method {method!r}")

    # Power iteration on B @ B: its top eigenvalue is ||B||_2^2 directly.
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    lam = 0.0
    for _ in range(max_iters):
        w = B @ (B @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam_new = float(v @ (B @ (B @ v)))
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new
        lam = lam_new
    raise PowerIterationError(
        f"power iteration did not converge to relative tolerance {tol} "
        f"within {max_iters} iterations")


def acceleration_momentum(rho: float) -> float:
    """Gossip momentum eta = (1 - sqrt(1-rho)) / (1 + sqrt(1-rho)) in [0, 1)."""
    if not (0.0 <= rho < 1.0):
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    s = math.sqrt(1.0 - rho)
    return (1.0 - s) / (1.0 + s)


def recommended_T(rho: float) -> int:
    """Gossip rounds per iteration, ceil(ln 2 / sqrt(1 - sqrt(rho))), at least 1.

    With this choice the accelerated matrix satisfies 1 - rho_M >= 1/2, so a
    single accelerated exchange mixes at least as well as a constant-gap
    network regardless of how poorly connected the underlying graph is.
    """
    if not (0.0 <= rho < 1.0):
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    T = math.ceil(math.log(2.0) / math.sqrt(1.0 - math.sqrt(rho)))
    return max(T, 1)


def accelerated_matrix(W: MixingMatrix, T: int) -> MixingMatrix:
    """Effective weight matrix of T momentum-gossip rounds.

    Two-term recursion M_{t+1} = (1+eta) W M_t - eta M_{t-1} with
    M_{-1} = M_0 = I and eta = acceleration_momentum(rho_W).  Row and column
    sums are preserved because W 1 = 1 and the coefficients sum to 1; entries
    may go negative, which is fine for mixing purposes.
    """
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")
    eta = acceleration_momentum(W.rho)
    Wm = W.W
    n = Wm.shape[0]
    M_prev = np.eye(n)
    M = np.eye(n)
    for _ in range(T):
        M_prev, M = M, (1.0 + eta) * (Wm @ M) - eta * M_prev
    # Momentum can push rho_M above 1 transiently at off-design T; that is
    # expected, so only stochasticity and symmetry are enforced here.
    return MixingMatrix.from_weights(M, tol=1e-10, require_contraction=False)
