"""Iteration state machines for the four decentralized saddle-point methods.

All four share one state layout over stacked n x (p+d) arrays:

  dgda   z+ = W (z - gamma G(z))                        no memory, no tracking
  dogda  z+ = W (z - gamma (2 G(z) - G(z_prev)))        optimistic, no tracking
  dogt   z+ = W (z - gamma (r + G(z) - G(z_prev)))      optimistic + tracking
         r+ = W (r + G(z+) - G(z))
  adogt  dogt with each W-exchange replaced by T rounds of momentum gossip,
         equivalent to dogt under the accelerated matrix M_T

G is the sign-flipped stacked gradient field, so primal descent and dual
ascent are the same subtraction.  Gradients are evaluated at the mixed
iterates (the states the averaged dynamics and the energy-decay guarantees
are stated for); the tracker r is seeded with the initial gradients and
therefore keeps the exact column-average identity mean(r) = mean(G).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import metrics
from .graph import MixingMatrix, _weights_array, acceleration_momentum, accelerated_matrix
from .metrics import MetricRecord
from .problem import SaddleProblem, stacked_array, stacked_gradient_field

ALGORITHMS = ("dgda", "dogda", "dogt", "adogt")
TRACKING_ALGORITHMS = ("dogt", "adogt")

_MAX_RECORD_STATES_ITERS = 5000


class DivergenceError(RuntimeError):
    """An iterate became NaN/Inf; carries the iteration where it happened."""

    def __init__(self, iteration: int):
        super().__init__(f"non-finite iterate at iteration {iteration} "
                         "(stepsize too large for this problem/graph?)")
        self.iteration = iteration


@dataclass(frozen=True)
class AlgoState:
    """Value-semantic snapshot of one algorithm at one iteration.

    Arrays are n x (p+d): current and previous iterates, current and
    previous stacked gradients, and the tracker r = [p, -q].  Baselines
    keep the tracker allocated but zero so every trace has one schema.
    """

    z: np.ndarray
    z_prev: np.ndarray
    grad: np.ndarray
    grad_prev: np.ndarray
    tracker: np.ndarray
    iteration: int
    comm_rounds: int

    def __post_init__(self):
        for name in ("z", "z_prev", "grad", "grad_prev", "tracker"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class Trace:
    """Recorded run: metric rows, optional full states, and run constants."""

    kind: str
    gamma: float
    mu: float
    smoothness: float
    rho: float              # spectral gap of the effective mixing matrix
    n: int
    problem: SaddleProblem
    mixing: MixingMatrix
    z_star: np.ndarray | None
    records: tuple[MetricRecord, ...]
    states: tuple[AlgoState, ...] | None
    reason: str             # "tol_reached" or "max_iters"
    iterations: int
    comm_rounds: int
    T: int | None = None
    eta: float | None = None


def init_state(problem: SaddleProblem, z0) -> AlgoState:
    """Start state: both gradient slots and the tracker hold G(z0)."""
    z = stacked_array(problem, z0).copy()
    g = stacked_gradient_field(problem, z)
    return AlgoState(z=z, z_prev=z.copy(), grad=g, grad_prev=g.copy(),
                     tracker=g.copy(), iteration=0, comm_rounds=0)


def _check_finite(z: np.ndarray, iteration: int) -> None:
    if not np.isfinite(z).all():
        raise DivergenceError(iteration)


def dgda_step(state: AlgoState, W, gamma: float, problem: SaddleProblem) -> AlgoState:
    """Plain distributed gradient descent ascent (adapt then combine)."""
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    Wm = _weights_array(W)
    with np.errstate(over="ignore", invalid="ignore"):
        z_new = Wm @ (state.z - gamma * state.grad)
    _check_finite(z_new, state.iteration + 1)
    g_new = stacked_gradient_field(problem, z_new)
    return AlgoState(z=z_new, z_prev=state.z, grad=g_new, grad_prev=state.grad,
                     tracker=np.zeros_like(state.tracker),
                     iteration=state.iteration + 1,
                     comm_rounds=state.comm_rounds + 1)


def dogda_step(state: AlgoState, W, gamma: float, problem: SaddleProblem) -> AlgoState:
    """Distributed optimistic gradient descent ascent, no tracking."""
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    Wm = _weights_array(W)
    with np.errstate(over="ignore", invalid="ignore"):
        z_new = Wm @ (state.z - gamma * (2.0 * state.grad - state.grad_prev))
    _check_finite(z_new, state.iteration + 1)
    g_new = stacked_gradient_field(problem, z_new)
    return AlgoState(z=z_new, z_prev=state.z, grad=g_new, grad_prev=state.grad,
                     tracker=np.zeros_like(state.tracker),
                     iteration=state.iteration + 1,
                     comm_rounds=state.comm_rounds + 1)


def dogt_step(state: AlgoState, W, gamma: float, problem: SaddleProblem) -> AlgoState:
    """One optimistic gradient-tracking update.

    The tracker replaces the raw local gradient in the z update, then
    absorbs the new-minus-old gradient difference; mixing both through the
    doubly stochastic W preserves mean(r) = mean(G) exactly.
    """
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    Wm = _weights_array(W)
    with np.errstate(over="ignore", invalid="ignore"):
        z_new = Wm @ (state.z - gamma * (state.tracker + state.grad - state.grad_prev))
    _check_finite(z_new, state.iteration + 1)
    g_new = stacked_gradient_field(problem, z_new)
    with np.errstate(over="ignore", invalid="ignore"):
        r_new = Wm @ (state.tracker + g_new - state.grad)
    _check_finite(r_new, state.iteration + 1)
    return AlgoState(z=z_new, z_prev=state.z, grad=g_new, grad_prev=state.grad,
                     tracker=r_new,
                     iteration=state.iteration + 1,
                     comm_rounds=state.comm_rounds + 1)


def _accelerated_mix(Wm: np.ndarray, eta: float, T: int, message: np.ndarray) -> np.ndarray:
    """T rounds of momentum gossip on a message matrix; equals M_T @ message."""
    prev = message
    curr = message
    for _ in range(T):
        prev, curr = curr, (1.0 + eta) * (Wm @ curr) - eta * prev
    return curr


def adogt_step(state: AlgoState, W, eta: float, T: int, gamma: float,
               problem: SaddleProblem) -> AlgoState:
    """dogt_step with every exchange run through T momentum-gossip rounds.

    Equivalent to dogt_step under accelerated_matrix(W, T); counts T
    communication rounds per iteration.
    """
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")
    Wm = _weights_array(W)
    with np.errstate(over="ignore", invalid="ignore"):
        z_new = _accelerated_mix(
            Wm, eta, T,
            state.z - gamma * (state.tracker + state.grad - state.grad_prev))
    _check_finite(z_new, state.iteration + 1)
    g_new = stacked_gradient_field(problem, z_new)
    with np.errstate(over="ignore", invalid="ignore"):
        r_new = _accelerated_mix(Wm, eta, T, state.tracker + g_new - state.grad)
    _check_finite(r_new, state.iteration + 1)
    return AlgoState(z=z_new, z_prev=state.z, grad=g_new, grad_prev=state.grad,
                     tracker=r_new,
                     iteration=state.iteration + 1,
                     comm_rounds=state.comm_rounds + T)


def run(kind: str, problem: SaddleProblem, W: MixingMatrix, gamma: float, z0,
        max_iters: int, tol: float, record_every: int = 1,
        T: int | None = None, record_states: bool = False) -> Trace:
    """Drive one algorithm until the residual drops to tol or iterations run out.

    Metrics are recorded at iteration 0, every ``record_every`` iterations,
    and at the final iterate.  ``record_states`` keeps a full state snapshot
    per iteration for the theory checkers (bounded to short runs).  Without
    a known saddle point the residual is unavailable and the run always goes
    the full ``max_iters``.

    Raises DivergenceError if an iterate becomes non-finite.
    """
    if kind not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {kind!r}, expected one of {ALGORITHMS}")
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not isinstance(max_iters, (int, np.integer)) or max_iters < 1:
        raise ValueError(f"max_iters must be a positive integer, got {max_iters!r}")
    if not isinstance(record_every, (int, np.integer)) or record_every < 1:
        raise ValueError(f"record_every must be a positive integer, got {record_every!r}")
    if tol < 0.0 or np.isnan(tol):
        raise ValueError(f"tol must be nonnegative, got {tol}")
    if record_states and max_iters > _MAX_RECORD_STATES_ITERS:
        raise ValueError(f"record_states is limited to max_iters <= "
                         f"{_MAX_RECORD_STATES_ITERS} (memory guard), got {max_iters}")

    eta = None
    rho_eff = W.rho
    if kind == "adogt":
        if T is None:
            raise ValueError("adogt requires the gossip round count T")
        if not isinstance(T, (int, np.integer)) or T < 1:
            raise ValueError(f"T must be a positive integer, got {T!r}")
        eta = acceleration_momentum(W.rho)
        rho_eff = accelerated_matrix(W, T).rho
    else:
        T = None

    L = problem.smoothness_constant()
    z_star = problem.saddle_point()
    n = problem.n

    state = init_state(problem, z0)
    if kind not in TRACKING_ALGORITHMS:
        state = replace(state, tracker=np.zeros_like(state.tracker))

    def record(s):
        return metrics.metric_record(s, gamma, L, rho_eff, n, z_star)

    records = [record(state)]
    states = [state] if record_states else None

    def tol_reached(rec):
        return rec.residual is not None and rec.residual <= tol

    reason = "max_iters"
    if tol_reached(records[0]):
        reason = "tol_reached"
    else:
        # Divergence is detected by explicit isfinite checks inside the step
        # functions; float overflow on the way there is expected, not noise.
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(1, max_iters + 1):
                if kind == "dgda":
                    state = dgda_step(state, W, gamma, problem)
                elif kind == "dogda":
                    state = dogda_step(state, W, gamma, problem)
                elif kind == "dogt":
                    state = dogt_step(state, W, gamma, problem)
                else:
                    state = adogt_step(state, W, eta, T, gamma, problem)
                if record_states:
                    states.append(state)
                rec = None
                if k % record_every == 0 or k == max_iters:
                    rec = record(state)
                    records.append(rec)
                if z_star is not None:
                    if rec is None:
                        res = metrics.residual(state.z, z_star)
                        if res <= tol:
                            rec = record(state)
                            records.append(rec)
                    if rec is not None and rec.residual <= tol:
                        reason = "tol_reached"
                        break

    return Trace(kind=kind, gamma=gamma, mu=problem.mu, smoothness=L,
                 rho=rho_eff, n=n, problem=problem, mixing=W, z_star=z_star,
                 records=tuple(records),
                 states=tuple(states) if record_states else None,
                 reason=reason, iterations=state.iteration,
                 comm_rounds=state.comm_rounds, T=T, eta=eta)
