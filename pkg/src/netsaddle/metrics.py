"""Convergence diagnostics: residual, consensus error, Lyapunov value, rates.

Two norm conventions coexist on purpose and are spelled out per field:
``consensus_error`` is logged UNSQUARED, (1/n) ||z - 1 zbar||, which is the
plot convention, while the Lyapunov terms use squared norms, which is the
analysis convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricRecord:
    """One logged iteration.

    residual        (1/n) ||z - 1 z*||^2          (None when z* unknown)
    consensus_error (1/n) ||z - 1 zbar||          (unsquared)
    tracking_error  ||r - 1 rbar||^2
    xi_norm_sq      squared norm of the averaged optimality gap (None w/o z*)
    lyapunov        weighted sum of gap, iterate-difference, consensus and
                    tracking terms (None when z* unknown)
    """

    iteration: int
    comm_rounds: int
    residual: float | None
    consensus_error: float
    tracking_error: float
    xi_norm_sq: float | None
    lyapunov: float | None


@dataclass(frozen=True)
class RateReport:
    """Log-linear fit of a positive metric series against iteration count."""

    fitted_rate: float
    theoretical_rate: float | None
    window: tuple[int, int]
    r_squared: float


def _sq(a: np.ndarray) -> float:
    return float(np.sum(a * a))


def residual(z: np.ndarray, z_star: np.ndarray) -> float:
    """(1/n) ||z - 1 z*||^2, squared distance of all rows to the saddle."""
    return _sq(z - z_star[np.newaxis, :]) / z.shape[0]


def consensus_error(z: np.ndarray) -> float:
    """(1/n) ||z - 1 zbar||, unsquared deviation from the row average."""
    return float(np.linalg.norm(z - z.mean(axis=0))) / z.shape[0]


def tracking_error(r: np.ndarray) -> float:
    """||r - 1 rbar||^2, squared deviation of the trackers from their average."""
    return _sq(r - r.mean(axis=0))


def optimality_gap_xi(state, gamma: float, z_star: np.ndarray) -> np.ndarray:
    """Averaged optimality gap zbar - gamma * mean(grad - grad_prev) - z*.

    The correction term anticipates the optimistic update; at iteration 0
    the stored gradients coincide and the gap reduces to zbar - z*.
    """
    if z_star is None:
        raise ValueError("optimality gap requires a known saddle point")
    zbar = state.z.mean(axis=0)
    correction = (state.grad - state.grad_prev).mean(axis=0)
    return zbar - gamma * correction - np.asarray(z_star, dtype=np.float64)


def lyapunov_coefficients(gamma: float, L: float, rho: float, n: int) -> tuple[float, float]:
    """Weights (c1, c2) of the consensus and tracking terms."""
    if not (0.0 <= rho < 1.0):
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    c1 = 72.0 * gamma * L / (n * (1.0 - rho))
    c2 = 4608.0 * gamma ** 3 * L / (n * (1.0 - rho) ** 3)
    return c1, c2


def lyapunov(state, gamma: float, L: float, rho: float, n: int,
             z_star: np.ndarray) -> float:
    """Composite energy whose geometric decay certifies linear convergence.

    ||Xi||^2 + (gamma L / n) ||z - z_prev||^2 + c1 ||z - 1 zbar||^2
    + c2 ||r - 1 rbar||^2.
    """
    if gamma <= 0.0 or L <= 0.0:
        raise ValueError("gamma and L must be positive")
    c1, c2 = lyapunov_coefficients(gamma, L, rho, n)
    xi = optimality_gap_xi(state, gamma, z_star)
    zbar = state.z.mean(axis=0)
    rbar = state.tracker.mean(axis=0)
    return (_sq(xi)
            + gamma * L / n * _sq(state.z - state.z_prev)
            + c1 * _sq(state.z - zbar)
            + c2 * _sq(state.tracker - rbar))


def theoretical_contraction(gamma: float, mu: float, rho: float) -> float:
    """Guaranteed per-step Lyapunov factor 1 - min(3 gamma mu / 4, (1-rho)/8)."""
    if gamma <= 0.0 or mu <= 0.0:
        raise ValueError("gamma and mu must be positive")
    if not (0.0 <= rho < 1.0):
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    factor = 1.0 - min(0.75 * gamma * mu, (1.0 - rho) / 8.0)
    if not (0.0 < factor < 1.0):
        raise ValueError(f"contraction factor {factor} lies outside (0, 1); "
                         "stepsize too large for a meaningful guarantee")
    return factor


def max_stepsize(L: float, rho: float) -> float:
    """Largest stepsize with a linear-rate guarantee.

    min(1/(64 L), (1-rho)^2 / (144 L sqrt(rho))); the graph term is vacuous
    at rho = 0.
    """
    if L <= 0.0:
        raise ValueError(f"L must be positive, got {L}")
    if not (0.0 <= rho < 1.0):
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    bound = 1.0 / (64.0 * L)
    if rho > 0.0:
        bound = min(bound, (1.0 - rho) ** 2 / (144.0 * L * math.sqrt(rho)))
    return bound


def iteration_complexity(kappa: float, rho: float) -> float:
    """Iterations per factor-e accuracy gain: kappa (1 + sqrt(rho)/(1-rho)^2) + 1/(1-rho)."""
    if kappa < 1.0:
        raise ValueError(f"kappa must be at least 1, got {kappa}")
    if not (0.0 <= rho < 1.0):
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    return kappa * (1.0 + math.sqrt(rho) / (1.0 - rho) ** 2) + 1.0 / (1.0 - rho)


def fit_linear_rate(series, skip_fraction: float = 0.1,
                    theoretical_rate: float | None = None) -> RateReport:
    """Least-squares geometric rate of an (iteration, value) series.

    The first ``skip_fraction`` of the iteration span is dropped to avoid
    transient contamination; remaining values must be strictly positive.
    """
    pairs = [(int(k), float(v)) for k, v in series]
    if not pairs:
        raise ValueError("insufficient data: empty series")
    k_min = pairs[0][0]
    k_max = pairs[-1][0]
    cutoff = k_min + skip_fraction * (k_max - k_min)
    window = [(k, v) for k, v in pairs if k >= cutoff]
    positive = [(k, v) for k, v in window if v > 0.0]
    if len(positive) < 10:
        if len(positive) < len(window):
            raise ValueError("nonpositive values leave fewer than 10 usable points")
        raise ValueError(f"insufficient data: {len(positive)} points in fit window, need 10")
    ks = np.array([k for k, _ in positive], dtype=np.float64)
    logs = np.log([v for _, v in positive])
    slope, intercept = np.polyfit(ks, logs, 1)
    fitted = logs - (slope * ks + intercept)
    ss_res = float(np.sum(fitted ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    # A (near-)constant series has ss_tot at rounding level; call it a
    # perfect fit rather than dividing by noise.
    noise_floor = (1e-14 * max(1.0, abs(float(logs.mean())))) ** 2 * len(logs)
    r_squared = 1.0 if ss_tot <= noise_floor else 1.0 - ss_res / ss_tot
    return RateReport(fitted_rate=float(np.exp(slope)),
                      theoretical_rate=theoretical_rate,
                      window=(int(ks[0]), int(ks[-1])),
                      r_squared=r_squared)


def metric_record(state, gamma: float, L: float, rho: float, n: int,
                  z_star: np.ndarray | None) -> MetricRecord:
    """Assemble the per-iteration record.

    Saddle-dependent fields are None without z*; the Lyapunov value is also
    None when rho >= 1 (an off-design accelerated matrix), where its weights
    are undefined.
    """
    if z_star is None:
        res = xi_sq = lyap = None
    else:
        res = residual(state.z, z_star)
        xi_sq = _sq(optimality_gap_xi(state, gamma, z_star))
        lyap = (lyapunov(state, gamma, L, rho, n, z_star)
                if 0.0 <= rho < 1.0 else None)
    return MetricRecord(iteration=state.iteration,
                        comm_rounds=state.comm_rounds,
                        residual=res,
                        consensus_error=consensus_error(state.z),
                        tracking_error=tracking_error(state.tracker),
                        xi_norm_sq=xi_sq,
                        lyapunov=lyap)
