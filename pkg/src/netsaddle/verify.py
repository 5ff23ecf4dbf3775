"""Numerical checkers for the convergence theory along recorded trajectories.

Each check evaluates both sides of one guaranteed inequality at every
recorded step and reports the margins rhs - lhs.  Under their stepsize
preconditions the inequalities are theorems, so a failing check flags an
implementation bug, not a tuning problem.  Checks whose stepsize
precondition does not hold are reported as precondition-violated, never as
failed.

Check ids:
  L1_iterate_gap      one-step displacement bounded by lagged energy terms
  L2_consensus        consensus error contracts under mixing
  L3_tracking         tracker deviation contracts under mixing
  L4_optimality_gap   averaged optimality gap contracts at rate 1 - 3*gamma*mu/4
  T1_contraction      the composite Lyapunov value contracts per step
  T2_rho_M            accelerated-matrix gap obeys its analytic bound
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import MixingMatrix, accelerated_matrix, recommended_T
from .metrics import (lyapunov, max_stepsize, optimality_gap_xi,
                      theoretical_contraction)

LEMMA_IDS = ("L1_iterate_gap", "L2_consensus", "L3_tracking",
             "L4_optimality_gap", "T1_contraction", "T2_rho_M")

MARGIN_RTOL = 1e-9


@dataclass(frozen=True)
class TheoryConstants:
    """The constants every inequality is stated in."""

    gamma: float
    L: float
    mu: float
    rho: float
    n: int

    @classmethod
    def from_trace(cls, trace) -> "TheoryConstants":
        return cls(gamma=trace.gamma, L=trace.smoothness, mu=trace.mu,
                   rho=trace.rho, n=trace.n)


@dataclass(frozen=True)
class LemmaCheckReport:
    """Margins of one inequality along a trajectory.

    ``margins`` holds (iteration, rhs - lhs); a step passes when its margin
    is at least -MARGIN_RTOL times the local scale max(|lhs|, |rhs|), which
    absorbs float noise when both sides are near zero.  ``status`` is one of
    "passed", "failed", "precondition_violated".
    """

    lemma_id: str
    margins: tuple[tuple[int, float], ...]
    min_margin: float
    status: str
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.status == "passed"

    @classmethod
    def from_sides(cls, lemma_id: str, sides, notes=()) -> "LemmaCheckReport":
        """Derive pass/fail from (iteration, lhs, rhs[, gated]) entries.

        Entries flagged gated=False are recorded as margins but do not
        affect the status (used for diagnostic quantities with no guarantee
        attached).
        """
        margins = []
        ok = True
        for entry in sides:
            k, lhs, rhs = entry[:3]
            gated = entry[3] if len(entry) > 3 else True
            margin = rhs - lhs
            scale = max(abs(lhs), abs(rhs))
            if gated and margin < -MARGIN_RTOL * scale:
                ok = False
            margins.append((int(k), float(margin)))
        min_margin = min((m for _, m in margins), default=math.nan)
        return cls(lemma_id=lemma_id, margins=tuple(margins),
                   min_margin=min_margin,
                   status="passed" if ok else "failed", notes=tuple(notes))

    @classmethod
    def precondition_violated(cls, lemma_id: str, note: str) -> "LemmaCheckReport":
        return cls(lemma_id=lemma_id, margins=(), min_margin=math.nan,
                   status="precondition_violated", notes=(note,))


def _stepsize_limit(lemma_id: str, c: TheoryConstants) -> float:
    """Largest stepsize under which the inequality is guaranteed."""
    g4 = 1.0 / (4.0 * c.L)
    if lemma_id == "L1_iterate_gap":
        return math.inf
    if lemma_id == "L2_consensus":
        return g4
    if lemma_id == "L3_tracking":
        if c.rho == 0.0:
            return g4
        return min(g4, (1.0 - c.rho) / (8.0 * c.L * math.sqrt(c.rho)))
    if lemma_id == "L4_optimality_gap":
        g8 = 1.0 / (8.0 * c.L)
        if c.rho == 0.0:
            return g8
        return min(g8, (1.0 - c.rho) / (8.0 * c.L * c.rho))
    if lemma_id == "T1_contraction":
        return max_stepsize(c.L, c.rho)
    raise ValueError(f"unknown lemma id {lemma_id!r}")


def _sq(a: np.ndarray) -> float:
    return float(np.sum(a * a))


def _consensus_sq(m: np.ndarray) -> float:
    return _sq(m - m.mean(axis=0))


def _field_at_average(problem, zbar: np.ndarray) -> np.ndarray:
    """Stacked gradient field with every node placed at the averaged iterate."""
    return problem.gradient_field(np.tile(zbar, (problem.n, 1)))


def check_lemma(trace, lemma_id: str, constants: TheoryConstants | None = None) -> LemmaCheckReport:
    """Evaluate one inequality at every recorded step of a full-state trace.

    The trace must have been produced with record_states=True (except for
    T2_rho_M, which only needs the mixing matrix).  ``constants`` defaults
    to the trace's own run constants.
    """
    if lemma_id not in LEMMA_IDS:
        raise ValueError(f"unknown lemma id {lemma_id!r}, expected one of {LEMMA_IDS}")
    c = constants if constants is not None else TheoryConstants.from_trace(trace)

    if lemma_id == "T2_rho_M":
        T = trace.T if trace.T is not None else recommended_T(trace.mixing.rho)
        return check_rho_M(trace.mixing, T)

    if trace.states is None or len(trace.states) < 2:
        raise ValueError("lemma checks need a trace recorded with record_states=True "
                         "and at least one step")
    limit = _stepsize_limit(lemma_id, c)
    if c.gamma > limit * (1.0 + 1e-12):
        return LemmaCheckReport.precondition_violated(
            lemma_id,
            f"stepsize {c.gamma:.6g} exceeds this inequality's limit {limit:.6g}")
    if lemma_id in ("L4_optimality_gap", "T1_contraction") and trace.z_star is None:
        raise ValueError(f"{lemma_id} requires a known saddle point")

    g, L, mu, rho, n = c.gamma, c.L, c.mu, c.rho, c.n
    states = trace.states
    problem = trace.problem
    sides = []

    for k in range(len(states) - 1):
        s0, s1 = states[k], states[k + 1]
        B = _sq(s0.z - s0.z_prev)           # ||z_k - z_{k-1}||^2
        C = _consensus_sq(s0.z)             # ||z_k - 1 zbar_k||^2
        D = _consensus_sq(s0.tracker)       # ||r_k - 1 rbar_k||^2

        if lemma_id == "L1_iterate_gap":
            field = _field_at_average(problem, s0.z.mean(axis=0))
            e = _sq(field.mean(axis=0))     # ||grad f(zbar_k)||^2
            lhs = _sq(s1.z - s0.z)
            rhs = (4.0 * g * g * L * L * B
                   + (4.0 + 8.0 * g * g * L * L) * C
                   + 8.0 * g * g * D
                   + 8.0 * n * g * g * e)
        elif lemma_id == "L2_consensus":
            lhs = _consensus_sq(s1.z)
            rhs = (0.5 * (1.0 + rho) * C
                   + 2.0 * g * g * (1.0 + rho) * rho / (1.0 - rho) * D
                   + 2.0 * g * g * (1.0 + rho) * rho * L * L / (1.0 - rho) * B)
        elif lemma_id == "L3_tracking":
            field = _field_at_average(problem, s0.z.mean(axis=0))
            e = _sq(field.mean(axis=0))
            lhs = _consensus_sq(s1.tracker)
            rhs = (0.25 * (3.0 + rho) * D
                   + 8.0 * g * g * L ** 4 * rho / (1.0 - rho) * B
                   + 9.0 * L * L * rho / (1.0 - rho) * C
                   + 16.0 * n * g * g * L * L * rho / (1.0 - rho) * e)
        elif lemma_id == "L4_optimality_gap":
            field = _field_at_average(problem, s0.z.mean(axis=0))
            E = _sq(field)                  # ||grad F(1 zbar_k)||^2
            lhs = _sq(optimality_gap_xi(s1, g, trace.z_star))
            rhs = ((1.0 - 0.75 * g * mu) * _sq(optimality_gap_xi(s0, g, trace.z_star))
                   + 1.25 * g * g * L * L / n * B
                   + 4.0 * g * L / n * C
                   + 9.0 * g ** 3 * L * rho / (n * (1.0 - rho)) * D
                   - g * g / (4.0 * n) * E)
        else:  # T1_contraction
            factor = theoretical_contraction(g, mu, rho)
            lhs = lyapunov(s1, g, L, rho, n, trace.z_star)
            rhs = factor * lyapunov(s0, g, L, rho, n, trace.z_star)
        sides.append((s0.iteration, lhs, rhs))

    return LemmaCheckReport.from_sides(lemma_id, sides)


def check_rho_M(W: MixingMatrix, T: int) -> LemmaCheckReport:
    """Check the accelerated matrix's spectral gap.

    The operative guarantee is gated: at T = recommended_T(rho_W) the gap
    must satisfy 1 - rho_M >= 1/2 (margin 1).  Margin 0 records the
    textbook-style envelope 2 (1 - sqrt(1 - sqrt(rho_W)))^(2T) against
    rho_M, or 1 - rho_M when that envelope is vacuous (>= 1); both are
    diagnostic only, since the envelope's constant belongs to the unsquared
    deviation and the finite-round transient can exceed it (or even push
    rho_M past 1) without anything being wrong.
    """
    rho_M = accelerated_matrix(W, T).rho
    bound = 2.0 * (1.0 - math.sqrt(1.0 - math.sqrt(W.rho))) ** (2 * T)
    notes = []
    sides = []
    if bound < 1.0:
        sides.append((0, rho_M, bound, False))
        notes.append(f"margin 0 is diagnostic: envelope {bound:.6g} vs "
                     f"rho_M {rho_M:.6g} (no guarantee at arbitrary T)")
    else:
        sides.append((0, rho_M, 1.0, False))
        notes.append(f"analytic envelope {bound:.6g} >= 1 is vacuous at T={T}; "
                     "margin 0 records 1 - rho_M instead (diagnostic)")
    if T == recommended_T(W.rho):
        sides.append((1, rho_M, 0.5))
        notes.append("T equals the recommended round count; "
                     "margin 1 gates on 1 - rho_M >= 1/2")
    return LemmaCheckReport.from_sides("T2_rho_M", sides, notes=notes)


def finite_difference_gradient(problem, i: int, z_i, h: float = 1e-6) -> np.ndarray:
    """Central-difference stacked gradient at node i (dual block sign-flipped).

    Test oracle for the analytic gradients; exact for quadratics up to
    rounding.
    """
    if h <= 0.0:
        raise ValueError(f"h must be positive, got {h}")
    z_i = np.asarray(z_i, dtype=np.float64)
    p = problem.p
    out = np.empty_like(z_i)
    for j in range(z_i.size):
        z_hi = z_i.copy()
        z_lo = z_i.copy()
        z_hi[j] += h
        z_lo[j] -= h
        f_hi = problem.local_value(i, z_hi[:p], z_hi[p:])
        f_lo = problem.local_value(i, z_lo[:p], z_lo[p:])
        out[j] = (f_hi - f_lo) / (2.0 * h)
    out[p:] *= -1.0
    return out


def run_all_checks(trace, constants: TheoryConstants | None = None) -> list[LemmaCheckReport]:
    """All six checks against one full-state trace, in LEMMA_IDS order."""
    return [check_lemma(trace, lemma_id, constants) for lemma_id in LEMMA_IDS]


def summary_text(reports) -> str:
    """Human-readable one-line-per-check summary."""
    lines = []
    for rep in reports:
        if rep.status == "precondition_violated":
            lines.append(f"{rep.lemma_id}: PRECONDITION VIOLATED ({rep.notes[0]})")
        else:
            verdict = "passed" if rep.passed else "FAILED"
            lines.append(f"{rep.lemma_id}: {verdict} "
                         f"(min margin {rep.min_margin:.6g} over {len(rep.margins)} steps)")
        for note in rep.notes if rep.status != "precondition_violated" else ():
            lines.append(f"  note: {note}")
    return "\n".join(lines) + "\n"


def margins_csv_rows(reports) -> list[str]:
    """Machine-readable rows: lemma_id,iteration,margin."""
    rows = ["lemma_id,iteration,margin"]
    for rep in reports:
        for k, margin in rep.margins:
            rows.append(f"{rep.lemma_id},{k},{margin:.17g}")
    return rows
