"""Decentralized saddle-point optimization over networks.

Gradient-tracking optimistic methods (dogt, adogt) and their non-tracking
baselines (dgda, dogda), plus the machinery to check the linear-convergence
theory numerically: mixing matrices and spectral gaps, accelerated gossip,
Lyapunov diagnostics, and inequality checkers.
"""

from .algorithms import (ALGORITHMS, AlgoState, DivergenceError, Trace,
                         adogt_step, dgda_step, dogda_step, dogt_step,
                         init_state, run)
from .graph import (DisconnectedGraphError, MixingMatrix, PowerIterationError,
                    Topology, accelerated_matrix, acceleration_momentum,
                    build_topology, lazy_max_degree_weights, metropolis_weights,
                    recommended_T, spectral_gap)
from .metrics import (MetricRecord, RateReport, consensus_error, fit_linear_rate,
                      iteration_complexity, lyapunov, lyapunov_coefficients,
                      max_stepsize, metric_record, optimality_gap_xi, residual,
                      theoretical_contraction, tracking_error)
from .problem import (BilinearQuadratic, SaddleProblem, StackedIterate,
                      estimate_smoothness, local_gradient, local_value,
                      make_bilinear_quadratic, saddle_point,
                      smoothness_constant, stacked_gradient_field)
from .verify import (LEMMA_IDS, LemmaCheckReport, TheoryConstants, check_lemma,
                     check_rho_M, finite_difference_gradient, run_all_checks)

__version__ = "0.1.0"
