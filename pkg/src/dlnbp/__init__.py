"""Diagonal linear networks, their gradient flow, and the basis pursuit
minimizer selected in the small-initialization limit."""

from .bp import (MinimizerSet, SolutionFace, minimizer_set, optimal_face, reduce_rank_deficient,
                 solve_bp, solve_gstar, solve_mstar, solve_qstar, verify_kkt, wp_select)
from .bounds import BoundBundle, gd_step_bound, max_horizon
from .conditioning import ConditionReport, c_A, chi_constant, script_K
from .dynamics import (DlnParams, FlowTrace, euler_integrate, flow_invariant_defect, flow_run,
                       gd_matches_flow, gd_run, grad_loss, loss)
from .errors import (ConvergenceError, DomainError, IntegrationError, InvalidInputError,
                     ProblemSizeError, RankDeficientError)
from .instances import RegressionInstance, builtin_instances, shift_instance
from .linalg import nullspace_basis, svd_summary, thin_qr
from .potentials import (G_p, Hyperparams, Q_p, g_p, g_p_prime, grad_Q_p, h_p, h_p_inv,
                         hess_Q_p_diag, q_p, q_p_prime)

__version__ = "0.1.0"
