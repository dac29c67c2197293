"""Identify a graph's shift operator from eigenvector templates of diffused
signals, with exact- and robust-recovery certificates."""

from . import (certificates, diffusion, errors, evaluation, experiments,
               graphs, inference, linalg, solver)
from .diffusion import (CovarianceEstimate, GraphFilter, SignalEnsemble,
                        SpectralTemplates, diffuse, exact_templates,
                        extract_templates, perturb, polynomial_filter,
                        precision_root_filter, sample_covariance,
                        smooth_signal_model, spectral_filter)
from .graphs import (Graph, Gso, OrderingConstraint, ShiftConstraintSet,
                     adjacency, combinatorial_laplacian, generate_ba,
                     generate_er, normalized_laplacian, validate_membership)
from .inference import (GsoEstimate, InferenceRequest, infer, infer_incomplete,
                        infer_incomplete_noisy, infer_noiseless, infer_noisy,
                        infer_reweighted, infer_smooth_laplacian,
                        threshold_unweighted, unique_feasible_point)
from .solver import (Ball, ExtraBlock, SolverOptions, Solution,
                     SparseRecoveryProblem, min_feasible_epsilon,
                     probe_feasible, solve)

__version__ = "0.1.0"
