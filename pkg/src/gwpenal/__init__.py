"""Penalization of Galton-Watson processes: generating-function calculus,
limiting martingales, the multi-type spine tree law and their verification."""
from .errors import ConvergenceError, DomainError, ExactSizeError, GWError, ResourceCapError, VerificationError
from .jets import TaylorJet, iterate_jet, iterate_jets
from .limits import LaplaceTransform, critical_moment_polynomial, laplace_transform, w_moments
from .martingales import MartingaleSpec, applicable_specs, uniqueness_solve, verify_martingale
from .offspring import OffspringDistribution, characterize, conjugate, generation_law, load_distribution
from .penalization import PenalizationProblem, limit_ratio, poly_geometric, poly_laplace, ratio
from .spinelaw import SpineLaw, exact_Q, sample_spine_tree, spine_statistics, verify_measure_equality
from .trees import TypedTree, UlamTree, enumerate_trees, gw_probability

__version__ = "0.1.0"
