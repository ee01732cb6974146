"""Interpretable binary classifiers as expressive Boolean formulas.

Rules are trees of possibly-negated literals under And/Or/AtLeast/AtMost/
Choose operators, trained by simulated annealing with optional non-local
subtree-optimization moves; depth-one subproblems can be solved exactly
(brute force or ILP enumeration) or heuristically via a QUBO annealer.
"""

from .bitvec import BitMatrix, BitVector
from .data import (BinarizedMatrix, ClassWeights, DataError, binarize,
                   class_weights, load_csv, load_xbf, save_xbf,
                   stratified_split, stratified_subsample)
from .formula import (ACCURACY, AND, ATLEAST, ATMOST, BALANCED_ACCURACY,
                      CHOOSE, OPERATOR_KINDS, OR, FormulaError, Literal, Op,
                      Trivial, complexity, depth, evaluate, negate, objective,
                      score)
from .harness import RunConfig, SweepResult, crossval, sweep, train_classifier
from .ilp import IlpModel, build_ilp, exhaustive_ilp_solve, export_lp, parse_lp
from .local import Move, SolverConfig, Trace, apply_move, solve
from .oracle import (DepthOneSolution, EnumerationCapError,
                     brute_force_depth_one, count_feasible)
from .parsing import ParseError, parse, to_text
from .qubo import (QuboModel, WITH_ETA, WITHOUT_ETA, count_qubo_variables,
                   decode, export_qubo, ilp_to_qubo, qubo_anneal, solve_qubo)
from .subtree import (EffectiveSubproblem, NonLocalConfig,
                      effective_subproblem, propose_non_local_move,
                      subtree_budget)

__version__ = "0.1.0"
