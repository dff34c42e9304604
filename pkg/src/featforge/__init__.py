"""feat-forge: evolved feature representations for regression.

Typical use:

    from featforge import RunConfig, fit, from_arrays

    data = from_arrays(X, y)
    model = fit(data, RunConfig(population_size=100, max_generations=20, seed=1))
    y_hat = model.predict(X)
"""

from .archive import ParetoArchive, select_final
from .dataset import DataError, Dataset, from_arrays, load_csv
from .engine import Evolution, RunConfig, RunResult, STRATEGIES
from .evaluator import SgdConfig, forward
from .expr import (FunctionSet, Individual, Node, NodeKind, Tree,
                   individual_complexity, node_count, parse, to_string,
                   tree_complexity, validate_individual, validate_tree)
from .harness import CvReport, cross_validate, emit_cv_report, emit_report, fit
from .linear import (LinearModel, Standardizer, feedback_probs, mse, r2_score,
                     ridge_fit, standardize_apply, standardize_fit)
from .model import FittedModel
from .objectives import ObjectiveSet, cond_number, corr_entanglement
from .selection import (AnnealSchedule, anneal_accept, crowding_distance,
                        epsilon_lexicase_select, fast_nondominated_sort,
                        lex_survive, nsga2_survive)
from .variation import Limits, VariationConfig, make_offspring, random_individual

__version__ = "0.1.0"

__all__ = [
    "AnnealSchedule", "CvReport", "DataError", "Dataset", "Evolution",
    "FittedModel", "FunctionSet", "Individual", "LinearModel", "Limits",
    "Node", "NodeKind", "ObjectiveSet", "ParetoArchive", "RunConfig",
    "RunResult", "STRATEGIES", "SgdConfig", "Standardizer", "Tree",
    "VariationConfig", "anneal_accept", "cond_number", "corr_entanglement",
    "cross_validate", "crowding_distance", "emit_cv_report", "emit_report",
    "epsilon_lexicase_select", "fast_nondominated_sort", "feedback_probs",
    "fit", "forward", "from_arrays", "individual_complexity", "lex_survive",
    "load_csv", "make_offspring", "mse", "node_count", "nsga2_survive",
    "parse", "r2_score", "random_individual", "ridge_fit", "select_final",
    "standardize_apply", "standardize_fit", "to_string", "tree_complexity",
    "validate_individual", "validate_tree",
]


def predict(model: FittedModel, X):
    """Predict with a fitted model on raw (unstandardized) inputs."""
    return model.predict(X)


def archive(model: FittedModel):
    """Accuracy/complexity trade-off entries recorded during the fit."""
    return list(model.archive_rows)
