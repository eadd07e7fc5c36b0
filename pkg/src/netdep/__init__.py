"""Testing for dependence between network structure and node covariates.

The pipeline: embed the graph (:mod:`netdep.embedding`), relate the
embedding to the covariates with one of five statistics, and calibrate the
statistic by permuting the covariate rows (:mod:`netdep.permtest`).
"""
__version__ = "0.1.0"

from .cca import cca_coefficient, covariance_blocks, network_cca_coefficient
from .covtest import compute_knot_data, cov_test_statistic, estimate_sigma2
from .embedding import ase, select_dimension
from .graph_model import Graph, Scenario, ScenarioSpec, generate_scenario
from .permtest import TestOutcome, bonferroni_combine, permutation_test, run_test
from .regression import cross_validate, group_lasso_fit, lasso_fit_column, ridge_fit

__all__ = [
    "Graph", "Scenario", "ScenarioSpec", "TestOutcome",
    "ase", "bonferroni_combine", "cca_coefficient", "compute_knot_data", "cov_test_statistic",
    "covariance_blocks", "cross_validate", "estimate_sigma2", "generate_scenario",
    "group_lasso_fit", "lasso_fit_column", "network_cca_coefficient", "permutation_test",
    "ridge_fit", "run_test", "select_dimension",
]
