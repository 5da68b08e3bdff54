"""Experiment engine: one named experiment per verified identity."""

from __future__ import annotations

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiments import (run_duality, run_excursion_reversal,
                          run_first_passage_reversal,
                          run_last_passage_reversal, run_wiener_hopf)
from .experiments_conditioned import (bessel_marginal_oracle,
                                      conditioned_batch,
                                      run_bismut_excursion,
                                      run_creeping_excursion_reversal,
                                      run_williams_excursion_max,
                                      run_williams_first_passage)
from .functionals import FunctionalSpec, evaluate_functional, parse_functionals
from .lambda_table import LambdaTable, estimate_lambda
from .reports import TestReport

EXPERIMENTS = {
    "duality": run_duality,
    "wiener_hopf": run_wiener_hopf,
    "last_passage_reversal": run_last_passage_reversal,
    "first_passage_reversal": run_first_passage_reversal,
    "excursion_reversal": run_excursion_reversal,
    "williams_first_passage": run_williams_first_passage,
    "bismut_excursion": run_bismut_excursion,
    "creeping_excursion_reversal": run_creeping_excursion_reversal,
    "williams_excursion_max": run_williams_excursion_max,
}

__all__ = ["EXPERIMENTS", "ExperimentConfig", "ConfigError", "TestReport",
           "LambdaTable", "estimate_lambda", "load_config", "parse_config",
           "FunctionalSpec", "evaluate_functional", "parse_functionals",
           "bessel_marginal_oracle", "conditioned_batch"]


def run_experiment(config: ExperimentConfig) -> TestReport:
    runner = EXPERIMENTS[config.experiment_name]
    return runner(config)
