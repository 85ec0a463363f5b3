"""Twin support vector quantile regression trained by dual coordinate descent."""

__version__ = "0.1.0"

from .core import (AugmentedGram, Dataset, Hyperparams, KernelSpec, Standardizer,
                   build_augmented_gram, kernel_eval, kernel_matrix, pinball_loss)
from .dcdm import BoxQP, SolveResult, SolverConfig, SolverError, objective, solve
from .model import (SupportVectorCensus, TrainedModel, assemble_lower_dual,
                    assemble_upper_dual, classify_support_vectors, coverage_stats, fit,
                    load_model, predict, predict_bounds, predict_decomposed,
                    predict_lower, predict_upper, save_model)
from .selection import EvalReport, GridSpec, evaluate, gacv, grid_search
from .synthetic import GeneratorSpec, generate, generate_sinc, sinc_quantile_oracle
