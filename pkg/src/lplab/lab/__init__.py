from .corpus import generate_corpus
from .experiments import list_experiments, recheck, run_experiment
from .fitting import fit_model

__all__ = ["generate_corpus", "fit_model", "list_experiments", "recheck", "run_experiment"]
