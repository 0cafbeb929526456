__version__ = "0.1.0"

from . import datasets, experiments, manifest, metrics, models, training
