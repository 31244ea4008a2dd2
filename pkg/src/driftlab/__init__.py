"""Toolkit for modeling temporal drift in word embeddings.

Pipeline: synthetic drifting corpora (random walks on perturbed graphs) or
time-split review data -> per-timestep SGNS embeddings -> a set-to-set
predictor mapping embeddings at time t to time t+1 (optionally conditioned
on a few embeddings from a small drifted sample) -> cosine / neighbor-overlap
metrics and a frozen-embedding downstream classifier.
"""

__version__ = "0.1.0"

from driftlab.errors import (
    AlignmentError,
    ConfigError,
    DataFormatError,
    DegenerateRowError,
    GraphReuseError,
    NumericDivergenceError,
)

__all__ = [
    "AlignmentError",
    "ConfigError",
    "DataFormatError",
    "DegenerateRowError",
    "GraphReuseError",
    "NumericDivergenceError",
    "__version__",
]
