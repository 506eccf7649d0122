"""Partition functions, pairing probabilities and Boltzmann sampling for
RNA-RNA interaction structures."""

__version__ = "0.1.0"

from .energy import EnergyModel, default_model, load_params, unit_model
from .grammar_inside import CapacityExceeded, InsideResult, inside
from .outside_prob import hybrid_probabilities, outside, target_sites
from .sampler import sample_batch, sample_one
from .secfold import fold, secondary_bpp
from .seq_model import (
    Hybrid,
    JointStructure,
    Strand,
    extract_hybrids,
    is_zigzag_free,
    validate,
)

__all__ = [
    "__version__",
    "EnergyModel",
    "default_model",
    "unit_model",
    "load_params",
    "inside",
    "InsideResult",
    "CapacityExceeded",
    "outside",
    "hybrid_probabilities",
    "target_sites",
    "sample_one",
    "sample_batch",
    "fold",
    "secondary_bpp",
    "Strand",
    "JointStructure",
    "Hybrid",
    "validate",
    "is_zigzag_free",
    "extract_hybrids",
]
