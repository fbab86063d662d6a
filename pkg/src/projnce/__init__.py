"""Contrastive-loss laboratory: projection-based InfoNCE variants, their
mutual-information lower bounds, and Gaussian-mixture benchmarks."""

__version__ = "0.1.0"

from . import encoder, losses, miest, numerics, projections, synthdata  # noqa: F401
from .losses import EmbeddingBatch, LossBreakdown  # noqa: F401
from .miest import MIEstimate  # noqa: F401
from .numerics import RngState  # noqa: F401
from .projections import KernelConfig, ProjectionSpec  # noqa: F401
from .synthdata import GMMSpec, LabeledDataset  # noqa: F401
