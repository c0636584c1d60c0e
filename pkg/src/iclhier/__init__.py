"""Exact-ICL clustering of latent block models with a hybrid genetic search and alpha-regularised hierarchies."""

from .data import DataKind, Dataset, Partition, RunConfig, canonical_labels, relabel_canonical, validate_partition
from .icl import DomainError, IclValue, Model, ModelMismatchError, ModelState, icl, log_p_z

__version__ = "0.1.0"
