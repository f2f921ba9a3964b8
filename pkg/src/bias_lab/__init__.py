"""Synthetic bias mechanisms, fair representation learning and its verification."""

from .data import Dataset
from .scm import Mechanism, Family, Scm, ScmConfig
from .inject import InjectionSpec, apply_injection, split_dataset
from .nn import Architecture, Method, TrainConfig, TrainedModel, train

__version__ = "0.1.0"
