# -*- coding: utf-8 -*-

"""Top-level package for TorchQGML."""

__author__ = """TorchQGML Developers"""
__version__ = '0.1.0'

from torchqgml.exceptions import NotYetEvaluatedError
from torchqgml.autodiff import Tape, backward, grad_check
from torchqgml.utils import TrajectoryMSELoss, AdaBelief, Trainer
from .data_structures import TrajectoryDataset
from .dynamics import PhysicalParams, rollout, total_kinetic_energy
from .dynamics import FilterSpec, subgrid_tendency
from .models import QGModel, CNNClosure, SmagorinskyClosure, NullClosure
from .bayes import SGHMCSampler, PosteriorEnsemble, sample_chain
from .evaluation import ForecastEvaluator
