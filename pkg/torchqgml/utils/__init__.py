from .data import TrajectoryLoader, get_run_home, clear_run_home, get_run_dir

from .config import ExperimentConfig, PhysicsConfig, DataConfig, \
    TrainConfig, SamplerConfig, EvaluationConfig
from .config import load_config, parse_config, apply_overrides

from .losses import TrajectoryMSELoss, trajectory_loss
from .optim import AdaBelief, OptimizerState, adabelief_step, lr_schedule
from .training import Trainer, TrainHistory, build_model, train

from .io import read_dataset, write_dataset, read_checkpoint, \
    write_checkpoint, read_ensemble, write_ensemble, Checkpoint
from .datasets import generate_data, write_manifest
