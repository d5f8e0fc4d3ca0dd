"""Temporally consistent bilinear Koopman models of control-affine systems.

The package learns discrete bilinear latent models z' = (A + sum u_i B_i) z
behind a tanh autoencoder from simulated trajectories, with an optional
temporal-consistency loss that penalizes disagreement between latent
rollouts landing on the same sample. See the README for the full tour.
"""

from .datagen import (Dataset, LiftMap, add_noise, build_dataset, lift,
                      load_dataset, make_lift, random_piecewise_control,
                      save_dataset, unlift, window_plan)
from .dynamics import (ControlAffineSystem, Trajectory, make_system,
                       register_system, rk4_step, simulate, vector_field)
from .errors import ConfigError, NumericError
from .evaluation import (EvalConfig, EvalReport, aggregate_seeds, compare,
                         evaluate_model, relative_error_series,
                         time_averaged_relative_error)
from .losses import (Batch, LossWeights, forward_loss, identity_loss,
                     make_batch, temporal_consistency_loss, total_loss)
from .model import (Architecture, ModelParams, bilinear_step, decode, encode,
                    init_params, load_checkpoint, predict, rollout_latent,
                    save_checkpoint)
from .training import (AdamState, TrainerConfig, TrainingHistory, adam_step,
                       clip_gradients, lr_at_epoch, train)
from .config import ExperimentConfig, PRESETS, parse_config, preset_names

__version__ = "0.1.0"
