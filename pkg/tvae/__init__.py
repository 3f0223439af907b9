"""Targeted variational autoencoder for treatment-effect estimation."""
from .checkpoint import checkpoint_payload, load_checkpoint, save_checkpoint, write_payload
from .config import PRESETS, TvaeConfig, from_preset, variant_config
from .effects import EffectEstimates, estimate_effects
from .losses import Batch, elbo_loss, elbo_terms, targeted_regularizer, total_loss
from .model import FACTORS, LatentSample, TvaeModel
from .training import EpochRecord, TrainingLog, train
