"""Experiment commands."""
from .ablate import AblateCommand
from .generate import GenerateCommand
from .tmle import TmleCommand
from .train import EvaluateCommand, TrainCommand

COMMANDS = {
    "generate": GenerateCommand,
    "train": TrainCommand,
    "evaluate": EvaluateCommand,
    "ablate": AblateCommand,
    "tmle": TmleCommand,
}
