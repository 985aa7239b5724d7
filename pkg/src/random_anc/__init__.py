"""Adversarial neural cryptography with projection, dot-product and inverse
projection layers, on a small reverse-mode autodiff engine.

The usual entry points::

    from random_anc import TrainingConfig, generate_pool, train_until_converged
    pool = generate_pool(8, 5)
    model, reports = train_until_converged(TrainingConfig(), pool)
"""

from .cipher import decrypt_stream, encrypt_stream
from .evaluation import bit_recovery_accuracy, eve_accuracy, table1_crosstab, uniqueness_report
from .keygen import KeyPool, generate_pool
from .modelfile import load_model, save_model
from .networks import AncModel
from .training import Outcome, TrainingConfig, sweep_projection_dims, train_realization, train_until_converged

__version__ = "0.1.0"

__all__ = [
    "AncModel",
    "KeyPool",
    "Outcome",
    "TrainingConfig",
    "bit_recovery_accuracy",
    "decrypt_stream",
    "encrypt_stream",
    "eve_accuracy",
    "generate_pool",
    "load_model",
    "save_model",
    "sweep_projection_dims",
    "table1_crosstab",
    "train_realization",
    "train_until_converged",
    "uniqueness_report",
]
