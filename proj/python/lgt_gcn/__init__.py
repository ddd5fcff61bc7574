"""Layer-wise gradual training of deep graph convolutional networks.

Thin wrapper over the C++ core. Reports come back as plain dicts with the
same fields the ``lgt train`` command writes to ``report_seed<S>.json``.
"""

import json

from ._lgt import (
    DataError,
    Dataset,
    NumericalError,
    ShapeError,
    TrainConfig,
    dirichlet_energy,
    distance_to_constant,
    evaluate_checkpoint,
    generate_sbm,
    gradcheck,
    load_bundle,
    normalized_laplacian,
    save_bundle,
)
from ._lgt import train_json as _train_json

__all__ = [
    "DataError",
    "Dataset",
    "NumericalError",
    "ShapeError",
    "TrainConfig",
    "dirichlet_energy",
    "distance_to_constant",
    "evaluate_checkpoint",
    "generate_sbm",
    "gradcheck",
    "load_bundle",
    "normalized_laplacian",
    "save_bundle",
    "train",
]


def train(dataset, config=None, trainer="lgt", variant="gcn", checkpoint=None, **overrides):
    """Train once and return the report dict.

    Keyword overrides are applied to a copy of ``config`` (or the defaults),
    e.g. ``train(ds, depth=8, hidden=32)``.
    """
    cfg = config.copy() if config is not None else TrainConfig()
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise TypeError(f"unknown config field {key!r}")
        setattr(cfg, key, value)
    return json.loads(_train_json(dataset, cfg, trainer, variant, checkpoint))
