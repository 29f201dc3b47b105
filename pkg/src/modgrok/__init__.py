"""Fourier structure and idealized circuits in ReLU MLPs trained on modular addition."""

from .dataset import SplitDataset, Triple, corrupt_labels, generate_triples, make_dataset, stratified_split
from .idealize import (
    COS_COS,
    SQ_COS,
    SQ_SQ,
    ConstructionSetting,
    WaveSpec,
    construct_scratch_model,
    extract_idealized_model,
    fit_ideal_square_wave,
    mean_nearest_point_distance,
    synth_wave,
)
from .mlp import (
    Model,
    ModularAdditionMLP,
    TrainConfig,
    adamw_step,
    evaluate_accuracy,
    forward,
    init_model,
    loss_and_grads,
    train,
)
from .spectral import (
    FourierNeuronTransformer,
    circular_correlation,
    dft,
    dominant_component,
    periodicity_score,
    wrap_angle,
)

__version__ = "0.1.0"

__all__ = [
    "COS_COS",
    "ConstructionSetting",
    "FourierNeuronTransformer",
    "Model",
    "ModularAdditionMLP",
    "SQ_COS",
    "SQ_SQ",
    "SplitDataset",
    "TrainConfig",
    "Triple",
    "WaveSpec",
    "adamw_step",
    "circular_correlation",
    "construct_scratch_model",
    "corrupt_labels",
    "dft",
    "dominant_component",
    "evaluate_accuracy",
    "extract_idealized_model",
    "fit_ideal_square_wave",
    "forward",
    "generate_triples",
    "init_model",
    "loss_and_grads",
    "make_dataset",
    "mean_nearest_point_distance",
    "periodicity_score",
    "stratified_split",
    "synth_wave",
    "train",
    "wrap_angle",
]
