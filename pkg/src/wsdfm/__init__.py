"""Warm-start discrete flow matching on token sequences.

Generation starts at time t0 from draft samples instead of uniform noise, so a
fixed step size needs only about (1 - t0)/h network evaluations.
"""
from .core import (Dataset, GridSpec, InvalidArgument, NumericalFailure, ParseError,
                   RngStream, RunConfig, ValidationError, WSDFMError, load_dataset,
                   save_dataset, two_moons_dataset)
from .coupling import CouplingSpec, PairedDataset, build_coupling, load_pairs, save_pairs
from .drafts import TIERS, DraftModel, sample_draft, uniform_noise
from .evaluate import exact_posterior, skl, t0_sweep
from .kernels import BACKEND
from .net import NetDims, ModelParams, init_params, load_checkpoint, save_checkpoint
from .path import KappaSchedule, WarmStartClock, conditional_rate, sample_xt
from .sample import generate, nfe, oracle_generate, run_sampler
from .train import finetune, train_vanilla

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CouplingSpec", "Dataset", "DraftModel", "GridSpec", "InvalidArgument",
    "KappaSchedule", "ModelParams", "NetDims", "NumericalFailure", "PairedDataset",
    "ParseError", "RngStream", "RunConfig", "TIERS", "ValidationError", "WSDFMError",
    "WarmStartClock", "build_coupling", "conditional_rate", "exact_posterior", "finetune",
    "generate", "init_params", "load_checkpoint", "load_dataset", "load_pairs", "nfe",
    "oracle_generate", "run_sampler", "sample_draft", "sample_xt", "save_checkpoint",
    "save_dataset", "save_pairs", "skl", "t0_sweep", "train_vanilla",
    "two_moons_dataset", "uniform_noise",
]
