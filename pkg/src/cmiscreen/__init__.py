"""Predictor screening by posterior conditional mutual information under a DP mixture."""

from .cmi import (CmiTrace, ScreeningReport, marginal_mi_draw, mc_marginalize_xj, summarize,
                  zeta_all, zeta_draw)
from .data import Dataset, from_arrays, prepare_dataset
from .gibbs import ChainConfig, ChainOutput, SamplerError, run_chain
from .model import Hyperparams, ModelState, stick_break
from .scales import ColumnScale

__version__ = "0.1.0"

__all__ = [
    "ChainConfig", "ChainOutput", "CmiTrace", "ColumnScale", "Dataset", "Hyperparams",
    "ModelState", "SamplerError", "ScreeningReport", "from_arrays", "marginal_mi_draw",
    "mc_marginalize_xj", "prepare_dataset", "run_chain", "stick_break", "summarize",
    "zeta_all", "zeta_draw",
]
