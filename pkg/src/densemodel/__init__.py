"""Constructive dense models: given g <= nu and a test family F, find a bounded
measure indistinguishable from g under F, or a short product of members of F
that tells nu apart from the constant 1."""

__version__ = "0.1.0"

from .core import (
    BoundedFunction,
    BoundedMeasure,
    FunctionFamily,
    Measure,
    PointFunction,
    Universe,
    constant_one,
    distinguishability,
    family_power_check,
    family_seminorm,
    inner,
    is_pseudorandom,
    product_function,
    signed_closure,
)
from .game import GameConfig, GameResult, Mixture, measure_best_response, solve_game
from .pipeline import (
    DenseModel,
    Distinguisher,
    Instance,
    decompose,
    extract_product_distinguisher,
    find_dense_model,
    round_to_set,
)
from .steppoly import StepPolynomial, build_step_polynomial, verify_step_polynomial
from .threshold import ThresholdWitness, find_threshold, layer_cake_check, pseudorandomness_transfer_check

__all__ = [name for name in dir() if not name.startswith("_")]
