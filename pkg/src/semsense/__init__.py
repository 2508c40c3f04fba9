"""Semantic WiFi sensing: CFR power synthesis, sinusoidal semantic codes,
3D semantic-space recognition, fading-link transport and a contest-based
sensing-data market."""

from .signal_model import (CfrPowerTrace, DatasetConfig, PathComponent, SceneSpec, decompose_power,
                           make_activity_dataset, synthesize_power)
from .codec import CodecConfig, SemanticBasis, SemanticCode, encode, from_bits, reconstruct, to_bits
from .space import KnnConfig, SemanticPoint, TrainingSet, build_training_set, classify, to_point, vote
from .channel import FadingSpec, LinkBudget, MODULATIONS, ModulationScheme, average_bep, corrupt_payload, ergodic_capacity
from .contest import (AwardScheme, MarketConfig, TransmitterProfile, capability, capability_cdf, expected_award,
                      market_summary, optimal_awards, optimal_effort, prize_coefficients)

__version__ = "0.1.0"
