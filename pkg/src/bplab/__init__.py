"""Decoder laboratory for low-weight syndrome errors under belief propagation."""

from .decoder import DecodeResult, RelayConfig, bp_min_sum, bp_osd_decode, logical_flip, osd0, relay_decode
from .gf2core import ComboMetrics, SparseBitMatrix, canceled_checks, hamming_weight, mat_vec_mod2, unique_checks, xor_columns
from .modelio import DecodingModel, generate_bb_code_capacity, generate_random_model, load_model, save_model

__version__ = "0.1.0"
