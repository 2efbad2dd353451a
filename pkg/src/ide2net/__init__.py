"""Finite-alphabet (one-bit DAC) precoding for massive MU-MIMO: IDE2 and its unfolded, trainable variant."""

__version__ = "0.1.0"

from .channel import SystemConfig, IllConditionedChannel, precoding_factor_beta, sample_channel  # noqa: F401
from .constellation import Constellation, FiniteAlphabet, constellation_by_name, one_bit_alphabet, qam  # noqa: F401
from .precoders import Ide2Config, PrecodeResult, ide2, zf_precode, zf_quantized  # noqa: F401
from .unfolded import Ide2NetParams, TrainConfig, forward, train  # noqa: F401
