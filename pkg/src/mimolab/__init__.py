"""Multicell massive MIMO performance laboratory under uncorrelated Rician fading.

Deterministic-equivalent and closed-form SINR approximations for MRT, MRC,
RZF and single-cell MMSE, with a Monte-Carlo oracle to validate them.
"""

from .errors import ConfigError, ConvergenceError, MimolabError, MisuseError, RegimeError
from .scenario import LargeScaleTable, ScenarioConfig, build_table, sample_large_scale
from .channel import LoSSet, build_los, sample_los, sample_channels
from .estimation import EstimateSet, mmse_estimate, intercell_estimate
from .report import SinrReport, rate_from_sinr

__version__ = "0.1.0"
