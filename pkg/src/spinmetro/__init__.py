"""Ensemble spin magnetometry: classical FID versus GHZ-enhanced sensing."""

from .core import (
    AcquisitionGrid,
    Collective,
    PowerLaw,
    SignalParams,
    SpinSystem,
    Strategy,
    Uncorrelated,
    beta_rate,
    infer_power_exponent,
)
from .kernels import BACKEND

__version__ = "0.1.0"
