"""Physical quantities shared by every part of the workbench.

Times are stored as positive seconds; decay rates (``alpha``, ``beta``) are
derived and always negative. The gyromagnetic ratio is only used by the
density-matrix oracle, every closed-form expression takes it as 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class Strategy(enum.Enum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"

    @classmethod
    def parse(cls, value: "Strategy | str") -> "Strategy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown strategy {value!r}; expected 'classical' or 'quantum'") from None


@dataclass(frozen=True)
class Uncorrelated:
    """Independent dephasing of every spin, GHZ rate ``K * alpha``."""

    @property
    def exponent(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Collective:
    """Fully correlated dephasing of the molecule, GHZ rate ``K**2 * alpha``."""

    @property
    def exponent(self) -> float:
        return 2.0


@dataclass(frozen=True)
class PowerLaw:
    """Phenomenological GHZ rate ``K**p * alpha`` with ``0 <= p <= 2``."""

    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 2.0) or math.isnan(self.p):
            raise ValueError(f"power-law exponent must lie in [0, 2], got {self.p}")

    @property
    def exponent(self) -> float:
        return float(self.p)


DecoherenceModel = Uncorrelated | Collective | PowerLaw


def parse_decoherence(name: str, p: float | None = None) -> DecoherenceModel:
    key = name.strip().lower()
    if key == "uncorrelated":
        return Uncorrelated()
    if key == "collective":
        return Collective()
    if key in ("powerlaw", "power_law", "power-law"):
        if p is None:
            raise ValueError("power-law decoherence needs an exponent p")
        return PowerLaw(float(p))
    raise ValueError(f"unknown decoherence model {name!r}")


def decoherence_name(model: DecoherenceModel) -> str:
    if isinstance(model, Uncorrelated):
        return "uncorrelated"
    if isinstance(model, Collective):
        return "collective"
    return "powerlaw"


@dataclass(frozen=True)
class SpinSystem:
    """One star-topology molecule: central spin A plus ``k_spins - 1`` satellites.

    Parameters
    ----------
    k_spins : int
        Spins per molecule (K).
    gamma_ratio : float
        Ratio of gyromagnetic ratios of A and B.
    ising_j : float
        Ising coupling strength in rad/s.
    t2_star : float
        Single-spin dephasing time in seconds.
    decoherence : DecoherenceModel
        How the GHZ coherence rate grows with K.
    """

    k_spins: int = 1
    gamma_ratio: float = 1.0
    ising_j: float = 0.0
    t2_star: float = 1.0
    decoherence: DecoherenceModel = field(default_factory=Uncorrelated)

    def __post_init__(self):
        if int(self.k_spins) != self.k_spins or self.k_spins < 1:
            raise ValueError(f"k_spins must be a positive integer, got {self.k_spins}")
        if not self.t2_star > 0 or not math.isfinite(self.t2_star):
            raise ValueError(f"t2_star must be positive and finite, got {self.t2_star}")
        if not isinstance(self.decoherence, (Uncorrelated, Collective, PowerLaw)):
            raise TypeError(f"unsupported decoherence model {self.decoherence!r}")
        object.__setattr__(self, "k_spins", int(self.k_spins))

    @property
    def alpha(self) -> float:
        return -1.0 / self.t2_star

    @property
    def p(self) -> float:
        return self.decoherence.exponent


@dataclass(frozen=True)
class AcquisitionGrid:
    t_sample: float
    n_samples: int
    t_wait: float = 0.0

    def __post_init__(self):
        if not self.t_sample > 0 or not math.isfinite(self.t_sample):
            raise ValueError(f"t_sample must be positive, got {self.t_sample}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            # a single sample cannot separate frequency from decay
            raise ValueError(f"n_samples must be an integer >= 2, got {self.n_samples}")
        if not self.t_wait >= 0 or not math.isfinite(self.t_wait):
            raise ValueError(f"t_wait must be non-negative, got {self.t_wait}")
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.t_sample

    @property
    def readout_length(self) -> float:
        return (self.n_samples - 1) * self.t_sample


@dataclass(frozen=True)
class SignalParams:
    amplitude: float = 1.0
    noise_sigma: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if not self.noise_sigma >= 0:
            raise ValueError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if not math.isfinite(self.delta):
            raise ValueError("delta must be finite")

    @property
    def snr(self) -> float:
        if self.noise_sigma == 0:
            return math.inf
        return self.amplitude / self.noise_sigma


def beta_rate(sys: SpinSystem) -> float:
    """GHZ-coherence decay rate (negative, rad/s) under the system's noise model."""
    k = sys.k_spins
    model = sys.decoherence
    if isinstance(model, Uncorrelated):
        return k * sys.alpha
    if isinstance(model, Collective):
        return k * k * sys.alpha
    return k ** model.p * sys.alpha


def infer_power_exponent(t2_single: float, t2_ghz: float, k: int) -> float:
    """Exponent p such that a K-spin GHZ state dephases ``K**p`` times faster.

    Inverse of :func:`beta_rate` for the power-law family.
    """
    if not (t2_single > 0 and t2_ghz > 0):
        raise ValueError("dephasing times must be positive")
    if k < 2:
        raise ValueError("k must be at least 2 to identify an exponent")
    if t2_ghz > t2_single * (1.0 + 1e-12):
        raise ValueError(
            f"GHZ dephasing time {t2_ghz} exceeds the single-spin time {t2_single}; "
            "that implies p < 0, outside the model family"
        )
    # a rounding-level excess of t2_ghz means p = 0
    return max(math.log(t2_single / t2_ghz), 0.0) / math.log(k)
