"""Fisher information, Cramer-Rao bounds and the GHZ-versus-FID precision ratio.

Parameters are always ordered ``(c, alpha, delta)``. The GHZ attenuation
``exp(beta * T_w)`` is a known constant: it is factored out of the Fisher
matrix and carried as a log so bounds stay finite in log space even when
``K**p * T_w`` is large enough to overflow a double.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import AcquisitionGrid, SignalParams, SpinSystem, Strategy, beta_rate

PARAMS = ("c", "alpha", "delta")


class SingularFisherError(ArithmeticError):
    """The Fisher matrix cannot be inverted for this acquisition grid."""


@dataclass(frozen=True, eq=False)
class FisherReport:
    matrix: np.ndarray
    inverse: np.ndarray
    crb_c: float
    crb_alpha: float
    crb_delta: float
    log_attenuation: float = 0.0
    log_crb: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def log_crb_delta(self) -> float:
        return self.log_crb[2]


def _lever_and_attenuation(kind: Strategy, sys: SpinSystem, grid: AcquisitionGrid):
    if kind is Strategy.QUANTUM:
        return sys.k_spins * grid.t_wait, beta_rate(sys) * grid.t_wait
    return 0.0, 0.0


def design_matrix(kind, params: SignalParams, sys: SpinSystem, grid: AcquisitionGrid,
                  include_attenuation: bool = True) -> np.ndarray:
    """Analytic derivatives of the ideal signal, one column per parameter."""
    kind = Strategy.parse(kind)
    lever, log_att = _lever_and_attenuation(kind, sys, grid)
    t = grid.times
    c, d = params.amplitude, params.delta
    x = c * np.exp(1j * d * lever + (1j * d + sys.alpha) * t)
    if include_attenuation:
        x = x * math.exp(log_att)
    return np.stack([x / c, t * x, 1j * (lever + t) * x], axis=1)


def fisher_matrix(kind, params: SignalParams, sys: SpinSystem, grid: AcquisitionGrid) -> FisherReport:
    kind = Strategy.parse(kind)
    if not params.noise_sigma > 0:
        raise ValueError("Fisher information needs a positive noise_sigma")
    _, log_att = _lever_and_attenuation(kind, sys, grid)
    d = design_matrix(kind, params, sys, grid, include_attenuation=False)
    unit = (d.conj().T @ d).real / params.noise_sigma**2
    unit = 0.5 * (unit + unit.T)
    scale = np.sqrt(np.diag(unit))
    if not np.all(np.isfinite(unit)) or np.any(scale == 0):
        raise SingularFisherError(f"Fisher matrix is degenerate (M={grid.n_samples}, t_s={grid.t_sample})")
    corr = unit / np.outer(scale, scale)
    if np.linalg.cond(corr) > 1e14:
        raise SingularFisherError(
            f"Fisher matrix is numerically singular (M={grid.n_samples}, t_s={grid.t_sample})"
        )
    unit_inv = np.linalg.inv(corr) / np.outer(scale, scale)
    unit_inv = 0.5 * (unit_inv + unit_inv.T)
    diag = np.diag(unit_inv)
    if np.any(diag <= 0):
        raise SingularFisherError("inverse Fisher matrix has a non-positive diagonal")
    log_crb = tuple(float(v) for v in 0.5 * np.log(diag) - log_att)
    with np.errstate(over="ignore", under="ignore"):
        matrix = unit * math.exp(2 * log_att) if log_att > -350 else np.zeros_like(unit)
        inverse = np.zeros_like(unit_inv)
        np.multiply(unit_inv, np.exp(-2 * log_att), out=inverse, where=unit_inv != 0)
        crbs = np.exp(np.array(log_crb))
    return FisherReport(
        matrix=matrix,
        inverse=inverse,
        crb_c=float(crbs[0]),
        crb_alpha=float(crbs[1]),
        crb_delta=float(crbs[2]),
        log_attenuation=log_att,
        log_crb=log_crb,
    )


def _check_snr(snr):
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")


def log_crb_delta_ghz_closed(sys: SpinSystem, grid: AcquisitionGrid, snr: float) -> float:
    _check_snr(snr)
    tw = grid.t_wait
    total = kernels.decay_weighted_square_sum(sys.k_spins * tw, grid.t_sample, grid.n_samples, sys.alpha)
    return -beta_rate(sys) * tw - 0.5 * math.log(total) - math.log(snr)


def log_crb_delta_std_closed(sys: SpinSystem, grid: AcquisitionGrid, snr: float) -> float:
    _check_snr(snr)
    total = kernels.decay_weighted_square_sum(0.0, grid.t_sample, grid.n_samples, sys.alpha)
    return -0.5 * math.log(total) - math.log(snr)


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def crb_delta_ghz_closed(sys: SpinSystem, grid: AcquisitionGrid, snr: float) -> float:
    """Frequency bound for the GHZ strategy, in rad/s (inf if it overflows)."""
    return _safe_exp(log_crb_delta_ghz_closed(sys, grid, snr))


def crb_delta_std_closed(sys: SpinSystem, grid: AcquisitionGrid, snr: float) -> float:
    """Frequency bound for uncoupled spins; the ensemble standard quantum limit."""
    return _safe_exp(log_crb_delta_std_closed(sys, grid, snr))


def log_ratio_discrete(sys: SpinSystem, grid: AcquisitionGrid) -> float:
    """log of CRB_std / CRB_ghz on a finite grid (equal SNR cancels)."""
    return log_crb_delta_std_closed(sys, grid, 1.0) - log_crb_delta_ghz_closed(sys, grid, 1.0)


def ratio_discrete(sys: SpinSystem, grid: AcquisitionGrid) -> float:
    return _safe_exp(log_ratio_discrete(sys, grid))


def log_ratio_r_infinity(sys: SpinSystem, t_wait: float) -> float:
    if t_wait < 0:
        raise ValueError("t_wait must be non-negative")
    x = sys.k_spins * sys.alpha * t_wait
    return beta_rate(sys) * t_wait + 0.5 * math.log1p(-2.0 * x * (1.0 - x))


def ratio_r_infinity(sys: SpinSystem, t_wait: float) -> float:
    """Full-decay precision ratio of the GHZ strategy over the classical one."""
    return math.exp(log_ratio_r_infinity(sys, t_wait))


def max_r_infinity_closed(k: int, p: float, t2_star: float = 1.0) -> tuple[float, float]:
    """Best ratio over the wait time and the wait time achieving it (seconds).

    Only defined for ``k >= 2`` and ``0 <= p < 1``; see :func:`max_r_infinity`
    for the general case.
    """
    if k < 2:
        raise ValueError("closed-form optimum needs k >= 2")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"closed-form optimum needs 0 <= p < 1, got p={p}")
    k = float(k)
    q = k ** (p - 1.0)
    root = math.sqrt(1.0 - q * q)
    r_max = k ** (0.5 - p) * math.sqrt(k + k * root) / math.exp(0.5 * (1.0 - q + root))
    t_opt = ((1.0 - q) + root) / (2.0 * k**p) * t2_star
    return r_max, t_opt


def max_r_infinity(k: int, p: float, t2_star: float = 1.0) -> tuple[float, float]:
    # for p >= 1 (or a lone spin) the supremum is 1, reached only at T_w = 0
    if k < 2 or p >= 1.0:
        return 1.0, 0.0
    return max_r_infinity_closed(k, p, t2_star)
