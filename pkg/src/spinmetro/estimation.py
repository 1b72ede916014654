"""Least-squares (maximum-likelihood) fitting of FID traces and Monte-Carlo checks.

Under circular Gaussian noise the likelihood is maximised by the least-squares
fit of ``c * exp(beta T_w) * exp(i delta (K T_w + t) + alpha t)``. The GHZ
attenuation is known and not fitted.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import kernels
from .core import AcquisitionGrid, SignalParams, SpinSystem, Strategy, beta_rate
from .fisher import crb_delta_ghz_closed, crb_delta_std_closed
from .signal import SignalTrace, add_noise, ideal_trace


class PhaseAmbiguityError(ValueError):
    """Frequency lies outside the window where the GHZ phase is unambiguous."""


@dataclass(frozen=True)
class EstimateResult:
    c_hat: float
    alpha_hat: float
    delta_hat: float
    residual_norm: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class MonteCarloReport:
    n_trials: int
    delta_std_empirical: float
    crb_delta: float
    efficiency: float
    failure_count: int
    delta_mean: float
    valid: bool

    def to_text(self, header_lines: list[str] | None = None) -> str:
        lines = [f"# {h}" for h in header_lines or ()]
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float):
                v = f"{v:.17g}"
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MonteCarloReport":
        raw = dict(
            line.split("=", 1) for line in text.splitlines() if line.strip() and not line.startswith("#")
        )
        kw = {}
        for f in fields(cls):
            v = raw[f.name]
            if f.type in ("int", int):
                kw[f.name] = int(v)
            elif f.type in ("bool", bool):
                kw[f.name] = v == "true"
            else:
                kw[f.name] = float(v)
        return cls(**kw)


def _model_constants(kind: Strategy, sys: SpinSystem, grid: AcquisitionGrid):
    if kind is Strategy.QUANTUM:
        return sys.k_spins * grid.t_wait, math.exp(beta_rate(sys) * grid.t_wait)
    return 0.0, 1.0


def initial_guess(trace: SignalTrace, kind, sys: SpinSystem, grid: AcquisitionGrid):
    """Data-driven starting point ``(c, alpha, delta)``.

    Frequency from the zero-padded spectral peak, refined by a weighted
    regression on the unwrapped phase; decay from a log-magnitude regression
    over the samples that stand clear of the noise.
    """
    kind = Strategy.parse(kind)
    x = trace.values
    t = trace.times
    ts = trace.t_sample
    lever, atten = _model_constants(kind, sys, grid)

    nfft = 1 << max(int(x.size - 1).bit_length() + 2, 6)
    spectrum = np.abs(np.fft.fft(x, nfft))
    freqs = 2 * np.pi * np.fft.fftfreq(nfft, ts)
    delta_f = float(freqs[np.argmax(spectrum)])

    mag = np.abs(x)
    keep = mag > 0.3 * mag[0]
    # contiguous head of the decay only; the tail is noise-dominated
    stop = int(np.argmin(keep)) if not keep.all() else x.size
    stop = max(stop, min(3, x.size))
    head = slice(0, stop)
    w = mag[head] ** 2

    if stop >= 2 and np.all(mag[head] > 0):
        alpha0 = float(np.polyfit(t[head], np.log(mag[head]), 1, w=np.sqrt(w))[0])
    else:
        alpha0 = sys.alpha
    if not alpha0 < 0:
        alpha0 = sys.alpha

    # phase relative to the spectral estimate, unwrapped along the head
    resid = np.unwrap(np.angle(x[head] * np.exp(-1j * delta_f * t[head])))
    if stop >= 2:
        slope, phi0 = np.polyfit(t[head], resid, 1, w=np.sqrt(w))
    else:
        slope, phi0 = 0.0, resid[0]
    phase = resid + delta_f * t[head]
    delta_f += slope

    if lever > 0:
        # intercept is K delta T_w modulo 2 pi; take the branch nearest the spectral estimate
        n = round((delta_f * lever - phi0) / (2 * np.pi))
        lever_t = lever + t[head]
        unwrapped = phase + 2 * np.pi * n
        delta0 = float(np.sum(w * lever_t * unwrapped) / np.sum(w * lever_t**2))
    else:
        delta0 = float(delta_f)

    g = atten * np.exp((1j * delta0 + alpha0) * t + 1j * delta0 * lever)
    c0 = float(np.real(np.vdot(g, x)) / np.real(np.vdot(g, g)))
    if not c0 > 0:
        c0 = float(mag[0] / atten)
    return c0, alpha0, delta0


def identifiability_limit(kind, sys: SpinSystem, grid: AcquisitionGrid) -> float:
    """Largest |delta| for which the GHZ phase offset cannot alias."""
    lever, _ = _model_constants(Strategy.parse(kind), sys, grid)
    if lever == 0:
        return math.pi / grid.t_sample
    return math.pi / (lever + grid.readout_length)


def fit_fid(trace: SignalTrace, kind, sys: SpinSystem, grid: AcquisitionGrid,
            init: EstimateResult | None = None, xtol: float = 1e-10, maxiter: int = 500,
            check_window: bool = True) -> EstimateResult:
    """Fit ``(c, alpha, delta)`` to a trace.

    Raises
    ------
    PhaseAmbiguityError
        For a GHZ trace whose fitted frequency leaves the window
        ``|delta| (K T_w + (M-1) t_s) < pi`` (only when ``check_window``).
    """
    kind = Strategy.parse(kind)
    if len(trace) != grid.n_samples or abs(trace.t_sample - grid.t_sample) > 1e-12 * grid.t_sample:
        raise ValueError("trace does not match the acquisition grid")
    lever, atten = _model_constants(kind, sys, grid)
    if init is None:
        c0, a0, d0 = initial_guess(trace, kind, sys, grid)
    else:
        c0, a0, d0 = init.c_hat, init.alpha_hat, init.delta_hat
    x = trace.values
    c, a, d, cost, iters, ok = kernels.lm_fit(
        np.ascontiguousarray(x.real), np.ascontiguousarray(x.imag),
        grid.t_sample, lever, atten, c0, a0, d0, xtol, maxiter,
    )
    if check_window and abs(d) >= identifiability_limit(kind, sys, grid):
        raise PhaseAmbiguityError(
            f"fitted delta={d:.6g} rad/s is outside the identifiable window "
            f"|delta| < {identifiability_limit(kind, sys, grid):.6g}"
        )
    ok = bool(ok and c > 0 and math.isfinite(cost))
    return EstimateResult(c, a, d, math.sqrt(cost), ok, int(iters))


def trial_seed(master_seed: int, index: int) -> int:
    """Per-trial 64-bit seed: SeedSequence(master) child ``index``."""
    ss = np.random.SeedSequence(int(master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def _run_trials(args):
    kind, sys, grid, params, master_seed, indices = args
    ideal = ideal_trace(kind, params, sys, grid)
    out = []
    for i in indices:
        noisy = add_noise(ideal, params.noise_sigma, trial_seed(master_seed, i))
        try:
            est = fit_fid(noisy, kind, sys, grid)
        except PhaseAmbiguityError:
            out.append(math.nan)
            continue
        out.append(est.delta_hat if est.converged else math.nan)
    return out


def monte_carlo(kind, sys: SpinSystem, grid: AcquisitionGrid, params: SignalParams,
                n_trials: int, seed: int, jobs: int = 1) -> MonteCarloReport:
    """Repeat noisy acquisitions, fit each, and compare the spread with the bound.

    Trial ``i`` draws its noise from :func:`trial_seed` ``(seed, i)``, so the
    report does not depend on ``jobs``. Reports with more than 5% failed fits
    are marked invalid.
    """
    kind = Strategy.parse(kind)
    if n_trials < 100:
        raise ValueError("n_trials must be at least 100")
    if jobs > 1:
        chunks = np.array_split(np.arange(n_trials), jobs)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_run_trials, [(kind, sys, grid, params, seed, c.tolist()) for c in chunks])
            deltas = np.array([d for part in parts for d in part])
    else:
        deltas = np.array(_run_trials((kind, sys, grid, params, seed, range(n_trials))))

    good = deltas[np.isfinite(deltas)]
    failures = int(n_trials - good.size)
    std = float(np.std(good, ddof=1)) if good.size > 1 else math.nan
    mean = float(np.mean(good)) if good.size else math.nan
    if params.noise_sigma > 0:
        crb_fn = crb_delta_ghz_closed if kind is Strategy.QUANTUM else crb_delta_std_closed
        crb = crb_fn(sys, grid, params.snr)
        eff = std / crb
    else:
        crb, eff = 0.0, math.nan
    return MonteCarloReport(
        n_trials=n_trials,
        delta_std_empirical=std,
        crb_delta=crb,
        efficiency=eff,
        failure_count=failures,
        delta_mean=mean,
        valid=failures <= 0.05 * n_trials,
    )

