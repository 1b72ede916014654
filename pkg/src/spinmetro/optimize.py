"""Sensitivity per root bandwidth for repeated runs and its optimisation.

A run of slice length ``T`` is repeated ``T_tot / T`` times, so the
uncertainty over ``T_tot`` is ``S / sqrt(T_tot)`` with ``S = sqrt(T) * CRB(T)``.
The GHZ slice spends ``T_w`` silently and reads out for ``T - T_w``. The
bounds inside ``S`` use the continuous-time approximation of the sampled
sums, ``sum_m f(m t_s) ~ (1/t_s) * integral f(t) dt``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .core import PowerLaw, SpinSystem, beta_rate
from .fisher import log_ratio_r_infinity, max_r_infinity

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
N_SCAN = 64


class BracketError(RuntimeError):
    """The minimum was not enclosed by the search interval."""


@dataclass(frozen=True)
class ScalarMinimum:
    x: float
    fx: float
    iterations: int
    unimodal: bool


@dataclass(frozen=True)
class OptimumReport:
    t_star: float
    t_wait_star: float
    s_star: float
    k_spins: int
    p: float
    agree: bool = True
    starts: tuple = field(default=(), compare=False)


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float,
                   maxiter: int = 500) -> tuple[float, float, int]:
    """Minimise a unimodal ``f`` on ``[lo, hi]`` to an interval width ``tol``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < maxiter:
        it += 1
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc <= fd else (d, fd)
    return x, fx, it


def minimize_bracketed(f: Callable[[float], float], lo: float, hi: float, tol: float,
                       n_scan: int = N_SCAN) -> ScalarMinimum:
    """Coarse scan, then golden-section inside the best scan cell.

    The scan also checks unimodality; endpoints win when they are as good as
    the interior optimum up to rounding, so boundary minima come out exactly.
    """
    xs = np.linspace(lo, hi, n_scan)
    fs = np.array([f(x) for x in xs])
    if not np.any(np.isfinite(fs)):
        raise BracketError(f"objective is not finite anywhere on [{lo}, {hi}]")
    interior = (fs[1:-1] < fs[:-2]) & (fs[1:-1] < fs[2:])
    unimodal = int(np.count_nonzero(interior)) <= 1
    i = int(np.argmin(fs))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, n_scan - 1)]
    x, fx, it = golden_section(f, float(a), float(b), tol)
    for edge in (lo, hi):
        fe = f(edge)
        # ties within rounding go to the edge
        if fe <= fx + 4 * np.finfo(float).eps * max(1.0, abs(fx)):
            x, fx = edge, fe
    return ScalarMinimum(float(x), float(fx), it, unimodal)


def _readout_integral(offset: float, rate: float, length: float) -> float:
    """integral_0^L (offset + t)^2 exp(-2 rate t) dt for rate > 0."""
    if length <= 0:
        return 0.0
    z = 2.0 * rate * length
    if z < 1e-2:
        # series in (-2 rate t); the closed form cancels catastrophically here
        total, coef = 0.0, 1.0
        for n in range(10):
            total += coef * (offset**2 * length ** (n + 1) / (n + 1)
                             + 2 * offset * length ** (n + 2) / (n + 2)
                             + length ** (n + 3) / (n + 3))
            coef *= -2.0 * rate / (n + 1)
        return total

    def head(y):
        return y * y / (2 * rate) + y / (2 * rate**2) + 1 / (4 * rate**3)

    return head(offset) - math.exp(-z) * head(offset + length)


def _log_s(T: float, lever: float, log_att: float, readout: float, rate: float,
           t_sample: float, snr: float) -> float:
    integral = _readout_integral(lever, rate, readout)
    if not integral > 0:
        return math.inf
    return 0.5 * math.log(T) - log_att + 0.5 * math.log(t_sample) - 0.5 * math.log(integral) - math.log(snr)


def _exp(x: float) -> float:
    return math.inf if x > 709 else math.exp(x)


def s_classical(T: float, sys: SpinSystem, t_sample: float, snr: float) -> float:
    """Sensitivity of repeated uncoupled-spin FIDs of length ``T``."""
    if not T > t_sample:
        raise ValueError(f"slice time {T} must exceed the sampling time {t_sample}")
    return _exp(_log_s(T, 0.0, 0.0, T, -sys.alpha, t_sample, snr))


def s_quantum(T: float, t_wait: float, sys: SpinSystem, t_sample: float, snr: float) -> float:
    """Sensitivity of repeated GHZ runs: silent wait ``t_wait``, readout ``T - t_wait``."""
    if not 0 <= t_wait < T:
        raise ValueError(f"need 0 <= t_wait < T, got t_wait={t_wait}, T={T}")
    return _s_quantum(T, t_wait, sys, t_sample, snr)


def _log_s_quantum(T, t_wait, sys, t_sample, snr):
    lever = sys.k_spins * t_wait
    log_att = beta_rate(sys) * t_wait
    return _log_s(T, lever, log_att, T - t_wait, -sys.alpha, t_sample, snr)


def _s_quantum(T, t_wait, sys, t_sample, snr):
    return _exp(_log_s_quantum(T, t_wait, sys, t_sample, snr))


def sensitivity_unit(sys: SpinSystem, t_sample: float, snr: float) -> float:
    """``sqrt(t_s) |alpha| sigma / c``: the natural scale of ``S``."""
    return math.sqrt(t_sample) * abs(sys.alpha) / snr


def optimize_classical(sys: SpinSystem, t_sample: float, snr: float,
                       t_max_factor: float = 10.0, tol_factor: float = 1e-6) -> OptimumReport:
    t2 = sys.t2_star
    lo, hi = t_sample, t_max_factor * t2
    if not hi > lo:
        raise BracketError("sampling time exceeds the search interval")
    best = minimize_bracketed(lambda T: _s_quantum(T, 0.0, sys, t_sample, snr) if T > 0 else math.inf,
                              lo, hi, tol_factor * t2)
    if best.x in (lo, hi):
        raise BracketError(f"optimal slice time sits on the search boundary ({best.x})")
    return OptimumReport(best.x, 0.0, best.fx, sys.k_spins, sys.p)


def _inner_wait(T, sys, t_sample, snr, tw_max, tol):
    hi = min(tw_max, T)
    if hi <= 0:
        return ScalarMinimum(0.0, _s_quantum(T, 0.0, sys, t_sample, snr), 0, True)
    return minimize_bracketed(lambda tw: _s_quantum(T, tw, sys, t_sample, snr) if tw < T else math.inf,
                              0.0, hi, tol)


def optimize_quantum(sys: SpinSystem, t_sample: float, snr: float, t_max_factor: float = 10.0,
                     tw_max_factor: float = 5.0, tol_factor: float = 1e-6,
                     cross_check: bool = True) -> OptimumReport:
    """Minimise the GHZ sensitivity over slice time and wait time.

    Nested golden-section (wait time inside slice time) gives the result.
    With ``cross_check`` a Nelder-Mead descent is also started from the four
    corners of the search box; ``agree`` is false if any start ends more than
    the tolerance away from the best value found, and a start that beats the
    nested result by more than that replaces it.
    """
    if sys.k_spins == 1:
        # no satellites: the wait only costs coherence, both strategies coincide
        return optimize_classical(sys, t_sample, snr, t_max_factor, tol_factor)
    t2 = sys.t2_star
    tol = tol_factor * t2
    tw_max = tw_max_factor * t2
    lo, hi = t_sample, t_max_factor * t2

    def outer(T):
        if not T > 0:
            return math.inf
        return _inner_wait(T, sys, t_sample, snr, tw_max, tol).fx

    best = minimize_bracketed(outer, lo, hi, tol)
    if best.x == hi:
        raise BracketError("optimal slice time sits on the upper search boundary")
    inner = _inner_wait(best.x, sys, t_sample, snr, tw_max, tol)
    t_star, tw_star, s_star = best.x, inner.x, inner.fx

    starts = []
    agree = True
    if cross_check:
        def obj(v):
            T = math.exp(v[0])
            tw = T / (1.0 + math.exp(-v[1]))
            val = _log_s_quantum(T, tw, sys, t_sample, snr)
            return val if math.isfinite(val) else 1e300

        log_best = math.log(s_star)
        for T0 in (2 * lo, hi):
            for tw0 in (0.0, tw_max):
                frac = min(max(tw0 / T0, 1e-3), 0.9)
                v0 = [math.log(T0), math.log(frac / (1 - frac))]
                for _ in range(4):
                    # restarting from the end point rebuilds a collapsed simplex
                    res = minimize(obj, v0, method="Nelder-Mead",
                                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
                    if np.allclose(res.x, v0, rtol=0, atol=1e-9):
                        break
                    v0 = res.x
                T = math.exp(res.x[0])
                tw = T / (1.0 + math.exp(-res.x[1]))
                starts.append((T, tw, _exp(float(res.fun)), bool(res.success)))
                log_best = min(log_best, float(res.fun))
        agree = all(math.log(s) <= log_best + tol_factor for _, _, s, _ in starts)
        cand = min(starts, key=lambda r: r[2])
        if cand[2] < s_star * (1 - tol_factor):
            t_star, tw_star, s_star = cand[0], cand[1], cand[2]
            agree = False
    return OptimumReport(t_star, tw_star, s_star, sys.k_spins, sys.p, agree, tuple(starts))


def maximize_ratio_numeric(sys: SpinSystem, tw_max_factor: float = 5.0,
                           tol_factor: float = 1e-10) -> tuple[float, float]:
    """Numerical maximum of the full-decay ratio over the wait time."""
    t2 = sys.t2_star
    best = minimize_bracketed(lambda tw: -log_ratio_r_infinity(sys, tw), 0.0, tw_max_factor * t2,
                              tol_factor * t2)
    return math.exp(-best.fx), best.x


@dataclass(frozen=True)
class SweepRow:
    K: int
    p: float
    R_max: float
    Tw_opt_ratio: float
    S_star_ghz: float
    T_star: float
    Tw_star: float
    error: str = ""

    COLUMNS = ("K", "p", "R_max", "Tw_opt_ratio", "S_star_ghz", "T_star", "Tw_star")

    def csv_line(self) -> str:
        return ",".join([str(self.K), f"{self.p:.17g}"] +
                        [f"{getattr(self, c):.17g}" for c in self.COLUMNS[2:]])


def sweep_cell(k: int, p: float, template: SpinSystem, t_sample: float, snr: float) -> SweepRow:
    """One (K, p) cell; times in units of T2*, S in units of sqrt(t_s)|alpha|sigma/c."""
    try:
        sys = replace(template, k_spins=int(k), decoherence=PowerLaw(float(p)))
        t2 = sys.t2_star
        r_max, tw_opt = max_r_infinity(sys.k_spins, float(p), t2)
        opt = optimize_quantum(sys, t_sample, snr)
        unit = sensitivity_unit(sys, t_sample, snr)
        return SweepRow(int(k), float(p), r_max, tw_opt / t2, opt.s_star / unit,
                        opt.t_star / t2, opt.t_wait_star / t2)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        nan = math.nan
        return SweepRow(int(k), float(p), nan, nan, nan, nan, nan, error=f"{type(exc).__name__}: {exc}")


def _cell_args(args):
    return sweep_cell(*args)


def sweep(k_values, p_values, template: SpinSystem, t_sample: float, snr: float, jobs: int = 1,
          skip: set | None = None, on_row: Callable[[SweepRow], None] | None = None) -> list[SweepRow]:
    """Evaluate every (K, p) cell in K-major order.

    ``skip`` holds ``(K, p)`` pairs already done; ``on_row`` sees each new row
    in order, whatever ``jobs`` is.
    """
    if not len(k_values) or not len(p_values):
        raise ValueError("sweep grids must be non-empty")
    skip = skip or set()
    cells = [(int(k), float(p)) for k in k_values for p in p_values if (int(k), float(p)) not in skip]
    args = [(k, p, template, t_sample, snr) for k, p in cells]
    rows = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_cell_args, args)
            for row in results:
                rows.append(row)
                if on_row:
                    on_row(row)
    else:
        for a in args:
            row = sweep_cell(*a)
            rows.append(row)
            if on_row:
                on_row(row)
    return rows
