"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""

import filecmp
import math
import time

import numpy as np
import pytest

from spinmetro import AcquisitionGrid, Collective, PowerLaw, SignalParams, SpinSystem, Uncorrelated
from spinmetro.cli import main
from spinmetro.core import infer_power_exponent
from spinmetro.estimation import monte_carlo
from spinmetro.fisher import (
    fisher_matrix,
    log_crb_delta_ghz_closed,
    log_crb_delta_std_closed,
    log_ratio_discrete,
    log_ratio_r_infinity,
    max_r_infinity,
    max_r_infinity_closed,
)
from spinmetro.optimize import maximize_ratio_numeric, optimize_classical, optimize_quantum, sensitivity_unit
from spinmetro.oracle import equivalence_suite


@pytest.fixture
def verdict(record_property):
    def record(number, ok, detail):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
        record_property("acceptance", line)
        print(line)
        assert ok, line

    return record


def test_criterion_01_closed_forms_match_fisher_inversion(verdict):
    rng = np.random.default_rng(20240101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 65))
        p = float(rng.uniform(0, 2))
        tw = float(rng.uniform(0, 5))
        m = int(rng.integers(16, 2049))
        snr = float(10 ** rng.uniform(1, 4))
        ts = float(10 ** rng.uniform(-3, math.log10(0.05)))
        sys = SpinSystem(k, decoherence=PowerLaw(p))
        grid = AcquisitionGrid(ts, m, tw)
        params = SignalParams(1.0, 1.0 / snr, float(rng.uniform(-1, 1)))
        # log space: at large K and T_w the GHZ bound itself overflows a double
        for kind, closed in (("quantum", log_crb_delta_ghz_closed), ("classical", log_crb_delta_std_closed)):
            diff = fisher_matrix(kind, params, sys, grid).log_crb_delta - closed(sys, grid, snr)
            worst = max(worst, abs(math.expm1(diff)))
    elapsed = time.perf_counter() - start
    verdict(1, worst < 1e-10 and elapsed < 10,
            f"max relative deviation {worst:.2e} over 200 cases x 2 strategies (tol 1e-10), {elapsed:.2f} s")


def test_criterion_02_oracle_equivalence(verdict):
    start = time.perf_counter()
    grid = AcquisitionGrid(0.01, 200, 0.05)
    checks = equivalence_suite(SpinSystem(t2_star=1.0), 1.3, grid, range(2, 7), (0.0, 0.3),
                               ("uncorrelated", "collective"), tolerance=1e-8)
    elapsed = time.perf_counter() - start
    traces = [c for c in checks if c.name.startswith("trace")]
    worst = max(c.max_deviation for c in traces)
    ok = len(traces) == 20 and all(c.passed for c in checks) and elapsed < 30
    verdict(2, ok, f"{len(traces)} traces, max |oracle - model| {worst:.2e} (tol 1e-8), "
                   f"{sum(c.passed for c in checks)}/{len(checks)} checks, {elapsed:.2f} s")


def test_criterion_03_standard_optimum_constants(verdict):
    sys = SpinSystem()
    start = time.perf_counter()
    opt = optimize_classical(sys, 1e-3, 1.0)
    elapsed = time.perf_counter() - start
    t_ratio = opt.t_star / sys.t2_star
    s_norm = opt.s_star / sensitivity_unit(sys, 1e-3, 1.0)
    ok = abs(t_ratio - 1.69) <= 0.01 and abs(s_norm - 3.21) <= 0.01 and elapsed < 1
    verdict(3, ok, f"T*/T2* = {t_ratio:.6f}, S* = {s_norm:.6f} (expected 1.69, 3.21 +- 0.01), {elapsed * 1e3:.1f} ms")


def test_criterion_04_ratio_law_vs_discrete_sums(verdict):
    ts = 1e-3
    grid_len = int(round(10.0 / ts)) + 1
    worst, where = 0.0, None
    for k in (2, 8, 32):
        for p in (0.0, 0.11, 0.5, 1.0, 2.0):
            sys = SpinSystem(k, decoherence=PowerLaw(p))
            for tw in (0.1, 0.5, 1.0, 2.0):
                grid = AcquisitionGrid(ts, grid_len, tw)
                dev = abs(math.expm1(log_ratio_discrete(sys, grid) - log_ratio_r_infinity(sys, tw)))
                if dev > worst:
                    worst, where = dev, (k, p, tw)
    verdict(4, worst < 0.01, f"max relative deviation {worst:.2e} at (K, p, T_w) = {where} (tol 1e-2)")


def test_criterion_05_maximum_ratio_closed_form(verdict):
    worst = 0.0
    for k in range(2, 65):
        for p in (0.0, 0.11, 0.5, 0.9):
            r_num, _ = maximize_ratio_numeric(SpinSystem(k, decoherence=PowerLaw(p)))
            worst = max(worst, abs(r_num / max_r_infinity_closed(k, p)[0] - 1))
    sup = []
    for k in range(2, 65):
        for p in (1.0, 1.5, 2.0):
            r_num, tw = maximize_ratio_numeric(SpinSystem(k, decoherence=PowerLaw(p)))
            sup.append((abs(r_num - 1.0), tw, max_r_infinity(k, p)))
    sup_ok = all(d == 0.0 and tw == 0.0 and branch == (1.0, 0.0) for d, tw, branch in sup)
    worst_tw = max(tw for _, tw, _ in sup)
    verdict(5, worst < 1e-6 and sup_ok,
            f"p<1: max relative deviation {worst:.2e} (tol 1e-6); p>=1: supremum exactly 1 at T_w = {worst_tw:g} in {len(sup)} cases")


def test_criterion_06_asymptotic_scaling(verdict):
    k = 2**16
    parts, ok = [], True
    for p in (0.0, 0.5):
        r, _ = max_r_infinity_closed(k, p)
        derived = r / (math.sqrt(2) / math.e * k ** (1 - p))
        printed = r / (math.sqrt(2) / math.e * k ** (p - 1))
        ok &= 0.99 <= derived <= 1.01
        parts.append(f"p={p}: R/((sqrt2/e)K^(1-p)) = {derived:.6f}, "
                     f"with the printed exponent K^(p-1) the ratio would be {printed:.4g}")
    verdict(6, ok, "; ".join(parts))


def test_criterion_07_monte_carlo_efficiency(verdict):
    start = time.perf_counter()
    t2 = 1.0
    params = SignalParams(1.0, 0.01, 0.1)
    std_sys = SpinSystem(1, t2_star=t2)
    std_grid = AcquisitionGrid(t2 / 50, 512)
    classical = monte_carlo("classical", std_sys, std_grid, params, 1000, 12345)
    ghz_sys = SpinSystem(10, t2_star=t2, decoherence=PowerLaw(0.11))
    tw = max_r_infinity(10, 0.11, t2)[1]
    ghz_grid = AcquisitionGrid(t2 / 50, 512, tw)
    classical_k10 = monte_carlo("classical", ghz_sys, ghz_grid, params, 1000, 12345)
    quantum = monte_carlo("quantum", ghz_sys, ghz_grid, params, 1000, 12345)
    elapsed = time.perf_counter() - start
    r_inf = math.exp(log_ratio_r_infinity(ghz_sys, tw))
    ratio = classical_k10.delta_std_empirical / quantum.delta_std_empirical
    ok = (1.0 <= classical.efficiency <= 1.1 and abs(ratio / r_inf - 1) <= 0.05
          and classical.valid and quantum.valid and elapsed < 300)
    verdict(7, ok, f"classical efficiency {classical.efficiency:.4f} (window [1.0, 1.1]); "
                   f"std ratio {ratio:.4f} vs R_inf {r_inf:.4f} ({100 * (ratio / r_inf - 1):+.2f}%, tol 5%); "
                   f"failures {classical.failure_count}/{quantum.failure_count}; {elapsed:.1f} s")


def test_criterion_08_collective_boundary_and_small_p_gain(verdict):
    ts, snr = 1e-3, 1.0
    near = optimize_quantum(SpinSystem(13, decoherence=PowerLaw(1.99)), ts, snr)
    small = SpinSystem(13, decoherence=PowerLaw(0.11))
    s_ghz = optimize_quantum(small, ts, snr).s_star
    s_std = optimize_classical(small, ts, snr).s_star
    ok = near.t_wait_star < 0.02 and abs(near.t_star - 1.69) <= 0.02 and s_ghz < 0.5 * s_std
    verdict(8, ok, f"p=1.99: T_w* = {near.t_wait_star:.2e}, T* = {near.t_star:.5f}; "
                   f"p=0.11: S*_GHZ/S*_STD = {s_ghz / s_std:.4f} (< 0.5)")


def test_criterion_09_exponent_inference(verdict):
    p = infer_power_exponent(0.37, 0.28, 13)
    verdict(9, abs(p - 0.11) <= 0.005, f"p = {p:.6f} (expected 0.11 +- 0.005)")


DETERMINISM_CFG = """\
[montecarlo]
n_trials = 200
[sweep]
k_values = 1,4,16
p_values = 0,0.5,1,1.5
[signal]
noise_sigma = 0.05
"""


def test_criterion_10_determinism(tmp_path, verdict):
    cfg = tmp_path / "run.ini"
    cfg.write_text(DETERMINISM_CFG)
    commands = ["signal", "crb", "oracle-check", "montecarlo", "optimize-std", "optimize-ghz", "sweep"]
    codes = []
    for run in ("a", "b"):
        for cmd in commands:
            codes.append(main([cmd, "--config", str(cfg), "--out", str(tmp_path / run), "--seed", "12345"]))
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = [filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False) for f in files]
    ok = all(c == 0 for c in codes) and all(same) and len(files) >= 13
    verdict(10, ok, f"{sum(same)}/{len(files)} output files byte-identical across reruns of {len(commands)} commands")
