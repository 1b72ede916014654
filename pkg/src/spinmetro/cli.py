"""Command-line front end.

Every command reads the same configuration (see :mod:`spinmetro.config`),
writes plain-text files into ``--out`` and echoes the effective
configuration at the top of each file. Exit codes: 0 success, 1 validation
error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys as _sys
from dataclasses import replace
from pathlib import Path

from . import __version__, kernels
from .config import ConfigError, RunConfig, load_config, parse_list, system_summary
from .core import SignalParams, Strategy, parse_decoherence
from .estimation import monte_carlo, trial_seed
from .fisher import (
    SingularFisherError,
    crb_delta_ghz_closed,
    crb_delta_std_closed,
    fisher_matrix,
    log_crb_delta_ghz_closed,
    log_crb_delta_std_closed,
    max_r_infinity,
    ratio_discrete,
    ratio_r_infinity,
)
from .optimize import (
    BracketError,
    SweepRow,
    optimize_classical,
    optimize_quantum,
    sensitivity_unit,
    sweep,
)
from .oracle import OracleLimitError, equivalence_suite, run_protocol
from .signal import add_noise, ideal_classical, ideal_quantum

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class NumericalFailure(RuntimeError):
    pass


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _record(pairs) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in pairs)


# settings that cannot change any number are left out of file headers
_NOT_ECHOED = ("run.jobs=", "run.out=")


def _header(command: str, cfg: RunConfig) -> list[str]:
    return [f"spinmetro {command}"] + [ln for ln in cfg.echo() if not ln.startswith(_NOT_ECHOED)]


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _commented(command: str, cfg: RunConfig, body: str) -> str:
    return "".join(f"# {h}\n" for h in _header(command, cfg)) + body


# commands -----------------------------------------------------------------

def cmd_signal(cfg: RunConfig, out: Path) -> int:
    sys, grid, params = cfg.system, cfg.grid, cfg.signal
    header = _header("signal", cfg)
    written = []
    for idx, (name, fn) in enumerate((("classical", ideal_classical), ("quantum", ideal_quantum))):
        ideal = fn(params, sys, grid)
        noisy = add_noise(ideal, params.noise_sigma, trial_seed(cfg.seed, idx))
        for tag, trace in (("ideal", ideal), ("noisy", noisy)):
            path = out / f"signal_{name}_{tag}.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            trace.to_csv(path, header)
            written.append(path)
    print(f"{system_summary(sys)}; M={grid.n_samples} t_s={grid.t_sample} T_w={grid.t_wait:.6g} "
          f"sigma={params.noise_sigma}")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def crb_report(cfg: RunConfig) -> list[tuple[str, object]]:
    sys, grid, params = cfg.system, cfg.grid, cfg.signal
    if params.noise_sigma == 0:
        # bounds scale as sigma/c; report them at unit SNR
        params = replace(params, noise_sigma=params.amplitude)
    snr = params.snr
    std_closed = crb_delta_std_closed(sys, grid, snr)
    ghz_closed = crb_delta_ghz_closed(sys, grid, snr)
    std_f = fisher_matrix(Strategy.CLASSICAL, params, sys, grid)
    ghz_f = fisher_matrix(Strategy.QUANTUM, params, sys, grid)
    rel_std = abs(math.expm1(std_f.log_crb_delta - log_crb_delta_std_closed(sys, grid, snr)))
    rel_ghz = abs(math.expm1(ghz_f.log_crb_delta - log_crb_delta_ghz_closed(sys, grid, snr)))
    r_inf = ratio_r_infinity(sys, grid.t_wait)
    r_max, tw_opt = max_r_infinity(sys.k_spins, sys.p, sys.t2_star)
    verdict = "quantum strategy advantageous" if r_inf > 1 else "quantum strategy not advantageous"
    return [
        ("snr", snr),
        ("t_wait", grid.t_wait),
        ("crb_delta_std_closed", std_closed),
        ("crb_delta_std_fisher", std_f.crb_delta),
        ("crb_delta_std_rel_diff", rel_std),
        ("crb_delta_ghz_closed", ghz_closed),
        ("crb_delta_ghz_fisher", ghz_f.crb_delta),
        ("crb_delta_ghz_rel_diff", rel_ghz),
        ("crb_c_ghz", ghz_f.crb_c),
        ("crb_alpha_ghz", ghz_f.crb_alpha),
        ("ratio_discrete", ratio_discrete(sys, grid)),
        ("R_inf", r_inf),
        ("R_max", r_max),
        ("Tw_opt", tw_opt),
        ("verdict", verdict),
    ]


def cmd_crb(cfg: RunConfig, out: Path) -> int:
    rows = crb_report(cfg)
    body = _record(rows)
    _write(out / "crb_report.txt", _commented("crb", cfg, body))
    print(body, end="")
    values = dict(rows)
    if max(values["crb_delta_std_rel_diff"], values["crb_delta_ghz_rel_diff"]) > 1e-10:
        raise NumericalFailure("closed-form and Fisher-inversion bounds disagree beyond 1e-10")
    return EXIT_OK


def cmd_oracle_check(cfg: RunConfig, out: Path) -> int:
    o = cfg.values["oracle"]
    sys = cfg.system
    grid = replace(cfg.grid, t_sample=float(o["t_sample"]), n_samples=int(o["n_samples"]),
                   t_wait=float(o["t_wait"]))
    channels = [c.strip() for c in o["channels"].split(",") if c.strip()]
    checks = equivalence_suite(
        sys, cfg.signal.delta, grid,
        k_values=parse_list(o["k_values"], int),
        j_values=parse_list(o["j_values"]),
        channels=channels,
        tolerance=float(o["tolerance"]),
        k_max=int(o["k_max"]),
        reference=o["reference"],
    )
    # one representative pair of traces for external diffing
    k_vals, j_vals = parse_list(o["k_values"], int), parse_list(o["j_values"])
    if channels and k_vals and j_vals:
        model = {"uncorrelated": "uncorrelated", "collective": "collective", "central": "powerlaw"}
        ch = channels[0]
        rep = replace(sys, k_spins=max(k_vals), ising_j=j_vals[-1],
                      decoherence=parse_decoherence(model.get(ch, "uncorrelated"), 0.0))
        sim = run_protocol(rep, cfg.signal.delta, grid, ch, int(o["k_max"])).trace
        ref = ideal_quantum(SignalParams(1.0, 0.0, cfg.signal.delta), rep, grid)
        header = _header("oracle-check", cfg) + [f"{ch} K={rep.k_spins} J={rep.ising_j:g}"]
        out.mkdir(parents=True, exist_ok=True)
        sim.to_csv(out / "oracle_trace.csv", header + ["source=oracle"])
        ref.to_csv(out / "oracle_model_trace.csv", header + ["source=model"])
    lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name} max_deviation={c.max_deviation:.3e} "
             f"tolerance={c.tolerance:.1e}" for c in checks]
    failed = [c for c in checks if not c.passed]
    worst = max(checks, key=lambda c: c.max_deviation / c.tolerance)
    lines.append(f"summary passed={len(checks) - len(failed)} failed={len(failed)} "
                 f"worst={worst.name} max_deviation={worst.max_deviation:.3e}")
    body = "\n".join(lines) + "\n"
    _write(out / "oracle_check.txt", _commented("oracle-check", cfg, body))
    print(body, end="")
    if failed:
        raise NumericalFailure(f"{len(failed)} oracle checks failed")
    return EXIT_OK


def cmd_montecarlo(cfg: RunConfig, out: Path) -> int:
    sys, grid, params = cfg.system, cfg.grid, cfg.signal
    mc = cfg.values["montecarlo"]
    n_trials = int(mc["n_trials"])
    strategies = [s.strip() for s in mc["strategies"].split(",") if s.strip()]
    reports = {}
    for name in strategies:
        # same master seed for both strategies: paired noise draws
        rep = monte_carlo(name, sys, grid, params, n_trials, cfg.seed, jobs=cfg.jobs)
        reports[name] = rep
        _write(out / f"montecarlo_{name}.txt", rep.to_text(_header("montecarlo", cfg)))
        print(f"[{name}]\n{rep.to_text()}", end="")
    if len(reports) == 2 and params.noise_sigma > 0:
        ratio = reports["classical"].delta_std_empirical / reports["quantum"].delta_std_empirical
        r_inf = ratio_r_infinity(sys, grid.t_wait)
        summary = _record([
            ("std_ratio_empirical", ratio),
            ("R_inf", r_inf),
            ("ratio_discrete", ratio_discrete(sys, grid)),
            ("rel_diff_vs_R_inf", ratio / r_inf - 1.0),
        ])
        _write(out / "montecarlo_summary.txt", _commented("montecarlo", cfg, summary))
        print(summary, end="")
    invalid = [n for n, r in reports.items() if not r.valid]
    if invalid:
        raise NumericalFailure(f"more than 5% failed fits for {', '.join(invalid)}")
    return EXIT_OK


def _optimum_record(opt, sys, t_sample, snr) -> list:
    unit = sensitivity_unit(sys, t_sample, snr)
    return [
        ("k_spins", opt.k_spins),
        ("p", float(opt.p)),
        ("t_star", opt.t_star),
        ("t_wait_star", opt.t_wait_star),
        ("s_star", opt.s_star),
        ("t_star_over_t2", opt.t_star / sys.t2_star),
        ("t_wait_star_over_t2", opt.t_wait_star / sys.t2_star),
        ("s_star_normalized", opt.s_star / unit),
        ("agree", opt.agree),
    ]


def _optimize_settings(cfg):
    o = cfg.values["optimize"]
    return float(o["t_sample"]), float(o["snr"])


def cmd_optimize_std(cfg: RunConfig, out: Path) -> int:
    t_sample, snr = _optimize_settings(cfg)
    sys = cfg.system
    body = _record(_optimum_record(optimize_classical(sys, t_sample, snr), sys, t_sample, snr))
    _write(out / "optimize_std.txt", _commented("optimize-std", cfg, body))
    print(body, end="")
    return EXIT_OK


def cmd_optimize_ghz(cfg: RunConfig, out: Path) -> int:
    t_sample, snr = _optimize_settings(cfg)
    sys = cfg.system
    opt = optimize_quantum(sys, t_sample, snr)
    std = optimize_classical(sys, t_sample, snr)
    rec = _optimum_record(opt, sys, t_sample, snr) + [("s_star_std", std.s_star),
                                                      ("gain_vs_std", std.s_star / opt.s_star)]
    body = _record(rec)
    _write(out / "optimize_ghz.txt", _commented("optimize-ghz", cfg, body))
    print(body, end="")
    if not opt.agree:
        print("warning: multi-start optimisers disagree beyond tolerance", file=_sys.stderr)
    return EXIT_OK


def _read_sweep(path: Path, header: list[str]) -> tuple[list[str], set]:
    """Completed rows of an earlier run with the same configuration."""
    text = path.read_text()
    lines = text.split("\n")
    if not text.endswith("\n"):
        lines = lines[:-1]  # drop a row cut off mid-write
    lines = [ln for ln in lines if ln]
    comments = [ln[2:] for ln in lines if ln.startswith("# ")]
    if comments != header:
        raise ConfigError(f"{path} was written with a different configuration; choose another --out")
    body = [ln for ln in lines if not ln.startswith("#")]
    if not body or body[0] != ",".join(SweepRow.COLUMNS):
        raise ConfigError(f"{path} is not a sweep table")
    done = set()
    for ln in body[1:]:
        k, p = ln.split(",")[:2]
        done.add((int(k), float(p)))
    return body[1:], done


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    s = cfg.values["sweep"]
    ks = parse_list(s["k_values"], int)
    ps = parse_list(s["p_values"])
    t_sample, snr = float(s["t_sample"]), float(s["snr"])
    header = _header("sweep", cfg)
    path = out / "sweep.csv"
    done: set = set()
    kept: list[str] = []
    if path.exists():
        kept, done = _read_sweep(path, header)
    out.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write("".join(f"# {h}\n" for h in header))
        fh.write(",".join(SweepRow.COLUMNS) + "\n")
        for ln in kept:
            fh.write(ln + "\n")
        fh.flush()
        errors = []

        def emit(row: SweepRow):
            fh.write(row.csv_line() + "\n")
            fh.flush()
            if row.error:
                errors.append(row)
                print(f"cell K={row.K} p={row.p:g} failed: {row.error}", file=_sys.stderr)

        rows = sweep(ks, ps, cfg.system, t_sample, snr, jobs=cfg.jobs, skip=done, on_row=emit)
    print(f"wrote {path} ({len(kept)} rows reused, {len(rows)} computed, {len(errors)} failed)")
    return EXIT_NUMERIC if errors else EXIT_OK


COMMANDS = {
    "signal": cmd_signal,
    "crb": cmd_crb,
    "oracle-check": cmd_oracle_check,
    "montecarlo": cmd_montecarlo,
    "optimize-std": cmd_optimize_std,
    "optimize-ghz": cmd_optimize_ghz,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI-style configuration file")
    common.add_argument("--out", type=Path, help="output directory (default: run.out)")
    common.add_argument("--seed", type=int, help="master seed, unsigned 64-bit")
    common.add_argument("--jobs", type=int, help="worker processes for sweep and montecarlo")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration value (repeatable)")
    parser = argparse.ArgumentParser(prog="spinmetro", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"spinmetro {__version__} (kernels: {kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {}
        for item in args.overrides:
            key, sep, val = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
            overrides[key.strip()] = val
        for flag, key in (("seed", "run.seed"), ("jobs", "run.jobs"), ("out", "run.out")):
            if getattr(args, flag) is not None:
                overrides[key] = str(getattr(args, flag))
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, cfg.out)
    except (ConfigError, OracleLimitError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=_sys.stderr)
        return EXIT_IO
    except (NumericalFailure, SingularFisherError, BracketError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
