"""Run configuration: an INI-style ``key = value`` file with sections.

Precedence is command-line flags, then the file, then :data:`DEFAULTS`.
Unknown sections or keys are rejected before anything is computed.

Example::

    [system]
    k_spins = 10
    decoherence = powerlaw
    p = 0.11

    [grid]
    t_sample = 0.02
    n_samples = 512
    t_wait = auto

Lists are comma separated; ``start:stop:step`` expands to an inclusive range.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path

from .core import AcquisitionGrid, SignalParams, SpinSystem, decoherence_name, parse_decoherence
from .fisher import max_r_infinity


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict[str, str]] = {
    "system": {
        "k_spins": "10",
        "gamma_ratio": "1.0",
        "ising_j": "0.0",
        "t2_star": "1.0",
        "decoherence": "powerlaw",
        "p": "0.11",
    },
    "grid": {"t_sample": "0.02", "n_samples": "512", "t_wait": "auto"},
    "signal": {"amplitude": "1.0", "noise_sigma": "0.01", "delta": "0.1"},
    "montecarlo": {"n_trials": "1000", "strategies": "classical,quantum"},
    "optimize": {"t_sample": "0.001", "snr": "1.0"},
    "sweep": {"k_values": "1,2,4,8,16,32,64", "p_values": "0:2:0.1", "t_sample": "0.001", "snr": "1.0"},
    "oracle": {
        "k_max": "10",
        "k_values": "1:6:1",
        "channels": "uncorrelated,collective",
        "j_values": "0,0.3",
        "t_wait": "0.1",
        "n_samples": "200",
        "t_sample": "0.01",
        "tolerance": "1e-8",
        "reference": "matched",
    },
    "run": {"seed": "12345", "jobs": "1", "out": "run_out"},
}


def parse_list(text: str, cast=float) -> list:
    text = text.strip()
    if not text:
        return []
    if ":" in text and "," not in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(x) for x in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"bad range {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 12) for i in range(n)]
    else:
        values = [float(x) for x in text.split(",") if x.strip()]
    if cast is int:
        if any(v != int(v) for v in values):
            raise ConfigError(f"expected integers in {text!r}")
        return [int(v) for v in values]
    return [cast(v) for v in values]


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def get(self, section: str, key: str) -> str:
        return self.values[section][key]

    def echo(self) -> list[str]:
        return [f"{sec}.{key}={val}" for sec, keys in self.values.items() for key, val in keys.items()]

    # typed views -----------------------------------------------------------

    @property
    def system(self) -> SpinSystem:
        s = self.values["system"]
        model = parse_decoherence(s["decoherence"], float(s["p"]))
        return SpinSystem(int(s["k_spins"]), float(s["gamma_ratio"]), float(s["ising_j"]),
                          float(s["t2_star"]), model)

    @property
    def grid(self) -> AcquisitionGrid:
        g = self.values["grid"]
        return AcquisitionGrid(float(g["t_sample"]), int(g["n_samples"]), self.t_wait)

    @property
    def t_wait(self) -> float:
        raw = self.values["grid"]["t_wait"].strip().lower()
        if raw == "auto":
            sys = self.system
            return max_r_infinity(sys.k_spins, sys.p, sys.t2_star)[1]
        return float(raw)

    @property
    def signal(self) -> SignalParams:
        s = self.values["signal"]
        return SignalParams(float(s["amplitude"]), float(s["noise_sigma"]), float(s["delta"]))

    @property
    def seed(self) -> int:
        return int(self.values["run"]["seed"])

    @property
    def jobs(self) -> int:
        return int(self.values["run"]["jobs"])

    @property
    def out(self) -> Path:
        return Path(self.values["run"]["out"])

    def validate(self) -> "RunConfig":
        try:
            self.system
            self.grid
            self.signal
            if self.seed < 0 or self.seed >= 2**64:
                raise ConfigError("seed must fit in an unsigned 64-bit integer")
            if self.jobs < 1:
                raise ConfigError("jobs must be >= 1")
            mc = self.values["montecarlo"]
            if int(mc["n_trials"]) < 1:
                raise ConfigError("montecarlo.n_trials must be positive")
            strategies = [x.strip() for x in mc["strategies"].split(",") if x.strip()]
            if not set(strategies) <= {"classical", "quantum"} or not strategies:
                raise ConfigError(f"unknown strategies {strategies}")
            for sec in ("optimize", "sweep"):
                if not float(self.values[sec]["t_sample"]) > 0 or not float(self.values[sec]["snr"]) > 0:
                    raise ConfigError(f"{sec}.t_sample and {sec}.snr must be positive")
            ks = parse_list(self.values["sweep"]["k_values"], int)
            ps = parse_list(self.values["sweep"]["p_values"])
            if not ks or not ps or min(ks) < 1 or min(ps) < 0 or max(ps) > 2:
                raise ConfigError("sweep grids must be non-empty with K >= 1 and p in [0, 2]")
            o = self.values["oracle"]
            if int(o["k_max"]) < 1:
                raise ConfigError("oracle.k_max must be positive")
            parse_list(o["k_values"], int)
            parse_list(o["j_values"])
            for ch in (x.strip() for x in o["channels"].split(",")):
                if ch not in ("uncorrelated", "collective", "central"):
                    raise ConfigError(f"unknown oracle channel {ch!r}")
            AcquisitionGrid(float(o["t_sample"]), int(o["n_samples"]), float(o["t_wait"]))
            float(o["tolerance"])
            if o["reference"] not in ("matched", "system"):
                raise ConfigError("oracle.reference must be 'matched' or 'system'")
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        return self


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Merge defaults, an optional file and ``section.key -> value`` overrides."""
    values = {sec: dict(keys) for sec, keys in DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        text = Path(path).read_text()
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for sec in parser.sections():
            if sec not in values:
                raise ConfigError(f"{path}: unknown section [{sec}]")
            for key, val in parser.items(sec):
                if key not in values[sec]:
                    raise ConfigError(f"{path}: unknown key {sec}.{key}")
                values[sec][key] = val.strip()
    for dotted, val in (overrides or {}).items():
        sec, _, key = dotted.partition(".")
        if sec not in values or key not in values[sec]:
            raise ConfigError(f"unknown setting {dotted}")
        values[sec][key] = str(val).strip()
    return RunConfig(values).validate()


def system_summary(sys: SpinSystem) -> str:
    return (f"K={sys.k_spins} gamma={sys.gamma_ratio} J={sys.ising_j} T2*={sys.t2_star} "
            f"model={decoherence_name(sys.decoherence)} p={sys.p}")

