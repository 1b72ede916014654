"""Ideal and noisy free-induction-decay traces for both sensing strategies."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import AcquisitionGrid, SignalParams, SpinSystem, Strategy, beta_rate


@dataclass(frozen=True, eq=False)
class SignalTrace:
    times: np.ndarray
    values: np.ndarray
    kind: Strategy
    is_noisy: bool = False

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if times.size >= 2:
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise ValueError("times must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-12 * max(abs(steps[0]), abs(times[-1])):
                raise ValueError("times must be uniformly spaced")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", Strategy.parse(self.kind))

    def __len__(self):
        return self.values.size

    @property
    def t_sample(self) -> float:
        return float(self.times[1] - self.times[0])

    def to_csv(self, path: str | Path | None = None, header_lines: list[str] | None = None) -> str:
        """Write ``m,t,re,im`` rows; optional ``#`` comment lines precede the header."""
        buf = io.StringIO()
        for line in header_lines or ():
            buf.write(f"# {line}\n")
        buf.write(f"# kind={self.kind.value}\n")
        buf.write("m,t,re,im\n")
        for m, (t, v) in enumerate(zip(self.times, self.values)):
            buf.write(f"{m},{t:.17g},{v.real:.17g},{v.imag:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path, is_noisy: bool = False) -> "SignalTrace":
        """Read a trace written by :meth:`to_csv` (a path or the CSV text itself)."""
        text = Path(source).read_text() if not str(source).lstrip().startswith(("#", "m,")) else str(source)
        kind = Strategy.CLASSICAL
        rows = []
        for line in text.splitlines():
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("kind="):
                        kind = Strategy.parse(tok[5:])
                continue
            if line.strip():
                rows.append(line)
        reader = csv.DictReader(rows)
        if reader.fieldnames != ["m", "t", "re", "im"]:
            raise ValueError(f"unexpected trace header {reader.fieldnames}")
        data = [(float(r["t"]), complex(float(r["re"]), float(r["im"]))) for r in reader]
        times = np.array([d[0] for d in data])
        values = np.array([d[1] for d in data], dtype=complex)
        return cls(times, values, kind, is_noisy)


def ideal_classical(params: SignalParams, sys: SpinSystem, grid: AcquisitionGrid) -> SignalTrace:
    """FID of uncoupled spins; the grid's wait time plays no role here."""
    t = grid.times
    values = params.amplitude * np.exp((1j * params.delta + sys.alpha) * t)
    return SignalTrace(t, values, Strategy.CLASSICAL)


def ideal_quantum(params: SignalParams, sys: SpinSystem, grid: AcquisitionGrid) -> SignalTrace:
    """FID of the central spin after a GHZ wait of ``grid.t_wait``.

    The readout starts with phase ``K * delta * t_wait`` and amplitude
    ``c * exp(beta * t_wait)``, then precesses at ``delta`` and decays at ``alpha``.
    """
    t = grid.times
    tw = grid.t_wait
    offset = 1j * sys.k_spins * params.delta * tw + beta_rate(sys) * tw
    values = params.amplitude * np.exp(offset + (1j * params.delta + sys.alpha) * t)
    return SignalTrace(t, values, Strategy.QUANTUM)


def ideal_trace(kind, params: SignalParams, sys: SpinSystem, grid: AcquisitionGrid) -> SignalTrace:
    if Strategy.parse(kind) is Strategy.QUANTUM:
        return ideal_quantum(params, sys, grid)
    return ideal_classical(params, sys, grid)


def add_noise(trace: SignalTrace, noise_sigma: float, seed: int) -> SignalTrace:
    """Add circular complex Gaussian noise, std ``noise_sigma`` per quadrature."""
    if trace.is_noisy:
        raise ValueError("trace already carries noise")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    draws = rng.standard_normal((2, len(trace)))
    values = trace.values + noise_sigma * (draws[0] + 1j * draws[1])
    return SignalTrace(trace.times, values, trace.kind, is_noisy=True)
