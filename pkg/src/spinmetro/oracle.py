"""Brute-force density-matrix simulation of one star-topology molecule.

Spin A is the first tensor factor (most significant bit of the basis index).
``|0>`` is the +1/2 eigenstate of sigma_z. The Hamiltonian and every
dephasing operator are diagonal in the computational basis, so a state
evolves element by element:

    rho_ij(t) = rho_ij(0) * exp(-i (E_i - E_j) t) * exp(Gamma_ij t)

with ``Gamma_ij = -sum_k kappa/2 (l_ki - l_kj)**2`` for diagonal Lindblad
operators ``L_k = sqrt(kappa) diag(l_k)``. ``kappa = 2|alpha|`` makes a lone
spin's coherence decay as ``exp(alpha t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    AcquisitionGrid,
    Collective,
    PowerLaw,
    SignalParams,
    SpinSystem,
    Strategy,
    Uncorrelated,
    beta_rate,
)
from .signal import SignalTrace, ideal_classical, ideal_quantum

K_MAX_DEFAULT = 10

_HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)

CHANNELS = ("uncorrelated", "collective", "central")


class OracleLimitError(ValueError):
    """Requested molecule is larger than the configured memory guard."""


class UnsupportedChannelError(ValueError):
    """No microscopic dephasing channel exists for this decoherence model."""


@dataclass(frozen=True, eq=False)
class DensityState:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def k_spins(self) -> int:
        return int(round(math.log2(self.dim)))

    def check(self, tol: float = 1e-12, psd_tol: float = 1e-10) -> None:
        """Raise ``ValueError`` unless Hermitian, unit trace and positive semidefinite."""
        rho = self.matrix
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > tol:
            raise ValueError(f"state is not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(rho)
        if abs(tr - 1.0) > tol:
            raise ValueError(f"state trace is {tr}")
        lowest = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
        if lowest < -psd_tol:
            raise ValueError(f"state has negative eigenvalue {lowest:.3g}")


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    trace: SignalTrace
    ghz_coherence_decay: float
    ghz_phase: float
    satellite_deviation: float


def _guard(k: int, k_max: int) -> None:
    if k > k_max:
        raise OracleLimitError(f"K={k} exceeds the oracle limit K_max={k_max}")


def _spin_values(k: int) -> np.ndarray:
    """(2**k, k) array of sigma_z eigenvalues, +1/2 for |0>."""
    idx = np.arange(2**k)[:, None]
    bits = (idx >> (k - 1 - np.arange(k))[None, :]) & 1
    return 0.5 - bits


def energies(sys: SpinSystem, delta: float, k_max: int = K_MAX_DEFAULT) -> np.ndarray:
    _guard(sys.k_spins, k_max)
    s = _spin_values(sys.k_spins)
    s_a, s_b = s[:, 0], s[:, 1:].sum(axis=1)
    return sys.gamma_ratio * delta * s_a + delta * s_b + sys.ising_j * s_a * s_b


def build_hamiltonian(sys: SpinSystem, delta: float, k_max: int = K_MAX_DEFAULT) -> np.ndarray:
    """Star-topology Ising Hamiltonian (hbar = 1) as a dense diagonal matrix."""
    return np.diag(energies(sys, delta, k_max)).astype(complex)


def channel_for(sys: SpinSystem) -> str:
    """Microscopic channel reproducing the system's GHZ scaling law."""
    model = sys.decoherence
    if isinstance(model, Uncorrelated):
        return "uncorrelated"
    if isinstance(model, Collective):
        return "collective"
    if isinstance(model, PowerLaw) and model.p in (0.0, 1.0, 2.0):
        return {0.0: "central", 1.0: "uncorrelated", 2.0: "collective"}[model.p]
    raise UnsupportedChannelError(
        f"no Lindblad channel for power-law exponent p={model.exponent}; only p in {{0, 1, 2}}"
    )


def _lindblad_weights(channel: str, k: int) -> np.ndarray:
    if channel == "uncorrelated":
        return np.eye(k)
    if channel == "collective":
        return np.ones((1, k))
    if channel == "central":
        w = np.zeros((1, k))
        w[0, 0] = 1.0
        return w
    raise UnsupportedChannelError(f"unknown channel {channel!r}; expected one of {CHANNELS}")


def _generator_terms(sys: SpinSystem, delta: float, channel: str, k_max: int):
    """Per-basis-state energies and Lindblad eigenvalues ``l[k_op, i]``."""
    e = energies(sys, delta, k_max)
    lvals = _lindblad_weights(channel, sys.k_spins) @ _spin_values(sys.k_spins).T
    return e, lvals


def _factors(e, lvals, alpha, rows, cols, t):
    """Closed-form propagation factors for the (rows, cols) elements after time t."""
    t = np.asarray(t, dtype=float)
    de = e[rows] - e[cols]
    dl2 = np.sum((lvals[:, rows] - lvals[:, cols]) ** 2, axis=0)
    # kappa/2 = |alpha|, so Gamma = alpha * sum (l_i - l_j)^2
    return np.exp(np.multiply.outer(t, -1j * de + alpha * dl2))


def evolve_dephasing(state: DensityState, sys: SpinSystem, delta: float, duration: float,
                     channel: str | None = None, k_max: int = K_MAX_DEFAULT) -> DensityState:
    """Coherent precession plus dephasing for ``duration`` seconds."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    channel = channel or channel_for(sys)
    e, lvals = _generator_terms(sys, delta, channel, k_max)
    dim = e.size
    rows, cols = np.indices((dim, dim))
    fac = _factors(e, lvals, sys.alpha, rows.ravel(), cols.ravel(), duration).reshape(dim, dim)
    return DensityState(state.matrix * fac)


def ground_state(k: int, k_max: int = K_MAX_DEFAULT) -> DensityState:
    _guard(k, k_max)
    rho = np.zeros((2**k, 2**k), dtype=complex)
    rho[0, 0] = 1.0
    return DensityState(rho)


def _apply_hadamard_central(rho: np.ndarray) -> np.ndarray:
    dim = rho.shape[0]
    half = dim // 2
    r = rho.reshape(2, half, 2, half)
    r = np.einsum("ab,bjck,dc->ajdk", _HADAMARD, r, _HADAMARD)
    return r.reshape(dim, dim)


def _fanout_permutation(dim: int) -> np.ndarray:
    # CNOT from A onto every satellite: flip all satellite bits when A is 1
    idx = np.arange(dim)
    half = dim // 2
    return np.where(idx >= half, idx ^ (half - 1), idx)


def apply_fanout_cnot(state: DensityState) -> DensityState:
    perm = _fanout_permutation(state.dim)
    return DensityState(state.matrix[np.ix_(perm, perm)])


def apply_hadamard(state: DensityState) -> DensityState:
    """Hadamard on the central spin."""
    return DensityState(_apply_hadamard_central(state.matrix))


def prepare_ghz(state: DensityState) -> DensityState:
    """Hadamard on A, then CNOT fan-out onto the satellites."""
    return apply_fanout_cnot(apply_hadamard(state))


def unprepare_ghz(state: DensityState) -> DensityState:
    return apply_hadamard(apply_fanout_cnot(state))


def ghz_coherence(state: DensityState) -> complex:
    """``<1..1| rho |0..0>``; carries the phase ``+K delta T_w`` at gamma = 1."""
    return complex(state.matrix[-1, 0])


def central_reduced(state: DensityState) -> np.ndarray:
    half = state.dim // 2
    r = state.matrix.reshape(2, half, 2, half)
    return np.einsum("ajbj->ab", r)


def satellite_reduced(state: DensityState) -> np.ndarray:
    half = state.dim // 2
    r = state.matrix.reshape(2, half, 2, half)
    return np.einsum("ajak->jk", r)


def ghz_decay_rate(sys: SpinSystem, delta: float, duration: float, channel: str | None = None,
                   k_max: int = K_MAX_DEFAULT) -> float:
    """Decay rate of the GHZ coherence measured from one evolution of ``duration``."""
    ghz = prepare_ghz(ground_state(sys.k_spins, k_max))
    out = evolve_dephasing(ghz, sys, delta, duration, channel, k_max)
    return math.log(2.0 * abs(ghz_coherence(out))) / duration


def run_protocol(sys: SpinSystem, delta: float, grid: AcquisitionGrid, channel: str | None = None,
                 k_max: int = K_MAX_DEFAULT, demodulate: bool = True) -> ProtocolResult:
    """GHZ preparation, silent wait, CNOT read-in, then sampled FID of spin A.

    The sampled quantity is ``<X + iY>`` of the central spin with Pauli
    normalisation (unit amplitude). The Ising shift ``(K-1) J / 2`` of the
    readout frequency is removed when ``demodulate`` is set.
    """
    k = sys.k_spins
    _guard(k, k_max)
    channel = channel or channel_for(sys)
    rho = prepare_ghz(ground_state(k, k_max))
    rho = evolve_dephasing(rho, sys, delta, grid.t_wait, channel, k_max)
    coh = ghz_coherence(rho)
    probe = grid.t_wait if grid.t_wait > 0 else sys.t2_star
    decay = ghz_decay_rate(sys, delta, probe, channel, k_max)

    rho = apply_fanout_cnot(rho)
    sat = satellite_reduced(rho)
    target = np.zeros_like(sat)
    target[0, 0] = 1.0
    sat_dev = float(np.max(np.abs(sat - target)))

    # readout only needs the <1 b| rho |0 b> block that feeds the central coherence
    e, lvals = _generator_terms(sys, delta, channel, k_max)
    half = rho.dim // 2
    b = np.arange(half)
    rows, cols = half + b, b
    t = grid.times
    fac = _factors(e, lvals, sys.alpha, rows, cols, t)
    values = 2.0 * (fac * rho.matrix[rows, cols][None, :]).sum(axis=1)
    if demodulate:
        values = values * np.exp(-0.5j * (k - 1) * sys.ising_j * t)
    trace = SignalTrace(t, values, Strategy.QUANTUM)
    return ProtocolResult(trace, decay, float(np.angle(coh)), sat_dev)


def classical_state(sys: SpinSystem, delta: float, t: float) -> np.ndarray:
    """Single uncoupled spin after a Hadamard and free evolution for ``t``."""
    single = SpinSystem(1, 1.0, 0.0, sys.t2_star, Uncorrelated())
    rho = apply_hadamard(ground_state(1))
    return evolve_dephasing(rho, single, delta, t, "uncorrelated").matrix


def run_classical(sys: SpinSystem, delta: float, grid: AcquisitionGrid) -> SignalTrace:
    values = np.array([2.0 * classical_state(sys, delta, t)[1, 0] for t in grid.times])
    return SignalTrace(grid.times, values, Strategy.CLASSICAL)


@dataclass(frozen=True)
class OracleCheck:
    name: str
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tolerance)


_CHANNEL_MODELS = {"uncorrelated": Uncorrelated(), "collective": Collective(), "central": PowerLaw(0.0)}


def fit_decay_rate(sys: SpinSystem, durations, channel: str | None = None,
                   k_max: int = K_MAX_DEFAULT) -> float:
    """Least-squares slope of log GHZ coherence against time."""
    durations = np.asarray(durations, dtype=float)
    ghz = prepare_ghz(ground_state(sys.k_spins, k_max))
    logs = [math.log(2.0 * abs(ghz_coherence(evolve_dephasing(ghz, sys, 0.0, t, channel, k_max))))
            for t in durations]
    return float(np.polyfit(durations, logs, 1)[0])


def equivalence_suite(template: SpinSystem, delta: float, grid: AcquisitionGrid, k_values, j_values,
                      channels, tolerance: float = 1e-8, k_max: int = K_MAX_DEFAULT,
                      reference: str = "matched") -> list[OracleCheck]:
    """Compare simulated protocol traces with the analytic GHZ signal model.

    ``reference="matched"`` uses each channel's own scaling law for beta;
    ``reference="system"`` uses ``template.decoherence`` for every channel,
    which fails whenever the two disagree.
    """
    checks = []
    unit = SignalParams(1.0, 0.0, delta)
    for channel in channels:
        model = _CHANNEL_MODELS[channel]
        for k in k_values:
            _guard(int(k), k_max)
            for j in j_values:
                sys = replace(template, k_spins=int(k), ising_j=float(j), decoherence=model)
                ref_sys = sys if reference == "matched" else replace(sys, decoherence=template.decoherence)
                res = run_protocol(sys, delta, grid, channel, k_max)
                expected = ideal_quantum(unit, ref_sys, grid).values
                dev = float(np.max(np.abs(res.trace.values - expected)))
                checks.append(OracleCheck(f"trace {channel} K={k} J={j:g}", dev, tolerance))
                checks.append(OracleCheck(f"satellites reset {channel} K={k} J={j:g}",
                                          res.satellite_deviation, 1e-10))
            if k >= 2:
                probe = np.linspace(0.1, 1.0, 5) * template.t2_star
                rate = fit_decay_rate(replace(template, k_spins=int(k), decoherence=model), probe, channel, k_max)
                ref = beta_rate(replace(template, k_spins=int(k),
                                        decoherence=model if reference == "matched" else template.decoherence))
                checks.append(OracleCheck(f"ghz decay rate {channel} K={k}", abs(rate / ref - 1.0), 1e-9))
    classical = run_classical(template, delta, grid).values
    dev = float(np.max(np.abs(classical - ideal_classical(unit, template, grid).values)))
    checks.append(OracleCheck("classical FID", dev, tolerance))
    return checks
