"""
Restricted-subspace brute-force simulator.

Amplitudes over {|g,0⟩, |e,0⟩, |g,1⟩, |e,1⟩} (qubit, cavity photon number) in
the frame rotating at Δ, plus either the probability lost to the line
(Markovian mode) or explicit line modes |σ,0,1_k⟩ (discretized mode).

Between pulses the toggling Hamiltonian is constant for a fixed η, so each
interval is propagated exactly; π_x pulses swap g ↔ e instantaneously.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
import structlog
from joblib import Parallel, delayed
from scipy import integrate

from core.backaction import (
    RevivalShape,
    WeightMode,
    default_revival_grid,
    full_envelope,
    gamma_p,
    revival_shape,
)
from core.cavity import FieldTrace, conjugate_odd, revival_train
from core.exceptions import ContractError, DomainError, NumericalError, ParameterError
from core.model import EchoEnvelope, PulseSequence, SystemParams, balanced_integral, sign_function
from core.noise import SpectralDensity, gaussian_panel_nodes, graded_breakpoints, sample_trajectory

logger = structlog.get_logger(__name__)

NORM_TOLERANCE = 1e-8  # allowed drift per κ⁻¹
MONOTONE_SLACK = 1e-12
MAX_STEP_KAPPA = 50.0  # longest single exponential step, in units of 1/κ
BASIS = ("g0", "e0", "g1", "e1")
ORACLE_SPAN = 6.0  # η support of the oracle nodes, in standard deviations of η
PHASE_PER_NODE = 0.6  # swing of η·Φ(t) across one Legendre node, in radians


class LineMode(Enum):
    """How the output transmission line is represented"""

    MARKOVIAN = "markovian"  # -κ/2 on photon amplitudes, lost norm accumulated
    DISCRETIZED = "discretized"  # explicit line modes around ω_c


@dataclass(frozen=True)
class OracleSettings:
    order: int = 8  # Gauss–Legendre nodes per η panel
    line_mode: LineMode = LineMode.MARKOVIAN
    n_modes: int = 512
    band_half_width: float = 20.0  # line band ±W around δ, in units of κ
    chunk_size: Optional[int] = None  # η nodes per work unit
    n_jobs: int = 1
    norm_tolerance: float = NORM_TOLERANCE


@dataclass(frozen=True)
class NoiseTrajectory:
    """Piecewise-constant η_dyn(t) on steps of length dt; one row per realization"""

    dt: float
    values: np.ndarray

    @classmethod
    def sample(
        cls,
        spectrum: SpectralDensity,
        dt: float,
        duration: float,
        seed: Optional[int],
        n_realizations: int = 1,
    ) -> "NoiseTrajectory":
        n_steps = max(int(math.ceil(duration / dt)) + 1, 2)
        values = sample_trajectory(spectrum, dt, n_steps, seed, n_realizations=n_realizations)
        return cls(dt=dt, values=np.atleast_2d(values))

    @property
    def n_realizations(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class OracleState:
    amp_g0: complex
    amp_e0: complex
    amp_g1: complex
    amp_e1: complex
    line_amps: np.ndarray
    time: float

    @property
    def subspace_norm(self) -> float:
        return float(
            abs(self.amp_g0) ** 2 + abs(self.amp_e0) ** 2 + abs(self.amp_g1) ** 2 + abs(self.amp_e1) ** 2
        )


@dataclass(frozen=True, eq=False)
class OracleTrajectory:
    """Fixed-η run: amplitudes[t, basis] and the line record per time"""

    eta: float
    times: np.ndarray
    amplitudes: np.ndarray
    line: np.ndarray
    line_mode: LineMode

    def states(self) -> Iterator[OracleState]:
        for i, t in enumerate(self.times):
            g0, e0, g1, e1 = self.amplitudes[i]
            yield OracleState(g0, e0, g1, e1, self.line[i], float(t))

    @property
    def coherence(self) -> np.ndarray:
        """⟨σ₋⟩_t = Σ_n α*_{g,n} α_{e,n}"""
        a = self.amplitudes
        return np.conj(a[:, 0]) * a[:, 1] + np.conj(a[:, 2]) * a[:, 3]

    @property
    def field(self) -> np.ndarray:
        """⟨ã⟩_t = Σ_σ α*_{σ0} α_{σ1}"""
        a = self.amplitudes
        return np.conj(a[:, 0]) * a[:, 2] + np.conj(a[:, 1]) * a[:, 3]

    @property
    def photons(self) -> np.ndarray:
        a = self.amplitudes
        return np.abs(a[:, 2]) ** 2 + np.abs(a[:, 3]) ** 2

    @property
    def total_norm(self) -> np.ndarray:
        sub = np.sum(np.abs(self.amplitudes) ** 2, axis=1)
        if self.line_mode is LineMode.MARKOVIAN:
            return sub + np.sum(self.line, axis=1)
        return sub + np.sum(np.abs(self.line) ** 2, axis=1)

    def to_dataframe(self) -> pd.DataFrame:
        data: Dict[str, np.ndarray] = {"t": self.times}
        for j, name in enumerate(BASIS):
            data[f"re_{name}"] = self.amplitudes[:, j].real
            data[f"im_{name}"] = self.amplitudes[:, j].imag
        data["n_c"] = self.photons
        data["re_field"] = self.field.real
        data["im_field"] = self.field.imag
        return pd.DataFrame(data)


@dataclass(frozen=True, eq=False)
class OracleAverages:
    """η-averaged observables; C(t) and ⟨ã⟩ in the frame rotating at Δ"""

    times: np.ndarray
    coherence: np.ndarray
    field: np.ndarray
    photons: np.ndarray
    echo_times: np.ndarray
    envelope: np.ndarray
    line_mode: LineMode
    norm_error: float
    emitted: Optional[np.ndarray] = None
    line_frequencies: Optional[np.ndarray] = None
    line_field: Optional[np.ndarray] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.times,
                "re_coherence": self.coherence.real,
                "im_coherence": self.coherence.imag,
                "re_field": self.field.real,
                "im_field": self.field.imag,
                "n_c": self.photons,
            }
        )

    def envelope_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "n": np.arange(self.envelope.size),
                "t": self.echo_times,
                "re_envelope": self.envelope.real,
                "im_envelope": self.envelope.imag,
            }
        )


class _MarkovianEngine:
    """Analytic 2×2 propagation for all η nodes at once"""

    def __init__(self, params: SystemParams, eta: np.ndarray) -> None:
        self.params = params
        self.eta = np.asarray(eta, dtype=float)
        size = self.eta.size
        root = 1.0 / math.sqrt(2.0)
        self.g0 = np.full(size, root, dtype=complex)
        self.e0 = np.full(size, root, dtype=complex)
        self.g1 = np.zeros(size, dtype=complex)
        self.e1 = np.zeros(size, dtype=complex)
        self.lost = np.zeros((size, 2))
        kappa = params.kappa_total
        self.max_step = MAX_STEP_KAPPA / kappa if kappa > 0 else np.inf

    def evolve(self, dt: float, shift: float = 0.0) -> None:
        while dt > 0:
            step = min(dt, self.max_step)
            self._step(step, shift)
            dt -= step

    def _step(self, dt: float, shift: float) -> None:
        p = self.params
        eta = self.eta + shift
        photon = p.detuning - 0.5j * p.kappa_total
        a = 0.5 * eta
        b = -0.5 * eta + photon
        mean = 0.5 * (a + b)
        half = 0.5 * (a - b)
        omega = np.sqrt(half**2 + p.coupling**2 + 0j)
        cos = np.cos(omega * dt)
        sin = dt * np.sinc(omega * dt / np.pi)
        phase = np.exp(-1j * mean * dt)
        before_a = np.abs(self.e0) ** 2 + np.abs(self.g1) ** 2
        before_b = np.abs(self.e1) ** 2
        e0 = phase * (cos * self.e0 - 1j * sin * (half * self.e0 + p.coupling * self.g1))
        g1 = phase * (cos * self.g1 - 1j * sin * (p.coupling * self.e0 - half * self.g1))
        self.e0, self.g1 = e0, g1
        self.g0 = self.g0 * np.exp(0.5j * eta * dt)
        self.e1 = self.e1 * np.exp(-1j * (0.5 * eta + photon) * dt)
        self.lost[:, 0] += before_a - (np.abs(self.e0) ** 2 + np.abs(self.g1) ** 2)
        self.lost[:, 1] += before_b - np.abs(self.e1) ** 2

    def pulse(self, t: float) -> None:
        up = -1j * np.exp(1j * self.params.qubit_splitting * t)
        down = -1j * np.exp(-1j * self.params.qubit_splitting * t)
        self.g0, self.e0 = down * self.e0, up * self.g0
        self.g1, self.e1 = down * self.e1, up * self.g1
        self.lost = self.lost[:, ::-1].copy()

    def amplitudes(self) -> np.ndarray:
        return np.stack([self.g0, self.e0, self.g1, self.e1], axis=-1)

    def line(self) -> np.ndarray:
        return self.lost.copy()

    def total_norm(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes()) ** 2, axis=1) + np.sum(self.lost, axis=1)


def line_modes(params: SystemParams, settings: OracleSettings) -> Tuple[np.ndarray, float]:
    """Mode frequencies δ ± W (frame rotating at Δ) and the cavity-mode coupling √(κ₂dν/2π)"""
    if settings.n_modes < 2:
        raise ParameterError("discretized line needs at least two modes", n_modes=settings.n_modes)
    width = settings.band_half_width * params.kappa_total
    nu = params.detuning + np.linspace(-width, width, settings.n_modes)
    spacing = float(nu[1] - nu[0])
    return nu, math.sqrt(params.kappa_2 * spacing / (2.0 * math.pi))


def line_recurrence(params: SystemParams, settings: OracleSettings) -> float:
    """2π/dν, after which emitted wavepackets return from the discretized line"""
    spacing = 2.0 * settings.band_half_width * params.kappa_total / (settings.n_modes - 1)
    return 2.0 * math.pi / spacing


class _DiscretizedEngine:
    """
    Explicit line modes; blocks {e0, g1, g_k} and {e1, e_k} are diagonalized
    once per η and the state is carried in their eigenbases between pulses.
    """

    def __init__(self, params: SystemParams, eta: np.ndarray, settings: OracleSettings) -> None:
        self.params = params
        self.eta = np.asarray(eta, dtype=float)
        self.nu, self.link = line_modes(params, settings)
        size, modes = self.eta.size, self.nu.size
        loss = params.kappa_total - params.kappa_2
        self.hermitian = loss <= 0.0
        photon = params.detuning - 0.5j * loss

        # block A relative to -η/2: diag [η, δ, ν_k]
        base_a = np.zeros((modes + 2, modes + 2), dtype=complex)
        base_a[1, 1] = photon
        base_a[2:, 2:] = np.diag(self.nu)
        base_a[0, 1] = base_a[1, 0] = params.coupling
        base_a[1, 2:] = base_a[2:, 1] = self.link
        stack_a = np.repeat(base_a[None, :, :], size, axis=0)
        stack_a[:, 0, 0] = self.eta
        # block B relative to +η/2: diag [δ, ν_k]
        base_b = np.zeros((modes + 1, modes + 1), dtype=complex)
        base_b[0, 0] = photon
        base_b[1:, 1:] = np.diag(self.nu)
        base_b[0, 1:] = base_b[1:, 0] = self.link

        self.val_a, self.vec_a, self.inv_a = self._decompose(stack_a)
        val_b, vec_b, inv_b = self._decompose(base_b[None, :, :])
        self.val_b, self.vec_b, self.inv_b = val_b[0], vec_b[0], inv_b[0]

        root = 1.0 / math.sqrt(2.0)
        self.g0 = np.full(size, root, dtype=complex)
        psi_a = np.zeros((size, modes + 2), dtype=complex)
        psi_a[:, 0] = root
        self.c_a = np.einsum("mij,mj->mi", self.inv_a, psi_a)
        self.c_b = np.zeros((size, modes + 1), dtype=complex)

    def _decompose(self, stack: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self.hermitian:
            values, vectors = np.linalg.eigh(stack)
            return values.astype(complex), vectors, np.conj(np.swapaxes(vectors, 1, 2))
        values, vectors = np.linalg.eig(stack)
        return values, vectors, np.linalg.inv(vectors)

    def evolve(self, dt: float, shift: float = 0.0) -> None:
        if shift != 0.0:
            raise ContractError("time-dependent noise is only available with the markovian line")
        eta = self.eta[:, None]
        self.c_a = self.c_a * np.exp(-1j * (self.val_a - 0.5 * eta) * dt)
        self.c_b = self.c_b * np.exp(-1j * (self.val_b[None, :] + 0.5 * eta) * dt)
        self.g0 = self.g0 * np.exp(0.5j * self.eta * dt)

    def physical(self) -> Tuple[np.ndarray, np.ndarray]:
        psi_a = np.einsum("mij,mj->mi", self.vec_a, self.c_a)
        psi_b = self.c_b @ self.vec_b.T
        return psi_a, psi_b

    def pulse(self, t: float) -> None:
        up = -1j * np.exp(1j * self.params.qubit_splitting * t)
        down = -1j * np.exp(-1j * self.params.qubit_splitting * t)
        psi_a, psi_b = self.physical()
        new_a = np.empty_like(psi_a)
        new_b = np.empty_like(psi_b)
        new_a[:, 0] = up * self.g0
        new_a[:, 1] = down * psi_b[:, 0]
        new_a[:, 2:] = down * psi_b[:, 1:]
        new_b[:, 0] = up * psi_a[:, 1]
        new_b[:, 1:] = up * psi_a[:, 2:]
        self.g0 = down * psi_a[:, 0]
        self.c_a = np.einsum("mij,mj->mi", self.inv_a, new_a)
        self.c_b = new_b @ self.inv_b.T

    def amplitudes(self) -> np.ndarray:
        head = np.einsum("mij,mj->mi", self.vec_a[:, :2, :], self.c_a)
        e1 = self.c_b @ self.vec_b[0, :]
        return np.stack([self.g0, head[:, 0], head[:, 1], e1], axis=-1)

    def line(self) -> np.ndarray:
        """Line amplitudes [α_{g,k}..., α_{e,k}...] per node"""
        psi_a, psi_b = self.physical()
        return np.concatenate([psi_a[:, 2:], psi_b[:, 1:]], axis=1)

    def total_norm(self) -> np.ndarray:
        psi_a, psi_b = self.physical()
        return (
            np.abs(self.g0) ** 2
            + np.sum(np.abs(psi_a) ** 2, axis=1)
            + np.sum(np.abs(psi_b) ** 2, axis=1)
        )


Engine = Any


def _make_engine(params: SystemParams, eta: np.ndarray, settings: OracleSettings) -> Engine:
    if settings.line_mode is LineMode.DISCRETIZED:
        return _DiscretizedEngine(params, eta, settings)
    return _MarkovianEngine(params, eta)


def _check_params(params: SystemParams) -> None:
    if params.dephasing > 0:
        raise ContractError("the oracle evolves pure states and needs dephasing = 0", dephasing=params.dephasing)
    if not params.kappa_total > 0:
        raise ParameterError("the oracle needs kappa_total > 0")


def _prepare_times(t_grid: Any) -> np.ndarray:
    times = np.unique(np.asarray(t_grid, dtype=float))
    if times.size == 0:
        raise ParameterError("time grid is empty")
    if times[0] < 0:
        raise DomainError("oracle times must be nonnegative", first=float(times[0]))
    return times


def _advance(engine: Engine, start: float, end: float, noise: Optional[Tuple[float, np.ndarray]]) -> None:
    if end <= start:
        return
    if noise is None:
        engine.evolve(end - start)
        return
    dt, values = noise
    t = start
    while t < end:
        k = int(math.floor(t / dt + 1e-9))
        stop = min(end, (k + 1) * dt)
        if stop <= t:
            stop = min(end, (k + 2) * dt)
            k += 1
        engine.evolve(stop - t, float(values[k % values.size]))
        t = stop


def _propagate(
    engine: Engine,
    seq: PulseSequence,
    times: np.ndarray,
    record: Callable[[int, Engine], None],
    noise: Optional[Tuple[float, np.ndarray]] = None,
) -> None:
    """Step through pulses and record times; a pulse at a record time acts first"""
    pulses = np.asarray(seq.pulse_times, dtype=float)
    now = 0.0
    ip = 0
    for i, t in enumerate(times):
        while ip < pulses.size and pulses[ip] <= t:
            _advance(engine, now, pulses[ip], noise)
            now = float(pulses[ip])
            engine.pulse(now)
            ip += 1
        _advance(engine, now, float(t), noise)
        now = float(t)
        record(i, engine)


def _norm_limit(params: SystemParams, t_end: float, tolerance: float) -> float:
    return tolerance * max(1.0, params.kappa_total * t_end)


def _check_norm(engine: Engine, params: SystemParams, t_end: float, tolerance: float) -> float:
    norms = engine.total_norm()
    limit = _norm_limit(params, t_end, tolerance)
    if isinstance(engine, _DiscretizedEngine) and not engine.hermitian:
        error = float(np.max(norms - 1.0, initial=0.0))
    else:
        error = float(np.max(np.abs(norms - 1.0)))
    if error > limit:
        raise NumericalError("oracle norm drift", error=error, limit=limit, t_end=t_end)
    return error


def evolve_fixed_eta(
    params: SystemParams,
    eta: float,
    seq: PulseSequence,
    t_grid: Any,
    line_mode: LineMode = LineMode.MARKOVIAN,
    settings: Optional[OracleSettings] = None,
    noise: Optional[NoiseTrajectory] = None,
) -> OracleTrajectory:
    """
    Trajectory for one static detuning η

    Args:
        params: system parameters with dephasing = 0
        eta: static detuning
        seq: pulse sequence; times past its end see no further pulses
        t_grid: record times (sorted, duplicates dropped)
        line_mode: markovian or discretized line
        noise: optional η_dyn(t) added to η (first realization, markovian only)
    """
    _check_params(params)
    opts = settings or OracleSettings()
    if opts.line_mode is not line_mode:
        opts = replace(opts, line_mode=line_mode)
    times = _prepare_times(t_grid)
    engine = _make_engine(params, np.array([float(eta)]), opts)
    amplitudes = np.empty((times.size, 4), dtype=complex)
    lines: List[np.ndarray] = []
    previous = [np.inf]

    def record(i: int, eng: Engine) -> None:
        amps = eng.amplitudes()[0]
        amplitudes[i] = amps
        lines.append(eng.line()[0])
        norm = float(np.sum(np.abs(amps) ** 2))
        if line_mode is LineMode.MARKOVIAN and norm > previous[0] + MONOTONE_SLACK:
            raise NumericalError("subspace norm increased", time=float(times[i]))
        previous[0] = norm

    schedule = None if noise is None else (noise.dt, noise.values[0])
    _propagate(engine, seq, times, record, schedule)
    _check_norm(engine, params, float(times[-1]), opts.norm_tolerance)
    return OracleTrajectory(
        eta=float(eta),
        times=times,
        amplitudes=amplitudes,
        line=np.array(lines),
        line_mode=line_mode,
    )


def _run_chunk(
    params: SystemParams,
    seq: PulseSequence,
    times: np.ndarray,
    eta: np.ndarray,
    weights: np.ndarray,
    settings: OracleSettings,
    noise: Optional[Tuple[float, np.ndarray]],
) -> Dict[str, Any]:
    """Weighted partial sums over one block of η nodes"""
    engine = _make_engine(params, eta, settings)
    coherence = np.zeros(times.size, dtype=complex)
    field_sum = np.zeros(times.size, dtype=complex)
    photons = np.zeros(times.size)
    emitted = np.zeros(times.size)

    def record(i: int, eng: Engine) -> None:
        a = eng.amplitudes()
        coherence[i] = weights @ (np.conj(a[:, 0]) * a[:, 1] + np.conj(a[:, 2]) * a[:, 3])
        field_sum[i] = weights @ (np.conj(a[:, 0]) * a[:, 2] + np.conj(a[:, 1]) * a[:, 3])
        photons[i] = weights @ (np.abs(a[:, 2]) ** 2 + np.abs(a[:, 3]) ** 2)
        if settings.line_mode is LineMode.MARKOVIAN:
            emitted[i] = weights @ np.sum(eng.line(), axis=1)

    _propagate(engine, seq, times, record, noise)
    out: Dict[str, Any] = {
        "coherence": coherence,
        "field": field_sum,
        "photons": photons,
        "emitted": emitted,
        "norm_error": _check_norm(engine, params, float(times[-1]), settings.norm_tolerance),
    }
    if settings.line_mode is LineMode.DISCRETIZED:
        a = engine.amplitudes()
        line = engine.line()
        modes = engine.nu.size
        # ⟨b_k⟩ = Σ_σ α*_{σ0} α_{σk}
        bk = np.conj(a[:, 0:1]) * line[:, :modes] + np.conj(a[:, 1:2]) * line[:, modes:]
        out["line_field"] = weights @ bk
    return out


def _echo_indices(times: np.ndarray, echo_times: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(times, echo_times)
    idx = np.clip(idx, 0, times.size - 1)
    lower = np.clip(idx - 1, 0, times.size - 1)
    pick_lower = np.abs(times[lower] - echo_times) < np.abs(times[idx] - echo_times)
    return np.where(pick_lower, lower, idx)


def phase_span(seq: PulseSequence, t_end: float) -> float:
    """max |Φ(t)| over 0 ≤ t ≤ t_end, Φ continued past the last pulse with its final sign"""
    inside = min(max(t_end, 0.0), seq.total_time)
    pulses = np.asarray(seq.pulse_times, dtype=float)
    knots = np.concatenate([[0.0], pulses[pulses <= inside], [inside]])
    span = float(np.max(np.abs(balanced_integral(seq, knots))))
    if t_end > seq.total_time:
        end = seq.total_time
        tail = float(balanced_integral(seq, end)) + sign_function(seq, end) * (t_end - end)
        span = max(span, abs(tail))
    return span


def oracle_nodes(
    params: SystemParams, seq: PulseSequence, t_end: float, order: int = 8
) -> Tuple[np.ndarray, np.ndarray]:
    """
    η nodes and density-weighted weights for the oracle average

    The phase e^{-iηΦ(t)} swings by up to η·max|Φ| across the support, so the
    panels are uniform with width order·PHASE_PER_NODE/max|Φ| and graded
    around the cavity line at δ.
    """
    if order < 2:
        raise ParameterError("oracle needs at least two nodes per panel", order=order)
    reach = max(phase_span(seq, t_end), params.t2star)
    width = order * PHASE_PER_NODE / reach
    span = ORACLE_SPAN * np.sqrt(2.0) / params.t2star
    uniform = np.arange(-span, span + width, width)
    core = graded_breakpoints(params.detuning, 0.5 * params.kappa_total, params.t2star)
    core = core[np.abs(core - params.detuning) < width]
    return gaussian_panel_nodes(
        params.t2star, np.concatenate([uniform, core]), order=order, span_sigmas=ORACLE_SPAN
    )


def averaged_observables(
    params: SystemParams,
    seq: PulseSequence,
    t_grid: Any,
    settings: Optional[OracleSettings] = None,
    noise: Optional[NoiseTrajectory] = None,
) -> OracleAverages:
    """
    Average over static η of C(t), ⟨ã⟩_t, ⟨n_c⟩_t and C̃(nτ) on the nodes of oracle_nodes

    Echo times of the sequence are added to the grid. C̃(nτ) is
    K^n[e^{-iΔnτ} C(nτ)], C normalized by ⟨σ₋⟩₀ = 1/2. With a noise
    trajectory the result is also averaged over its realizations.
    """
    _check_params(params)
    opts = settings or OracleSettings()
    echo_times = seq.echo_times()
    times = _prepare_times(np.concatenate([np.asarray(t_grid, dtype=float).ravel(), echo_times]))
    if opts.line_mode is LineMode.DISCRETIZED and times[-1] >= line_recurrence(params, opts):
        raise DomainError(
            "run outlasts the line recurrence, raise n_modes",
            end=float(times[-1]),
            recurrence=line_recurrence(params, opts),
        )
    eta, weights = oracle_nodes(params, seq, float(times[-1]), opts.order)
    default_chunk = eta.size if opts.line_mode is LineMode.MARKOVIAN else 8
    chunk = opts.chunk_size or default_chunk
    blocks = [slice(s, s + chunk) for s in range(0, eta.size, chunk)]
    schedules: List[Optional[Tuple[float, np.ndarray]]] = [None]
    if noise is not None:
        if opts.line_mode is not LineMode.MARKOVIAN:
            raise ContractError("time-dependent noise is only available with the markovian line")
        schedules = [(noise.dt, row) for row in noise.values]

    log = logger.bind(component="oracle")
    log.info(
        "oracle_run_started",
        nodes=int(eta.size),
        line_mode=opts.line_mode.value,
        pulses=seq.n_pulses,
        points=int(times.size),
        realizations=len(schedules),
    )
    jobs = [(b, sched) for sched in schedules for b in blocks]
    parts = Parallel(n_jobs=opts.n_jobs)(
        delayed(_run_chunk)(params, seq, times, eta[b], weights[b], opts, sched) for b, sched in jobs
    )
    scale = 1.0 / len(schedules)
    # fixed-order reduction keeps runs bit-identical
    totals: Dict[str, Any] = {}
    for part in parts:
        for key, value in part.items():
            if key == "norm_error":
                totals[key] = max(totals.get(key, 0.0), value)
            else:
                totals[key] = totals.get(key, 0.0) + scale * value

    coherence = 2.0 * totals["coherence"]
    idx = _echo_indices(times, echo_times)
    ns = np.arange(echo_times.size)
    rotated = np.exp(-1j * params.qubit_splitting * ns * seq.tau if seq.tau else 0.0) * coherence[idx]
    envelope = conjugate_odd(rotated)
    line_frequencies = None
    line_field = None
    emitted = None
    if opts.line_mode is LineMode.DISCRETIZED:
        line_frequencies, _ = line_modes(params, opts)
        line_field = totals["line_field"]
    else:
        emitted = totals["emitted"] * params.kappa_2 / params.kappa_total
    log.info("oracle_run_finished", norm_error=totals["norm_error"])
    return OracleAverages(
        times=times,
        coherence=coherence,
        field=totals["field"],
        photons=totals["photons"],
        echo_times=echo_times,
        envelope=envelope,
        line_mode=opts.line_mode,
        norm_error=float(totals["norm_error"]),
        emitted=emitted,
        line_frequencies=line_frequencies,
        line_field=line_field,
        meta={"order": opts.order, "nodes": int(eta.size), "realizations": len(schedules)},
    )


def oracle_signal(averages: OracleAverages, params: SystemParams) -> float:
    """
    S from the simulated line: 2[Σ_k |⟨b_k⟩|²]^{1/2} with explicit modes,
    2[κ₂∫|⟨ã⟩|²dt]^{1/2} on the Markovian grid
    """
    if averages.line_field is not None:
        return float(2.0 * np.sqrt(np.sum(np.abs(averages.line_field) ** 2)))
    power = integrate.trapezoid(np.abs(averages.field) ** 2, averages.times)
    return float(2.0 * np.sqrt(params.kappa_2 * power))


def positivity_violations(averages: OracleAverages, tolerance: float = 1e-12) -> Tuple[int, float]:
    """Points where |⟨ã⟩|² > ⟨n_c⟩(1 - ⟨n_c⟩) + tolerance, and the worst excess"""
    excess = np.abs(averages.field) ** 2 - averages.photons * (1.0 - averages.photons)
    return int(np.count_nonzero(excess > tolerance)), float(np.max(excess, initial=-np.inf))


def oracle_revival_shape(
    n: int,
    tau: float,
    params: SystemParams,
    t_grid: Optional[np.ndarray] = None,
    settings: Optional[OracleSettings] = None,
) -> RevivalShape:
    """e^{√(γ_P nτ)} e^{-iΔnτ} C(nτ + t) from a CPMG run with n pulses"""
    if n < 1:
        raise ParameterError("revival index must be at least 1", n=n)
    offsets = default_revival_grid(params) if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.max(np.abs(offsets)) >= 0.5 * tau:
        raise ContractError("revival grid must stay inside the neighbouring pulse intervals")
    seq = PulseSequence.cpmg(n, tau)
    run = averaged_observables(params, seq, n * tau + offsets, settings)
    idx = _echo_indices(run.times, n * tau + offsets)
    boost = math.exp(math.sqrt(gamma_p(params) * n * tau))
    values = boost * np.exp(-1j * params.qubit_splitting * n * tau) * run.coherence[idx]
    weight = float(integrate.trapezoid(values.real, offsets) / (math.sqrt(math.pi) * params.t2star))
    return RevivalShape(n=n, tau=tau, times=offsets, values=values, weight=weight)


@dataclass(frozen=True)
class Deviation:
    max_relative: float
    mean_relative: float


@dataclass(frozen=True, eq=False)
class AnalyticRun:
    envelope: EchoEnvelope
    field: Optional[FieldTrace] = None
    revival: Optional[RevivalShape] = None


@dataclass(frozen=True, eq=False)
class OracleRun:
    averages: OracleAverages
    revival: Optional[RevivalShape] = None


@dataclass
class ComparisonReport:
    """Per-observable deviations of the oracle from the closed forms"""

    deviations: Dict[str, Deviation] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Dict[str, float]]:
        return {
            name: {"max_relative": d.max_relative, "mean_relative": d.mean_relative}
            for name, d in self.deviations.items()
        }

    def to_dataframe(self) -> pd.DataFrame:
        rows = [
            {"observable": name, "max_relative": d.max_relative, "mean_relative": d.mean_relative}
            for name, d in self.deviations.items()
        ]
        return pd.DataFrame(rows, columns=["observable", "max_relative", "mean_relative"])


def analytic_run(
    params: SystemParams,
    seq: PulseSequence,
    times: Optional[np.ndarray] = None,
    revival_n: Optional[int] = None,
    revival_grid: Optional[np.ndarray] = None,
    spectrum: Optional[SpectralDensity] = None,
    weights: WeightMode = WeightMode.EMISSION,
) -> AnalyticRun:
    """Closed-form counterparts of an oracle run; spectrum is the dynamic noise fed to the oracle"""
    noise = SpectralDensity.zero() if spectrum is None else spectrum
    envelope = full_envelope(seq, params, noise, dephasing=0.0, weights=weights)
    trace = revival_train(envelope, params, times) if times is not None else None
    revival = None
    if revival_n is not None and seq.tau is not None:
        revival = revival_shape(revival_n, seq.tau, revival_grid, params)
    return AnalyticRun(envelope=envelope, field=trace, revival=revival)


def _deviation(observed: np.ndarray, reference: np.ndarray, per_point: bool = False) -> Deviation:
    observed = np.asarray(observed)
    reference = np.asarray(reference)
    diff = np.abs(observed - reference)
    if per_point:
        scale = np.maximum(np.abs(reference), 1e-300)
    else:
        scale = max(float(np.max(np.abs(reference), initial=0.0)), 1e-300)
    rel = diff / scale
    return Deviation(float(np.max(rel, initial=0.0)), float(np.mean(rel)) if rel.size else 0.0)


def compare_to_closed_forms(oracle: OracleRun, analytic: AnalyticRun) -> ComparisonReport:
    """
    Envelope deviations are relative per echo; field and revival deviations
    are relative to the peak of the closed form.
    """
    report = ComparisonReport()
    run = oracle.averages
    count = min(run.envelope.size, analytic.envelope.values.size)
    report.deviations["envelope"] = _deviation(
        run.envelope[:count], analytic.envelope.values[:count], per_point=True
    )
    if analytic.field is not None:
        reference = np.interp(run.times, analytic.field.grid, analytic.field.values.real) + 1j * np.interp(
            run.times, analytic.field.grid, analytic.field.values.imag
        )
        report.deviations["field"] = _deviation(run.field, reference)
    if oracle.revival is not None and analytic.revival is not None:
        ref = analytic.revival
        reference = np.interp(oracle.revival.times, ref.times, ref.values.real) + 1j * np.interp(
            oracle.revival.times, ref.times, ref.values.imag
        )
        report.deviations["revival_shape"] = _deviation(oracle.revival.values, reference)
    logger.info("closed_form_comparison", **{k: v.max_relative for k, v in report.deviations.items()})
    return report


def stretched_exponent(envelope: np.ndarray, times: np.ndarray, gamma: float, lo: float = 1.0, hi: float = 16.0) -> float:
    """Slope of log(-log|C̃|) against log(nτ) over γ_P nτ ∈ [lo, hi]"""
    x = gamma * np.asarray(times, dtype=float)
    mag = np.abs(np.asarray(envelope))
    mask = (x >= lo) & (x <= hi) & (mag > 0) & (mag < 1)
    if np.count_nonzero(mask) < 2:
        raise ParameterError("too few echoes inside the fit window", lo=lo, hi=hi)
    slope, _ = np.polyfit(np.log(times[mask]), np.log(-np.log(mag[mask])), 1)
    return float(slope)
