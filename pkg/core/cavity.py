"""
Cavity filter and output field.

Maps qubit coherence onto the intracavity field through the cavity
susceptibility, builds the revival wavepacket train, the spectrum peak and its
discrete Fourier transform, and inverts that transform to recover C̃(nτ).
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
import structlog
from scipy import integrate, signal

from core.backaction import revival_shape
from core.exceptions import DomainError, ParameterError
from core.model import EchoEnvelope, SystemParams, splitting_residue

logger = structlog.get_logger(__name__)

SAMPLING_LIMIT = 0.1  # κ·dt above this is undersampled
RECOVERY_THRESHOLD = 1e-6

ArrayLike = Union[float, np.ndarray]


class Frame(Enum):
    """Reference frame of a field trace"""

    ROTATING = "rotating"  # Rotating at the qubit splitting Δ
    LAB = "lab"


class Domain(Enum):
    TIME = "time"
    FREQUENCY = "frequency"


class WavepacketForm(Enum):
    SIMPLIFIED = "simplified"  # -i√π g T2* Ḡ_n χ_c(t), κT2* ≪ 1
    CONVOLVED = "convolved"  # Direct convolution of G_n with χ_c


@dataclass(frozen=True, eq=False)
class FieldTrace:
    """Complex field samples on a time or frequency grid"""

    grid: np.ndarray
    values: np.ndarray
    frame: Frame = Frame.ROTATING
    qubit_splitting: float = 0.0
    domain: Domain = Domain.TIME
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if grid.shape != values.shape or grid.ndim != 1:
            raise ParameterError("trace grid and values must be 1-D of equal length")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def to_frame(self, frame: Frame) -> "FieldTrace":
        """⟨a⟩_t = e^{-iΔt}⟨ã⟩_t"""
        if frame is self.frame:
            return self
        if self.domain is not Domain.TIME:
            raise DomainError("frame conversion is defined for time traces only")
        sign = -1.0 if frame is Frame.LAB else 1.0
        rotated = self.values * np.exp(sign * 1j * self.qubit_splitting * self.grid)
        return FieldTrace(self.grid, rotated, frame, self.qubit_splitting, self.domain, self.meta)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"t_or_omega": self.grid, "re": self.values.real, "im": self.values.imag}
        )


def _kappa(params: SystemParams) -> float:
    if not params.kappa_total > 0:
        raise ParameterError("cavity operations need kappa_total > 0")
    return params.kappa_total


def _complex_rate(params: SystemParams) -> complex:
    return 1j * params.detuning + 0.5 * _kappa(params)


def cavity_susceptibility(
    x: ArrayLike, params: SystemParams, domain: Domain = Domain.TIME
) -> Union[complex, np.ndarray]:
    """
    χ_c(t) = e^{-iδt-κt/2}Θ(t) with Θ(0) = 1, or χ_c(ω) = [i(δ-ω) + κ/2]⁻¹

    The pair is related by χ_c(ω) = ∫dt e^{iωt} χ_c(t).
    """
    arr = np.asarray(x, dtype=float)
    if domain is Domain.FREQUENCY:
        out = np.asarray(1.0 / (1j * (params.detuning - arr) + 0.5 * _kappa(params)))
    else:
        rate = _complex_rate(params)
        safe = np.where(arr >= 0, arr, 0.0)
        out = np.where(arr >= 0, np.exp(-rate * safe), 0.0 + 0.0j)
    return complex(out) if out.ndim == 0 else out


def _uniform_step(times: np.ndarray) -> float:
    if times.ndim != 1 or times.size < 2:
        raise ParameterError("time grid needs at least two points")
    steps = np.diff(times)
    dt = float(steps.mean())
    if not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
        raise DomainError("time grid must be uniform")
    return dt


def field_from_coherence(
    times: Sequence[float], coherence: Sequence[complex], params: SystemParams
) -> FieldTrace:
    """
    ⟨ã⟩_t = -ig ∫dt' χ_c(t-t') c(t'), c = e^{iΔt}⟨σ₋⟩_t

    Causal trapezoid convolution on a uniform grid via FFT.

    Raises:
        DomainError: grid step too coarse for the cavity decay
    """
    t = np.asarray(times, dtype=float)
    c = np.asarray(coherence, dtype=complex)
    if c.shape != t.shape:
        raise ParameterError("coherence and time grid lengths differ")
    dt = _uniform_step(t)
    if _kappa(params) * dt > SAMPLING_LIMIT:
        raise DomainError(
            "coherence undersampled relative to the cavity decay",
            kappa_dt=params.kappa_total * dt,
            limit=SAMPLING_LIMIT,
        )
    kernel = np.asarray(cavity_susceptibility(t - t[0], params))
    full = signal.fftconvolve(c, kernel)[: t.size]
    # trapezoid end corrections
    full = full - 0.5 * kernel[0] * c - 0.5 * kernel * c[0]
    full[0] = 0.0
    values = -1j * params.coupling * dt * full
    return FieldTrace(t, values, Frame.ROTATING, params.qubit_splitting)


def wavepacket(
    n: int,
    t: ArrayLike,
    params: SystemParams,
    weight: float,
    form: WavepacketForm = WavepacketForm.SIMPLIFIED,
    tau: Optional[float] = None,
    samples: int = 4001,
) -> Union[complex, np.ndarray]:
    """
    Revival wavepacket f_n(t) = -ig∫dt' χ_c(t-t') G_n(t')

    Args:
        n: revival index
        t: time(s) relative to the revival centre nτ
        params: system parameters
        weight: Ḡ_n used by the simplified form
        form: simplified (κT2* ≪ 1) or direct convolution of G_n
        tau: pulse spacing, needed by the convolved form for n > 0
    """
    arr = np.asarray(t, dtype=float)
    if form is WavepacketForm.SIMPLIFIED:
        chi = np.asarray(cavity_susceptibility(arr, params))
        out = -1j * np.sqrt(np.pi) * params.coupling * params.t2star * weight * chi
        return complex(out) if out.ndim == 0 else out

    if n > 0 and tau is None:
        raise ParameterError("convolved wavepacket needs tau for n > 0")
    shape = revival_shape(n, tau or 0.0, None, params)
    grid = np.linspace(shape.times[0], shape.times[-1], samples)
    g_n = np.interp(grid, shape.times, shape.values.real) + 1j * np.interp(
        grid, shape.times, shape.values.imag
    )
    rate = _complex_rate(params)
    # χ_c(t - t') = e^{-rate·t} e^{rate·t'} for t' ≤ t
    cumulative = integrate.cumulative_trapezoid(np.exp(rate * grid) * g_n, grid, initial=0.0)
    clipped = np.clip(arr, grid[0], grid[-1])
    partial = np.interp(clipped, grid, cumulative.real) + 1j * np.interp(
        clipped, grid, cumulative.imag
    )
    # beyond the window the cumulative integral is constant
    overshoot = np.maximum(arr - clipped, 0.0)
    packet = -1j * params.coupling * np.exp(-rate * (clipped + overshoot)) * partial
    out = np.where(arr >= grid[0], packet, 0.0)
    return complex(out) if out.ndim == 0 else out


def conjugate_odd(values: np.ndarray) -> np.ndarray:
    """K^n: complex conjugate for odd n"""
    values = np.asarray(values, dtype=complex)
    n = np.arange(values.size)
    return np.where(n % 2 == 1, np.conj(values), values)


def revival_train(
    envelope: EchoEnvelope,
    params: SystemParams,
    times: Optional[np.ndarray] = None,
    sigma_x0: complex = 1.0,
    form: WavepacketForm = WavepacketForm.SIMPLIFIED,
) -> FieldTrace:
    """
    ⟨ã⟩_t ≃ ½⟨σ_x⟩₀[½f₀(t) + Σ_{n≥1} f_n(t-nτ) e^{iΔnτ} K^n C̃(nτ)]

    Returns:
        rotating-frame FieldTrace on the given (or a default) time grid
    """
    tau = envelope.tau
    if times is None:
        end = (envelope.n_echoes + 1) * tau
        dt = min(0.02 / _kappa(params), params.t2star / 10.0)
        times = np.arange(-5.0 * params.t2star, end, dt)
    t = np.asarray(times, dtype=float)
    ns = np.arange(envelope.values.size)
    coeffs = np.exp(1j * params.qubit_splitting * ns * tau) * conjugate_odd(envelope.values)
    coeffs[0] = 0.5 * envelope.values[0]
    total = np.zeros(t.shape, dtype=complex)
    for n in ns:
        if coeffs[n] == 0:
            continue
        packet = wavepacket(int(n), t - n * tau, params, float(envelope.weights[n]), form, tau)
        total += coeffs[n] * np.asarray(packet)
    values = 0.5 * sigma_x0 * total
    return FieldTrace(
        t,
        values,
        Frame.ROTATING,
        params.qubit_splitting,
        meta={"n_echoes": envelope.n_echoes},
    )


def _dft_coefficients(envelope: EchoEnvelope) -> np.ndarray:
    """e^{inδ_Δτ} Ḡ_n K^n C̃(nτ)"""
    ns = np.arange(envelope.values.size)
    phase = np.exp(1j * ns * envelope.delta_delta * envelope.tau)
    return phase * envelope.weights * conjugate_odd(envelope.values)


def dft_envelope(envelope: EchoEnvelope, omega: ArrayLike) -> Union[complex, np.ndarray]:
    """C̃_{N,τ}(ω) = Σ_n e^{inωτ}[e^{inδ_Δτ} Ḡ_n K^n C̃(nτ)]"""
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    ns = np.arange(envelope.values.size)
    basis = np.exp(1j * np.outer(w, ns) * envelope.tau)
    out = basis @ _dft_coefficients(envelope)
    return complex(out[0]) if np.ndim(omega) == 0 else out


def _peak_scale(params: SystemParams, sigma_x0: complex) -> complex:
    return -1j * sigma_x0 * np.sqrt(np.pi) * params.coupling * params.t2star / _kappa(params)


def field_spectrum_peak(
    envelope: EchoEnvelope,
    params: SystemParams,
    sigma_x0: complex = 1.0,
    detuning: Optional[ArrayLike] = None,
) -> Union[complex, np.ndarray]:
    """
    ⟨ã⟩_{ω=δ} ≃ -i⟨σ_x⟩₀(√π g T2*/κ)[C̃_{N,τ}(δ) - 1/2]

    detuning may be an array to sweep the cavity detuning δ.
    """
    delta = params.detuning if detuning is None else detuning
    scale = _peak_scale(params, sigma_x0)
    out = scale * (np.asarray(dft_envelope(envelope, delta)) - 0.5)
    return complex(out) if np.ndim(out) == 0 else out


def detuning_sweep(n_echoes: int, tau: float, start: float = 0.0, points: Optional[int] = None) -> np.ndarray:
    """M ≥ N+1 equally spaced detunings δ_j = δ₀ + 2πj/(Mτ)"""
    m = n_echoes + 1 if points is None else int(points)
    if m < n_echoes + 1:
        raise ParameterError("sweep needs at least N+1 points", points=m, n_echoes=n_echoes)
    return start + 2.0 * np.pi * np.arange(m) / (m * tau)


def invert_dft(
    peaks: Sequence[complex],
    detunings: Sequence[float],
    weights: Sequence[float],
    tau: float,
    qubit_splitting: float,
    params: SystemParams,
    sigma_x0: complex = 1.0,
    threshold: float = RECOVERY_THRESHOLD,
) -> EchoEnvelope:
    """
    Recover C̃(nτ) from spectrum peaks over a full detuning period

    The -1/2 offset is removed first, the DFT is inverted, then Ḡ_n, the
    e^{inδ_Δτ} phase and the odd-index conjugation are undone.

    Returns:
        EchoEnvelope with NaN at indices whose Ḡ_n is below threshold;
        meta["recoverable"] holds the per-index mask
    """
    y_peaks = np.asarray(peaks, dtype=complex)
    deltas = np.asarray(detunings, dtype=float)
    gbar = np.asarray(weights, dtype=float)
    m = deltas.size
    n_count = gbar.size
    if y_peaks.shape != deltas.shape:
        raise ParameterError("peaks and detunings lengths differ")
    if m < n_count:
        raise ParameterError("need at least N+1 detunings", points=m, n_echoes=n_count - 1)
    expected = deltas[0] + 2.0 * np.pi * np.arange(m) / (m * tau)
    if not np.allclose(deltas, expected, rtol=1e-9, atol=1e-12 / tau):
        raise DomainError("detunings must span one period 2π/τ in equal steps")

    y = y_peaks / _peak_scale(params, sigma_x0) + 0.5
    b = np.fft.fft(y)[:n_count] / m
    ns = np.arange(n_count)
    a = b * np.exp(-1j * ns * deltas[0] * tau)
    delta_delta = splitting_residue(qubit_splitting, tau)
    a = a * np.exp(-1j * ns * delta_delta * tau)

    recoverable = gbar > threshold
    values = np.full(n_count, np.nan + 1j * np.nan)
    values[recoverable] = a[recoverable] / gbar[recoverable]
    values = conjugate_odd(values)
    if not recoverable.all():
        logger.warning(
            "envelope_indices_unrecoverable",
            indices=np.nonzero(~recoverable)[0].tolist(),
            threshold=threshold,
        )
    return EchoEnvelope(
        tau=tau,
        values=values,
        weights=gbar,
        qubit_splitting=qubit_splitting,
        meta={"recoverable": recoverable},
    )


def output_field(trace: FieldTrace, params: SystemParams) -> FieldTrace:
    """r_out,2(t) = -i√κ₂ e^{-iΔt}⟨ã⟩_t for an undriven input"""
    if trace.domain is not Domain.TIME:
        raise DomainError("output field needs a time-domain trace")
    lab = trace.to_frame(Frame.LAB)
    values = -1j * np.sqrt(params.kappa_2) * lab.values
    return FieldTrace(lab.grid, values, Frame.LAB, params.qubit_splitting, meta=dict(trace.meta))


def emitted_photons(trace: FieldTrace) -> float:
    """∫|r_out|² dt"""
    return float(integrate.trapezoid(np.abs(trace.values) ** 2, trace.grid))


def revival_peak_amplitude(
    envelope_value: complex, params: SystemParams, sigma_minus0: complex = 0.5
) -> complex:
    """
    Peak ⟨ã⟩ of a revival in either transient regime

    -i(2g/κ)C̃⟨σ₋⟩₀ for κT2* ≫ 1, -i√π g T2* C̃⟨σ₋⟩₀ for κT2* ≪ 1.
    """
    kappa = _kappa(params)
    if kappa * params.t2star > 1.0:
        return complex(-1j * 2.0 * params.coupling / kappa * envelope_value * sigma_minus0)
    return complex(
        -1j * np.sqrt(np.pi) * params.coupling * params.t2star * envelope_value * sigma_minus0
    )

