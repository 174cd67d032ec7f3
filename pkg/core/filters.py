"""
Classical and quantum filter functions of pulse sequences.

Builds the attenuation χ(t), the quantum-noise phase Φ_q(t) and the
cavity-free envelope C̃₀(t) from a SpectralDensity.
"""

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Tuple, Union

import numpy as np
import structlog
from scipy import integrate

from core.exceptions import ContractError, NumericalError
from core.model import PulseSequence, balanced_integral
from core.noise import SpectralDensity

logger = structlog.get_logger(__name__)

ECHO_TOLERANCE = 1e-12
SUPPORT_CUTOFF = 1e-12
PANEL_NODES = 16
QUADRATURE_RTOL = 1e-8

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class EnvelopeC0:
    """Cavity-free envelope C̃₀ = e^{-γ_φ t} e^{-iΦ_q - χ} at echo times"""

    times: np.ndarray
    values: np.ndarray
    chi: np.ndarray
    phase: np.ndarray
    dephasing: np.ndarray


def _segment_geometry(seq: PulseSequence, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    bounds, signs = seq.segments(t)
    mids = 0.5 * (bounds[1:] + bounds[:-1])
    widths = np.diff(bounds)
    return mids, widths, signs


def _sinc(x: np.ndarray) -> np.ndarray:
    return np.sinc(x / np.pi)


def sign_transform(seq: PulseSequence, omega: ArrayLike, t: float) -> np.ndarray:
    """
    I(ω, t) = ∫_0^t e^{iωt'} s(t') dt'

    Each segment contributes h·e^{iωm}·sinc(ωh/2) (midpoint m, width h), which
    stays exact through ω → 0.
    """
    mids, widths, signs = _segment_geometry(seq, t)
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    phase = np.exp(1j * np.outer(w, mids))
    shape = _sinc(0.5 * np.outer(w, widths))
    return (phase * shape) @ (signs * widths)


def classical_filter(seq: PulseSequence, omega: ArrayLike, t: float) -> ArrayLike:
    """F_c(ω, t) = (ω²/2)|I(ω, t)|² = 2|Σ s_k e^{iωm_k} sin(ωh_k/2)|²"""
    mids, widths, signs = _segment_geometry(seq, t)
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    terms = np.exp(1j * np.outer(w, mids)) * np.sin(0.5 * np.outer(w, widths))
    out = 2.0 * np.abs(terms @ signs) ** 2
    return float(out[0]) if np.ndim(omega) == 0 else out


def quantum_filter(seq: PulseSequence, omega: ArrayLike, t: float) -> ArrayLike:
    """F_q(ω, t) = ω∫_0^t sin(ωt')s(t')dt' = 2Σ s_k sin(ωm_k) sin(ωh_k/2)"""
    mids, widths, signs = _segment_geometry(seq, t)
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    terms = np.sin(np.outer(w, mids)) * np.sin(0.5 * np.outer(w, widths))
    out = 2.0 * (terms @ signs)
    return float(out[0]) if np.ndim(omega) == 0 else out


def _quantum_kernel(seq: PulseSequence, omega: np.ndarray, t: float) -> np.ndarray:
    """F_q/ω² = Im I(ω,t)/ω, finite at ω=0"""
    mids, widths, signs = _segment_geometry(seq, t)
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    shape = mids * _sinc(np.outer(w, mids)) * _sinc(0.5 * np.outer(w, widths))
    return shape @ (signs * widths)


def require_echo_time(seq: PulseSequence, t: float) -> None:
    residual = abs(float(balanced_integral(seq, t)))
    if residual > ECHO_TOLERANCE * max(t, seq.total_time):
        raise ContractError(
            "time is not an echo time of the sequence (integral of s(t) is nonzero)",
            t=t,
            residual=residual,
        )


def _effective_support(spectrum: SpectralDensity, fn: object) -> Optional[Tuple[float, float]]:
    assert spectrum.support is not None
    lo, hi = spectrum.support
    samples = np.linspace(lo, hi, 20001)
    values = np.abs(np.asarray(fn(samples)))  # type: ignore[operator]
    peak = float(values.max())
    if peak == 0.0:
        return None
    keep = np.nonzero(values >= SUPPORT_CUTOFF * peak)[0]
    step = samples[1] - samples[0]
    return max(lo, samples[keep[0]] - step), min(hi, samples[keep[-1]] + step)


def _panel_integral(
    integrand: object,
    window: Tuple[float, float],
    t: float,
    breakpoints: Optional[np.ndarray],
    nodes: int,
) -> float:
    lo, hi = window
    n_panels = int(np.clip(np.ceil((hi - lo) * max(t, 1e-300) / np.pi), 1, 200000))
    edges = np.linspace(lo, hi, n_panels + 1)
    if breakpoints is not None:
        inner = breakpoints[(breakpoints > lo) & (breakpoints < hi)]
        edges = np.unique(np.concatenate((edges, inner)))
    x, wts = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * np.diff(edges)
    centre = 0.5 * (edges[1:] + edges[:-1])
    omega = (centre[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * wts[None, :]).ravel()
    total = 0.0
    chunk = 2048
    for start in range(0, omega.size, chunk):
        sl = slice(start, start + chunk)
        total += float(np.sum(weights[sl] * integrand(omega[sl])))  # type: ignore[operator]
    return total


def _spectral_integral(
    spectrum: SpectralDensity, fn: object, kernel: object, t: float
) -> float:
    """∫dω/2π kernel(ω)·fn(ω) over the effective support, node count checked by doubling"""
    window = _effective_support(spectrum, fn)
    if window is None:
        return 0.0

    def integrand(w: np.ndarray) -> np.ndarray:
        return kernel(w) * np.asarray(fn(w))  # type: ignore[operator]

    coarse = _panel_integral(integrand, window, t, spectrum.grid, PANEL_NODES)
    fine = _panel_integral(integrand, window, t, spectrum.grid, 2 * PANEL_NODES)
    if abs(fine - coarse) > QUADRATURE_RTOL * max(abs(fine), 1e-300) + 1e-14:
        raise NumericalError(
            "spectral quadrature did not converge", coarse=coarse, fine=fine, t=t
        )
    return fine / (2.0 * np.pi)


def chi_attenuation(seq: PulseSequence, spectrum: SpectralDensity, t: float) -> float:
    """
    χ(t) = ∫dω/2π (F_c/ω²) S_c(ω)

    Args:
        seq: pulse sequence
        spectrum: noise spectrum; classical lines are summed analytically
        t: echo time (∫_0^t s = 0)

    Returns:
        nonnegative attenuation
    """
    require_echo_time(seq, t)
    chi = 0.0
    for line in spectrum.lines:
        transform = sign_transform(seq, line.frequency, t)[0]
        chi += line.weight * 0.5 * abs(transform) ** 2
    if spectrum.classical is not None:
        chi += _spectral_integral(
            spectrum,
            spectrum.classical,
            lambda w: 0.5 * np.abs(sign_transform(seq, w, t)) ** 2,
            t,
        )
    return max(chi, 0.0)


def quantum_phase(seq: PulseSequence, spectrum: SpectralDensity, t: float) -> float:
    """Φ_q(t) = ∫dω/2π (F_q/ω²) S_q(ω)"""
    require_echo_time(seq, t)
    phase = 0.0
    if spectrum.quantum_lines:
        area = float(sign_transform(seq, 0.0, t)[0].real)
        for qline in spectrum.quantum_lines:
            if qline.frequency == 0.0:
                continue
            transform = sign_transform(seq, qline.frequency, t)[0]
            phase += qline.amplitude / qline.frequency * (area - transform.real)
    if spectrum.quantum is not None:
        phase += _spectral_integral(
            spectrum, spectrum.quantum, lambda w: _quantum_kernel(seq, w, t), t
        )
    return phase


def envelope_c0(
    seq: PulseSequence,
    spectrum: SpectralDensity,
    dephasing: float,
    echo_times: Optional[Iterable[float]] = None,
) -> EnvelopeC0:
    """C̃₀(t) = e^{-γ_φ t}·e^{-iΦ_q(t) - χ(t)} at each echo time"""
    times = np.asarray(
        list(echo_times) if echo_times is not None else seq.echo_times(), dtype=float
    )
    chi = np.zeros(times.size)
    phase = np.zeros(times.size)
    for i, t in enumerate(times):
        if spectrum.has_classical:
            chi[i] = chi_attenuation(seq, spectrum, t)
        if spectrum.has_quantum:
            phase[i] = quantum_phase(seq, spectrum, t)
    if not (spectrum.has_classical or spectrum.has_quantum):
        for t in times:
            require_echo_time(seq, t)
    markov = dephasing * times
    values = np.exp(-markov - chi) * np.exp(-1j * phase)
    logger.debug("envelope_c0_computed", points=times.size, chi_max=float(chi.max(initial=0.0)))
    return EnvelopeC0(times=times, values=values, chi=chi, phase=phase, dephasing=markov)


def _segment_nodes(seq: PulseSequence, t: float, order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    bounds, signs = seq.segments(t)
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(bounds)
    centre = 0.5 * (bounds[1:] + bounds[:-1])
    nodes = (centre[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    node_signs = np.repeat(signs, order)
    return nodes, weights, node_signs


def _correlation_fn(
    spectrum: SpectralDensity, t: float, samples: int = 4001
) -> Callable[[np.ndarray], np.ndarray]:
    """C(|lag|) on [0, t]; continuous parts tabulated once and interpolated"""
    if spectrum.classical is None and spectrum.quantum is None:
        return spectrum.correlation
    grid = np.linspace(0.0, t, samples)
    table = spectrum.correlation(grid)

    def fn(lags: np.ndarray) -> np.ndarray:
        lags = np.abs(np.asarray(lags))
        return np.interp(lags, grid, table.real) + 1j * np.interp(lags, grid, table.imag)

    return fn


def chi_time_domain(
    seq: PulseSequence, spectrum: SpectralDensity, t: float, order: int = 48
) -> float:
    """Slow path: χ(t) = ½∫∫ s(t')s(t'') Re C(t'-t'') dt'dt'', any t"""
    nodes, weights, signs = _segment_nodes(seq, t, order)
    corr = _correlation_fn(spectrum, t)
    lags = nodes[:, None] - nodes[None, :]
    kernel = np.real(corr(lags.ravel())).reshape(lags.shape)
    ws = weights * signs
    return float(0.5 * ws @ kernel @ ws)


def phase_time_domain(
    seq: PulseSequence, spectrum: SpectralDensity, t: float, order: int = 48
) -> float:
    """Slow path: Φ_q(t) = ∫_0^t dt' s(t') ∫_0^{t'} Im C(u) du, any t"""
    nodes, weights, signs = _segment_nodes(seq, t, order)
    inner = np.zeros_like(nodes)
    for qline in spectrum.quantum_lines:
        if qline.frequency != 0.0:
            inner += qline.amplitude * (1.0 - np.cos(qline.frequency * nodes)) / qline.frequency
    if spectrum.quantum is not None:
        grid = np.linspace(0.0, t, 8001)
        continuous = SpectralDensity(quantum=spectrum.quantum, support=spectrum.support)
        im_c = continuous.correlation(grid).imag
        cumulative = integrate.cumulative_trapezoid(im_c, grid, initial=0.0)
        inner += np.interp(nodes, grid, cumulative)
    return float(np.sum(weights * signs * inner))
