"""
Inhomogeneously broadened Purcell back-action.

Purcell rate Γ_P(η), the stretched-exponential scale γ_P, revival shapes
G_n(t), revival weights Ḡ_n and the full echo envelope C̃(nτ).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
import structlog

from core.exceptions import ContractError, ParameterError
from core.filters import envelope_c0
from core.model import EchoEnvelope, PulseSequence, SystemParams
from core.noise import PANEL_ORDER, SpectralDensity, gaussian_average, graded_breakpoints

logger = structlog.get_logger(__name__)

GAMMA_P_DETUNING_LIMIT = 0.3  # T2*|δ| beyond which γ_P ≃ (gT2*)²κ/2 is flagged
WINDOW_HALF_WIDTH = 5.0  # revival window ±5 T2*
DEFAULT_GRID_POINTS = 501

ArrayLike = Union[float, np.ndarray]


class PurcellMode(Enum):
    """How the Purcell factor of C̃(nτ) is evaluated"""

    EXACT = "exact"  # Gaussian average of e^{-Γ_P(η)nτ/2}
    ASYMPTOTIC = "asymptotic"  # e^{-√(γ_P nτ)}


class WeightMode(Enum):
    """How revival weights Ḡ_n are evaluated"""

    WINDOWED = "windowed"  # Exact η quadrature over |t| ≤ 5 T2*
    ASYMPTOTIC = "asymptotic"  # 2e^{-2√(γ_P nτ)}
    EMISSION = "emission"  # cavity-filtered revival energy, positive and non-increasing


@dataclass(frozen=True, eq=False)
class RevivalShape:
    """Revival G_n(t) around t = nτ and its weight Ḡ_n"""

    n: int
    tau: float
    times: np.ndarray
    values: np.ndarray
    weight: float


def _detuned(eta: ArrayLike, params: SystemParams) -> np.ndarray:
    return np.asarray(eta, dtype=float) - params.detuning


def purcell_rate(eta: ArrayLike, params: SystemParams) -> ArrayLike:
    """Γ_P(η) = g²κ/[(η−δ)² + (κ/2)²]"""
    if not params.kappa_total > 0:
        raise ParameterError("purcell rate needs kappa_total > 0")
    x = _detuned(eta, params)
    kappa = params.kappa_total
    rate = params.coupling**2 * kappa / (x**2 + 0.25 * kappa**2)
    return float(rate) if np.ndim(eta) == 0 else rate


def dispersive_shift(eta: ArrayLike, params: SystemParams) -> ArrayLike:
    """Δω(η) = g²(η−δ)/[(η−δ)² + (κ/2)²]"""
    x = _detuned(eta, params)
    shift = params.coupling**2 * x / (x**2 + 0.25 * params.kappa_total**2)
    return float(shift) if np.ndim(eta) == 0 else shift


def gamma_p_valid(params: SystemParams) -> bool:
    return params.t2star * abs(params.detuning) < GAMMA_P_DETUNING_LIMIT


def gamma_p(params: SystemParams) -> float:
    """γ_P = (g T2*)² κ/2, valid for T2*|δ| ≪ 1"""
    if not gamma_p_valid(params):
        logger.warning(
            "gamma_p_shortcut_invalid",
            t2star_detuning=params.t2star * abs(params.detuning),
            limit=GAMMA_P_DETUNING_LIMIT,
        )
    return (params.coupling * params.t2star) ** 2 * params.kappa_total / 2.0


def _purcell_breakpoints(params: SystemParams) -> np.ndarray:
    """Panel cuts graded around the Lorentzian core of Γ_P(η)"""
    return graded_breakpoints(params.detuning, 0.5 * params.kappa_total, params.t2star)


def _purcell_exponent(eta: np.ndarray, ns: np.ndarray, tau: float, params: SystemParams) -> np.ndarray:
    """Γ_P(η)nτ/2 as an (η, n) matrix"""
    rate = np.asarray(purcell_rate(eta, params))
    return 0.5 * tau * np.outer(rate, ns)


def purcell_envelope_factor(
    n: ArrayLike,
    tau: float,
    params: SystemParams,
    mode: PurcellMode = PurcellMode.EXACT,
    order: int = PANEL_ORDER,
) -> ArrayLike:
    """
    Purcell suppression of the echo envelope at nτ

    Args:
        n: echo index or array of indices
        tau: pulse spacing
        params: system parameters
        mode: exact Gaussian average or the stretched-exponential asymptote

    Returns:
        factor in (0, 1] per index
    """
    ns = np.atleast_1d(np.asarray(n, dtype=float))
    if np.any(ns < 0):
        raise ParameterError("echo index must be nonnegative")
    if mode is PurcellMode.ASYMPTOTIC:
        out = np.exp(-np.sqrt(gamma_p(params) * ns * tau))
    else:
        out = np.real(
            gaussian_average(
                lambda eta: np.exp(-_purcell_exponent(eta, ns, tau, params)),
                params.t2star,
                breakpoints=_purcell_breakpoints(params),
                panel_order=order,
            )
        )
        out = np.atleast_1d(out)
    return float(out[0]) if np.ndim(n) == 0 else out


def revival_weights(
    n: ArrayLike, tau: float, params: SystemParams, order: int = PANEL_ORDER
) -> ArrayLike:
    """
    Ḡ_n = (√π T2*)⁻¹ ∫_{-W}^{W} G_n(t) dt with W = 5 T2*

    The time integral is done inside the η average, ∫e^{-iηt}dt = 2sin(ηW)/η.
    """
    ns = np.atleast_1d(np.asarray(n, dtype=float))
    t2 = params.t2star
    window = WINDOW_HALF_WIDTH * t2
    prefactor = np.exp(np.sqrt(gamma_p(params) * ns * tau)) / (np.sqrt(np.pi) * t2)

    def integrand(eta: np.ndarray) -> np.ndarray:
        kernel = 2.0 * window * np.sinc(eta * window / np.pi)
        return kernel[:, None] * np.exp(-_purcell_exponent(eta, ns, tau, params))

    averaged = np.real(gaussian_average(integrand, t2, breakpoints=_purcell_breakpoints(params), panel_order=order))
    out = prefactor * np.atleast_1d(averaged)
    if np.any(out <= 0.0):
        # the window catches the negative side lobes of late, narrowed revivals
        logger.warning(
            "revival_weight_nonpositive",
            first_n=float(ns[np.argmax(out <= 0.0)]),
            minimum=float(out.min()),
        )
    return float(out[0]) if np.ndim(n) == 0 else out


def emission_weights(
    n: ArrayLike, tau: float, params: SystemParams, order: int = PANEL_ORDER
) -> ArrayLike:
    """
    Ḡ_n from the energy the cavity line passes in revival n

    The revival field of a spin at η is filtered by the cavity Lorentzian
    L(η) = [(η-δ)² + κ²/4]⁻¹, so its energy is weighted by ρ(η)²L(η) with ρ²
    a Gaussian of width √2 T2*. With T_n = ⟨L e^{-Γ_P nτ}⟩ / ⟨L⟩ over that
    weight, Ḡ_n = √T_n / P_n and P_n the exact Purcell factor, so Ḡ_n P_n
    carries the revival amplitude. Ḡ_0 = 1.
    """
    ns = np.atleast_1d(np.asarray(n, dtype=float))
    if np.any(ns < 0):
        raise ParameterError("echo index must be nonnegative")
    if not params.kappa_total > 0:
        raise ParameterError("emission weights need kappa_total > 0")
    t2 = np.sqrt(2.0) * params.t2star
    quarter = 0.25 * params.kappa_total**2

    def integrand(eta: np.ndarray) -> np.ndarray:
        line = 1.0 / (_detuned(eta, params) ** 2 + quarter)
        decay = np.exp(-2.0 * _purcell_exponent(eta, ns, tau, params))
        return line[:, None] * np.hstack([np.ones((eta.size, 1)), decay])

    sums = np.atleast_1d(
        np.real(
            gaussian_average(
                integrand,
                t2,
                breakpoints=graded_breakpoints(params.detuning, 0.5 * params.kappa_total, t2),
                panel_order=order,
            )
        )
    )
    transmitted = sums[1:] / sums[0]
    factor = np.atleast_1d(purcell_envelope_factor(ns, tau, params, order=order))
    out = np.sqrt(transmitted) / factor
    return float(out[0]) if np.ndim(n) == 0 else out


def asymptotic_weight(n: ArrayLike, tau: float, params: SystemParams) -> ArrayLike:
    """Ḡ_n ≃ 2e^{-2√(γ_P nτ)} for γ_P nτ ≫ 1; Ḡ_0 = 1"""
    ns = np.atleast_1d(np.asarray(n, dtype=float))
    out = np.where(ns == 0, 1.0, 2.0 * np.exp(-2.0 * np.sqrt(gamma_p(params) * ns * tau)))
    return float(out[0]) if np.ndim(n) == 0 else out


def default_revival_grid(params: SystemParams) -> np.ndarray:
    half = WINDOW_HALF_WIDTH * params.t2star
    return np.linspace(-half, half, DEFAULT_GRID_POINTS)


def revival_shape(
    n: int,
    tau: float,
    t_grid: Optional[np.ndarray],
    params: SystemParams,
    order: int = PANEL_ORDER,
) -> RevivalShape:
    """G_n(t) = e^{√(γ_P nτ)}⟨⟨e^{-Γ_P(η)nτ/2} e^{-iηt}⟩⟩ on a grid around t = nτ"""
    times = default_revival_grid(params) if t_grid is None else np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ParameterError("revival grid must be a non-empty 1-D array")
    ns = np.array([float(n)])
    boost = np.exp(np.sqrt(gamma_p(params) * n * tau))

    def integrand(eta: np.ndarray) -> np.ndarray:
        decay = np.exp(-_purcell_exponent(eta, ns, tau, params))[:, 0]
        return decay[:, None] * np.exp(-1j * np.outer(eta, times))

    values = boost * np.asarray(gaussian_average(
        integrand, params.t2star, breakpoints=_purcell_breakpoints(params), panel_order=order
    ))
    weight = float(revival_weights(n, tau, params, order=order))
    return RevivalShape(n=int(n), tau=tau, times=times, values=values, weight=weight)


def revival_asymptote(n: int, tau: float, t: ArrayLike, params: SystemParams) -> ArrayLike:
    """e^{-(t/2T2*)²} cos[√2 (γ_P nτ)^{1/4} t/T2*], valid for γ_P nτ ≫ 1"""
    s = np.asarray(t, dtype=float) / params.t2star
    x = gamma_p(params) * n * tau
    out = np.exp(-0.25 * s**2) * np.cos(np.sqrt(2.0) * x**0.25 * s)
    return float(out) if np.ndim(t) == 0 else out


def asymptotic_first_zero(n: int, tau: float, params: SystemParams) -> float:
    """Position where the asymptotic cosine argument reaches π/2"""
    x = gamma_p(params) * n * tau
    if x <= 0:
        return float("inf")
    return float(np.pi * params.t2star / (2.0 * np.sqrt(2.0) * x**0.25))


def first_zero_crossing(times: np.ndarray, values: np.ndarray) -> Optional[float]:
    """First t > 0 where Re G changes sign, linearly interpolated"""
    times = np.asarray(times, dtype=float)
    real = np.real(np.asarray(values))
    mask = times >= 0
    t, y = times[mask], real[mask]
    flips = np.nonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)[0]
    if flips.size == 0:
        return None
    i = int(flips[0])
    return float(t[i] - y[i] * (t[i + 1] - t[i]) / (y[i + 1] - y[i]))


def weight_values(
    ns: np.ndarray, tau: float, params: SystemParams, mode: WeightMode, order: int = PANEL_ORDER
) -> np.ndarray:
    """Ḡ_n for each index, evaluated as `mode` says"""
    if mode is WeightMode.ASYMPTOTIC:
        out = asymptotic_weight(ns, tau, params)
    elif mode is WeightMode.EMISSION:
        out = emission_weights(ns, tau, params, order=order)
    else:
        out = revival_weights(ns, tau, params, order=order)
    return np.atleast_1d(out)


def full_envelope(
    seq: PulseSequence,
    params: SystemParams,
    spectrum: SpectralDensity,
    dephasing: Optional[float] = None,
    weights: WeightMode = WeightMode.WINDOWED,
    mode: PurcellMode = PurcellMode.EXACT,
    order: int = PANEL_ORDER,
) -> EchoEnvelope:
    """
    C̃(nτ) = (Purcell factor)·C̃₀(nτ) for n = 0..N with Ḡ_n attached

    Args:
        seq: CPMG or Hahn sequence
        params: system parameters
        spectrum: dynamic noise entering χ and Φ_q
        dephasing: γ_φ, defaults to params.dephasing
        weights: revival weight evaluation
        mode: Purcell factor evaluation
    """
    if not seq.is_periodic or seq.tau is None:
        raise ContractError("full envelope needs a CPMG or Hahn sequence", kind=seq.kind.value)
    gamma_phi = params.dephasing if dephasing is None else dephasing
    ns = np.arange(seq.n_pulses + 1)
    c0 = envelope_c0(seq, spectrum, gamma_phi)
    factor = np.atleast_1d(purcell_envelope_factor(ns, seq.tau, params, mode=mode, order=order))
    gbar = weight_values(ns, seq.tau, params, weights, order=order)
    logger.info(
        "full_envelope_computed",
        n_echoes=int(seq.n_pulses),
        purcell_mode=mode.value,
        weights=weights.value,
    )
    return EchoEnvelope(
        tau=seq.tau,
        values=factor * c0.values,
        weights=gbar,
        qubit_splitting=params.qubit_splitting,
        meta={"purcell_mode": mode.value, "weights": weights.value},
    )
