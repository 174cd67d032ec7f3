"""
Single nuclear spin-1/2 environment.

Conditional Hamiltonians H_e = H_E + A I_z/2 and H_g = H_E - A I_z/2 with
H_E = γ(B_x I_x + B_z I_z). The stationary environment state commutes with
H_g (qubit held in |g⟩); using H_e instead would silently remove S_q.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from scipy import linalg
from scipy import signal as sps

from core.model import SpinEnvParams, SystemParams
from core.noise import DEFAULT_ORDER, SpectralDensity, gaussian_average, gaussian_resolvent

logger = structlog.get_logger(__name__)

SPIN_X = 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SPIN_Z = 0.5 * np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
TRANSMISSION_RTOL = 1e-6
FEATURE_PROMINENCE = 1e-3
GRID_POINTS = 2001

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class SpinFrequencies:
    omega_plus: float
    omega_minus: float
    phi_plus: float
    phi_minus: float
    degenerate: bool = False

    @property
    def delta_phi(self) -> float:
        return self.phi_plus - self.phi_minus

    @property
    def visibility(self) -> float:
        """sin²(Δφ)"""
        return float(np.sin(self.delta_phi) ** 2)


@dataclass(frozen=True)
class SpinEigensystem:
    """Eigen-decompositions of H_g and H_e and the initial populations"""

    energies_g: np.ndarray
    states_g: np.ndarray
    energies_e: np.ndarray
    states_e: np.ndarray
    populations_g: np.ndarray

    @property
    def overlaps(self) -> np.ndarray:
        """|⟨g,m|e,n⟩|² indexed [m, n]"""
        return np.abs(self.states_g.conj().T @ self.states_e) ** 2


def conditional_hamiltonians(env: SpinEnvParams) -> Tuple[np.ndarray, np.ndarray]:
    """(H_g, H_e) as 2×2 matrices"""
    h_env = env.field_x * SPIN_X + env.field_z * SPIN_Z
    half = 0.5 * env.hyperfine * SPIN_Z
    return h_env - half, h_env + half


def spin_frequencies(env: SpinEnvParams) -> SpinFrequencies:
    """ω± = √[(γB_x)² + (γB_z ± A/2)²]/2 and φ± = atan2(2γB_x, 2γB_z ± A)"""
    bx, bz, a = env.field_x, env.field_z, env.hyperfine
    plus_z, minus_z = 2.0 * bz + a, 2.0 * bz - a
    degenerate = bx == 0.0 and (plus_z == 0.0 or minus_z == 0.0)
    if degenerate:
        logger.warning("spin_angle_degenerate", field_x=bx, field_z=bz, hyperfine=a)
    return SpinFrequencies(
        omega_plus=0.5 * float(np.hypot(bx, bz + 0.5 * a)),
        omega_minus=0.5 * float(np.hypot(bx, bz - 0.5 * a)),
        phi_plus=float(np.arctan2(2.0 * bx, plus_z)),
        phi_minus=float(np.arctan2(2.0 * bx, minus_z)),
        degenerate=degenerate,
    )


def eseem_envelope(tau: ArrayLike, env: SpinEnvParams, dephasing: float = 0.0) -> ArrayLike:
    """C̃(τ) = e^{-γ_φτ}[1 - 2sin²Δφ sin²(ω₊τ/2) sin²(ω₋τ/2)], unpolarized spin"""
    freqs = spin_frequencies(env)
    t = np.asarray(tau, dtype=float)
    modulation = (
        2.0
        * freqs.visibility
        * np.sin(0.5 * freqs.omega_plus * t) ** 2
        * np.sin(0.5 * freqs.omega_minus * t) ** 2
    )
    out = np.exp(-dephasing * t) * (1.0 - modulation)
    return float(out) if out.ndim == 0 else out


def eseem_components(env: SpinEnvParams) -> Dict[str, float]:
    """Angular frequencies present in the ESEEM modulation"""
    freqs = spin_frequencies(env)
    wp, wm = freqs.omega_plus, freqs.omega_minus
    return {
        "omega_minus": wm,
        "omega_plus": wp,
        "difference": abs(wp - wm),
        "sum": wp + wm,
    }


def spin_eigensystem(env: SpinEnvParams, polarization: Optional[float] = None) -> SpinEigensystem:
    p = env.polarization if polarization is None else polarization
    h_g, h_e = conditional_hamiltonians(env)
    energies_g, states_g = np.linalg.eigh(h_g)
    energies_e, states_e = np.linalg.eigh(h_e)
    if np.isclose(energies_g[0], energies_g[1]):
        # no conditioned axis; polarize along z
        states_g = np.eye(2, dtype=complex)
        energies_g = np.diag(h_g).real.copy()
    # eigh sorts ascending, the second state is +1/2 along the conditioned axis
    populations = np.array([(1.0 - p) / 2.0, (1.0 + p) / 2.0])
    return SpinEigensystem(energies_g, states_g, energies_e, states_e, populations)


def _initial_state(system: SpinEigensystem) -> np.ndarray:
    vecs = system.states_g
    return (vecs * system.populations_g) @ vecs.conj().T


def exact_hahn_envelope(
    tau: ArrayLike,
    env: SpinEnvParams,
    polarization: Optional[float] = None,
    dephasing: float = 0.0,
) -> Union[complex, np.ndarray]:
    """
    Hahn-echo envelope C̃(τ) = e^{-γ_φτ} Tr{U₋†(τ) U₊(τ) ρ̄_E} by 2×2 exponentials

    U₊ = e^{-iH_gτ/2} e^{-iH_eτ/2} is the branch starting in |e⟩,
    U₋ = e^{-iH_eτ/2} e^{-iH_gτ/2} the branch starting in |g⟩.
    """
    system = spin_eigensystem(env, polarization)
    rho = _initial_state(system)
    h_g, h_e = conditional_hamiltonians(env)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.empty(taus.size, dtype=complex)
    for i, t in enumerate(taus):
        half_g = linalg.expm(-0.5j * t * h_g)
        half_e = linalg.expm(-0.5j * t * h_e)
        u_plus = half_g @ half_e
        u_minus = half_e @ half_g
        out[i] = np.trace(u_minus.conj().T @ u_plus @ rho) * np.exp(-dephasing * t)
    return complex(out[0]) if np.ndim(tau) == 0 else out


def spin_spectral_density(env: SpinEnvParams, polarization: Optional[float] = None) -> SpectralDensity:
    """
    Noise spectrum of Ω = A I_z under Larmor precession about the H_g axis

    C(t) = A²[cos²θ/4 + (sin²θ/4)(cos ω_g t + i p sin ω_g t)] gives a static
    line, lines at ±ω_g and a quantum line at ω_g.
    """
    p = env.polarization if polarization is None else polarization
    a = env.hyperfine
    bx, bz = env.field_x, env.field_z - 0.5 * a
    omega_g = float(np.hypot(bx, bz))
    if omega_g == 0.0:
        return SpectralDensity.from_lines(lines=[(0.0, a**2 / 4.0)])
    cos2 = (bz / omega_g) ** 2
    sin2 = 1.0 - cos2
    lines = [(0.0, a**2 * cos2 / 4.0)]
    quantum = []
    if sin2 > 0.0:
        lines += [(omega_g, a**2 * sin2 / 8.0), (-omega_g, a**2 * sin2 / 8.0)]
        if p != 0.0:
            quantum.append((omega_g, p * a**2 * sin2 / 4.0))
    return SpectralDensity.from_lines(lines=lines, quantum_lines=quantum)


def _transition_table(env: SpinEnvParams, polarization: Optional[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Weights p_gm|⟨g,m|e,n⟩|² and shifts ε_en - ε_gm, flattened over (m, n)"""
    system = spin_eigensystem(env, polarization)
    weights = system.populations_g[:, None] * system.overlaps
    shifts = system.energies_e[None, :] - system.energies_g[:, None]
    return weights.ravel(), shifts.ravel()


def qubit_susceptibility(
    omega: ArrayLike,
    eta: ArrayLike,
    env: SpinEnvParams,
    params: SystemParams,
    polarization: Optional[float] = None,
) -> Union[complex, np.ndarray]:
    """
    χ_η(ω) = -i Σ_{m,n} p_gm |⟨g,m|e,n⟩|² / [i(Δ + η + ε_en - ε_gm - ω) + γ_φ]

    Broadcasts over ω and η.
    """
    weights, shifts = _transition_table(env, polarization)
    detuning = np.asarray(eta, dtype=float) - (np.asarray(omega, dtype=float) - params.qubit_splitting)
    denom = 1j * (detuning[..., None] + shifts) + params.dephasing
    out = -1j * np.sum(weights / denom, axis=-1)
    return complex(out) if np.ndim(out) == 0 else out


def transmission_grid(
    env: SpinEnvParams, params: SystemParams, t2star: Optional[float] = None, points: int = GRID_POINTS
) -> np.ndarray:
    """ω_c ± (4/T2* + 3|A|)"""
    t2 = params.t2star if t2star is None else t2star
    half = 4.0 / t2 + 3.0 * abs(env.hyperfine)
    return params.cavity_freq + np.linspace(-half, half, points)


class EtaAverage(Enum):
    """How the static-detuning average of the transmission is taken"""

    RESOLVENT = "resolvent"  # Partial fractions in η, each pole averaged in closed form
    QUADRATURE = "quadrature"  # Gauss–Hermite nodes with order doubling


def _merge_transitions(weights: np.ndarray, shifts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Drop empty transitions and pool coincident shifts so every pole is simple"""
    peak = float(weights.max())
    keep = weights > 1e-15 * peak
    w, s = weights[keep], shifts[keep]
    order = np.argsort(s)
    w, s = w[order], s[order]
    scale = max(float(np.max(np.abs(s))), 1.0)
    merged_w = [w[0]]
    merged_s = [s[0]]
    for wi, si in zip(w[1:], s[1:]):
        if abs(si - merged_s[-1]) <= 1e-12 * scale:
            merged_w[-1] += wi
        else:
            merged_w.append(wi)
            merged_s.append(si)
    return np.array(merged_w), np.array(merged_s)


def _resolvent_average(
    offset: np.ndarray,
    weights: np.ndarray,
    shifts: np.ndarray,
    params: SystemParams,
    t2star: float,
) -> np.ndarray:
    """
    ⟨⟨1/D(η)⟩⟩ with D = c + Σ_j b_j/(η - p_j)

    1/D = 1/c + Σ_k r_k/(η - z_k) over the roots z_k of
    cΠ(η - p) + Σ_j b_j Π_{i≠j}(η - p_i).
    """
    w, s = _merge_transitions(weights, shifts)
    g2 = params.coupling**2
    out = np.empty(offset.size, dtype=complex)
    for i, o in enumerate(offset):
        c = 1j * (params.detuning - o) + 0.5 * params.kappa_total
        if g2 == 0.0:
            out[i] = 1.0 / c
            continue
        poles = o - s + 1j * params.dephasing
        q0 = np.poly(poles)
        qd = c * q0
        for j in range(poles.size):
            qd[1:] += -1j * g2 * w[j] * np.poly(np.delete(poles, j))
        roots = np.roots(qd)
        residues = np.polyval(q0, roots) / np.polyval(np.polyder(qd), roots)
        out[i] = 1.0 / c + np.sum(residues * np.asarray(gaussian_resolvent(roots, t2star)))
    return out


def transmission(
    omega_grid: Sequence[float],
    env: SpinEnvParams,
    params: SystemParams,
    t2star: Optional[float] = None,
    polarization: Optional[float] = None,
    order: int = DEFAULT_ORDER,
    chunk: int = 256,
    method: EtaAverage = EtaAverage.RESOLVENT,
) -> np.ndarray:
    """
    A_T(ω) = ⟨⟨-√(κ₁κ₂)/[i(ω_c - ω) + i g² χ_η(ω) + κ/2]⟩⟩

    The integrand is rational in η, so the default average is exact. Node
    quadrature resolves the Purcell hole in η only when T2* is not much
    shorter than κ/g².

    Args:
        omega_grid: lab-frame drive frequencies
        env: nuclear spin parameters
        params: system parameters (κ₁, κ₂ > 0 for a nonzero result)
        t2star: inhomogeneous time, defaults to params.t2star
        method: resolvent (exact) or quadrature
    """
    t2 = params.t2star if t2star is None else t2star
    omega = np.asarray(omega_grid, dtype=float)
    weights, shifts = _transition_table(env, polarization)
    # drive offset from Δ keeps the large carrier out of the differences
    offset = omega - params.qubit_splitting
    amplitude = -np.sqrt(params.kappa_in * params.kappa_2)
    if method is EtaAverage.RESOLVENT:
        out = amplitude * _resolvent_average(offset, weights, shifts, params, t2)
        logger.info("transmission_computed", points=omega.size, t2star=t2, method=method.value)
        return out
    g2 = params.coupling**2

    def response(block: np.ndarray):  # type: ignore[no-untyped-def]
        def f(eta: np.ndarray) -> np.ndarray:
            x = eta[:, None, None] - block[None, :, None] + shifts[None, None, :]
            chi = -1j * np.sum(weights / (1j * x + params.dephasing), axis=-1)
            denom = 1j * (params.detuning - block[None, :]) + 1j * g2 * chi + 0.5 * params.kappa_total
            return amplitude / denom

        return f

    out = np.empty(omega.size, dtype=complex)
    for start in range(0, omega.size, chunk):
        block = offset[start : start + chunk]
        out[start : start + chunk] = gaussian_average(
            response(block), t2, order=order, rtol=TRANSMISSION_RTOL
        )
    logger.info("transmission_computed", points=omega.size, t2star=t2, method=method.value)
    return out


def passivity_bound(params: SystemParams) -> float:
    """√(κ₁κ₂)/(κ/2)"""
    return float(np.sqrt(params.kappa_in * params.kappa_2) / (0.5 * params.kappa_total))


def count_transmission_features(values: Sequence[complex], prominence: float = FEATURE_PROMINENCE) -> int:
    """Number of resolved maxima of |A_T|; a single smooth resonance counts 1"""
    magnitude = np.abs(np.asarray(values))
    peak = float(magnitude.max()) if magnitude.size else 0.0
    if peak == 0.0:
        return 0
    # pad so that maxima at the grid edges are found
    padded = np.concatenate(([0.0], magnitude, [0.0]))
    found, _ = sps.find_peaks(padded, prominence=prominence * peak)
    return int(found.size)


def visibility_scan(
    hyperfine: float, field_x: Sequence[float], field_z: Sequence[float]
) -> np.ndarray:
    """sin²Δφ over a (γB_x, γB_z) grid, indexed [i_x, i_z]"""
    out = np.empty((len(field_x), len(field_z)))
    for i, bx in enumerate(field_x):
        for j, bz in enumerate(field_z):
            env = SpinEnvParams(hyperfine=hyperfine, field_x=bx, field_z=bz)
            out[i, j] = spin_frequencies(env).visibility
    return out


def fit_visibility(
    tau: Sequence[float], values: Sequence[float], env: SpinEnvParams, dephasing: float = 0.0
) -> float:
    """Least-squares modulation prefactor V in 1 - C̃e^{γ_φτ} = 2V sin²(ω₊τ/2)sin²(ω₋τ/2)"""
    freqs = spin_frequencies(env)
    t = np.asarray(tau, dtype=float)
    y = 1.0 - np.asarray(values, dtype=float) * np.exp(dephasing * t)
    basis = 2.0 * np.sin(0.5 * freqs.omega_plus * t) ** 2 * np.sin(0.5 * freqs.omega_minus * t) ** 2
    return float(np.dot(basis, y) / np.dot(basis, basis))


def envelope_spectrum(tau: Sequence[float], values: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """One-sided amplitude spectrum of the mean-removed, Hann-windowed envelope (angular frequency, |FFT|)"""
    t = np.asarray(tau, dtype=float)
    y = np.asarray(values, dtype=float)
    dt = float(t[1] - t[0])
    magnitude = np.abs(np.fft.rfft((y - y.mean()) * np.hanning(y.size)))
    omega = 2.0 * np.pi * np.fft.rfftfreq(t.size, dt)
    return omega, magnitude


def spectrum_peaks(omega: np.ndarray, magnitude: np.ndarray, count: int = 4) -> np.ndarray:
    """Frequencies of the `count` most prominent peaks, ascending"""
    found, props = sps.find_peaks(magnitude, prominence=0.0)
    order = np.argsort(props["prominences"])[::-1][:count]
    return np.sort(omega[found[order]])
