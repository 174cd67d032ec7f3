"""
Noise spectra, inhomogeneous broadening and Gaussian noise sampling.

A SpectralDensity holds a continuous classical part S_c(ω), a continuous
quantum part S_q(ω) and analytic line components that are never discretized.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from scipy import integrate, special

from core.exceptions import DomainError, NumericalError, ParameterError

logger = structlog.get_logger(__name__)

SpectrumFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_ORDER = 200
DEFAULT_RTOL = 1e-9
DEFAULT_MAX_ORDER = 12800
PANEL_ORDER = 24
DEFAULT_MAX_SPLITS = 6
GAUSSIAN_SPAN = 12.0  # support half-width in standard deviations of η


@dataclass(frozen=True)
class SpectralLine:
    """Classical line 2π·weight·δ(ω − frequency)"""

    frequency: float
    weight: float


@dataclass(frozen=True)
class QuantumLine:
    """Quantum correlator line, Im C(t) = amplitude·sin(frequency·|t|)"""

    frequency: float
    amplitude: float


@dataclass(frozen=True)
class StaticNoiseSample:
    eta: np.ndarray
    t2star: float
    seed: Optional[int]


def _add_fns(a: Optional[SpectrumFn], b: Optional[SpectrumFn]) -> Optional[SpectrumFn]:
    if a is None:
        return b
    if b is None:
        return a
    return lambda w: np.asarray(a(w)) + np.asarray(b(w))


@dataclass(frozen=True)
class SpectralDensity:
    """
    Noise spectrum S(ω) = S_c(ω) + i S_q(ω)

    support is the (ω_min, ω_max) window outside which the continuous parts
    vanish; it is required whenever a continuous part is present.
    """

    classical: Optional[SpectrumFn] = None
    quantum: Optional[SpectrumFn] = None
    lines: Tuple[SpectralLine, ...] = ()
    quantum_lines: Tuple[QuantumLine, ...] = ()
    support: Optional[Tuple[float, float]] = None
    grid: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for line in self.lines:
            if line.weight < 0:
                raise ParameterError("line weights must be nonnegative", line=line)
        if (self.classical or self.quantum) and self.support is None:
            raise ParameterError("continuous spectra need a support window")
        if self.support is not None and not self.support[1] > self.support[0]:
            raise ParameterError("support window must be increasing", support=self.support)

    @classmethod
    def zero(cls) -> "SpectralDensity":
        return cls()

    @classmethod
    def from_lines(
        cls,
        lines: Sequence[Tuple[float, float]] = (),
        quantum_lines: Sequence[Tuple[float, float]] = (),
    ) -> "SpectralDensity":
        return cls(
            lines=tuple(SpectralLine(float(w0), float(w)) for w0, w in lines),
            quantum_lines=tuple(QuantumLine(float(w0), float(b)) for w0, b in quantum_lines),
        )

    @classmethod
    def from_table(
        cls,
        omega: Sequence[float],
        classical: Sequence[float],
        quantum: Optional[Sequence[float]] = None,
    ) -> "SpectralDensity":
        """Linear interpolation of tabulated values, zero outside the table"""
        grid = np.asarray(omega, dtype=float)
        s_c = np.asarray(classical, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or s_c.shape != grid.shape:
            raise ParameterError("spectrum table needs matching 1-D columns")
        if np.any(np.diff(grid) <= 0):
            raise ParameterError("spectrum frequencies must be strictly increasing")
        if np.any(s_c < 0):
            raise ParameterError("classical spectrum must be nonnegative")

        def interp(values: np.ndarray) -> SpectrumFn:
            return lambda w: np.interp(w, grid, values, left=0.0, right=0.0)

        s_q = None
        if quantum is not None:
            s_q = np.asarray(quantum, dtype=float)
            if s_q.shape != grid.shape:
                raise ParameterError("quantum column length mismatch")
        return cls(
            classical=interp(s_c),
            quantum=interp(s_q) if s_q is not None else None,
            support=(float(grid[0]), float(grid[-1])),
            grid=grid,
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SpectralDensity":
        """Two-column (ω, S_c) or three-column (ω, S_c, S_q) numeric text"""
        frame = pd.read_csv(
            path, sep=r"[\s,]+", comment="#", header=None, engine="python"
        )
        if frame.shape[1] not in (2, 3):
            raise ParameterError(
                "spectrum file must have two or three columns",
                path=str(path),
                columns=frame.shape[1],
            )
        quantum = frame.iloc[:, 2].to_numpy() if frame.shape[1] == 3 else None
        logger.info("spectrum_loaded", path=str(path), rows=len(frame))
        return cls.from_table(frame.iloc[:, 0].to_numpy(), frame.iloc[:, 1].to_numpy(), quantum)

    @classmethod
    def flat(cls, level: float, cutoff: float) -> "SpectralDensity":
        """S_c = level on [-cutoff, cutoff]"""
        return cls(
            classical=lambda w: np.where(np.abs(w) <= cutoff, level, 0.0),
            support=(-cutoff, cutoff),
        )

    @classmethod
    def gaussian(cls, variance: float, width: float) -> "SpectralDensity":
        """Gaussian-shaped S_c with (2π)⁻¹∫S_c = variance and spectral width"""
        norm = variance * np.sqrt(2.0 * np.pi) / width
        return cls(
            classical=lambda w: norm * np.exp(-0.5 * (np.asarray(w) / width) ** 2),
            support=(-12.0 * width, 12.0 * width),
        )

    def __add__(self, other: "SpectralDensity") -> "SpectralDensity":
        if self.support is None:
            support = other.support
        elif other.support is None:
            support = self.support
        else:
            support = (
                min(self.support[0], other.support[0]),
                max(self.support[1], other.support[1]),
            )
        return SpectralDensity(
            classical=_add_fns(self.classical, other.classical),
            quantum=_add_fns(self.quantum, other.quantum),
            lines=self.lines + other.lines,
            quantum_lines=self.quantum_lines + other.quantum_lines,
            support=support,
        )

    def scaled(self, factor: float) -> "SpectralDensity":
        c, q = self.classical, self.quantum
        return SpectralDensity(
            classical=(lambda w: factor * np.asarray(c(w))) if c else None,
            quantum=(lambda w: factor * np.asarray(q(w))) if q else None,
            lines=tuple(SpectralLine(ln.frequency, factor * ln.weight) for ln in self.lines),
            quantum_lines=tuple(
                QuantumLine(ln.frequency, factor * ln.amplitude) for ln in self.quantum_lines
            ),
            support=self.support,
        )

    def negated_quantum(self) -> "SpectralDensity":
        q = self.quantum
        return SpectralDensity(
            classical=self.classical,
            quantum=(lambda w: -np.asarray(q(w))) if q else None,
            lines=self.lines,
            quantum_lines=tuple(QuantumLine(ln.frequency, -ln.amplitude) for ln in self.quantum_lines),
            support=self.support,
        )

    @property
    def has_classical(self) -> bool:
        return self.classical is not None or bool(self.lines)

    @property
    def has_quantum(self) -> bool:
        return self.quantum is not None or bool(self.quantum_lines)

    def evaluate(self, omega: np.ndarray) -> np.ndarray:
        """Continuous part S_c + i S_q on a grid (lines excluded)"""
        w = np.asarray(omega, dtype=float)
        out = np.zeros(w.shape, dtype=complex)
        if self.classical is not None:
            out += np.asarray(self.classical(w))
        if self.quantum is not None:
            out += 1j * np.asarray(self.quantum(w))
        return out

    def correlation(self, lags: Union[float, np.ndarray]) -> np.ndarray:
        """
        C(t) = Re C + i Im C at lags |t|

        Re C(t) = ∫dω/2π S_c(ω)cos ωt and Im C(t) = ∫dω/2π S_q(ω)cos ωt,
        plus the analytic line terms.
        """
        t = np.abs(np.atleast_1d(np.asarray(lags, dtype=float)))
        out = np.zeros(t.shape, dtype=complex)
        for line in self.lines:
            out += line.weight * np.cos(line.frequency * t)
        for qline in self.quantum_lines:
            out += 1j * qline.amplitude * np.sin(qline.frequency * t)
        for fn, unit in ((self.classical, 1.0), (self.quantum, 1j)):
            if fn is None:
                continue
            assert self.support is not None
            lo, hi = self.support
            for i, lag in enumerate(t):
                value, _ = integrate.quad(
                    lambda w: float(fn(np.asarray(w))) * np.cos(w * lag),
                    lo,
                    hi,
                    limit=400,
                    points=[0.0] if lo < 0.0 < hi else None,
                )
                out[i] += unit * value / (2.0 * np.pi)
        return out


def t2star_from_spectrum(spectrum: SpectralDensity) -> float:
    """T2* = sqrt(2 / [(2π)⁻¹∫S_c(ω)dω])"""
    total = sum(line.weight for line in spectrum.lines)
    if spectrum.classical is not None:
        assert spectrum.support is not None
        if spectrum.grid is not None:
            grid = spectrum.grid
            area = integrate.trapezoid(spectrum.classical(grid), grid)
        else:
            area, _ = integrate.quad(
                lambda w: float(spectrum.classical(np.asarray(w))),  # type: ignore[misc]
                *spectrum.support,
                limit=400,
            )
        total += area / (2.0 * np.pi)
    if not np.isfinite(total):
        raise NumericalError("spectrum is not integrable", integral=total)
    if total <= 0:
        raise ParameterError("spectrum has zero integral; T2* undefined")
    return float(np.sqrt(2.0 / total))


@lru_cache(maxsize=32)
def _hermite(order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_hermite(order)
    return x, w / np.sqrt(np.pi)


@lru_cache(maxsize=8)
def _legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    return special.roots_legendre(order)


def gaussian_density(eta: Union[float, np.ndarray], t2star: float) -> np.ndarray:
    """(T2*/√(4π)) e^{-η²T2*²/4}"""
    x = np.asarray(eta, dtype=float)
    return t2star / np.sqrt(4.0 * np.pi) * np.exp(-0.25 * (x * t2star) ** 2)


def gauss_hermite_nodes(t2star: float, order: int = DEFAULT_ORDER) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes η_k and normalized weights for the Gaussian of variance 2/(T2*)²"""
    if not t2star > 0:
        raise ParameterError("t2star must be positive", t2star=t2star)
    x, w = _hermite(int(order))
    return 2.0 * x / t2star, w


def graded_breakpoints(center: float, width: float, t2star: float) -> np.ndarray:
    """center ± width·2^k out to the edge of the Gaussian support"""
    if not width > 0:
        raise ParameterError("breakpoint width must be positive", width=width)
    span = GAUSSIAN_SPAN * np.sqrt(2.0) / t2star
    reach = abs(center) + span
    steps = width * 2.0 ** np.arange(int(np.ceil(np.log2(reach / width))) + 1)
    return np.concatenate([[center], center - steps, center + steps])


def gaussian_panel_nodes(
    t2star: float,
    breakpoints: Sequence[float],
    order: int = PANEL_ORDER,
    splits: int = 0,
    span_sigmas: float = GAUSSIAN_SPAN,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Composite Gauss–Legendre nodes over the Gaussian support

    The support |η| ≤ span_sigmas·√2/T2* is cut at the breakpoints, each piece
    is halved `splits` times, and the returned weights include the density.
    """
    if not t2star > 0:
        raise ParameterError("t2star must be positive", t2star=t2star)
    span = span_sigmas * np.sqrt(2.0) / t2star
    cuts = np.clip(np.concatenate([[-span, 0.0, span], np.asarray(breakpoints, dtype=float)]), -span, span)
    edges = np.unique(cuts)
    for _ in range(splits):
        edges = np.sort(np.concatenate([edges, 0.5 * (edges[:-1] + edges[1:])]))
    x, w = _legendre(int(order))
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel() * gaussian_density(nodes, t2star)
    return nodes, weights


def gaussian_average(
    f: Callable[[np.ndarray], Any],
    t2star: float,
    order: int = DEFAULT_ORDER,
    rtol: float = DEFAULT_RTOL,
    atol: float = 0.0,
    max_order: int = DEFAULT_MAX_ORDER,
    breakpoints: Optional[Sequence[float]] = None,
    max_splits: int = DEFAULT_MAX_SPLITS,
    panel_order: int = PANEL_ORDER,
) -> Any:
    """
    ⟨⟨f⟩⟩ = ∫dη (T2*/√(4π)) e^{-η²T2*²/4} f(η)

    f takes a 1-D array of η nodes and returns values whose leading axis runs
    over the nodes. Without breakpoints this is Gauss–Hermite quadrature whose
    order doubles until two successive results agree. Integrands with features
    much narrower than 1/T2* (a Lorentzian core) pass breakpoints instead, and
    composite Gauss–Legendre panels are halved until they agree.

    Raises:
        NumericalError: when the order or panel limit is reached without agreement
    """

    def converged(current: np.ndarray, previous: np.ndarray) -> bool:
        diff = float(np.max(np.abs(current - previous)))
        scale = float(np.max(np.abs(current)))
        return diff <= rtol * scale + atol

    def unwrap(current: np.ndarray) -> Any:
        return current.item() if current.ndim == 0 else current

    if breakpoints is not None:

        def on_panels(splits: int) -> np.ndarray:
            eta, weights = gaussian_panel_nodes(t2star, breakpoints, order=panel_order, splits=splits)
            return np.tensordot(weights, np.asarray(f(eta)), axes=(0, 0))

        previous = on_panels(0)
        for splits in range(1, max_splits + 1):
            current = on_panels(splits)
            if converged(current, previous):
                return unwrap(current)
            previous = current
        raise NumericalError(
            "gaussian average did not converge", max_splits=max_splits, t2star=t2star
        )

    def at(n: int) -> np.ndarray:
        eta, weights = gauss_hermite_nodes(t2star, n)
        values = np.asarray(f(eta))
        return np.tensordot(weights, values, axes=(0, 0))

    previous = at(order)
    n = order
    while n < max_order:
        n *= 2
        current = at(n)
        if converged(current, previous):
            return unwrap(current)
        previous = current
    raise NumericalError(
        "gaussian average did not converge", max_order=max_order, t2star=t2star
    )


def gaussian_resolvent(z: Union[complex, np.ndarray], t2star: float) -> Union[complex, np.ndarray]:
    """
    ⟨⟨1/(η - z)⟩⟩ in closed form, i√π (T2*/2) w(zT2*/2) for Im z ≥ 0

    w is the Faddeeva function; the lower half plane follows by conjugation.
    """
    if not t2star > 0:
        raise ParameterError("t2star must be positive", t2star=t2star)
    zs = np.asarray(z, dtype=complex)
    upper = np.where(zs.imag >= 0, zs, np.conj(zs))
    value = 0.5j * np.sqrt(np.pi) * t2star * special.wofz(0.5 * t2star * upper)
    out = np.where(zs.imag >= 0, value, np.conj(value))
    return complex(out) if out.ndim == 0 else out


def sample_static_eta(
    t2star: float, seed: Optional[int], size: Optional[int] = None
) -> StaticNoiseSample:
    """Draw static detunings η ~ N(0, 2/T2*²)"""
    if not t2star > 0:
        raise ParameterError("t2star must be positive", t2star=t2star)
    rng = np.random.default_rng(seed)
    eta = rng.normal(0.0, np.sqrt(2.0) / t2star, size=size)
    return StaticNoiseSample(eta=np.asarray(eta), t2star=t2star, seed=seed)


def sample_trajectory(
    spectrum: SpectralDensity,
    dt: float,
    n_steps: int,
    seed: Optional[int],
    n_realizations: Optional[int] = None,
    nyquist_tolerance: float = 1e-6,
) -> np.ndarray:
    """
    Stationary Gaussian series η(t_k), t_k = k·dt, by spectral synthesis

    Each Fourier mode ω_j = 2πj/(n_steps·dt) gets independent Gaussian
    cosine and sine coefficients of variance S_c(ω_j)Δω/π; lines get exact
    variances. The series is periodic in n_steps·dt.

    Returns:
        array of shape (n_steps,) or (n_realizations, n_steps)
    """
    if dt <= 0 or n_steps < 2:
        raise ParameterError("need dt > 0 and at least two steps", dt=dt, n_steps=n_steps)
    nyquist = np.pi / dt
    realizations = 1 if n_realizations is None else int(n_realizations)
    rng = np.random.default_rng(seed)
    series = np.zeros((realizations, n_steps))

    if spectrum.classical is not None:
        assert spectrum.support is not None
        scan = np.linspace(0.0, max(abs(spectrum.support[0]), spectrum.support[1]), 4001)
        values = np.asarray(spectrum.classical(scan))
        peak = float(values.max()) if values.size else 0.0
        beyond = values[scan >= nyquist]
        if peak > 0 and beyond.size and float(beyond.max()) > nyquist_tolerance * peak:
            raise DomainError(
                "spectrum undersampled at Nyquist", nyquist=nyquist, support=spectrum.support
            )
        half = n_steps // 2
        d_omega = 2.0 * np.pi / (n_steps * dt)
        omega = np.arange(half) * d_omega
        variance = np.asarray(spectrum.classical(omega)) * d_omega / np.pi
        variance[0] *= 0.5
        sigma = np.sqrt(np.clip(variance, 0.0, None))
        re = rng.normal(size=(realizations, half)) * sigma
        im = rng.normal(size=(realizations, half)) * sigma
        coeffs = np.zeros((realizations, half + 1), dtype=complex)
        coeffs[:, 0] = n_steps * re[:, 0]
        coeffs[:, 1:half] = 0.5 * n_steps * (re[:, 1:] - 1j * im[:, 1:])
        series += np.fft.irfft(coeffs, n=n_steps, axis=1)

    times = np.arange(n_steps) * dt
    grouped: dict = {}
    for line in spectrum.lines:
        key = abs(line.frequency)
        if key > nyquist:
            raise DomainError("line above Nyquist", frequency=line.frequency, nyquist=nyquist)
        grouped[key] = grouped.get(key, 0.0) + line.weight
    for freq in sorted(grouped):
        std = np.sqrt(grouped[freq])
        a = rng.normal(size=(realizations, 1)) * std
        if freq == 0.0:
            series += a
            continue
        b = rng.normal(size=(realizations, 1)) * std
        series += a * np.cos(freq * times) + b * np.sin(freq * times)

    return series[0] if n_realizations is None else series
