"""
Shared physical parameter and pulse-sequence types.

All angular frequencies are in rad/s and rates in 1/s. Dimensionless runs set
kappa_total=1 and express every other quantity in units of κ.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.exceptions import DomainError, ParameterError

logger = structlog.get_logger(__name__)

KAPPA_PARTITION_RTOL = 1e-12
HIGH_Q_RATIO = 100.0  # κ ≪ |Δ| taken as 100κ ≤ |Δ|
SLOW_PULSING_MIN = 10.0  # κτ ≫ 1 taken as κτ ≥ 10

ArrayLike = Union[float, Sequence[float], np.ndarray]


class SequenceKind(Enum):
    """Decoupling protocols"""

    FID = "fid"  # Free induction decay, no pulses
    HAHN = "hahn"  # Single refocusing pulse at τ/2
    CPMG = "cpmg"  # N pulses at (n-1/2)τ
    CUSTOM = "custom"  # Arbitrary pulse times


@dataclass(frozen=True)
class PulseSequence:
    """Instantaneous π_x pulse train and its toggling-frame sign function"""

    kind: SequenceKind
    pulse_times: Tuple[float, ...]
    total_time: float
    tau: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.total_time > 0:
            raise ParameterError(
                "total_time must be positive", total_time=self.total_time
            )
        times = np.asarray(self.pulse_times, dtype=float)
        if times.size and (np.any(np.diff(times) <= 0)):
            raise ParameterError("pulse times must be strictly increasing")
        if times.size and (times[0] <= 0 or times[-1] >= self.total_time):
            raise ParameterError(
                "pulse times must lie inside (0, total_time)",
                first=float(times[0]),
                last=float(times[-1]),
                total_time=self.total_time,
            )

    @classmethod
    def fid(cls, total_time: float) -> "PulseSequence":
        return cls(SequenceKind.FID, (), float(total_time))

    @classmethod
    def hahn(cls, tau: float) -> "PulseSequence":
        return cls(SequenceKind.HAHN, (0.5 * tau,), float(tau), float(tau))

    @classmethod
    def cpmg(cls, n_pulses: int, tau: float) -> "PulseSequence":
        """CPMG(N, τ): pulses at (n-1/2)τ for n=1..N, echoes at nτ"""
        if n_pulses < 1:
            raise ParameterError("CPMG needs at least one pulse", n_pulses=n_pulses)
        if not tau > 0:
            raise ParameterError("tau must be positive", tau=tau)
        times = tuple((k - 0.5) * tau for k in range(1, n_pulses + 1))
        return cls(SequenceKind.CPMG, times, n_pulses * tau, float(tau))

    @classmethod
    def custom(cls, pulse_times: Sequence[float], total_time: float) -> "PulseSequence":
        return cls(
            SequenceKind.CUSTOM,
            tuple(float(t) for t in pulse_times),
            float(total_time),
        )

    @property
    def n_pulses(self) -> int:
        return len(self.pulse_times)

    @property
    def is_periodic(self) -> bool:
        return self.kind in (SequenceKind.HAHN, SequenceKind.CPMG)

    def echo_times(self) -> np.ndarray:
        """Times nτ, n=0..N, at which the sign function integrates to zero"""
        if not self.is_periodic or self.tau is None:
            return np.array([0.0])
        return np.arange(self.n_pulses + 1) * self.tau

    def segments(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Segment boundaries b_0=0 < ... < b_K=t and the sign on each segment"""
        _check_domain(self, t)
        inside = [p for p in self.pulse_times if p < t]
        bounds = np.array([0.0, *inside, float(t)])
        signs = (-1.0) ** np.arange(len(bounds) - 1)
        return bounds, signs


@dataclass(frozen=True, eq=False)
class EchoEnvelope:
    """Complex echo envelope C̃(nτ), n=0..N, with revival weights Ḡ_n"""

    tau: float
    values: np.ndarray
    weights: np.ndarray
    qubit_splitting: float = 0.0
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        weights = np.asarray(self.weights, dtype=float)
        if values.ndim != 1 or values.shape != weights.shape:
            raise ParameterError(
                "envelope values and weights must be 1-D of equal length",
                values=values.shape,
                weights=weights.shape,
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @property
    def n_echoes(self) -> int:
        return int(self.values.size - 1)

    @property
    def echo_times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.tau

    @property
    def delta_delta(self) -> float:
        """δ_Δ = Δ mod 2π/τ"""
        return splitting_residue(self.qubit_splitting, self.tau)


def splitting_residue(qubit_splitting: float, tau: float) -> float:
    """Δ reduced into [0, 2π/τ)"""
    period = 2.0 * math.pi / tau
    residue = float(qubit_splitting % period)
    # float % can round up to the period itself for tiny negative inputs
    return 0.0 if residue >= period else residue


class SystemParams(BaseModel):
    """Qubit, cavity, coupling and decay parameters"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    qubit_splitting: float = Field(0.0, description="Δ, qubit splitting (rad/s)")
    detuning: float = Field(0.0, description="δ = ω_c − Δ (rad/s)")
    coupling: float = Field(0.0, ge=0.0, description="g (rad/s)")
    kappa_total: float = Field(1.0, ge=0.0, description="κ (1/s)")
    kappa_in: float = Field(0.0, ge=0.0, description="κ_1, input port")
    kappa_out: Optional[float] = Field(
        None, ge=0.0, description="κ_2, output port; defaults to κ − κ_1 − κ_ext"
    )
    kappa_ext: float = Field(0.0, ge=0.0, description="internal loss rate")
    dephasing: float = Field(0.0, ge=0.0, description="γ_φ, Markovian dephasing")
    t2star: float = Field(..., gt=0.0, description="T2*, inhomogeneous time (s)")

    @model_validator(mode="after")
    def _check_partition(self) -> "SystemParams":
        if self.kappa_out is None:
            remainder = self.kappa_total - self.kappa_in - self.kappa_ext
            if remainder < -KAPPA_PARTITION_RTOL * max(self.kappa_total, 1e-300):
                raise ValueError(
                    "kappa partition mismatch: kappa_in + kappa_ext exceeds kappa_total"
                )
            object.__setattr__(self, "kappa_out", max(remainder, 0.0))
            return self
        total = self.kappa_in + self.kappa_out + self.kappa_ext
        scale = max(abs(self.kappa_total), abs(total), 1e-300)
        if abs(total - self.kappa_total) > KAPPA_PARTITION_RTOL * scale:
            raise ValueError(
                f"kappa partition mismatch: kappa_in + kappa_out + kappa_ext = "
                f"{total!r} but kappa_total = {self.kappa_total!r}"
            )
        return self

    @property
    def cavity_freq(self) -> float:
        """ω_c = Δ + δ"""
        return self.qubit_splitting + self.detuning

    @property
    def kappa_2(self) -> float:
        return float(self.kappa_out or 0.0)


class SpinEnvParams(BaseModel):
    """Single nuclear spin-1/2 environment (hyperfine A and field γB)"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    hyperfine: float = Field(..., description="A (rad/s)")
    field_x: float = Field(0.0, description="γB_x (rad/s)")
    field_z: float = Field(0.0, description="γB_z (rad/s)")
    gyromagnetic: float = Field(-5.319e7, description="γ (rad/(T s)), 29Si default")
    polarization: float = Field(0.0, ge=-1.0, le=1.0)

    @classmethod
    def from_tesla(
        cls,
        hyperfine: float,
        b_x: float,
        b_z: float,
        gyromagnetic: float = -5.319e7,
        polarization: float = 0.0,
    ) -> "SpinEnvParams":
        return cls(
            hyperfine=hyperfine,
            field_x=gyromagnetic * b_x,
            field_z=gyromagnetic * b_z,
            gyromagnetic=gyromagnetic,
            polarization=polarization,
        )


@dataclass(frozen=True)
class RegimeFlags:
    """Which closed-form regime assumptions hold"""

    high_q: bool  # κ ≪ |Δ|
    narrow_cavity: bool  # κT2* < 1
    slow_pulsing: bool  # κτ ≫ 1


@dataclass(frozen=True)
class ValidatedParams:
    params: SystemParams
    flags: RegimeFlags
    warnings: Tuple[str, ...]
    tau: Optional[float] = None


def _check_domain(seq: PulseSequence, t: ArrayLike) -> None:
    arr = np.asarray(t, dtype=float)
    slack = 1e-12 * seq.total_time
    if np.any(arr < -slack) or np.any(arr > seq.total_time + slack):
        raise DomainError(
            "time outside [0, total_time]",
            min=float(arr.min()),
            max=float(arr.max()),
            total_time=seq.total_time,
        )


def sign_function(seq: PulseSequence, t: ArrayLike) -> Union[int, np.ndarray]:
    """
    Toggling-frame sign s(t) = (-1)^(number of pulses at or before t)

    Right-continuous at the pulse times.
    """
    _check_domain(seq, t)
    counts = np.searchsorted(np.asarray(seq.pulse_times), t, side="right")
    signs = np.where(counts % 2 == 0, 1, -1)
    if np.ndim(t) == 0:
        return int(signs)
    return signs


def balanced_integral(seq: PulseSequence, t: ArrayLike) -> Union[float, np.ndarray]:
    """Exact ∫_0^t s(t') dt' by piecewise summation"""
    _check_domain(seq, t)
    arr = np.asarray(t, dtype=float)
    if seq.is_periodic and seq.tau is not None:
        # s = (-1)^k on [(k-1/2)τ, (k+1/2)τ); vanishes exactly at t = kτ
        k = np.floor(arr / seq.tau + 0.5)
        out = np.where(k % 2 == 0, 1.0, -1.0) * (arr - k * seq.tau)
    else:
        pulses = np.asarray(seq.pulse_times, dtype=float)
        bounds = np.concatenate(([0.0], pulses))
        signs = (-1.0) ** np.arange(bounds.size)
        # completed segments before each pulse, then the open tail
        completed = np.concatenate(([0.0], np.cumsum(signs[:-1] * np.diff(bounds))))
        idx = np.searchsorted(pulses, arr, side="right")
        out = completed[idx] + signs[idx] * (arr - bounds[idx])
    if out.ndim == 0:
        return float(out)
    return out


def regime_flags(params: SystemParams, tau: Optional[float] = None) -> RegimeFlags:
    kappa = params.kappa_total
    return RegimeFlags(
        high_q=HIGH_Q_RATIO * kappa <= abs(params.qubit_splitting),
        narrow_cavity=kappa * params.t2star < 1.0,
        slow_pulsing=tau is not None and kappa * tau >= SLOW_PULSING_MIN,
    )


def validate(
    params: Union[SystemParams, ValidatedParams, Mapping[str, Any]],
    tau: Optional[float] = None,
) -> ValidatedParams:
    """
    Check parameters and derive regime flags

    Args:
        params: raw mapping, SystemParams or an already validated set
        tau: pulse spacing, enables the slow-pulsing flag

    Returns:
        ValidatedParams with flags and regime warnings (warnings never raise)
    """
    if isinstance(params, ValidatedParams):
        tau = params.tau if tau is None else tau
        params = params.params
    if not isinstance(params, SystemParams):
        try:
            params = SystemParams(**dict(params))
        except ValidationError as exc:
            raise ParameterError(
                "invalid system parameters",
                errors=[err["msg"] for err in exc.errors()],
            ) from exc
    if tau is not None and not tau > 0:
        raise ParameterError("tau must be positive", tau=tau)

    flags = regime_flags(params, tau)
    warnings: List[str] = []
    if not flags.high_q:
        warnings.append("high_q: kappa is not << |qubit_splitting|; RWA input-output forms degrade")
    if not flags.narrow_cavity:
        warnings.append("narrow_cavity: kappa*t2star >= 1; simplified wavepackets do not apply")
    if tau is not None and not flags.slow_pulsing:
        warnings.append("slow_pulsing: kappa*tau < 10; revival cross terms are not negligible")
    if params.coupling >= params.kappa_total > 0:
        warnings.append("coupling: g >= kappa; restricted-subspace approximation degrades")
    for message in warnings:
        logger.warning("regime_assumption_failed", detail=message)
    return ValidatedParams(params=params, flags=flags, warnings=tuple(warnings), tau=tau)
