"""
Extractable signal per measurement cycle.
"""

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np
import structlog

from core.exceptions import ParameterError
from core.model import EchoEnvelope, SystemParams

logger = structlog.get_logger(__name__)

BOUND_SLACK = 1e-9


class SignalProtocol(Enum):
    STATIC_COUPLING = "static_coupling"
    PULSED_COUPLING = "pulsed_coupling"


@dataclass(frozen=True)
class SignalBounds:
    hahn: float
    cpmg: float
    maximum: float


@dataclass(frozen=True)
class SignalReport:
    """
    Signal S and the quantities it was built from

    `raw_signal` keeps the unclipped closed-form value; `signal` is clipped to
    [0, 1] and `regime_violation` is set when clipping was needed.
    """

    n_eff: float
    signal: float
    raw_signal: float
    bounds: SignalBounds
    protocol: SignalProtocol
    t_on: Optional[float] = None
    regime_violation: bool = False
    n_eff_infinite: bool = False
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["protocol"] = self.protocol.value
        bounds = out.pop("bounds")
        out.update({f"s_{key}": value for key, value in bounds.items()})
        extra = out.pop("extra")
        out.update(extra)
        return out

    def to_text(self) -> str:
        """Flat key=value block"""
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, float):
                value = repr(value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


def signal_bounds(params: SystemParams, tau: float) -> SignalBounds:
    """
    Closed-form limits (S_Hahn, S_CPMG, S_max)

    S_Hahn = (√(5π)/2) g T2* √(κ₂/κ), S_CPMG = (2√π/3) √((κ₂/κ)/(κτ)),
    S_max = √(κ₂/κ).
    """
    if tau <= 0:
        raise ParameterError("tau must be positive", tau=tau)
    ratio = params.kappa_2 / params.kappa_total
    return SignalBounds(
        hahn=float(np.sqrt(5.0 * np.pi) / 2.0 * params.coupling * params.t2star * np.sqrt(ratio)),
        cpmg=float(2.0 * np.sqrt(np.pi) / 3.0 * np.sqrt(ratio / (params.kappa_total * tau))),
        maximum=float(np.sqrt(ratio)),
    )


def cross_term_factor(n: int, m: int, tau: float, params: SystemParams) -> float:
    """Overlap of the line wavepackets emitted at nτ and mτ, (κ₂/κ)e^{-|n-m|κτ/2}"""
    ratio = params.kappa_2 / params.kappa_total
    return float(ratio * np.exp(-0.5 * abs(n - m) * params.kappa_total * tau))


def _amplitudes(envelope: EchoEnvelope) -> np.ndarray:
    amps = np.asarray(envelope.weights) * np.asarray(envelope.values)
    amps = amps.astype(complex)
    # the n = 0 revival is half a Gaussian, normalized to ⟨σ_x⟩₀/2
    amps[0] = 0.5
    return amps


def n_eff(envelope: EchoEnvelope, params: Optional[SystemParams] = None, cross_terms: bool = False) -> float:
    """
    N_eff = 1/4 + Σ_{n=1}^{N} |Ḡ_n C̃(nτ)|²

    With `cross_terms` the overlaps e^{-|n-m|κτ/2} between different echoes
    are kept (needs params for κ).
    """
    amps = _amplitudes(envelope)
    diagonal = float(np.sum(np.abs(amps) ** 2))
    if not cross_terms:
        return diagonal
    if params is None:
        raise ParameterError("cross terms need system parameters")
    idx = np.arange(amps.size)
    lags = np.abs(idx[:, None] - idx[None, :])
    overlap = np.exp(-0.5 * lags * params.kappa_total * envelope.tau)
    gram = np.real(np.outer(amps, amps.conj()) * overlap)
    return float(np.sum(gram))


def _clip(raw: float) -> float:
    return float(min(max(raw, 0.0), 1.0))


def signal_strength(
    params: SystemParams,
    envelope: EchoEnvelope,
    sigma_x0: complex = 1.0,
    cross_terms: bool = False,
) -> SignalReport:
    """S = [|⟨σ_x⟩₀|² π (g T2*)² (κ₂/κ) N_eff]^{1/2}"""
    effective = n_eff(envelope, params, cross_terms=cross_terms)
    ratio = params.kappa_2 / params.kappa_total
    raw = float(
        np.sqrt(abs(sigma_x0) ** 2 * np.pi * (params.coupling * params.t2star) ** 2 * ratio * effective)
    )
    violation = raw > 1.0
    if violation:
        logger.warning("signal_exceeds_unity", raw_signal=raw, n_eff=effective)
    return SignalReport(
        n_eff=effective,
        signal=_clip(raw),
        raw_signal=raw,
        bounds=signal_bounds(params, envelope.tau),
        protocol=SignalProtocol.STATIC_COUPLING,
        regime_violation=violation,
        extra={"n_echoes": envelope.n_echoes, "cross_terms": cross_terms},
    )


def geometric_n_eff(ratio: float, n_echoes: Optional[int] = None) -> float:
    """1/4 + Σ_{n=1}^{N} ratioⁿ in closed form, N unbounded if omitted"""
    if not 0.0 <= ratio <= 1.0:
        raise ParameterError("echo ratio must lie in [0, 1]", ratio=ratio)
    if n_echoes is not None and n_echoes < 0:
        raise ParameterError("n_echoes must be nonnegative", n_echoes=n_echoes)
    if ratio == 1.0:
        return float("inf") if n_echoes is None else 0.25 + n_echoes
    if n_echoes is None or ratio == 0.0:
        return 0.25 + ratio / (1.0 - ratio)
    # 1 - ratio^N without cancellation when ratio is close to one
    head = -np.expm1(n_echoes * np.log(ratio))
    return float(0.25 + ratio * head / (1.0 - ratio))


def pulsed_coupling_signal(
    params: SystemParams,
    t_on: float,
    tau: Optional[float] = None,
    n_echoes: Optional[int] = None,
    sigma_x0: complex = 1.0,
) -> SignalReport:
    """
    Signal when g is switched on only for |t - nτ| ≤ t_on/2

    Each echo multiplies the envelope by 1 - (g t_on)², so
    N_eff = 1/4 + Σ [1 - (g t_on)²]ⁿ and S = [|⟨σ_x⟩₀|²(g t_on)²(κ₂/κ)N_eff]^{1/2}.

    Args:
        params: system parameters
        t_on: switching window per echo
        tau: echo spacing for the reported bounds, defaults to 10/κ
        n_echoes: finite echo count; unbounded if omitted
        sigma_x0: initial transverse polarization
    """
    if t_on < 0:
        raise ParameterError("t_on must be nonnegative", t_on=t_on)
    product = params.coupling * t_on
    if product >= 1.0:
        raise ParameterError("pulsed coupling needs g*t_on < 1", g_t_on=product)
    if t_on >= params.t2star:
        logger.warning("t_on_exceeds_t2star", t_on=t_on, t2star=params.t2star)
    spacing = 10.0 / params.kappa_total if tau is None else tau
    bounds = signal_bounds(params, spacing)
    ratio = params.kappa_2 / params.kappa_total
    infinite = product == 0.0 and n_echoes is None
    if infinite:
        # ratio-1 series diverges while each term carries (g t_on)² = 0
        raw = bounds.maximum * abs(sigma_x0)
        effective = float("inf")
    else:
        effective = geometric_n_eff(1.0 - product**2, n_echoes)
        raw = float(np.sqrt(abs(sigma_x0) ** 2 * product**2 * ratio * effective))
    capped = min(raw, bounds.maximum)
    logger.info("pulsed_coupling_signal", g_t_on=product, n_eff=effective, signal=capped)
    return SignalReport(
        n_eff=effective,
        signal=_clip(capped),
        raw_signal=raw,
        bounds=bounds,
        protocol=SignalProtocol.PULSED_COUPLING,
        t_on=t_on,
        regime_violation=raw > bounds.maximum + BOUND_SLACK,
        n_eff_infinite=infinite,
        extra={"echo_factor": 1.0 - product**2},
    )
