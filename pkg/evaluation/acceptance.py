"""
Acceptance checks for cavityecho
Each check evaluates a closed form against an independent route (adaptive
quadrature, exact propagation or the brute-force oracle) and reports the
worst deviation next to its threshold
"""

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import structlog
from scipy import integrate, optimize

from core.backaction import (
    WeightMode,
    asymptotic_first_zero,
    first_zero_crossing,
    full_envelope,
    gamma_p,
    purcell_envelope_factor,
    revival_shape,
)
from core.cavity import detuning_sweep, field_spectrum_peak, invert_dft
from core.exceptions import AcceptanceError, CavityEchoError
from core.filters import classical_filter, quantum_filter, quantum_phase
from core.model import EchoEnvelope, PulseSequence, SpinEnvParams, SystemParams
from core.noise import SpectralDensity
from core.oracle import (
    LineMode,
    OracleSettings,
    averaged_observables,
    oracle_revival_shape,
    oracle_signal,
    positivity_violations,
    stretched_exponent,
)
from core.signal import pulsed_coupling_signal, signal_bounds, signal_strength
from core.spinmodel import (
    count_transmission_features,
    eseem_components,
    eseem_envelope,
    envelope_spectrum,
    exact_hahn_envelope,
    fit_visibility,
    passivity_bound,
    spectrum_peaks,
    spin_frequencies,
    spin_spectral_density,
    transmission,
    transmission_grid,
)

logger = structlog.get_logger(__name__)

TWO_PI = 2.0 * math.pi

# weak-coupling Purcell setting in units of κ
PURCELL_TAU = 10.0
PURCELL_ECHOES = 2000
REVIVAL_INDEX = 2000
REVIVAL_ZERO_POINTS = 2001

# single 29Si nuclear spin next to a donor electron, SI units
HYPERFINE = TWO_PI * -0.25e6
CAVITY_KAPPA = TWO_PI * 1e6
QUBIT_SPLITTING = TWO_PI * 0.4e9

ESEEM_SAMPLES = 2048
QUANTUM_PHASE_TAU0 = 0.3e-6
QUANTUM_PHASE_HALVINGS = 5


class CheckStatus(Enum):
    """Outcome of a single acceptance check"""

    PASSED = "passed"
    FAILED = "failed"


@dataclass
class CheckResult:
    """Result of one acceptance check"""

    name: str
    status: CheckStatus
    value: float
    threshold: float
    detail: Dict[str, Any] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def failed(self) -> bool:
        return self.status is CheckStatus.FAILED

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status.value,
            "value": self.value,
            "threshold": self.threshold,
            "elapsed": self.elapsed,
            "detail": self.detail,
        }


@dataclass
class AcceptanceReport:
    """All check results of one run, in execution order"""

    results: List[CheckResult]
    seed: int

    @property
    def passed(self) -> bool:
        return not any(result.failed for result in self.results)

    @property
    def failures(self) -> List[str]:
        return [result.name for result in self.results if result.failed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "seed": self.seed,
            "checks": [result.to_dict() for result in self.results],
        }

    def to_dataframe(self) -> pd.DataFrame:
        rows = [
            {
                "name": r.name,
                "status": r.status.value,
                "value": r.value,
                "threshold": r.threshold,
                "elapsed": r.elapsed,
            }
            for r in self.results
        ]
        return pd.DataFrame(rows, columns=["name", "status", "value", "threshold", "elapsed"])

    def raise_for_failures(self) -> None:
        if not self.passed:
            raise AcceptanceError("acceptance checks failed", failed=self.failures)


def purcell_params(coupling: float = 0.1) -> SystemParams:
    """κ = 1, κT2* = 0.1, all emission into the output port"""
    return SystemParams(
        qubit_splitting=1000.0,
        coupling=coupling,
        kappa_total=1.0,
        t2star=0.1,
    )


def broadening_params(t2star: float) -> SystemParams:
    """κ/2π = 1 MHz, g = 0.2κ, γ_φ⁻¹ = 100 µs, symmetric ports, δ = 0"""
    return SystemParams(
        qubit_splitting=QUBIT_SPLITTING,
        coupling=0.2 * CAVITY_KAPPA,
        kappa_total=CAVITY_KAPPA,
        kappa_in=0.5 * CAVITY_KAPPA,
        kappa_out=0.5 * CAVITY_KAPPA,
        dephasing=1e4,
        t2star=t2star,
    )


def nuclear_spin_env(polarization: float = 0.0) -> SpinEnvParams:
    """A/2π = -0.25 MHz with γB_x = γB_z = A/2"""
    return SpinEnvParams(
        hyperfine=HYPERFINE,
        field_x=0.5 * HYPERFINE,
        field_z=0.5 * HYPERFINE,
        polarization=polarization,
    )


def _status(ok: bool) -> CheckStatus:
    return CheckStatus.PASSED if ok else CheckStatus.FAILED


def _sign_integral_quadrature(seq: PulseSequence, omega: np.ndarray, t: float) -> np.ndarray:
    """∫_0^t e^{iωt'}s(t')dt' by adaptive quadrature, segment by segment"""
    bounds, signs = seq.segments(t)
    n = omega.size

    def integrand(x: float) -> np.ndarray:
        return np.concatenate((np.cos(omega * x), np.sin(omega * x)))

    total = np.zeros(2 * n)
    for lo, hi, sign in zip(bounds[:-1], bounds[1:], signs):
        value, _ = integrate.quad_vec(integrand, lo, hi, epsabs=0.0, epsrel=1e-13, norm="max")
        total += sign * value
    return total[:n] + 1j * total[n:]


def check_filter_exactness(seed: int, n_jobs: int = 1, sequences: int = 100, frequencies: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    total = 1.0
    worst_c = 0.0
    worst_q = 0.0
    for _ in range(sequences):
        count = int(rng.integers(0, 9))
        times = np.sort(rng.uniform(1e-3, total - 1e-3, size=count))
        seq = PulseSequence.custom(times.tolist(), total)
        omega = rng.uniform(-50.0, 50.0, size=frequencies)
        direct = _sign_integral_quadrature(seq, omega, total)
        fc_ref = 0.5 * omega**2 * np.abs(direct) ** 2
        fq_ref = omega * direct.imag
        # values far below their natural scale are compared absolutely
        floor_c = 1e-3 * (omega * total) ** 2
        floor_q = 1e-3 * np.abs(omega) * total
        fc = np.asarray(classical_filter(seq, omega, total))
        fq = np.asarray(quantum_filter(seq, omega, total))
        worst_c = max(worst_c, float(np.max(np.abs(fc - fc_ref) / np.maximum(np.abs(fc_ref), floor_c))))
        worst_q = max(worst_q, float(np.max(np.abs(fq - fq_ref) / np.maximum(np.abs(fq_ref), floor_q))))
    worst = max(worst_c, worst_q)
    return CheckResult(
        "filter_exactness",
        _status(worst <= 1e-10),
        worst,
        1e-10,
        {"classical": worst_c, "quantum": worst_q, "sequences": sequences},
    )


def check_eseem_exact(seed: int, n_jobs: int = 1, draws: int = 100) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_imag = 0.0
    for _ in range(draws):
        env = SpinEnvParams(
            hyperfine=float(rng.uniform(0.2, 2.0) * rng.choice([-1.0, 1.0])),
            field_x=float(rng.uniform(-2.0, 2.0)),
            field_z=float(rng.uniform(-2.0, 2.0)),
        )
        tau = rng.uniform(0.0, 40.0, size=25)
        closed = np.asarray(eseem_envelope(tau, env))
        exact = np.asarray(exact_hahn_envelope(tau, env, polarization=0.0))
        worst = max(worst, float(np.max(np.abs(closed - exact.real))))
        worst_imag = max(worst_imag, float(np.max(np.abs(exact.imag))))
    ok = worst <= 1e-10 and worst_imag <= 1e-12
    return CheckResult("eseem_exact", _status(ok), worst, 1e-10, {"max_imag": worst_imag, "draws": draws})


def check_eseem_spectrum(seed: int, n_jobs: int = 1) -> CheckResult:
    env = nuclear_spin_env()
    freqs = spin_frequencies(env)
    tau = np.linspace(0.0, 100.0 / freqs.omega_minus, ESEEM_SAMPLES)
    values = np.asarray(eseem_envelope(tau, env))
    omega, magnitude = envelope_spectrum(tau, values)
    found = spectrum_peaks(omega, magnitude, count=4)
    expected = np.sort(np.array(list(eseem_components(env).values())))
    bin_width = float(omega[1] - omega[0])
    offset = float(np.max(np.abs(found - expected))) / bin_width if found.size == 4 else math.inf
    fitted = fit_visibility(tau, values, env)
    visibility_error = abs(fitted - freqs.visibility) / freqs.visibility
    return CheckResult(
        "eseem_spectrum",
        _status(offset <= 1.0 and visibility_error <= 0.02),
        offset,
        1.0,
        {
            "peaks": found.tolist(),
            "components": expected.tolist(),
            "bin_width": bin_width,
            "visibility": freqs.visibility,
            "fitted_visibility": fitted,
            "visibility_error": visibility_error,
        },
    )


def check_purcell_envelope(seed: int, n_jobs: int = 1) -> CheckResult:
    params = purcell_params()
    seq = PulseSequence.cpmg(PURCELL_ECHOES, PURCELL_TAU)
    run = averaged_observables(params, seq, seq.echo_times(), OracleSettings(n_jobs=n_jobs))
    ns = np.arange(seq.n_pulses + 1)
    reference = np.asarray(purcell_envelope_factor(ns, PURCELL_TAU, params))
    deviation = np.abs(run.envelope - reference) / reference
    worst = float(np.max(deviation))
    return CheckResult(
        "purcell_envelope",
        _status(worst <= 0.02),
        worst,
        0.02,
        {"echoes": int(seq.n_pulses), "final_envelope": float(np.abs(run.envelope[-1]))},
    )


def check_stretched_exponent(seed: int, n_jobs: int = 1) -> CheckResult:
    params = purcell_params()
    rate = gamma_p(params)
    # echo indices spanning γ_P nτ from 1 to 16
    lo = 1.0 / (rate * PURCELL_TAU)
    ns = np.unique(np.round(np.geomspace(lo, 16.0 * lo, 60)))
    factor = np.asarray(purcell_envelope_factor(ns, PURCELL_TAU, params))
    slope = stretched_exponent(factor, ns * PURCELL_TAU, rate, 1.0, 16.0)
    error = abs(slope - 0.5)
    return CheckResult("stretched_exponent", _status(error <= 0.05), slope, 0.5, {"allowed": 0.05})


def check_positivity(seed: int, n_jobs: int = 1, echoes: int = 20) -> CheckResult:
    params = purcell_params()
    seq = PulseSequence.cpmg(echoes, PURCELL_TAU)
    grid = np.linspace(0.0, echoes * PURCELL_TAU, 40 * echoes + 1)
    run = averaged_observables(params, seq, grid, OracleSettings(n_jobs=n_jobs))
    count, worst = positivity_violations(run, tolerance=1e-12)
    return CheckResult(
        "positivity",
        _status(count == 0),
        float(count),
        0.0,
        {"max_excess": worst, "points": int(run.times.size)},
    )


def revival_zero_gaps(params: SystemParams, ns: Sequence[int]) -> pd.DataFrame:
    """First zero of G_n(t) against π T2*/(2√2 (γ_P nτ)^{1/4}) for each n, in units of T2*"""
    grid = np.linspace(0.0, 2.0 * params.t2star, REVIVAL_ZERO_POINTS)
    rows = []
    for n in ns:
        shape = revival_shape(int(n), PURCELL_TAU, grid, params)
        zero = first_zero_crossing(shape.times, shape.values)
        position = math.inf if zero is None else zero / params.t2star
        asymptote = asymptotic_first_zero(int(n), PURCELL_TAU, params) / params.t2star
        rows.append(
            {
                "n": int(n),
                "x": gamma_p(params) * n * PURCELL_TAU,
                "zero": position,
                "asymptote": asymptote,
                "gap": abs(position - asymptote) / asymptote,
            }
        )
    return pd.DataFrame(rows)


def check_revival_zero(seed: int, n_jobs: int = 1) -> CheckResult:
    params = purcell_params()
    # γ_P nτ from 1 to 64
    ladder = REVIVAL_INDEX * 2 ** np.arange(7)
    gaps = revival_zero_gaps(params, ladder)
    closing = bool(np.all(np.diff(gaps["gap"]) < 0))
    final = float(gaps["gap"].iloc[-1])
    return CheckResult(
        "revival_zero",
        _status(closing and final <= 0.05),
        final,
        0.05,
        {
            "zero_at_first_index": float(gaps["zero"].iloc[0]),
            "gap_at_first_index": float(gaps["gap"].iloc[0]),
            "largest_x": float(gaps["x"].iloc[-1]),
            "gap_closing": closing,
        },
    )


def _modulated_gaussian(t: np.ndarray, amplitude: float, width: float, wavenumber: float) -> np.ndarray:
    return amplitude * np.exp(-((t / width) ** 2)) * np.cos(wavenumber * t)


def fit_revival_width(params: SystemParams, n: int) -> Dict[str, float]:
    """Fit A e^{-(t/w)²} cos(kt) to Re G_n(t) on ±5 T2*, t and w in units of T2*"""
    shape = revival_shape(n, PURCELL_TAU, None, params)
    t = shape.times / params.t2star
    x = gamma_p(params) * n * PURCELL_TAU
    guess = (float(shape.values.real.max()), 2.0, math.sqrt(2.0) * x**0.25)
    (amplitude, width, wavenumber), _ = optimize.curve_fit(_modulated_gaussian, t, shape.values.real, p0=guess)
    return {"amplitude": float(amplitude), "width": abs(float(width)), "wavenumber": abs(float(wavenumber))}


def check_revival_width(seed: int, n_jobs: int = 1) -> CheckResult:
    fit = fit_revival_width(purcell_params(), REVIVAL_INDEX)
    error = abs(fit["width"] - 2.0) / 2.0
    return CheckResult(
        "revival_width",
        _status(error <= 0.10),
        fit["width"],
        2.0,
        {"relative_error": error, "allowed": 0.10, "wavenumber": fit["wavenumber"]},
    )


def check_oracle_revival_zero(seed: int, n_jobs: int = 1) -> CheckResult:
    params = purcell_params()
    analytic = revival_shape(REVIVAL_INDEX, PURCELL_TAU, None, params)
    simulated = oracle_revival_shape(
        REVIVAL_INDEX, PURCELL_TAU, params, analytic.times, OracleSettings(n_jobs=n_jobs)
    )
    expected = first_zero_crossing(analytic.times, analytic.values)
    observed = first_zero_crossing(simulated.times, simulated.values)
    if expected is None or observed is None:
        error = math.inf
    else:
        error = abs(observed - expected) / expected
    return CheckResult(
        "oracle_revival_zero",
        _status(error <= 0.05),
        error,
        0.05,
        {"analytic": expected, "oracle": observed},
    )


def _round_trip(envelope: EchoEnvelope, params: SystemParams) -> EchoEnvelope:
    detunings = detuning_sweep(envelope.n_echoes, envelope.tau)
    peaks = field_spectrum_peak(envelope, params, detuning=detunings)
    return invert_dft(
        np.asarray(peaks),
        detunings,
        envelope.weights,
        envelope.tau,
        envelope.qubit_splitting,
        params,
        threshold=1e-3,
    )


def check_reconstruction_exact(seed: int, n_jobs: int = 1, echoes: int = 32) -> CheckResult:
    rng = np.random.default_rng(seed)
    params = purcell_params()
    values = rng.uniform(0.2, 1.0, echoes + 1) * np.exp(1j * rng.uniform(-np.pi, np.pi, echoes + 1))
    values[0] = 1.0
    weights = rng.uniform(0.2, 1.0, echoes + 1)
    weights[0] = 1.0
    envelope = EchoEnvelope(PURCELL_TAU, values, weights, params.qubit_splitting)
    recovered = _round_trip(envelope, params)
    error = float(np.max(np.abs(recovered.values - values) / np.abs(values)))
    return CheckResult("reconstruction_exact", _status(error <= 1e-6), error, 1e-6, {"echoes": echoes})


def check_reconstruction_backaction(seed: int, n_jobs: int = 1, echoes: int = 32) -> CheckResult:
    params = purcell_params()
    envelope = full_envelope(PulseSequence.cpmg(echoes, PURCELL_TAU), params, SpectralDensity.zero())
    recovered = _round_trip(envelope, params)
    mask = envelope.weights > 1e-3
    error = float(np.max(np.abs(recovered.values[mask] - envelope.values[mask]) / np.abs(envelope.values[mask])))
    return CheckResult(
        "reconstruction_backaction",
        _status(error <= 0.01),
        error,
        0.01,
        {"recoverable": int(np.count_nonzero(mask)), "echoes": echoes},
    )


def check_quantum_phase(seed: int, n_jobs: int = 1) -> CheckResult:
    env = nuclear_spin_env(polarization=1.0)
    spectrum = spin_spectral_density(env, polarization=1.0)
    taus = QUANTUM_PHASE_TAU0 / 2.0 ** np.arange(QUANTUM_PHASE_HALVINGS)
    observed = np.empty(taus.size)
    predicted = np.empty(taus.size)
    for i, tau in enumerate(taus):
        observed[i] = -np.angle(exact_hahn_envelope(tau, env, polarization=1.0))
        predicted[i] = quantum_phase(PulseSequence.hahn(float(tau)), spectrum, float(tau))
    errors = np.maximum(np.abs(observed - predicted), 1e-300)
    order, _ = np.polyfit(np.log(taus), np.log(errors), 1)

    unpolarized = nuclear_spin_env(polarization=0.0)
    grid = np.linspace(0.0, 40.0 / abs(HYPERFINE), 401)
    max_imag = float(np.max(np.abs(np.asarray(exact_hahn_envelope(grid, unpolarized, 0.0)).imag)))
    ok = order >= 3.0 and abs(observed[0]) > 1e-12 and max_imag < 1e-12
    return CheckResult(
        "quantum_phase",
        _status(ok),
        float(order),
        3.0,
        {
            "phase": observed.tolist(),
            "predicted": predicted.tolist(),
            "max_imag_unpolarized": max_imag,
        },
    )


def check_transmission_features(seed: int, n_jobs: int = 1) -> CheckResult:
    env = nuclear_spin_env()
    counts: Dict[str, int] = {}
    excess = -math.inf
    for label, t2star in (("long", 10e-6), ("short", 0.1e-6)):
        params = broadening_params(t2star)
        grid = transmission_grid(env, params, t2star)
        values = transmission(grid, env, params, t2star)
        counts[label] = count_transmission_features(values)
        excess = max(excess, float(np.max(np.abs(values))) - passivity_bound(params))
    ok = counts["long"] > 1 and counts["short"] == 1 and excess <= 1e-12
    return CheckResult(
        "transmission_features",
        _status(ok),
        float(counts["long"]),
        1.0,
        {"features_long_t2star": counts["long"], "features_short_t2star": counts["short"], "passivity_excess": excess},
    )


def check_signal_bounds(seed: int, n_jobs: int = 1) -> CheckResult:
    params = purcell_params()
    bounds = signal_bounds(params, PURCELL_TAU)
    g, t2, kappa = params.coupling, params.t2star, params.kappa_total
    ratio = params.kappa_2 / kappa
    reference = {
        "hahn": math.sqrt(5.0 * math.pi) / 2.0 * g * t2 * math.sqrt(ratio),
        "cpmg": 2.0 * math.sqrt(math.pi) / 3.0 * math.sqrt(ratio / (kappa * PURCELL_TAU)),
        "maximum": math.sqrt(ratio),
    }
    computed = {"hahn": bounds.hahn, "cpmg": bounds.cpmg, "maximum": bounds.maximum}
    worst = max(abs(computed[k] - reference[k]) / reference[k] for k in reference)
    return CheckResult("signal_bounds", _status(worst <= 1e-12), worst, 1e-12, {"bounds": computed})


def check_pulsed_n_eff(seed: int, n_jobs: int = 1) -> CheckResult:
    params = SystemParams(**{**purcell_params().model_dump(), "coupling": 2.0})
    report = pulsed_coupling_signal(params, t_on=0.05)
    error = abs(report.n_eff - 100.0) / 100.0
    return CheckResult(
        "pulsed_n_eff",
        _status(error <= 0.01),
        report.n_eff,
        100.0,
        {"relative_error": error, "signal": report.signal},
    )


def check_oracle_signal(seed: int, n_jobs: int = 1, echoes: int = 4) -> CheckResult:
    params = purcell_params()
    seq = PulseSequence.cpmg(echoes, PURCELL_TAU)
    # one extra half spacing so the last revival has left the cavity
    grid = np.linspace(0.0, (echoes + 0.5) * PURCELL_TAU, 10 * echoes + 6)
    settings = OracleSettings(line_mode=LineMode.DISCRETIZED, n_jobs=n_jobs)
    run = averaged_observables(params, seq, grid, settings)
    simulated = oracle_signal(run, params)
    envelope = full_envelope(seq, params, SpectralDensity.zero(), weights=WeightMode.EMISSION)
    expected = signal_strength(params, envelope).signal
    error = abs(simulated - expected) / expected
    return CheckResult(
        "oracle_signal",
        _status(error <= 0.10),
        error,
        0.10,
        {"oracle": simulated, "closed_form": expected, "echoes": echoes},
    )


CheckFn = Callable[..., CheckResult]

CHECKS: Dict[str, CheckFn] = {
    "filter_exactness": check_filter_exactness,
    "eseem_exact": check_eseem_exact,
    "eseem_spectrum": check_eseem_spectrum,
    "purcell_envelope": check_purcell_envelope,
    "stretched_exponent": check_stretched_exponent,
    "revival_zero": check_revival_zero,
    "revival_width": check_revival_width,
    "oracle_revival_zero": check_oracle_revival_zero,
    "positivity": check_positivity,
    "reconstruction_exact": check_reconstruction_exact,
    "reconstruction_backaction": check_reconstruction_backaction,
    "quantum_phase": check_quantum_phase,
    "transmission_features": check_transmission_features,
    "signal_bounds": check_signal_bounds,
    "pulsed_n_eff": check_pulsed_n_eff,
    "oracle_signal": check_oracle_signal,
}

EXPERIMENT_CHECKS: Dict[str, Sequence[str]] = {
    "fid": ("filter_exactness",),
    "cpmg": (
        "filter_exactness",
        "purcell_envelope",
        "stretched_exponent",
        "revival_zero",
        "revival_width",
        "positivity",
    ),
    "eseem": ("eseem_exact", "eseem_spectrum", "quantum_phase"),
    "transmission": ("transmission_features",),
    "signal": ("signal_bounds", "pulsed_n_eff", "oracle_signal"),
    "oracle-compare": ("purcell_envelope", "positivity", "oracle_revival_zero"),
    "reconstruct": ("reconstruction_exact", "reconstruction_backaction"),
}


class AcceptanceRunner:
    """
    Runs named acceptance checks and collects an AcceptanceReport
    A check that raises a library error is recorded as failed, not re-raised
    """

    def __init__(self, seed: int = 0, n_jobs: int = 1):
        self.seed = seed
        self.n_jobs = n_jobs
        self.logger = logger.bind(component="acceptance")

    def run(self, names: Optional[Sequence[str]] = None) -> AcceptanceReport:
        selected = list(CHECKS) if names is None else list(names)
        unknown = [name for name in selected if name not in CHECKS]
        if unknown:
            raise AcceptanceError("unknown acceptance checks", unknown=unknown)
        results = [self._run_one(name) for name in selected]
        report = AcceptanceReport(results=results, seed=self.seed)
        self.logger.info(
            "acceptance_finished",
            passed=report.passed,
            checks=len(results),
            failures=report.failures,
        )
        return report

    def run_for_experiment(self, experiment: str) -> AcceptanceReport:
        return self.run(EXPERIMENT_CHECKS.get(experiment, ()))

    def _run_one(self, name: str) -> CheckResult:
        start_time = time.time()
        try:
            result = CHECKS[name](self.seed, n_jobs=self.n_jobs)
        except CavityEchoError as exc:
            self.logger.error("acceptance_check_errored", check=name, error=exc.message)
            result = CheckResult(
                name,
                CheckStatus.FAILED,
                math.nan,
                math.nan,
                {"error": exc.message, "context": exc.context},
            )
        result.elapsed = time.time() - start_time
        self.logger.info(
            "acceptance_check",
            check=name,
            status=result.status.value,
            value=result.value,
            threshold=result.threshold,
            elapsed=result.elapsed,
        )
        return result
