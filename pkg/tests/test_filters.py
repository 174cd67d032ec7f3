import numpy as np
import pytest
from scipy import integrate

from core.exceptions import ContractError
from core.filters import (
    chi_attenuation,
    chi_time_domain,
    classical_filter,
    envelope_c0,
    phase_time_domain,
    quantum_filter,
    quantum_phase,
    sign_transform,
)
from core.model import PulseSequence, sign_function
from core.noise import SpectralDensity


def _sign_integral(seq: PulseSequence, omega: float, t: float) -> complex:
    """∫_0^t e^{iωt'} s(t') dt' by adaptive quadrature, split at the pulses"""
    edges = [0.0, *[p for p in seq.pulse_times if p < t], t]
    total = 0.0 + 0.0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        sign = float(sign_function(seq, 0.5 * (lo + hi)))
        re, _ = integrate.quad(lambda x: np.cos(omega * x), lo, hi, epsabs=1e-14, epsrel=1e-13)
        im, _ = integrate.quad(lambda x: np.sin(omega * x), lo, hi, epsabs=1e-14, epsrel=1e-13)
        total += sign * (re + 1j * im)
    return total


def test_hahn_classical_filter_closed_form() -> None:
    seq = PulseSequence.hahn(2.0)
    omega = np.array([0.3, 1.3, 4.0])
    np.testing.assert_allclose(classical_filter(seq, omega, 2.0), 8.0 * np.sin(omega / 2.0) ** 4, rtol=1e-12)


def test_hahn_quantum_filter_closed_form() -> None:
    seq = PulseSequence.hahn(2.0)
    omega = 1.3
    expected = 1.0 - 2.0 * np.cos(omega) + np.cos(2.0 * omega)
    assert quantum_filter(seq, omega, 2.0) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("omega", [0.2, 1.7, 9.5])
def test_filters_match_time_quadrature(omega: float) -> None:
    seq = PulseSequence.custom([0.4, 1.1, 2.3], 3.0)
    t = 3.0
    transform = _sign_integral(seq, omega, t)
    assert sign_transform(seq, omega, t)[0] == pytest.approx(transform, rel=1e-10)
    assert classical_filter(seq, omega, t) == pytest.approx(0.5 * omega**2 * abs(transform) ** 2, rel=1e-10)
    assert quantum_filter(seq, omega, t) == pytest.approx(omega * transform.imag, rel=1e-10)


def test_sign_transform_at_zero_frequency_is_the_balanced_integral() -> None:
    seq = PulseSequence.cpmg(4, 1.0)
    assert abs(sign_transform(seq, 0.0, 4.0)[0]) < 1e-14
    assert sign_transform(seq, 0.0, 0.5)[0] == pytest.approx(0.5)


def test_line_attenuation_for_hahn() -> None:
    seq = PulseSequence.hahn(2.0)
    omega0, weight = 1.3, 0.01
    spectrum = SpectralDensity.from_lines(lines=[(omega0, weight)])
    expected = weight * 8.0 * np.sin(omega0 / 2.0) ** 4 / omega0**2
    assert chi_attenuation(seq, spectrum, 2.0) == pytest.approx(expected, rel=1e-12)


def test_static_line_is_refocused() -> None:
    seq = PulseSequence.cpmg(3, 1.0)
    spectrum = SpectralDensity.from_lines(lines=[(0.0, 5.0)])
    assert chi_attenuation(seq, spectrum, 3.0) == pytest.approx(0.0, abs=1e-20)


def test_time_domain_forms_agree_at_echoes() -> None:
    seq = PulseSequence.cpmg(3, 2.0)
    spectrum = SpectralDensity.from_lines(lines=[(1.1, 0.02), (-1.1, 0.02)], quantum_lines=[(0.7, 0.05)])
    t = 6.0
    assert chi_time_domain(seq, spectrum, t) == pytest.approx(chi_attenuation(seq, spectrum, t), rel=1e-9)
    assert phase_time_domain(seq, spectrum, t) == pytest.approx(quantum_phase(seq, spectrum, t), rel=1e-8)


def test_continuous_spectrum_attenuation_matches_time_domain() -> None:
    seq = PulseSequence.hahn(2.0)
    spectrum = SpectralDensity.gaussian(variance=0.05, width=1.5)
    fast = chi_attenuation(seq, spectrum, 2.0)
    slow = chi_time_domain(seq, spectrum, 2.0)
    assert fast > 0
    assert slow == pytest.approx(fast, rel=1e-4)


def test_closed_forms_need_echo_times() -> None:
    seq = PulseSequence.hahn(2.0)
    spectrum = SpectralDensity.from_lines(lines=[(1.0, 0.1)])
    with pytest.raises(ContractError):
        chi_attenuation(seq, spectrum, 1.0)
    with pytest.raises(ContractError):
        quantum_phase(seq, spectrum, 1.0)


def test_envelope_c0_markovian_part() -> None:
    seq = PulseSequence.cpmg(4, 1.0)
    result = envelope_c0(seq, SpectralDensity.zero(), dephasing=0.1)
    np.testing.assert_allclose(result.values, np.exp(-0.1 * seq.echo_times()))
    np.testing.assert_array_equal(result.chi, 0.0)


def test_envelope_c0_carries_the_quantum_phase() -> None:
    seq = PulseSequence.cpmg(2, 1.0)
    spectrum = SpectralDensity.from_lines(quantum_lines=[(2.0, 0.3)])
    result = envelope_c0(seq, spectrum, dephasing=0.0)
    phases = np.array([quantum_phase(seq, spectrum, t) for t in seq.echo_times()])
    np.testing.assert_allclose(result.values, np.exp(-1j * phases))
    assert np.any(np.abs(phases) > 0)
