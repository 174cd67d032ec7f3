import numpy as np
import pytest

from core.model import SpinEnvParams, SystemParams
from core.spinmodel import (
    EtaAverage,
    count_transmission_features,
    eseem_components,
    eseem_envelope,
    envelope_spectrum,
    exact_hahn_envelope,
    fit_visibility,
    passivity_bound,
    qubit_susceptibility,
    spectrum_peaks,
    spin_frequencies,
    spin_spectral_density,
    transmission,
    transmission_grid,
    visibility_scan,
)
from evaluation.acceptance import broadening_params


def test_frequencies_and_visibility(spin_env: SpinEnvParams) -> None:
    a = abs(spin_env.hyperfine)
    freqs = spin_frequencies(spin_env)
    assert freqs.omega_minus == pytest.approx(a / 4.0)
    assert freqs.omega_plus == pytest.approx(a * np.sqrt(5.0) / 4.0)
    assert freqs.visibility == pytest.approx(0.8)
    assert not freqs.degenerate


def test_degenerate_angles_are_flagged() -> None:
    env = SpinEnvParams(hyperfine=2.0, field_x=0.0, field_z=1.0)
    assert spin_frequencies(env).degenerate
    assert spin_frequencies(env).visibility == pytest.approx(0.0)


def test_eseem_matches_exact_evolution(spin_env: SpinEnvParams) -> None:
    tau = np.linspace(0.0, 40.0 / abs(spin_env.hyperfine), 201)
    closed = eseem_envelope(tau, spin_env, dephasing=1e4)
    exact = exact_hahn_envelope(tau, spin_env, polarization=0.0, dephasing=1e4)
    np.testing.assert_allclose(exact.real, closed, atol=1e-10)
    assert np.max(np.abs(exact.imag)) < 1e-12


def test_polarized_spin_gives_a_phase(polarized_spin_env: SpinEnvParams) -> None:
    tau = 3.0 / abs(polarized_spin_env.hyperfine)
    value = exact_hahn_envelope(tau, polarized_spin_env)
    assert abs(np.angle(value)) > 1e-6
    assert abs(value) <= 1.0 + 1e-12


def test_eseem_at_zero_delay(spin_env: SpinEnvParams) -> None:
    assert eseem_envelope(0.0, spin_env) == pytest.approx(1.0)


def test_components(spin_env: SpinEnvParams) -> None:
    parts = eseem_components(spin_env)
    assert parts["sum"] == pytest.approx(parts["omega_plus"] + parts["omega_minus"])
    assert parts["difference"] == pytest.approx(parts["omega_plus"] - parts["omega_minus"])


def test_spin_spectral_weights(spin_env: SpinEnvParams, polarized_spin_env: SpinEnvParams) -> None:
    a = spin_env.hyperfine
    unpolarized = spin_spectral_density(spin_env)
    assert sum(line.weight for line in unpolarized.lines) == pytest.approx(a**2 / 4.0)
    assert unpolarized.quantum_lines == ()
    polarized = spin_spectral_density(polarized_spin_env)
    assert len(polarized.quantum_lines) == 1
    assert polarized.quantum_lines[0].frequency > 0


def test_susceptibility_without_environment_coupling() -> None:
    env = SpinEnvParams(hyperfine=0.0)
    params = SystemParams(qubit_splitting=10.0, dephasing=0.5, t2star=1.0)
    value = qubit_susceptibility(10.0, 0.0, env, params)
    assert value == pytest.approx(-1j / 0.5)


def test_bare_cavity_transmission_peaks_at_the_passivity_bound(spin_env: SpinEnvParams) -> None:
    params = broadening_params(10e-6).model_copy(update={"coupling": 0.0})
    grid = transmission_grid(spin_env, params)
    values = transmission(grid, spin_env, params)
    assert np.max(np.abs(values)) == pytest.approx(passivity_bound(params), rel=1e-12)
    assert passivity_bound(params) == pytest.approx(1.0)


def test_resolvent_and_quadrature_agree(spin_env: SpinEnvParams) -> None:
    params = broadening_params(10e-6)
    grid = transmission_grid(spin_env, params, points=21)
    exact = transmission(grid, spin_env, params)
    nodes = transmission(grid, spin_env, params, method=EtaAverage.QUADRATURE)
    np.testing.assert_allclose(nodes, exact, atol=1e-5 * passivity_bound(params))


def test_features_resolve_only_with_long_t2star(spin_env: SpinEnvParams) -> None:
    counts = {}
    for t2star in (10e-6, 0.1e-6):
        params = broadening_params(t2star)
        values = transmission(transmission_grid(spin_env, params), spin_env, params)
        assert np.max(np.abs(values)) <= passivity_bound(params) + 1e-12
        counts[t2star] = count_transmission_features(values)
    assert counts[10e-6] > 1
    assert counts[0.1e-6] == 1


def test_feature_count_edge_cases() -> None:
    assert count_transmission_features(np.zeros(5)) == 0
    assert count_transmission_features(np.array([0.1, 0.5, 1.0, 0.5, 0.1])) == 1


def test_visibility_scan_shape() -> None:
    scan = visibility_scan(1.0, [0.0, 0.5, 1.0], [0.2, 0.4])
    assert scan.shape == (3, 2)
    np.testing.assert_allclose(scan[0], 0.0, atol=1e-15)
    assert np.all((scan >= 0.0) & (scan <= 1.0))


def test_envelope_spectrum_finds_the_components(spin_env: SpinEnvParams) -> None:
    freqs = spin_frequencies(spin_env)
    tau = np.linspace(0.0, 100.0 / freqs.omega_minus, 2048)
    values = eseem_envelope(tau, spin_env)
    omega, magnitude = envelope_spectrum(tau, values)
    found = spectrum_peaks(omega, magnitude, count=4)
    expected = np.sort(list(eseem_components(spin_env).values()))
    bin_width = omega[1] - omega[0]
    assert found.size == 4
    assert np.max(np.abs(found - expected)) <= bin_width
    assert fit_visibility(tau, values, spin_env) == pytest.approx(0.8, rel=1e-9)
