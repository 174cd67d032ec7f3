import numpy as np
import pytest

from core.exceptions import ParameterError
from core.model import EchoEnvelope, SystemParams
from core.signal import (
    SignalProtocol,
    cross_term_factor,
    geometric_n_eff,
    n_eff,
    pulsed_coupling_signal,
    signal_bounds,
    signal_strength,
)


def _flat_envelope(n_echoes: int, tau: float = 10.0) -> EchoEnvelope:
    return EchoEnvelope(tau=tau, values=np.ones(n_echoes + 1), weights=np.ones(n_echoes + 1))


def test_bounds(purcell: SystemParams) -> None:
    bounds = signal_bounds(purcell, 10.0)
    assert bounds.hahn == pytest.approx(0.0198166, rel=1e-5)
    assert bounds.cpmg == pytest.approx(0.373666, rel=1e-5)
    assert bounds.maximum == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        signal_bounds(purcell, 0.0)


def test_n_eff_counts_the_half_first_revival() -> None:
    assert n_eff(_flat_envelope(3)) == pytest.approx(3.25)
    assert n_eff(_flat_envelope(0)) == pytest.approx(0.25)


def test_signal_strength(purcell: SystemParams) -> None:
    report = signal_strength(purcell, _flat_envelope(3))
    expected = np.sqrt(np.pi * (purcell.coupling * purcell.t2star) ** 2 * 3.25)
    assert report.signal == pytest.approx(expected)
    assert report.protocol is SignalProtocol.STATIC_COUPLING
    assert not report.regime_violation


def test_signal_is_clipped_when_the_closed_form_breaks_down() -> None:
    params = SystemParams(qubit_splitting=1000.0, coupling=10.0, kappa_total=1.0, t2star=0.1)
    report = signal_strength(params, _flat_envelope(3))
    assert report.raw_signal > 1.0
    assert report.signal == 1.0
    assert report.regime_violation


def test_cross_terms(purcell: SystemParams) -> None:
    envelope = _flat_envelope(4, tau=1.0)
    with pytest.raises(ParameterError):
        n_eff(envelope, cross_terms=True)
    assert n_eff(envelope, purcell, cross_terms=True) > n_eff(envelope)
    assert cross_term_factor(2, 2, 10.0, purcell) == pytest.approx(1.0)
    assert cross_term_factor(0, 1, 10.0, purcell) == pytest.approx(np.exp(-5.0))


def test_pulsed_n_eff(purcell: SystemParams) -> None:
    report = pulsed_coupling_signal(purcell, t_on=1.0)
    assert report.n_eff == pytest.approx(99.25, rel=1e-8)
    assert report.protocol is SignalProtocol.PULSED_COUPLING
    assert report.signal == pytest.approx(np.sqrt(0.01 * 99.25), rel=1e-8)


def test_pulsed_coupling_needs_a_short_window(purcell: SystemParams) -> None:
    with pytest.raises(ParameterError):
        pulsed_coupling_signal(purcell, t_on=10.0)
    with pytest.raises(ParameterError):
        pulsed_coupling_signal(purcell, t_on=-1.0)


def test_pulsed_coupling_without_switching(purcell: SystemParams) -> None:
    report = pulsed_coupling_signal(purcell, t_on=0.0)
    assert report.n_eff_infinite
    assert report.n_eff == float("inf")
    assert report.signal == pytest.approx(1.0)


def test_geometric_series() -> None:
    assert geometric_n_eff(0.5) == pytest.approx(1.25)
    assert geometric_n_eff(0.5, n_echoes=2) == pytest.approx(1.0)


def test_geometric_series_closed_form_edges() -> None:
    assert geometric_n_eff(1.0, n_echoes=7) == pytest.approx(7.25)
    assert geometric_n_eff(1.0) == float("inf")
    assert geometric_n_eff(0.0, n_echoes=5) == pytest.approx(0.25)
    # ratio 1 - 1e-9 needs ~1e10 terms when summed one by one
    ratio = 1.0 - 1e-9
    assert geometric_n_eff(ratio) == pytest.approx(0.25 + ratio / (1.0 - ratio), rel=1e-12)
    assert geometric_n_eff(ratio, n_echoes=1000) == pytest.approx(1000.25, rel=1e-6)
    direct = 0.25 + sum(0.9**n for n in range(1, 41))
    assert geometric_n_eff(0.9, n_echoes=40) == pytest.approx(direct, rel=1e-12)
    with pytest.raises(ParameterError):
        geometric_n_eff(1.5)
    with pytest.raises(ParameterError):
        geometric_n_eff(0.5, n_echoes=-1)


def test_report_text(purcell: SystemParams) -> None:
    text = signal_strength(purcell, _flat_envelope(3)).to_text()
    lines = dict(line.split("=", 1) for line in text.splitlines())
    assert float(lines["n_eff"]) == pytest.approx(3.25)
    assert lines["protocol"] == "static_coupling"
    assert "s_hahn" in lines
    assert text.endswith("\n")
