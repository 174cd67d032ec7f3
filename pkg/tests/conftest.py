"""Shared fixtures: κ-unit Purcell parameters, SI broadening parameters and a nuclear spin"""

import numpy as np
import pytest

from core.model import SpinEnvParams, SystemParams
from evaluation.acceptance import broadening_params, nuclear_spin_env, purcell_params


@pytest.fixture
def purcell() -> SystemParams:
    """κ = 1, g = 0.1κ, κT2* = 0.1, Δ = 1000κ"""
    return purcell_params()


@pytest.fixture
def broadening() -> SystemParams:
    """κ/2π = 1 MHz, g = 0.2κ, T2* = 10 µs"""
    return broadening_params(10e-6)


@pytest.fixture
def spin_env() -> SpinEnvParams:
    return nuclear_spin_env()


@pytest.fixture
def polarized_spin_env() -> SpinEnvParams:
    return nuclear_spin_env(polarization=1.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
