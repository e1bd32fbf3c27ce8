"""Shared fixtures.

Two parameter sets: ``fast_params`` (g0 = 25 kappa) keeps unit tests quick
at moderate adiabaticity; ``fig_params`` (g0 = 100 kappa, the headline
operating point) backs the quantitative assertions.  Heavy objects (the
symbol alphabet and the absorption-probability cache) are session-scoped.
"""

import numpy as np
import pytest

from pulselink import (
    CavityParams,
    build_alphabet,
    gaussian_target,
    invert_emission,
    simulation_grid,
    three_gaussian_target,
)
from pulselink.protocol import PhysicsCache


@pytest.fixture(scope="session")
def fast_params():
    return CavityParams.from_ratios(kappa_T=100.0, g0_kappa_ratio=25.0, n=3, T=1.0)


@pytest.fixture(scope="session")
def fig_params():
    return CavityParams.from_ratios(kappa_T=100.0, g0_kappa_ratio=100.0, n=3, T=1.0)


@pytest.fixture(scope="session")
def fig_grid(fig_params):
    return simulation_grid(fig_params)


@pytest.fixture(scope="session")
def fig_fa(fig_grid):
    return gaussian_target(fig_grid)


@pytest.fixture(scope="session")
def fig_fb(fig_grid):
    return three_gaussian_target(fig_grid)


@pytest.fixture(scope="session")
def fig_inversion_a(fig_fa, fig_params):
    return invert_emission(fig_fa, fig_params)


@pytest.fixture(scope="session")
def fig_alphabet(fig_params):
    return build_alphabet(fig_params)


@pytest.fixture(scope="session")
def fig_cache(fig_params, fig_alphabet):
    return PhysicsCache(fig_params, fig_alphabet)


@pytest.fixture(scope="session")
def fast_alphabet(fast_params):
    return build_alphabet(fast_params)


@pytest.fixture(scope="session")
def fast_cache(fast_params, fast_alphabet):
    return PhysicsCache(fast_params, fast_alphabet)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
