"""
Symmetric Function Test Fixtures
"""

import pytest


def random_spectrum(rng, n):
    """Eigenvalues of mixed sign and magnitude, so cancellation is exercised."""
    return rng.uniform(-2.0, 2.0, size=n)


@pytest.fixture
def spectra(rng):
    """1000 random eigenvalue vectors with n between 1 and 8."""
    return [random_spectrum(rng, int(rng.integers(1, 9))) for _ in range(1000)]
