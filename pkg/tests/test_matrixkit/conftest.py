"""
Spacetime Hessian Test Fixtures

Constructors for PSD spacetime Hessians with a prescribed rank structure.
"""

import numpy as np
import pytest
from scipy.stats import ortho_group

from ranklab.matrixkit import SpacetimeHessian, assemble


def random_rotation(rng, n):
    return np.eye(1) if n == 1 else ortho_group.rvs(dim=n, random_state=rng)


def constructed_hessian(rng, n, spatial_rank, gap):
    """
    D²u = R diag(d, 0) Rᵀ, Du_t = D²u w, u_tt = wᵀD²u w + gap.

    gap > 0 gives total rank spatial_rank + 1, gap = 0 keeps it at spatial_rank.
    """
    d = np.zeros(n)
    d[:spatial_rank] = rng.uniform(0.5, 2.0, size=spatial_rank)
    R = random_rotation(rng, n)
    S = (R * d) @ R.T
    S = 0.5 * (S + S.T)
    w = rng.uniform(-0.5, 0.5, size=n)
    return assemble(S, S @ w, float(w @ S @ w) + gap)


def positive_definite_hessian(rng, n, lo=0.1, hi=3.0):
    """Spacetime Hessian with eigenvalues in [lo, hi]."""
    Q = random_rotation(rng, n + 1)
    W = (Q * rng.uniform(lo, hi, size=n + 1)) @ Q.T
    return SpacetimeHessian.from_matrix(0.5 * (W + W.T))


@pytest.fixture
def make_hessian(rng):
    return lambda n, spatial_rank, gap: constructed_hessian(rng, n, spatial_rank, gap)
