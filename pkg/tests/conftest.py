"""Shared helpers: synthetic detection instances and independent oracles."""

import numpy as np
import pytest

from uramimo.codebook import generate_codebook
from uramimo.detector import covariance_from_gamma, sample_covariance


def make_instance(seed, d=8, n=8, m_samples=512, k_active=3, sigma2=0.5, g=1.0):
    """Codebook, true activity pattern, and a sampled covariance.

    The received block is drawn exactly from the model law CN(0, sigma(gamma)),
    so the sample covariance estimates sigma(gamma_true) without channel or
    coding machinery in the loop.
    """
    rng = np.random.default_rng(seed)
    cb = generate_codebook(seed * 7 + 1, d, n)
    gamma_true = np.zeros(n)
    idx = rng.choice(n, size=k_active, replace=False)
    gamma_true[idx] = g * (0.5 + rng.random(k_active))
    sigma = covariance_from_gamma(gamma_true, cb, sigma2)
    chol = np.linalg.cholesky(sigma)
    z = (
        rng.standard_normal((d, m_samples)) + 1j * rng.standard_normal((d, m_samples))
    ) / np.sqrt(2.0)
    sigma_hat = sample_covariance(chol @ z)
    return cb, gamma_true, sigma_hat


def dense_cost(gamma, codebook, sigma_hat, sigma2):
    """Independent cost evaluation: slogdet + LU solve (no Cholesky path)."""
    a = codebook.a
    sigma = sigma2 * np.eye(codebook.d, dtype=complex) + (a * np.asarray(gamma)) @ a.conj().T
    sign, logdet = np.linalg.slogdet(sigma)
    assert sign.real > 0
    return float(logdet.real + np.trace(np.linalg.solve(sigma, sigma_hat)).real)


def grid_refine_minimum(
    cost_fn, gamma_start, span=1.0, shrink=0.5, n_grid=9, cycles=40, floor=1e-10
):
    """Brute-force coordinate grid refinement over the nonnegative orthant.

    Repeatedly scans a shrinking grid around each coordinate and keeps any
    improvement; uses only black-box cost evaluations.
    """
    gamma = np.asarray(gamma_start, dtype=float).copy()
    best = cost_fn(gamma)
    width = span
    for _ in range(cycles):
        for i in range(gamma.size):
            lo = max(0.0, gamma[i] - width)
            hi = gamma[i] + width
            for candidate in np.linspace(lo, hi, n_grid):
                trial = gamma.copy()
                trial[i] = candidate
                value = cost_fn(trial)
                if value < best:
                    best, gamma = value, trial
        width *= shrink
        if width < floor:
            break
    return gamma, best


@pytest.fixture
def tiny_instance():
    return make_instance(123, d=8, n=8, m_samples=512, k_active=3)
