"""Compiled and numpy kernel backends implement the same arithmetic."""

import numpy as np
import pytest

from conftest import make_instance
from uramimo import kernels
from uramimo.detector import DetectorConfig, run_detection
from uramimo.errors import NumericalError

HAVE_COMPILED = "compiled" in kernels.available_backends()

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED, reason="compiled extension not built")


def random_state(seed, d, n):
    rng = np.random.default_rng(seed)
    rows = np.ascontiguousarray(
        (rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))) / np.sqrt(2.0)
    )
    base = rng.standard_normal((d, 3 * d)) + 1j * rng.standard_normal((d, 3 * d))
    sigma_hat = np.ascontiguousarray((base @ base.conj().T) / (3 * d))
    gamma = np.abs(rng.standard_normal(n)) * 0.2
    sigma2 = 0.7
    sigma = sigma2 * np.eye(d, dtype=complex) + (rows.T * gamma) @ rows.conj()
    inv = np.linalg.inv(sigma)
    sigma_inv = np.ascontiguousarray(0.5 * (inv + inv.conj().T))
    return rows, sigma_hat, gamma, sigma_inv


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.get_backend("python").NAME == "python"


@needs_compiled
def test_compiled_backend_loaded():
    assert kernels.get_backend("compiled").NAME == "compiled"
    assert kernels.get_backend("auto").NAME == "compiled"


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
    with pytest.raises(ValueError):
        kernels.set_default_backend("fortran")


@needs_compiled
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_update_sequences_agree(seed):
    d, n = 12, 24
    outs = {}
    for name in ("python", "compiled"):
        rows, sigma_hat, gamma, sigma_inv = random_state(seed, d, n)
        core = kernels.get_backend(name).make_core(sigma_inv, sigma_hat, rows)
        results = []
        for i in range(n):
            step, rew = core.update(i, gamma[i])
            gamma[i] += step
            results.append((step, rew))
        outs[name] = (np.array(results), sigma_inv, gamma)
    ref, cmp = outs["python"], outs["compiled"]
    assert np.allclose(ref[0], cmp[0], rtol=1e-9, atol=1e-11)
    assert np.allclose(ref[1], cmp[1], rtol=1e-8, atol=1e-10)
    assert np.allclose(ref[2], cmp[2], rtol=1e-9, atol=1e-12)


@needs_compiled
def test_probe_matches_update_without_commit(seed=7):
    d, n = 10, 20
    for name in ("python", "compiled"):
        rows, sigma_hat, gamma, sigma_inv = random_state(seed, d, n)
        core = kernels.get_backend(name).make_core(sigma_inv, sigma_hat, rows)
        before = sigma_inv.copy()
        step_p, rew_p, quad_p = core.probe(4, gamma[4])
        assert np.array_equal(sigma_inv, before), name
        step_u, rew_u = core.update(4, gamma[4])
        assert step_p == step_u and rew_p == rew_u
        assert not np.array_equal(sigma_inv, before)
        # committed inverse matches the direct rank-one formula
        a = rows[4]
        w = before @ a
        quad = np.vdot(a, w).real
        direct = before - (step_u / (1 + step_u * quad)) * np.outer(w, w.conj())
        assert np.allclose(sigma_inv, direct, atol=1e-12), name
        assert np.abs(sigma_inv - sigma_inv.conj().T).max() < 1e-14


@needs_compiled
@pytest.mark.parametrize("seed", [4, 5])
def test_refresh_agrees(seed):
    d, n = 10, 40
    rows, sigma_hat, gamma, sigma_inv = random_state(seed, d, n)
    psi_py = np.empty(n)
    psi_cy = np.empty(n)
    kernels.get_backend("python").make_core(sigma_inv.copy(), sigma_hat, rows).refresh(gamma, psi_py)
    kernels.get_backend("compiled").make_core(sigma_inv.copy(), sigma_hat, rows).refresh(gamma, psi_cy)
    assert np.allclose(psi_py, psi_cy, rtol=1e-9, atol=1e-12)


@needs_compiled
def test_full_runs_agree_across_backends():
    # Near-ties in the greedy argmax may fork the coordinate path between
    # backends (reduction orders differ at ~1e-15), so the contract is
    # outcome-level agreement, not path equality.
    cb, gamma_true, sh = make_instance(50, d=10, n=32, m_samples=256, k_active=5)
    cfg = DetectorConfig(q_total=300, q_mod=32, zeta=0.0, policy="bla", sigma2=0.5)
    res_py = run_detection(sh, cb, cfg, rng=np.random.default_rng(51), backend="python")
    res_cy = run_detection(sh, cb, cfg, rng=np.random.default_rng(51), backend="compiled")
    assert res_py.backend == "python" and res_cy.backend == "compiled"
    assert np.allclose(res_py.gamma, res_cy.gamma, rtol=1e-6, atol=1e-8)
    assert res_py.costs[-1] == pytest.approx(res_cy.costs[-1], abs=1e-8)


@needs_compiled
@pytest.mark.parametrize("backend", ["python", "compiled"])
def test_each_backend_is_run_deterministic(backend):
    cb, gamma_true, sh = make_instance(52, d=8, n=16, m_samples=128, k_active=4)
    cfg = DetectorConfig(q_total=200, q_mod=16, zeta=0.0, policy="bla", sigma2=0.5)
    a = run_detection(sh, cb, cfg, rng=np.random.default_rng(53), backend=backend)
    b = run_detection(sh, cb, cfg, rng=np.random.default_rng(53), backend=backend)
    assert np.array_equal(a.coordinates, b.coordinates)
    assert np.array_equal(a.gamma, b.gamma)
    assert np.array_equal(a.costs, b.costs)


@needs_compiled
def test_guards_match_across_backends():
    d, n = 6, 8
    rows, sigma_hat, gamma, _ = random_state(6, d, n)
    for name in ("python", "compiled"):
        kern = kernels.get_backend(name)
        bad_inv = np.ascontiguousarray(-np.eye(d, dtype=complex))
        core = kern.make_core(bad_inv, sigma_hat, rows)
        with pytest.raises(NumericalError):
            core.update(0, gamma[0])
        psi = np.empty(n)
        with pytest.raises(NumericalError):
            core.refresh(gamma, psi)
