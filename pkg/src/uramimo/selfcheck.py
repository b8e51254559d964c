"""Fast self-checks: hand-verifiable examples and structural invariants.

Run by ``uramimo validate``.  Every check is deterministic and finishes in
well under a second; no Monte Carlo simulation is involved.
"""

from __future__ import annotations

import numpy as np

from . import channel, codebook, detector, kernels, treecode


def _check_build_omega():
    spec = channel.iid_spec(2, 2)
    assert np.array_equal(channel.build_omega(spec), np.ones((2, 2)))
    hand = channel.ChannelSpec(
        m=2,
        n_k=2,
        hbar=np.diag([1.0 + 0j, 0.0]),
        p=np.array([[0.0, 1.0], [1.0, 0.0]]),
        u_t=np.eye(2),
        u_r=np.eye(2),
        mode=channel.MODE_CORRELATED,
    )
    assert np.array_equal(channel.build_omega(hand), np.array([[1.0, 1.0], [1.0, 0.0]]))
    return "coupling matrix matches |LOS|^2 + amplitude^2 on hand cases"


def _check_normalize():
    spec = channel.ChannelSpec(
        m=2,
        n_k=2,
        hbar=np.zeros((2, 2), dtype=complex),
        p=2.0 * np.ones((2, 2)),
        u_t=np.eye(2),
        u_r=np.eye(2),
        mode=channel.MODE_CORRELATED,
    )
    normed = channel.normalize_spec(spec)
    assert np.allclose(normed.p, 1.0, atol=1e-12)
    again = channel.normalize_spec(normed)
    assert np.allclose(again.p, normed.p, atol=1e-12)
    return "power normalization scales amplitudes and is idempotent"


def _check_eigenvalues():
    omega = np.ones((3, 2))
    assert np.array_equal(channel.transmit_eigenvalues(omega), [3.0, 3.0])
    assert np.array_equal(channel.transmit_eigenvalues(np.diag([2.0, 2.0])), [2.0, 2.0])
    return "transmit eigenvalues are the coupling column sums"


def _check_deterministic_sampling():
    spec = channel.ChannelSpec(
        m=2,
        n_k=1,
        hbar=np.array([[2.0 + 0j], [0.0]]) * 0.5 * np.sqrt(2),
        p=np.zeros((2, 1)),
        u_t=np.eye(1),
        u_r=np.eye(2),
        mode=channel.MODE_CORRELATED,
    )
    real = channel.sample_coupling(spec, np.random.default_rng(0))
    assert np.array_equal(real.h_tilde, spec.hbar)
    assert np.allclose(real.h, spec.u_r @ real.h_tilde @ spec.u_t.conj().T, atol=1e-12)
    return "zero scattering reproduces the LOS matrix exactly"


def _check_codebook():
    cb1 = codebook.generate_codebook(7, 8, 16)
    cb2 = codebook.generate_codebook(7, 8, 16)
    assert np.array_equal(cb1.a, cb2.a)
    cbn = codebook.generate_codebook(7, 8, 16, normalized=True)
    norms = np.linalg.norm(cbn.a, axis=0) ** 2
    assert np.max(np.abs(norms - 8.0)) < 1e-12
    return "codebook is seed-deterministic; normalized columns have norm^2 = d"


def _check_tree_roundtrip():
    spec = treecode.TreeCodeSpec(w=8, s=3, j=4, profile=(4, 2, 2), parity_seed=3)
    rules = treecode.build_rules(spec)
    assert rules.g[1].shape == (2, 4) and rules.g[2].shape == (2, 6)
    zero_chunks = treecode.encode(0, rules, spec)
    assert np.array_equal(zero_chunks, np.zeros(3, dtype=np.int64))
    msg = 0b10110011
    chunks = treecode.encode(msg, rules, spec)
    decoded = treecode.decode([[c] for c in chunks], rules, spec)
    assert decoded == {msg}
    assert treecode.decode([[], [0], [0]], rules, spec) == set()
    return "tree code round-trips singleton lists and rejects empty roots"


def _check_detector_basics():
    assert np.array_equal(detector.sample_covariance(np.zeros((3, 4))), np.zeros((3, 3)))
    y = np.array([[1.0 + 1j], [2.0 - 1j]])
    assert np.allclose(detector.sample_covariance(y), y @ y.conj().T, atol=1e-15)
    cb = codebook.generate_codebook(11, 4, 8)
    sigma_hat = 2.0 * np.eye(4, dtype=complex)
    f0 = detector.cost(np.zeros(8), cb, sigma_hat, 2.0)
    expected = 4 * np.log(2.0) + np.trace(sigma_hat).real / 2.0
    assert abs(f0 - expected) < 1e-12
    state = detector.initial_state(4, 2.0)
    assert abs(detector.reward(0, 0.0, state, sigma_hat, cb)) == 0.0
    updated = detector.apply_rank_one_update(state, 0, 0.0, cb)
    assert np.array_equal(updated.sigma_inv, state.sigma_inv)
    return "sample covariance, cost at zero, and null updates behave exactly"


def _check_pure_noise_run():
    cb = codebook.generate_codebook(5, 6, 12)
    cfg = detector.DetectorConfig(q_total=36, q_mod=6, zeta=0.0, policy="cyclic", sigma2=1.0)
    res = detector.run_detection(np.eye(6, dtype=complex), cb, cfg)
    assert np.all(res.gamma == 0.0)
    assert detector.threshold_decide(res.gamma, 0.0) == set()
    return "noise-only covariance yields an all-zero estimate and empty decision"


def _check_threshold():
    gamma = np.array([0.0, 0.5, 0.0, 2.0])
    assert detector.threshold_decide(gamma, 0.0) == {1, 3}
    assert detector.threshold_decide(gamma, np.inf) == set()
    assert detector.estimation_error(gamma, gamma) == 0.0
    unit = np.zeros(4)
    unit[2] = 1.0
    assert detector.estimation_error(gamma + unit, gamma) == 1.0
    return "threshold decisions and estimation error match hand values"


def _check_backends_agree():
    rng = np.random.default_rng(5)
    d, n = 6, 10
    rows = np.ascontiguousarray(
        (rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))) / np.sqrt(2)
    )
    base = rng.standard_normal((d, 2 * d)) + 1j * rng.standard_normal((d, 2 * d))
    sigma_hat = np.ascontiguousarray((base @ base.conj().T) / (2 * d))
    gamma = np.abs(rng.standard_normal(n)) * 0.1
    names = kernels.available_backends()
    outs = {}
    for name in names:
        sigma_inv = np.ascontiguousarray(np.eye(d, dtype=complex) / 0.5)
        core = kernels.get_backend(name).make_core(sigma_inv, sigma_hat, rows)
        step, rew = core.update(3, gamma[3])
        psi = np.empty(n)
        core.refresh(gamma, psi)
        outs[name] = (step, rew, sigma_inv, psi)
    ref = outs["python"]
    for name, out in outs.items():
        assert abs(out[0] - ref[0]) < 1e-10 and abs(out[1] - ref[1]) < 1e-10
        assert np.allclose(out[2], ref[2], atol=1e-10)
        assert np.allclose(out[3], ref[3], atol=1e-10)
    return f"kernel backends agree ({', '.join(names)})"


CHECKS = [
    ("channel.build_omega", _check_build_omega),
    ("channel.normalize_spec", _check_normalize),
    ("channel.transmit_eigenvalues", _check_eigenvalues),
    ("channel.sample_coupling", _check_deterministic_sampling),
    ("codebook.generate_codebook", _check_codebook),
    ("treecode.round_trip", _check_tree_roundtrip),
    ("detector.basics", _check_detector_basics),
    ("detector.pure_noise", _check_pure_noise_run),
    ("detector.threshold", _check_threshold),
    ("kernels.backends", _check_backends_agree),
]


def run_selfcheck(report=print) -> bool:
    """Run every check; report one line each; True when all pass."""
    all_ok = True
    for name, fn in CHECKS:
        try:
            detail = fn()
            report(f"PASS {name}: {detail}")
        except Exception as exc:  # noqa: BLE001 - report and keep going
            all_ok = False
            report(f"FAIL {name}: {exc!r}")
    return all_ok
