"""Codebook generation, statistics, and binary export."""

import numpy as np
import pytest

from uramimo.codebook import export_codebook, generate_codebook, load_codebook
from uramimo.errors import ResourceLimitError, SpecError


def test_same_seed_bit_identical():
    a = generate_codebook(1234, 16, 64)
    b = generate_codebook(1234, 16, 64)
    assert np.array_equal(a.a, b.a)


def test_different_seed_differs():
    a = generate_codebook(1, 16, 64)
    b = generate_codebook(2, 16, 64)
    assert not np.array_equal(a.a, b.a)


def test_normalized_columns_have_exact_norm():
    cb = generate_codebook(7, 100, 256, normalized=True)
    norms = np.linalg.norm(cb.a, axis=0) ** 2
    assert np.abs(norms - 100.0).max() < 1e-12


def test_unnormalized_column_norm_concentrates():
    # ||a_i||^2 is a scaled chi-square with mean d; at d=100 the per-column
    # std is d/sqrt(d)=10, and the mean over 4096 columns is tight
    cb = generate_codebook(3, 100, 4096)
    norms = np.linalg.norm(cb.a, axis=0) ** 2
    assert 95.0 <= norms.mean() <= 105.0


def test_unit_entry_variance():
    cb = generate_codebook(9, 64, 1024)
    assert np.mean((cb.a * cb.a.conj()).real) == pytest.approx(1.0, rel=0.02)


def test_column_pair_coherence():
    cb = generate_codebook(17, 100, 512)
    rng = np.random.default_rng(0)
    vals = []
    for _ in range(1000):
        i, j = rng.choice(512, size=2, replace=False)
        vals.append(abs(np.vdot(cb.a[:, i], cb.a[:, j])) / 100.0)
    assert np.mean(vals) < 0.15


def test_memory_budget_enforced():
    with pytest.raises(ResourceLimitError):
        generate_codebook(0, 1000, 1000, max_bytes=1_000_000)


def test_invalid_dimensions():
    with pytest.raises(SpecError):
        generate_codebook(0, 0, 4)
    with pytest.raises(SpecError):
        generate_codebook(0, 4, 0)


def test_export_round_trip(tmp_path):
    cb = generate_codebook(42, 8, 32, normalized=True)
    path = tmp_path / "codebook.bin"
    export_codebook(path, cb)
    back = load_codebook(path)
    assert back.d == 8 and back.n_cw == 32
    assert back.seed == 42 and back.normalized is True
    assert np.array_equal(back.a, cb.a)


def test_export_header_layout(tmp_path):
    cb = generate_codebook(5, 2, 3)
    path = tmp_path / "cb.bin"
    export_codebook(path, cb)
    raw = path.read_bytes()
    d, n_cw = np.frombuffer(raw[:16], dtype="<i8")
    assert (d, n_cw) == (2, 3)
    payload = np.frombuffer(raw[25:], dtype="<f8")
    # column-major interleave: first two floats are re/im of a[0, 0]
    assert payload[0] == cb.a[0, 0].real and payload[1] == cb.a[0, 0].imag
    assert payload[2] == cb.a[1, 0].real and payload[3] == cb.a[1, 0].imag
