"""Outer tree code: parity rules, encoding, list decoding, diagnostics."""

import itertools

import numpy as np
import pytest

from uramimo.errors import SpecError, TreeDecodeOverflow
from uramimo.streams import random_bits
from uramimo.treecode import (
    TreeCodeSpec,
    build_rules,
    decode,
    encode,
    expected_false_paths,
    messages_to_hex,
    write_message_list,
)

SMALL = TreeCodeSpec(w=8, s=3, j=4, profile=(4, 2, 2), parity_seed=11)

# W=96 split over 32 sections of 12 bits: 12, then 3x28, then three
# all-parity sections
PAPER_PROFILE = (12,) + (3,) * 28 + (0, 0, 0)
PAPER = TreeCodeSpec(w=96, s=32, j=12, profile=PAPER_PROFILE, parity_seed=2024)


def encode_oracle(message, rules, spec):
    """Naive GF(2) matrix-vector recomputation of every chunk."""
    bits = [(message >> (spec.w - 1 - i)) & 1 for i in range(spec.w)]
    chunks = []
    consumed = 0
    for sec in range(spec.s):
        ws = spec.profile[sec]
        v = spec.j - ws
        data_bits = bits[consumed : consumed + ws]
        prefix_bits = bits[:consumed]
        g = rules.g[sec]
        parity_bits = []
        for t in range(v):
            acc = 0
            for pos, b in enumerate(prefix_bits):
                acc ^= int(g[t, pos]) & b
            parity_bits.append(acc)
        value = 0
        for b in data_bits + parity_bits:
            value = (value << 1) | b
        chunks.append(value)
        consumed += ws
    return chunks


def decode_oracle(slot_lists, rules, spec):
    """Exhaustive enumeration of every candidate path, filtered by re-encoding."""
    survivors = set()
    for combo in itertools.product(*[sorted(set(lst)) for lst in slot_lists]):
        message = 0
        for sec, chunk in enumerate(combo):
            ws = spec.profile[sec]
            message = (message << ws) | (chunk >> (spec.j - ws))
        if all(int(c) == int(e) for c, e in zip(combo, encode(message, rules, spec))):
            survivors.add(message)
    return survivors


class TestRules:
    def test_paper_profile_shapes(self):
        rules = build_rules(PAPER)
        assert rules.g[1].shape == (9, 12)
        assert rules.g[31].shape == (12, 96)
        assert rules.g[0].shape == (0, 0)

    def test_zero_parity_sections_are_empty(self):
        spec = TreeCodeSpec(w=12, s=3, j=4, profile=(4, 4, 4), parity_seed=0)
        rules = build_rules(spec)
        assert rules.g[1].shape == (0, 4)
        assert rules.g[2].shape == (0, 8)

    def test_deterministic_in_seed(self):
        r1 = build_rules(SMALL)
        r2 = build_rules(SMALL)
        for a, b in zip(r1.g, r2.g):
            assert np.array_equal(a, b)
        assert r1.masks == r2.masks

    def test_inconsistent_profile_rejected(self):
        with pytest.raises(SpecError):
            TreeCodeSpec(w=8, s=3, j=4, profile=(4, 2, 1), parity_seed=0).validate()
        with pytest.raises(SpecError):
            TreeCodeSpec(w=8, s=3, j=4, profile=(2, 4, 2), parity_seed=0).validate()
        with pytest.raises(SpecError):
            TreeCodeSpec(w=10, s=3, j=4, profile=(4, 5, 1), parity_seed=0).validate()


class TestEncode:
    def test_all_zero_message(self):
        rules = build_rules(SMALL)
        assert np.array_equal(encode(0, rules, SMALL), np.zeros(3, dtype=np.int64))

    def test_paper_profile_tail_sections_are_pure_parity(self):
        rules = build_rules(PAPER)
        message = random_bits(np.random.default_rng(5), 96)
        chunks = encode(message, rules, PAPER)
        for sec in range(29, 32):
            # 0 data bits, 12 parity bits: the chunk is exactly the parity word
            expected = encode_oracle(message, rules, PAPER)[sec]
            assert chunks[sec] == expected
            assert 0 <= chunks[sec] < 2**12

    def test_matches_bitwise_oracle(self):
        rules = build_rules(SMALL)
        rng = np.random.default_rng(17)
        for _ in range(50):
            message = int(rng.integers(0, 2**8))
            assert list(encode(message, rules, SMALL)) == encode_oracle(message, rules, SMALL)

    def test_parity_linearity(self):
        rules = build_rules(SMALL)
        rng = np.random.default_rng(23)
        mask_par = [(1 << (SMALL.j - ws)) - 1 for ws in SMALL.profile]
        for _ in range(25):
            m1 = int(rng.integers(0, 2**8))
            m2 = int(rng.integers(0, 2**8))
            c1 = encode(m1, rules, SMALL)
            c2 = encode(m2, rules, SMALL)
            cx = encode(m1 ^ m2, rules, SMALL)
            for sec in range(SMALL.s):
                assert (cx[sec] ^ c1[sec] ^ c2[sec]) & mask_par[sec] == 0
                ws = SMALL.profile[sec]
                v = SMALL.j - ws
                assert (cx[sec] >> v) == ((c1[sec] >> v) ^ (c2[sec] >> v))

    def test_out_of_range_message(self):
        rules = build_rules(SMALL)
        with pytest.raises(SpecError):
            encode(1 << 8, rules, SMALL)
        with pytest.raises(SpecError):
            encode(-1, rules, SMALL)


class TestDecode:
    def test_singleton_round_trip(self):
        rules = build_rules(SMALL)
        message = 0b10110010
        chunks = encode(message, rules, SMALL)
        assert decode([[c] for c in chunks], rules, SMALL) == {message}

    def test_empty_roots(self):
        rules = build_rules(SMALL)
        assert decode([[], [1, 2], [3]], rules, SMALL) == set()

    def test_matches_exhaustive_oracle(self):
        rules = build_rules(SMALL)
        rng = np.random.default_rng(29)
        for _ in range(30):
            msgs = {int(rng.integers(0, 2**8)) for _ in range(2)}
            lists = [set() for _ in range(SMALL.s)]
            for m in msgs:
                for sec, c in enumerate(encode(m, rules, SMALL)):
                    lists[sec].add(int(c))
            for sec in range(SMALL.s):
                lists[sec].update(int(c) for c in rng.integers(0, 2**SMALL.j, size=2))
            got = decode(lists, rules, SMALL)
            want = decode_oracle(lists, rules, SMALL)
            assert got == want
            assert msgs <= got

    def test_multi_message_completeness_and_soundness(self):
        rules = build_rules(PAPER)
        rng = np.random.default_rng(31)
        msgs = {random_bits(rng, 96) for _ in range(20)}
        lists = [set() for _ in range(PAPER.s)]
        for m in msgs:
            for sec, c in enumerate(encode(m, rules, PAPER)):
                lists[sec].add(int(c))
        decoded = decode(lists, rules, PAPER)
        assert msgs <= decoded  # completeness over complete lists
        for m in decoded:  # soundness: every output re-encodes into the lists
            for sec, c in enumerate(encode(m, rules, PAPER)):
                assert int(c) in lists[sec]

    def test_duplicates_collapsed(self):
        rules = build_rules(SMALL)
        message = 0b00101101
        chunks = encode(message, rules, SMALL)
        doubled = [[c, c, c] for c in chunks]
        assert decode(doubled, rules, SMALL) == {message}

    def test_overflow_guard(self):
        spec = TreeCodeSpec(w=12, s=3, j=4, profile=(4, 4, 4), parity_seed=0)
        rules = build_rules(spec)
        full = list(range(16))
        with pytest.raises(TreeDecodeOverflow):
            decode([full, full, full], rules, spec, max_paths=100)

    def test_wrong_list_count(self):
        rules = build_rules(SMALL)
        with pytest.raises(SpecError):
            decode([[0], [0]], rules, SMALL)


class TestExpectedFalsePaths:
    def test_singleton_lists(self):
        est = expected_false_paths(SMALL, [1, 1, 1])
        assert est == pytest.approx(2.0 ** -(2 + 2))
        assert est <= 1.0

    def test_paper_profile_is_negligible(self):
        est = expected_false_paths(PAPER, [300] * 32)
        # 300^32 * 2^-288: direct arithmetic, well below 1e-3
        direct = 2.0 ** (32 * np.log2(300.0) - 288)
        assert est == pytest.approx(direct, rel=1e-12)
        assert est < 1e-3

    def test_matches_monte_carlo_false_path_rate(self):
        rules = build_rules(SMALL)
        rng = np.random.default_rng(37)
        sizes = [4, 4, 4]
        est = expected_false_paths(SMALL, sizes)
        total = 0
        trials = 1000
        for _ in range(trials):
            lists = [rng.choice(16, size=4, replace=False) for _ in range(3)]
            total += len(decode(lists, rules, SMALL))
        observed = total / trials
        assert est / 10 <= observed <= est * 10

    def test_bad_sizes(self):
        with pytest.raises(SpecError):
            expected_false_paths(SMALL, [1, 0, 1])
        with pytest.raises(SpecError):
            expected_false_paths(SMALL, [1, 1])


def test_hex_export(tmp_path):
    msgs = {0xAB, 0x01, 0xFF}
    lines = messages_to_hex(msgs, SMALL)
    assert lines == ["01", "ab", "ff"]
    path = tmp_path / "decoded.txt"
    write_message_list(path, msgs, SMALL)
    assert path.read_text() == "01\nab\nff\n"
