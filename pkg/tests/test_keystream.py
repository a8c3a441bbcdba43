"""Tests for the shared-secret phase shift generator."""

import numpy as np
import pytest

from spofdm.keystream import (KeystreamConfigError, PhasePlan, PhaseSequence,
                              SecretKey, StreamState, aes_encrypt_block,
                              derive_bits, map_psk, phase_plan)

KEY = SecretKey.from_hex("000102030405060708090a0b0c0d0e0f")
KEY2 = SecretKey.from_hex("ffeeddccbbaa99887766554433221100")


class TestSecretKey:
    def test_accepts_16_and_32_bytes(self):
        SecretKey(b"\x00" * 16)
        SecretKey(b"\x00" * 32)

    def test_rejects_other_lengths(self):
        for n in (0, 8, 15, 17, 24, 33):
            with pytest.raises(KeystreamConfigError):
                SecretKey(b"\x00" * n)

    def test_rejects_bad_hex(self):
        with pytest.raises(KeystreamConfigError):
            SecretKey.from_hex("zz" * 16)

    def test_equality(self):
        assert SecretKey(b"\x01" * 16) == SecretKey(b"\x01" * 16)
        assert SecretKey(b"\x01" * 16) != SecretKey(b"\x02" * 16)


class TestStreamState:
    def test_rejects_negative_components(self):
        with pytest.raises(ValueError):
            StreamState(epoch=-1)
        with pytest.raises(ValueError):
            StreamState(epoch=0, block_index=-1)
        with pytest.raises(ValueError):
            StreamState(epoch=0, block_index=0, intra_block_counter=-1)


class TestDeriveBits:
    def test_deterministic(self):
        state = StreamState(epoch=3, block_index=7)
        a = derive_bits(KEY, state, 128)
        b = derive_bits(KEY, state, 128)
        assert np.array_equal(a, b)

    def test_output_is_binary(self):
        bits = derive_bits(KEY, StreamState(0), 1000)
        assert bits.size == 1000
        assert set(np.unique(bits)) <= {0, 1}

    def test_distinct_keys_disagree_about_half_the_time(self):
        n = 10_000
        a = derive_bits(KEY, StreamState(0), n)
        b = derive_bits(KEY2, StreamState(0), n)
        agree = int(np.sum(a == b))
        sigma = np.sqrt(n * 0.25)
        assert abs(agree - n / 2) < 3 * sigma

    def test_distinct_addresses_give_distinct_streams(self):
        a = derive_bits(KEY, StreamState(0, block_index=0), 128)
        b = derive_bits(KEY, StreamState(0, block_index=1), 128)
        c = derive_bits(KEY, StreamState(1, block_index=0), 128)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_prefix_consistency(self):
        long = derive_bits(KEY, StreamState(0), 512)
        short = derive_bits(KEY, StreamState(0), 200)
        assert np.array_equal(long[:200], short)

    def test_rejects_nonpositive_count(self):
        with pytest.raises(ValueError):
            derive_bits(KEY, StreamState(0), 0)

    def test_aes_known_answer(self):
        # FIPS-197 appendix C.1 vector
        pt = bytes.fromhex("00112233445566778899aabbccddeeff")
        ct = aes_encrypt_block(KEY, pt)
        assert ct.hex() == "69c4e0d86a7b0430d8cdb78070b4c55a"

    def test_bit_balance(self):
        n = 100_000
        bits = derive_bits(KEY, StreamState(0), n)
        ones = int(bits.sum())
        sigma = np.sqrt(n * 0.25)
        assert abs(ones - n / 2) < 3 * sigma


class TestMapPsk:
    def test_zero_word_maps_to_zero_angle(self):
        assert map_psk(np.array([0, 0, 0, 0]), 16)[0] == 0.0

    def test_half_circle(self):
        assert map_psk(np.array([1, 0, 0, 0]), 16)[0] == pytest.approx(np.pi)

    def test_big_endian_grouping(self):
        # value 0b0101 = 5 -> angle 2*pi*5/16
        angle = map_psk(np.array([0, 1, 0, 1]), 16)[0]
        assert angle == pytest.approx(2 * np.pi * 5 / 16)

    def test_binary_alphabet(self):
        angles = map_psk(derive_bits(KEY, StreamState(0), 1000), 2)
        assert set(np.unique(angles)) <= {0.0, np.pi}

    def test_rejects_non_power_of_two(self):
        with pytest.raises(KeystreamConfigError):
            map_psk(np.array([0, 1]), 12)

    def test_rejects_ragged_length(self):
        with pytest.raises(ValueError):
            map_psk(np.array([0, 1, 1]), 16)

    def test_uniformity_chi_square(self):
        n_sym = 1_000_000
        bits = derive_bits(KEY, StreamState(0), 4 * n_sym)
        angles = map_psk(bits, 16)
        values = np.round(angles * 16 / (2 * np.pi)).astype(int)
        counts = np.bincount(values, minlength=16)
        freqs = counts / n_sym
        assert np.all(np.abs(freqs - 1 / 16) < 0.002)


class TestPhasePlan:
    def test_shared_secret_determinism(self):
        a = phase_plan(KEY, 0, 5, 128, 16)
        b = phase_plan(KEY, 0, 5, 128, 16)
        assert a.cp_phase == b.cp_phase
        assert np.array_equal(a.subcarrier_phases, b.subcarrier_phases)

    def test_shapes_and_alphabet(self):
        plan = phase_plan(KEY, 0, 0, 128, 16)
        assert plan.subcarrier_phases.size == 128
        assert abs(abs(plan.cp_phase) - 1.0) < 1e-12
        steps = plan.subcarrier_phases * 16 / (2 * np.pi)
        assert np.allclose(steps, np.round(steps))

    def test_random_access_matches_sequential(self):
        direct = phase_plan(KEY, 0, 40, 128, 16)
        seq = PhaseSequence(KEY, 0, 128, 16)
        for k in range(41):
            sequential = seq.plan(k)
        assert sequential.cp_phase == direct.cp_phase
        assert np.array_equal(sequential.subcarrier_phases,
                              direct.subcarrier_phases)

    def test_rejects_negative_block(self):
        with pytest.raises(ValueError):
            phase_plan(KEY, 0, -1, 128, 16)

    def test_adjacent_blocks_uncorrelated(self):
        n_blocks = 1000
        seq = PhaseSequence(KEY, 0, 128, 16)
        u = np.array([np.exp(1j * seq.plan(k).subcarrier_phases)
                      for k in range(n_blocks + 1)])
        rho = np.mean(u[:-1] * np.conj(u[1:]))
        assert abs(rho) < 0.05


class TestPhaseSequence:
    def test_cp_phases_slice(self):
        seq = PhaseSequence(KEY, 0, 128, 16)
        arr = seq.cp_phases(3, 7)
        assert arr.size == 5
        assert arr[0] == seq.cp_phase(3)
        assert arr[-1] == seq.cp_phase(7)

    def test_cp_phase_stream_uniform_and_uncorrelated(self):
        n = 100_000
        bits = derive_bits(KEY, StreamState(0), 4 * n)
        u = np.exp(1j * map_psk(bits, 16))
        for lag in range(1, 9):
            rho = np.mean(u[:-lag] * np.conj(u[lag:]))
            assert abs(rho) < 0.05
        values = np.round(np.angle(u) * 16 / (2 * np.pi)).astype(int) % 16
        counts = np.bincount(values, minlength=16)
        sigma = np.sqrt(n * (1 / 16) * (15 / 16))
        assert np.all(np.abs(counts - n / 16) < 3 * sigma)
