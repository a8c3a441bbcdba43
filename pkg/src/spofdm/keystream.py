"""Shared-secret phase shift generation.

Both ends of the link derive identical phase shift sequences from an AES key.
AES-128/256 runs in counter mode where the counter block encodes
(epoch, block index, intra-block counter), giving O(1) random access to the
phases of any OFDM block: block k can be derived without generating blocks
0..k-1, which the receiver needs when searching over candidate sequence
offsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

__all__ = [
    "SecretKey",
    "StreamState",
    "PhasePlan",
    "derive_bits",
    "map_psk",
    "phase_plan",
    "PhaseSequence",
]

_AES_BLOCK_BYTES = 16
_AES_BLOCK_BITS = 128


class KeystreamConfigError(ValueError):
    """Raised for invalid key material or PSK configuration."""


class SecretKey:
    """AES key shared by transmitter and receiver (16 or 32 bytes)."""

    __slots__ = ("key_bytes",)

    def __init__(self, key_bytes: bytes):
        if len(key_bytes) not in (16, 32):
            raise KeystreamConfigError(
                f"key must be 16 or 32 bytes, got {len(key_bytes)}"
            )
        self.key_bytes = bytes(key_bytes)

    @classmethod
    def from_hex(cls, hex_str: str) -> "SecretKey":
        try:
            raw = bytes.fromhex(hex_str)
        except ValueError as exc:
            raise KeystreamConfigError(f"invalid hex key: {exc}") from exc
        return cls(raw)

    def __eq__(self, other):
        return isinstance(other, SecretKey) and self.key_bytes == other.key_bytes

    def __hash__(self):
        return hash(self.key_bytes)


@dataclass(frozen=True)
class StreamState:
    """Address of a position in the keystream.

    (epoch, block_index, intra_block_counter) uniquely addresses every
    generated AES block; advancing any component never revisits an address
    within an epoch.
    """

    epoch: int
    block_index: int = 0
    intra_block_counter: int = 0

    def __post_init__(self):
        if self.epoch < 0:
            raise ValueError("epoch must be non-negative")
        if self.block_index < 0:
            raise ValueError("block_index must be non-negative")
        if self.intra_block_counter < 0:
            raise ValueError("intra_block_counter must be non-negative")


@dataclass(frozen=True)
class PhasePlan:
    """Per-block secret randomness: CP phase symbol plus subcarrier phases.

    ``cp_phase`` is a unit-magnitude M-PSK point; ``subcarrier_phases`` holds
    the per-carrier angles (each an exact multiple of 2*pi/M).
    """

    block_index: int
    cp_phase: complex
    subcarrier_phases: np.ndarray
    psk_order: int

    def __post_init__(self):
        object.__setattr__(
            self, "subcarrier_phases", np.asarray(self.subcarrier_phases, dtype=float)
        )


def aes_encrypt_block(key: SecretKey, block: bytes) -> bytes:
    """Single-block AES encryption (ECB on one block); exposed for self-test."""
    if len(block) != _AES_BLOCK_BYTES:
        raise ValueError("AES block must be 16 bytes")
    enc = Cipher(algorithms.AES(key.key_bytes), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


def _counter_blocks(state: StreamState, n_blocks: int) -> bytes:
    """Counter block layout: epoch (4B) | block_index (8B) | counter (4B)."""
    if state.block_index >= 1 << 64 or state.epoch >= 1 << 32:
        raise ValueError("stream address out of range")
    prefix = state.epoch.to_bytes(4, "big") + state.block_index.to_bytes(8, "big")
    ctrs = [
        prefix + (state.intra_block_counter + i).to_bytes(4, "big")
        for i in range(n_blocks)
    ]
    return b"".join(ctrs)


def derive_bits(key: SecretKey, state: StreamState, n_bits: int) -> np.ndarray:
    """Deterministic keystream bits for the given (key, state) address.

    Returns a uint8 array of 0/1 values. Identical inputs always yield
    identical bits; distinct keys yield statistically independent streams.
    """
    if n_bits <= 0:
        raise ValueError("n_bits must be positive")
    n_blocks = -(-n_bits // _AES_BLOCK_BITS)
    counters = _counter_blocks(state, n_blocks)
    enc = Cipher(algorithms.AES(key.key_bytes), modes.ECB()).encryptor()
    stream = enc.update(counters) + enc.finalize()
    bits = np.unpackbits(np.frombuffer(stream, dtype=np.uint8))
    return bits[:n_bits]


def map_psk(bits: np.ndarray, psk_order: int) -> np.ndarray:
    """Map groups of log2(M) bits (big-endian) to angles 2*pi*v/M."""
    m = int(psk_order)
    if m < 2 or m & (m - 1):
        raise KeystreamConfigError(f"PSK order must be a power of 2, got {psk_order}")
    bits = np.asarray(bits, dtype=np.uint8)
    log2m = m.bit_length() - 1
    if bits.size % log2m:
        raise ValueError(
            f"bit count {bits.size} not divisible by log2(M)={log2m}"
        )
    groups = bits.reshape(-1, log2m)
    weights = 1 << np.arange(log2m - 1, -1, -1)
    values = groups @ weights
    return 2.0 * np.pi * values / m


def phase_plan(key: SecretKey, epoch: int, k: int, n_carriers: int,
               psk_order: int) -> PhasePlan:
    """Phase plan for OFDM block k: CP phase symbol paired with the length-N_c
    subcarrier phase vector.

    Random access: derives block k directly from its stream address without
    touching any earlier block.
    """
    if k < 0:
        raise ValueError("block index must be non-negative")
    log2m = int(psk_order).bit_length() - 1
    n_bits = (n_carriers + 1) * log2m
    bits = derive_bits(key, StreamState(epoch, k, 0), n_bits)
    angles = map_psk(bits, psk_order)
    cp_phase = complex(np.exp(1j * angles[0]))
    return PhasePlan(
        block_index=k,
        cp_phase=cp_phase,
        subcarrier_phases=angles[1:],
        psk_order=psk_order,
    )


class PhaseSequence:
    """Cached view of the phase plan sequence for one (key, epoch).

    The receiver's nominal sequence; the transmitter's sequence is the same
    object evaluated at a shifted block index.
    """

    def __init__(self, key: SecretKey, epoch: int, n_carriers: int, psk_order: int):
        self.key = key
        self.epoch = epoch
        self.n_carriers = n_carriers
        self.psk_order = psk_order
        self._plan = lru_cache(maxsize=None)(self._plan_uncached)

    def _plan_uncached(self, k: int) -> PhasePlan:
        return phase_plan(self.key, self.epoch, k, self.n_carriers, self.psk_order)

    def plan(self, k: int) -> PhasePlan:
        return self._plan(k)

    def cp_phase(self, k: int) -> complex:
        return self._plan(k).cp_phase

    def cp_phases(self, k_first: int, k_last: int) -> np.ndarray:
        """CP phase symbols for blocks k_first..k_last inclusive."""
        return np.array([self.cp_phase(k) for k in range(k_first, k_last + 1)])
