"""SP-OFDM transmit chain.

Symbol blocks go through the secure phase precoder, an IDFT (1/N_c scaling)
for the block body, and the split cyclic prefix: CP1 is the body tail segment
rotated by the block's secret CP phase symbol, CP2 is a verbatim copy of the
very end of the body. Blocks are concatenated back to back into the baseband
waveform, sampled at the critical rate N_c/T_s.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .keystream import PhasePlan, PhaseSequence, SecretKey, phase_plan

__all__ = [
    "OfdmConfig",
    "SymbolBlock",
    "ComplexSignal",
    "precode",
    "decode_phases",
    "modulate_block",
    "build_waveform",
    "make_symbol_block",
    "random_symbol_blocks",
    "write_iq",
    "read_iq",
]

QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2)


@dataclass(frozen=True)
class OfdmConfig:
    """Static system parameters of the OFDM link."""

    n_carriers: int
    cp1_samples: int
    cp2_samples: int
    psk_order: int
    constellation: np.ndarray = field(default_factory=lambda: QPSK.copy())
    pilot_positions: dict = field(default_factory=dict)
    sample_interval: float = 1.0 / 128

    def __post_init__(self):
        object.__setattr__(
            self, "constellation", np.asarray(self.constellation, dtype=complex)
        )
        if self.n_carriers <= 0:
            raise ValueError("n_carriers must be positive")
        if self.cp1_samples <= 0 or self.cp2_samples <= 0:
            raise ValueError("CP lengths must be positive")
        if self.cp1_samples + self.cp2_samples > self.n_carriers:
            raise ValueError("total CP cannot exceed the body length")
        m = self.psk_order
        if m < 2 or m & (m - 1):
            raise ValueError("psk_order must be a power of 2")
        if self.constellation.size == 0:
            raise ValueError("constellation must be nonempty")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")
        for idx in self.pilot_positions:
            if not 0 <= idx < self.n_carriers:
                raise ValueError(f"pilot index {idx} outside [0, {self.n_carriers})")

    # Body is critically sampled: one sample per carrier.
    @property
    def n_body_samples(self) -> int:
        return self.n_carriers

    @property
    def cp_samples(self) -> int:
        return self.cp1_samples + self.cp2_samples

    @property
    def block_samples(self) -> int:
        return self.cp_samples + self.n_body_samples

    @property
    def t_body(self) -> float:
        return self.n_body_samples * self.sample_interval

    @property
    def t_cp1(self) -> float:
        return self.cp1_samples * self.sample_interval

    @property
    def t_cp2(self) -> float:
        return self.cp2_samples * self.sample_interval

    @property
    def t_block(self) -> float:
        return self.block_samples * self.sample_interval

    @property
    def symbol_power(self) -> float:
        return float(np.mean(np.abs(self.constellation) ** 2))

    def config_hash(self) -> str:
        payload = {
            "n_carriers": self.n_carriers,
            "cp1_samples": self.cp1_samples,
            "cp2_samples": self.cp2_samples,
            "psk_order": self.psk_order,
            "constellation": [[z.real, z.imag] for z in self.constellation],
            "pilot_positions": {
                str(k): [v.real, v.imag] for k, v in sorted(self.pilot_positions.items())
            },
            "sample_interval": self.sample_interval,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass
class SymbolBlock:
    """Length-N_c symbol vector of one OFDM block (pilots already placed)."""

    block_index: int
    data_symbols: np.ndarray

    def __post_init__(self):
        self.data_symbols = np.asarray(self.data_symbols, dtype=complex)


@dataclass
class ComplexSignal:
    """Uniformly sampled complex baseband sequence."""

    samples: np.ndarray
    sample_interval: float
    start_time: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) * self.sample_interval

    @property
    def duration(self) -> float:
        return self.samples.size * self.sample_interval


def make_symbol_block(block_index: int, data_symbols: np.ndarray,
                      config: OfdmConfig) -> SymbolBlock:
    """Place pilot values on their fixed subcarriers of a data vector."""
    symbols = np.asarray(data_symbols, dtype=complex).copy()
    if symbols.size != config.n_carriers:
        raise ValueError("data vector length must equal n_carriers")
    for idx, value in config.pilot_positions.items():
        symbols[idx] = value
    return SymbolBlock(block_index, symbols)


def random_symbol_blocks(rng: np.random.Generator, n_blocks: int,
                         config: OfdmConfig, first_index: int = 0) -> list[SymbolBlock]:
    """Blocks of i.i.d. constellation symbols with pilots inserted."""
    picks = rng.integers(0, config.constellation.size,
                         size=(n_blocks, config.n_carriers))
    return [
        make_symbol_block(first_index + i, config.constellation[picks[i]], config)
        for i in range(n_blocks)
    ]


def precode(block: SymbolBlock, plan: PhasePlan) -> np.ndarray:
    """Apply the secret per-carrier phase rotations: out_i = S_i * e^{-j Theta_i}."""
    if plan.subcarrier_phases.size != block.data_symbols.size:
        raise ValueError("phase plan length does not match symbol vector")
    return block.data_symbols * np.exp(-1j * plan.subcarrier_phases)


def decode_phases(precoded: np.ndarray, plan: PhasePlan) -> np.ndarray:
    """Inverse of :func:`precode` (conjugate phase rotations)."""
    if plan.subcarrier_phases.size != precoded.size:
        raise ValueError("phase plan length does not match symbol vector")
    return precoded * np.exp(1j * plan.subcarrier_phases)


def modulate_block(precoded: np.ndarray, cp_phase: complex,
                   config: OfdmConfig) -> ComplexSignal:
    """One OFDM block in the time domain: [CP1 | CP2 | body].

    body = IDFT of the precoded vector with 1/N_c scaling. CP2 copies the last
    cp2 body samples verbatim; CP1 copies the cp1 samples immediately before
    the CP2 source region, rotated by the block's secret CP phase symbol.
    """
    precoded = np.asarray(precoded, dtype=complex)
    if precoded.size != config.n_carriers:
        raise ValueError("precoded vector length must equal n_carriers")
    body = np.fft.ifft(precoded)  # numpy ifft carries the 1/N scaling
    cp2 = body[-config.cp2_samples:]
    cp1 = cp_phase * body[-config.cp_samples:-config.cp2_samples]
    samples = np.concatenate([cp1, cp2, body])
    return ComplexSignal(samples, config.sample_interval)


def build_waveform(blocks: list[SymbolBlock], key: SecretKey, epoch: int,
                   config: OfdmConfig, phase_index_offset: int = 0) -> ComplexSignal:
    """Concatenated SP-OFDM waveform for consecutively indexed blocks.

    ``phase_index_offset`` shifts the keystream block index used for each
    block, modelling the clock offset between the transmitter's sequence and
    the receiver's nominal one.
    """
    if not blocks:
        raise ValueError("need at least one block")
    for prev, cur in zip(blocks, blocks[1:]):
        if cur.block_index != prev.block_index + 1:
            raise ValueError("blocks must be indexed consecutively")
    parts = []
    for block in blocks:
        plan = phase_plan(key, epoch, block.block_index + phase_index_offset,
                          config.n_carriers, config.psk_order)
        parts.append(modulate_block(precode(block, plan), plan.cp_phase, config).samples)
    return ComplexSignal(np.concatenate(parts), config.sample_interval)


def build_plain_waveform(blocks: list[SymbolBlock], config: OfdmConfig,
                         cp_phases: np.ndarray | None = None) -> ComplexSignal:
    """Classical OFDM waveform: no precoding, CP1 rotation C_k (default 1).

    Used for the traditional-OFDM baseline and for the disguised jammer.
    """
    parts = []
    for i, block in enumerate(blocks):
        c = 1.0 if cp_phases is None else cp_phases[i]
        parts.append(modulate_block(block.data_symbols, c, config).samples)
    return ComplexSignal(np.concatenate(parts), config.sample_interval)


def write_iq(signal: ComplexSignal, path: str | Path, config_hash: str = "") -> None:
    """Interleaved float64 I/Q binary plus a sidecar text header."""
    path = Path(path)
    inter = np.empty(2 * signal.samples.size)
    inter[0::2] = signal.samples.real
    inter[1::2] = signal.samples.imag
    inter.tofile(path)
    header = path.with_suffix(path.suffix + ".hdr")
    header.write_text(
        f"format=interleaved_float64_iq\n"
        f"n_samples={signal.samples.size}\n"
        f"sample_interval={signal.sample_interval!r}\n"
        f"start_time={signal.start_time!r}\n"
        f"config_hash={config_hash}\n"
    )


def read_iq(path: str | Path) -> ComplexSignal:
    path = Path(path)
    fields = {}
    for line in path.with_suffix(path.suffix + ".hdr").read_text().splitlines():
        k, _, v = line.partition("=")
        fields[k] = v
    raw = np.fromfile(path)
    samples = raw[0::2] + 1j * raw[1::2]
    return ComplexSignal(samples, float(fields["sample_interval"]),
                         float(fields["start_time"]))
