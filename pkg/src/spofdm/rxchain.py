"""Receiver chain: FFT demodulation, secure decoding, QPSK LLRs, LDPC BP.

Parity-check matrices are pluggable: any alist-format file can be loaded, and
a deterministic near-regular construction is provided for desk-scale codes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .keystream import PhasePlan
from .txchain import ComplexSignal, OfdmConfig

__all__ = [
    "DecodedBlock",
    "ParityCheckCode",
    "LdpcEncoder",
    "crop_and_fft",
    "secure_decode",
    "qpsk_map",
    "llr_qpsk",
    "ldpc_bp_decode",
    "load_alist",
    "save_alist",
    "make_regular_parity_check",
    "bundled_code_path",
]

@dataclass
class DecodedBlock:
    """Symbol vector of one OFDM block after secure decoding."""

    block_index: int
    symbols: np.ndarray

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=complex)


def crop_and_fft(r: ComplexSignal, k: int, config: OfdmConfig,
                 start_offset: int = 0) -> np.ndarray:
    """Crop the CP of block k and FFT the body (unscaled N_c-point DFT)."""
    start = start_offset + k * config.block_samples + config.cp_samples
    body = r.samples[start:start + config.n_carriers]
    if body.size != config.n_carriers:
        raise ValueError("block body out of range")
    return np.fft.fft(body)


def secure_decode(demodulated: np.ndarray, plan: PhasePlan) -> DecodedBlock:
    """Undo the secret precoding: R_i = e^{+j Theta_i} * Rtilde_i."""
    demodulated = np.asarray(demodulated, dtype=complex)
    if demodulated.size != plan.subcarrier_phases.size:
        raise ValueError("phase plan length does not match symbol vector")
    return DecodedBlock(plan.block_index,
                        demodulated * np.exp(1j * plan.subcarrier_phases))


def qpsk_map(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped unit-power QPSK: bit pair (b0, b1) -> ((1-2b0)+j(1-2b1))/sqrt(2)."""
    bits = np.asarray(bits)
    if bits.size % 2:
        raise ValueError("bit count must be even for QPSK")
    pairs = bits.reshape(-1, 2).astype(np.int64)
    return ((1 - 2 * pairs[:, 0]) + 1j * (1 - 2 * pairs[:, 1])) / np.sqrt(2)


def llr_qpsk(symbols: np.ndarray, noise_power_model: float) -> np.ndarray:
    """Per-bit LLRs under the Gaussian surrogate noise model.

    LLR = 2*sqrt(2)*component/noise_power for the real (bit 0) and imaginary
    (bit 1) components; positive LLR favours bit value 0.
    """
    if noise_power_model <= 0:
        raise ValueError("noise power model must be positive")
    symbols = np.asarray(symbols, dtype=complex)
    llr = np.empty(2 * symbols.size)
    scale = 2 * np.sqrt(2) / noise_power_model
    llr[0::2] = scale * symbols.real
    llr[1::2] = scale * symbols.imag
    return llr


# ---------------------------------------------------------------------------
# LDPC codes


@dataclass
class ParityCheckCode:
    """Binary parity-check matrix in edge-list form plus the declared rate."""

    n: int
    m: int
    check_of_edge: np.ndarray  # edge arrays sorted by variable node
    var_of_edge: np.ndarray
    rate: float

    def __post_init__(self):
        if self.n <= 0 or self.m <= 0:
            raise ValueError("H must be nonempty")
        order = np.lexsort((self.check_of_edge, self.var_of_edge))
        self.var_of_edge = np.asarray(self.var_of_edge)[order]
        self.check_of_edge = np.asarray(self.check_of_edge)[order]
        # permutation into check-sorted order and group boundaries
        self._by_check = np.lexsort((self.var_of_edge, self.check_of_edge))
        self._var_starts = np.searchsorted(self.var_of_edge, np.arange(self.n))
        sorted_checks = self.check_of_edge[self._by_check]
        self._check_starts = np.searchsorted(sorted_checks, np.arange(self.m))

    @property
    def n_edges(self) -> int:
        return self.var_of_edge.size

    def dense(self) -> np.ndarray:
        h = np.zeros((self.m, self.n), dtype=np.uint8)
        h[self.check_of_edge, self.var_of_edge] = 1
        return h

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits)
        contrib = bits[..., self.var_of_edge]
        acc = np.zeros(bits.shape[:-1] + (self.m,), dtype=np.int64)
        np.add.at(acc, (..., self.check_of_edge), contrib)
        return (acc % 2).astype(np.uint8)


def load_alist(path: str | Path) -> ParityCheckCode:
    """Read a parity-check matrix in MacKay alist format."""
    tokens = Path(path).read_text().split("\n")
    rows = [line.split() for line in tokens if line.strip()]
    n, m = int(rows[0][0]), int(rows[0][1])
    col_degrees = [int(v) for v in rows[2]]
    if len(col_degrees) != n:
        raise ValueError("alist column degree list has wrong length")
    var_of_edge = []
    check_of_edge = []
    for j in range(n):
        entries = [int(v) for v in rows[4 + j] if int(v) > 0]
        if len(entries) != col_degrees[j]:
            raise ValueError(f"alist column {j} degree mismatch")
        var_of_edge.extend([j] * len(entries))
        check_of_edge.extend(e - 1 for e in entries)
    return ParityCheckCode(
        n=n, m=m,
        check_of_edge=np.array(check_of_edge),
        var_of_edge=np.array(var_of_edge),
        rate=(n - m) / n,
    )


def save_alist(code: ParityCheckCode, path: str | Path) -> None:
    h = code.dense()
    col_deg = h.sum(axis=0)
    row_deg = h.sum(axis=1)
    lines = [
        f"{code.n} {code.m}",
        f"{col_deg.max()} {row_deg.max()}",
        " ".join(str(d) for d in col_deg),
        " ".join(str(d) for d in row_deg),
    ]
    for j in range(code.n):
        checks = np.flatnonzero(h[:, j]) + 1
        lines.append(" ".join(str(c) for c in checks))
    for i in range(code.m):
        vars_ = np.flatnonzero(h[i]) + 1
        lines.append(" ".join(str(v) for v in vars_))
    Path(path).write_text("\n".join(lines) + "\n")


def make_regular_parity_check(n: int, m: int, col_degree: int = 3,
                              seed: int = 0) -> ParityCheckCode:
    """Deterministic near-regular LDPC construction.

    Every variable has degree ``col_degree``; check degrees are as even as
    possible. Parallel edges are repaired by swapping; 4-cycles are reduced
    best-effort.
    """
    rng = np.random.default_rng(seed)
    n_edges = n * col_degree
    base = np.arange(n_edges) % m
    for _ in range(200):
        sockets = rng.permutation(base)
        cols = np.repeat(np.arange(n), col_degree)
        # repair parallel edges by random swaps
        for _ in range(100):
            pairs = set(zip(cols.tolist(), sockets.tolist()))
            if len(pairs) == n_edges:
                break
            seen = {}
            dup_idx = []
            for e, key in enumerate(zip(cols.tolist(), sockets.tolist())):
                if key in seen:
                    dup_idx.append(e)
                else:
                    seen[key] = e
            swap_with = rng.integers(0, n_edges, size=len(dup_idx))
            for e, f in zip(dup_idx, swap_with):
                sockets[e], sockets[f] = sockets[f], sockets[e]
        else:
            continue
        return ParityCheckCode(
            n=n, m=m,
            check_of_edge=sockets.astype(np.int64),
            var_of_edge=cols.astype(np.int64),
            rate=(n - m) / n,
        )
    raise RuntimeError("failed to build a simple parity-check matrix")


def bundled_code_path(rate_label: str) -> Path:
    """Path of a shipped alist file; labels: '1_4', '1_3', '1_2', '2_3'."""
    path = Path(__file__).parent / "codes" / f"rate{rate_label}.alist"
    if not path.exists():
        raise FileNotFoundError(f"no bundled code for rate {rate_label}")
    return path


class LdpcEncoder:
    """Systematic encoder built from H by GF(2) elimination.

    Column pivoting selects m parity positions; the remaining columns carry
    the message bits. Redundant rows reduce the check count and raise the
    effective rate; the declared rate is kept for reporting.
    """

    def __init__(self, code: ParityCheckCode):
        self.code = code
        h = code.dense().astype(np.uint8)
        m, n = h.shape
        pivot_cols = []
        row = 0
        for col in range(n):
            if row >= m:
                break
            hits = np.flatnonzero(h[row:, col]) + row
            if hits.size == 0:
                continue
            if hits[0] != row:
                h[[row, hits[0]]] = h[[hits[0], row]]
            mask = h[:, col].astype(bool).copy()
            mask[row] = False
            h[mask] ^= h[row]
            pivot_cols.append(col)
            row += 1
        self.rank = row
        self.pivot_cols = np.array(pivot_cols)
        self.message_cols = np.setdiff1d(np.arange(n), self.pivot_cols)
        # parity = A @ message  (mod 2), from the reduced system
        self.parity_gen = h[: self.rank][:, self.message_cols]

    @property
    def k(self) -> int:
        return self.code.n - self.rank

    def encode(self, message: np.ndarray) -> np.ndarray:
        """Map k message bits (or a batch of rows) to n-bit codewords."""
        message = np.asarray(message, dtype=np.uint8)
        single = message.ndim == 1
        msg = np.atleast_2d(message)
        if msg.shape[1] != self.k:
            raise ValueError(f"message length must be {self.k}")
        parity = (msg @ self.parity_gen.T) % 2
        out = np.zeros((msg.shape[0], self.code.n), dtype=np.uint8)
        out[:, self.message_cols] = msg
        out[:, self.pivot_cols] = parity
        return out[0] if single else out

    def extract_message(self, codeword: np.ndarray) -> np.ndarray:
        return np.asarray(codeword)[..., self.message_cols]


def ldpc_bp_decode(code: ParityCheckCode, llr: np.ndarray, max_iters: int = 50):
    """Sum-product belief propagation on the Tanner graph.

    ``llr`` may be a single length-n vector or a (batch, n) array. Stops early
    once all parity checks are satisfied (per batch element). Returns
    (hard bits, converged flags, iterations used); scalars for 1-D input.
    """
    llr = np.asarray(llr, dtype=float)
    single = llr.ndim == 1
    lin = np.atleast_2d(llr)
    if lin.shape[1] != code.n:
        raise ValueError(f"LLR length must be {code.n}")
    batch = lin.shape[0]
    ne = code.n_edges
    voe = code.var_of_edge
    coe_sorted = code._by_check
    var_starts = code._var_starts
    check_starts = code._check_starts
    check_of_sorted = code.check_of_edge[coe_sorted]

    v2c = np.broadcast_to(lin[:, voe], (batch, ne)).copy()
    c2v = np.zeros((batch, ne))
    hard = (lin < 0).astype(np.uint8)
    converged = (code.syndrome(hard).sum(axis=1) == 0)
    iters = np.zeros(batch, dtype=int)
    active = ~converged

    for it in range(1, max_iters + 1):
        if not active.any():
            break
        t = np.tanh(0.5 * np.clip(v2c[active], -30, 30))
        t_sorted = t[:, coe_sorted]
        sign = np.where(t_sorted < 0, -1.0, 1.0)
        mag = np.clip(np.abs(t_sorted), 1e-12, 1 - 1e-12)
        logm = np.log(mag)
        neg = (sign < 0).astype(np.int64)
        # per-check totals, then leave-one-out by subtraction
        log_tot = np.add.reduceat(logm, check_starts, axis=1)
        neg_tot = np.add.reduceat(neg, check_starts, axis=1)
        log_ext = log_tot[:, check_of_sorted] - logm
        neg_ext = neg_tot[:, check_of_sorted] - neg
        prod_ext = np.where(neg_ext % 2 == 1, -1.0, 1.0) * np.exp(log_ext)
        msg_sorted = 2.0 * np.arctanh(np.clip(prod_ext, -1 + 1e-12, 1 - 1e-12))
        c2v_active = np.empty_like(msg_sorted)
        c2v_active[:, coe_sorted] = msg_sorted
        c2v[active] = c2v_active

        post_edge = np.add.reduceat(c2v[active], var_starts, axis=1)
        posterior = lin[active] + post_edge
        v2c[active] = posterior[:, voe] - c2v[active]

        hard_active = (posterior < 0).astype(np.uint8)
        hard[active] = hard_active
        ok = code.syndrome(hard_active).sum(axis=1) == 0
        idx = np.flatnonzero(active)
        iters[idx] = it
        converged[idx[ok]] = True
        active[idx[ok]] = False

    if single:
        return hard[0], bool(converged[0]), int(iters[0])
    return hard, converged, iters
