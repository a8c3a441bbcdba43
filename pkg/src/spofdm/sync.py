"""Two-stage synchronization for SP-OFDM.

Pre-FFT stage: correlation between the encrypted CP1 and the body tail,
averaged over K blocks and despread by candidate CP phase sequences, yields
the coarse time offset, the keystream sequence offset and the fractional
carrier frequency offset. Post-FFT stage: pilot correlations across blocks
(integer CFO + residual fractional error) and across subcarriers (residual
time offset), plus the carrier phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .keystream import PhaseSequence
from .txchain import ComplexSignal, OfdmConfig

__all__ = [
    "SyncConfig",
    "SyncEstimate",
    "v_expected",
    "corr_pre_fft",
    "pre_fft_surface",
    "estimate_pre_fft",
    "demod_fft",
    "estimate_integer_cfo",
    "estimate_fine_time",
    "estimate_phase",
    "synchronize",
]


@dataclass(frozen=True)
class SyncConfig:
    """Synchronizer parameters."""

    n_blocks: int = 25                      # K, blocks averaged
    candidates: np.ndarray = field(default_factory=lambda: np.arange(50))
    n_l: int = -2                           # integer CFO search bounds
    n_u: int = 2
    backoff_samples: int | None = None      # FFT window backoff into CP2
    first_block: int = 1                    # first block index used in averages

    def __post_init__(self):
        object.__setattr__(self, "candidates",
                           np.asarray(self.candidates, dtype=int))
        if self.n_blocks < 1:
            raise ValueError("need at least one block")
        if self.candidates.size < 1:
            raise ValueError("candidate set must be nonempty")
        if self.n_l > self.n_u:
            raise ValueError("n_l must not exceed n_u")

    def n_fft(self, config: OfdmConfig) -> int:
        """Extended FFT size N_c' = N_c + N_u - N_l."""
        return config.n_carriers + self.n_u - self.n_l

    def backoff(self, config: OfdmConfig) -> int:
        if self.backoff_samples is not None:
            return self.backoff_samples
        return config.cp2_samples // 2


@dataclass
class SyncEstimate:
    """Output of the two-stage synchronizer."""

    t0_hat: float           # coarse time offset, seconds, in [-T_CP, T_b - T_CP)
    k0_hat: int             # phase sequence offset
    frac_cfo_hat: float     # fractional part of omega0*T_s/(2*pi), in [0, 1)
    n0_hat: int = 0         # integer CFO, subcarrier spacings
    zeta0_hat: float = 0.0  # residual fractional CFO error
    t0p_hat: float = 0.0    # residual time offset, seconds, in [0, T_CP2)
    phi0_hat: float = 0.0   # carrier phase, radians
    peak_metric: float = 0.0
    low_confidence: bool = False

    def total_cfo_normalized(self) -> float:
        """Full frequency estimate in units of the subcarrier spacing 1/T_s."""
        return self.frac_cfo_hat + self.n0_hat + self.zeta0_hat


def v_expected(tau: float | np.ndarray, t_cp1: float) -> np.ndarray:
    """Limit shape of the averaged CP1 correlation: a triangle of height and
    half-width T_CP1 centred at zero offset."""
    tau = np.asarray(tau, dtype=float)
    return np.where(np.abs(tau) < t_cp1, t_cp1 - np.abs(tau), 0.0)


def corr_pre_fft(r: ComplexSignal, k: int, tau_samples: int, d: int,
                 phase_seq: PhaseSequence, config: OfdmConfig) -> complex:
    """Single correlation coefficient Y_k(tau, d) as a direct Riemann sum.

    Window: the CP1 span of block k at trial offset tau, correlated against
    the signal one body-duration later and despread by the candidate CP phase.
    """
    x = r.samples
    n_c = config.n_carriers
    start = tau_samples - config.cp_samples + k * config.block_samples
    stop = start + config.cp1_samples
    if start < 0 or stop + n_c > x.size:
        raise ValueError("correlation window out of range")
    window = x[start:stop] * np.conj(x[start + n_c:stop + n_c])
    return complex(np.sum(window) * np.conj(phase_seq.cp_phase(k + d))
                   * r.sample_interval)


def pre_fft_surface(r: ComplexSignal, config: OfdmConfig, sync_cfg: SyncConfig,
                    phase_seq: PhaseSequence) -> np.ndarray:
    """Averaged correlation (1/K) sum_k Y_k(tau, d) over the (tau, d) grid.

    Returns a complex array of shape (block_samples, n_candidates); row tau is
    the trial time offset in samples, column j the candidate offset
    sync_cfg.candidates[j].
    """
    x = r.samples
    dt = r.sample_interval
    n_c = config.n_carriers
    block = config.block_samples
    cp = config.cp_samples
    cp1 = config.cp1_samples
    k_first = sync_cfg.first_block
    k_count = sync_cfg.n_blocks
    if k_first * block < cp:
        raise ValueError("first_block too small: correlation window underruns")
    needed = (k_first + k_count) * block - config.cp2_samples + n_c
    if x.size < needed:
        raise ValueError(
            f"signal too short for K={k_count} blocks: need {needed} samples, "
            f"got {x.size}"
        )

    # pointwise lag-N_c products, then sliding CP1-window sums
    prods = x[: x.size - n_c] * np.conj(x[n_c:]) * dt
    csum = np.concatenate([[0.0 + 0j], np.cumsum(prods)])
    # W[s] = sum prods[s : s+cp1]
    w = csum[cp1:] - csum[:-cp1]

    ks = np.arange(k_first, k_first + k_count)
    starts = ks[:, None] * block + np.arange(block)[None, :] - cp  # (K, tau)
    y = w[starts]                                                  # (K, tau)

    d_vals = sync_cfg.candidates
    k_max = int(ks[-1] + d_vals.max())
    k_min = int(ks[0] + d_vals.min())
    cp_seq = phase_seq.cp_phases(k_min, k_max)
    idx = (ks[:, None] + d_vals[None, :]) - k_min                  # (K, D)
    c = cp_seq[idx]
    return (y.T @ np.conj(c)) / k_count                            # (tau, D)


def estimate_pre_fft(r: ComplexSignal, config: OfdmConfig, sync_cfg: SyncConfig,
                     phase_seq: PhaseSequence):
    """Coarse estimates from the pre-FFT surface.

    Returns (estimate, surface); the estimate carries the argmax time offset,
    the winning candidate offset and the fractional CFO from the peak phase.
    Ties break toward the lowest (tau, d) index.
    """
    surface = pre_fft_surface(r, config, sync_cfg, phase_seq)
    mag = np.abs(surface)
    tau_idx, d_idx = np.unravel_index(np.argmax(mag), mag.shape)
    peak = surface[tau_idx, d_idx]
    frac = float((-np.angle(peak) / (2 * np.pi)) % 1.0)
    low_conf = bool(mag.max() < 1.5 * mag.mean())
    # The row index marks the CP1 window start plus one CP length, because the
    # waveform origin sits at the start of block 0's CP1, not its body.
    est = SyncEstimate(
        t0_hat=float((tau_idx - config.cp_samples) * r.sample_interval),
        k0_hat=int(sync_cfg.candidates[d_idx]),
        frac_cfo_hat=frac,
        peak_metric=float(np.abs(peak)),
        low_confidence=low_conf,
    )
    return est, surface


def demod_fft(r: ComplexSignal, body_start: int, config: OfdmConfig,
              sync_cfg: SyncConfig) -> np.ndarray:
    """Extended-grid demodulation of one block body.

    The N_c body samples are spectrally resampled onto the N_c' = N_c+N_u-N_l
    bin grid (scale N_c'/N_c), leaving room for integer CFO shifts up to the
    search bounds. With N_u = N_l = 0 this is the plain N_c-point FFT.
    """
    n_c = config.n_carriers
    body = r.samples[body_start:body_start + n_c]
    if body.size != n_c:
        raise ValueError("block body out of range")
    spec = np.fft.fft(body)
    n_fft = sync_cfg.n_fft(config)
    bins = np.arange(n_fft) % n_c
    return (n_fft / n_c) * spec[bins]


def _gamma_avg(r_blocks: np.ndarray, pilot_phases: np.ndarray,
               lag: int = 1) -> np.ndarray:
    """Block average of the despread cross-block products at the given block
    lag, one value per extended-grid bin."""
    dphase = pilot_phases[:-lag] - pilot_phases[lag:]
    gamma = (r_blocks[:-lag] * np.conj(r_blocks[lag:])
             * np.exp(1j * dphase)[:, None])
    return gamma.mean(axis=0)


def _zeta_from_peak(peak: complex, n0: int, config: OfdmConfig) -> float:
    # peak phase is -2*pi*(n0+zeta0)*T_b/T_s; remove the known integer part
    tb_over_ts = config.block_samples / config.n_body_samples
    resid = np.angle(peak * np.exp(2j * np.pi * n0 * tb_over_ts))
    return float(-resid / (2 * np.pi * tb_over_ts))


def estimate_integer_cfo(r_blocks: np.ndarray, pilot_index: int,
                         pilot_phases: np.ndarray, config: OfdmConfig,
                         sync_cfg: SyncConfig):
    """Integer CFO and residual fractional error from cross-block pilot
    correlations.

    ``r_blocks``: (K+1, N_c') demodulated blocks; ``pilot_phases``: (K+1,)
    secret phases of the pilot subcarrier for the same blocks. The peak
    search runs only over the feasible bins (pilot_index + n0) mod N_c' for
    n0 in [n_l, n_u]; the bound on the integer offset is known a priori.
    Returns (n0_hat, zeta0_hat, gamma_avg, low_confidence).
    """
    n_fft = r_blocks.shape[1]
    g = _gamma_avg(r_blocks, pilot_phases)
    n0_cands = np.arange(sync_cfg.n_l, sync_cfg.n_u + 1)
    scores = np.abs(g[(pilot_index + n0_cands) % n_fft])
    best = int(np.argmax(scores))
    order = np.sort(scores)
    low_conf = bool(order[-1] < 1.5 * order[-2]) if scores.size > 1 else False
    n0 = int(n0_cands[best])
    peak = g[(pilot_index + n0) % n_fft]
    return n0, _zeta_from_peak(peak, n0, config), g, low_conf


def estimate_fine_time(r_blocks: np.ndarray, pilots: list, phases: np.ndarray,
                       n0: int, config: OfdmConfig, sync_cfg: SyncConfig) -> float:
    """Residual time offset from the phase slope across two pilot carriers.

    ``pilots``: [(i_p1, p1), (i_p2, p2)]; ``phases``: (K, 2) secret phases of
    the two pilot carriers per block. Result folded into [0, T_CP2).
    """
    (ip1, p1), (ip2, p2) = pilots
    if ip1 == ip2:
        raise ValueError("fine time estimation needs two distinct pilots")
    dip = ip1 - ip2
    if abs(dip) * config.t_cp2 / config.t_body > 1.0:
        raise ValueError(
            "pilot spacing violates the unambiguous fine-time range"
        )
    n_fft = r_blocks.shape[1]
    b1 = (ip1 + n0) % n_fft
    b2 = (ip2 + n0) % n_fft
    ups = (r_blocks[:, b1] * np.conj(r_blocks[:, b2]) * np.conj(p1) * p2
           * np.exp(1j * (phases[:, 0] - phases[:, 1])))
    u = ups.mean()
    t0p = float(-np.angle(u) * config.t_body / (2 * np.pi * dip))
    period = config.t_body / abs(dip)
    t0p %= period
    if t0p >= (config.t_cp2 + period) / 2:
        t0p -= period
    return min(max(t0p, 0.0), np.nextafter(config.t_cp2, 0.0))


def _pilot_phase_mean(r_blocks: np.ndarray, pilot_index: int,
                      pilot_value: complex, pilot_phases: np.ndarray, n0: int,
                      zeta0: float, t0p_samples: float, config: OfdmConfig,
                      t_window0: float = 0.0) -> complex:
    """K-block average of the despread pilot after compensating the residual
    CFO phase at each FFT window start and the fine-time phase ramp; its
    angle is the carrier phase referenced to t = 0."""
    n_fft = r_blocks.shape[1]
    k_count = r_blocks.shape[0]
    b = (pilot_index + n0) % n_fft
    # residual CFO phase e^{j 2*pi*(n0+zeta0)*t_wk/T_s} at window start t_wk
    ks = np.arange(k_count)
    t_wk = t_window0 + ks * config.t_block
    drift = np.exp(-2j * np.pi * (n0 + zeta0) * t_wk / config.t_body)
    # The window-start shift ramps the spectrum before the CFO shifts it, so
    # the ramp is evaluated at the pilot's own carrier, not the moved bin.
    base_bin = pilot_index % config.n_carriers
    ramp = np.exp(2j * np.pi * base_bin * t0p_samples / config.n_carriers)
    vals = (r_blocks[:, b] * np.exp(1j * pilot_phases) * np.conj(pilot_value)
            * drift * ramp)
    return complex(vals.mean())


def estimate_phase(r_blocks: np.ndarray, pilot_index: int, pilot_value: complex,
                   pilot_phases: np.ndarray, n0: int, zeta0: float,
                   t0p_samples: float, config: OfdmConfig,
                   t_window0: float = 0.0) -> float:
    """Carrier phase from the averaged despread pilot, after compensating the
    residual CFO phase at each FFT window start and the fine-time phase ramp.

    ``t_window0`` is the absolute start time of the first demodulation window,
    so the returned phase is referenced to t = 0.
    """
    return float(np.angle(_pilot_phase_mean(
        r_blocks, pilot_index, pilot_value, pilot_phases, n0, zeta0,
        t0p_samples, config, t_window0)))


def synchronize(r: ComplexSignal, config: OfdmConfig, sync_cfg: SyncConfig,
                phase_seq: PhaseSequence):
    """Full two-stage pipeline. Returns (SyncEstimate, pre-FFT surface).

    After the coarse stage the fractional CFO is compensated on absolute time
    and the FFT window is backed off into CP2 so the fine-time estimator sees
    a strictly positive residual offset.
    """
    est, surface = estimate_pre_fft(r, config, sync_cfg, phase_seq)
    dt = r.sample_interval
    n_c = config.n_carriers
    tau_samp = int(round(est.t0_hat / dt))
    backoff = sync_cfg.backoff(config)

    t_abs = np.arange(r.samples.size) * dt
    corrected = ComplexSignal(
        r.samples * np.exp(-2j * np.pi * est.frac_cfo_hat * t_abs / config.t_body),
        dt, r.start_time)

    k_first = sync_cfg.first_block
    k_count = sync_cfg.n_blocks
    n_fft = sync_cfg.n_fft(config)
    r_blocks = np.empty((k_count + 1, n_fft), dtype=complex)
    for i, k in enumerate(range(k_first, k_first + k_count + 1)):
        start = tau_samp - backoff + k * config.block_samples + config.cp_samples
        r_blocks[i] = demod_fft(corrected, start, config, sync_cfg)

    pilot_items = sorted(config.pilot_positions.items())
    if len(pilot_items) < 2:
        raise ValueError("post-FFT synchronization needs two pilot carriers")
    (ip1, p1), (ip2, p2) = pilot_items[0], pilot_items[1]
    plans = [phase_seq.plan(k + est.k0_hat)
             for k in range(k_first, k_first + k_count + 1)]
    th1 = np.array([pl.subcarrier_phases[ip1] for pl in plans])
    th2 = np.array([pl.subcarrier_phases[ip2] for pl in plans])

    # combine the cross-block metrics of both pilots and several block lags
    # before the peak search; each lag contributes an independent average
    g1 = _gamma_avg(r_blocks, th1)
    g2 = _gamma_avg(r_blocks, th2)
    n0_cands = np.arange(sync_cfg.n_l, sync_cfg.n_u + 1)
    scores = (np.abs(g1[(ip1 + n0_cands) % n_fft]) / abs(p1) ** 2
              + np.abs(g2[(ip2 + n0_cands) % n_fft]) / abs(p2) ** 2)
    for extra_lag in (2, 3):
        if extra_lag <= k_count:
            scores += (np.abs(_gamma_avg(r_blocks, th1, extra_lag)[
                (ip1 + n0_cands) % n_fft]) / abs(p1) ** 2
                + np.abs(_gamma_avg(r_blocks, th2, extra_lag)[
                    (ip2 + n0_cands) % n_fft]) / abs(p2) ** 2)
    n0 = int(n0_cands[int(np.argmax(scores))])
    order = np.sort(scores)
    cfo_low_conf = bool(order[-1] < 1.5 * order[-2]) if scores.size > 1 else False
    tb_over_ts = config.block_samples / config.n_body_samples
    rot = np.exp(2j * np.pi * n0 * tb_over_ts)
    combined = (g1[(ip1 + n0) % n_fft] * rot / abs(p1) ** 2
                + g2[(ip2 + n0) % n_fft] * rot / abs(p2) ** 2)
    zeta0 = float(-np.angle(combined) / (2 * np.pi * tb_over_ts))

    # refine zeta0 with a longer block lag: the phase slope grows with the
    # lag, so its noise shrinks; the lag-1 estimate picks the branch
    lag = min(4, k_count)
    if lag > 1:
        rot_l = np.exp(2j * np.pi * n0 * lag * tb_over_ts)
        c_l = (_gamma_avg(r_blocks, th1, lag)[(ip1 + n0) % n_fft] * rot_l
               / abs(p1) ** 2
               + _gamma_avg(r_blocks, th2, lag)[(ip2 + n0) % n_fft] * rot_l
               / abs(p2) ** 2)
        zeta_l = float(-np.angle(c_l) / (2 * np.pi * lag * tb_over_ts))
        period = 1.0 / (lag * tb_over_ts)
        zeta0 = zeta_l + period * round((zeta0 - zeta_l) / period)

    t0p = estimate_fine_time(
        r_blocks[:-1], [(ip1, p1), (ip2, p2)],
        np.column_stack([th1[:-1], th2[:-1]]), n0, config, sync_cfg)
    t_window0 = (tau_samp - backoff + config.cp_samples
                 + k_first * config.block_samples) * dt
    v1 = _pilot_phase_mean(r_blocks[:-1], ip1, p1, th1[:-1], n0, zeta0,
                           t0p / dt, config, t_window0) / abs(p1) ** 2
    v2 = _pilot_phase_mean(r_blocks[:-1], ip2, p2, th2[:-1], n0, zeta0,
                           t0p / dt, config, t_window0) / abs(p2) ** 2
    phi0 = float(np.angle(v1 + v2))

    est.n0_hat = n0
    est.zeta0_hat = zeta0
    est.t0p_hat = t0p
    est.phi0_hat = phi0
    est.low_confidence = est.low_confidence or cfo_low_conf
    return est, surface
