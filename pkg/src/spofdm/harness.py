"""Experiment orchestration: scenario presets, Monte-Carlo trial scheduling,
synchronization error CDFs, coded BER sweeps, correlation surfaces, and
CSV/text persistence.

Every experiment is a pure function of (scenario, master_seed): trial i uses
the dedicated RNG stream seeded by [master_seed, i], so reports reproduce
bit for bit and trials never share randomness.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .channel import (FadingSpec, OffsetSpec, apply_fading, apply_offsets,
                      random_multipath_taps)
from .jammer import JammerSpec, combine, generate_jamming
from .keystream import PhaseSequence, SecretKey
from .rxchain import (LdpcEncoder, bundled_code_path, ldpc_bp_decode,
                      llr_qpsk, load_alist, qpsk_map)
from .sync import SyncConfig, pre_fft_surface, synchronize
from .txchain import (ComplexSignal, OfdmConfig, build_plain_waveform,
                      build_waveform, random_symbol_blocks)

__all__ = [
    "Scenario",
    "ExperimentReport",
    "ScenarioFormatError",
    "table1_scenario",
    "run_sync_experiment",
    "run_ber_experiment",
    "correlation_surface",
    "load_scenario",
    "save_scenario",
    "emit_report",
]

DEFAULT_KEY_HEX = "000102030405060708090a0b0c0d0e0f"

CHANNEL_KINDS = ("awgn", "multipath", "doppler")


class ScenarioFormatError(ValueError):
    """Malformed or incomplete scenario file."""


@dataclass(frozen=True)
class Scenario:
    """Complete description of one experiment.

    The channel field selects the impairment model: 'awgn' (offsets plus
    noise only), 'multipath' (static equal-power paths with random phases),
    or 'doppler' (multipath with per-path Doppler shifts). Jamming power is
    set through sjr_db relative to the legitimate per-sample signal power.
    """

    name: str = "table1"
    n_carriers: int = 128
    cp1_samples: int = 16
    cp2_samples: int = 8
    psk_order: int = 16
    pilot_positions: tuple = ((24, 1.0 + 0j), (32, 1.0 + 0j))
    sample_interval: float = 1.0 / 128
    snr_db: float = 15.0
    sjr_db: float = 0.0
    jammer_strategy: str = "disguised_ofdm"
    jammer_cp_mode: str = "plain_cp"
    channel: str = "awgn"
    n_paths: int = 4
    max_delay_samples: float = 3.0
    tap_decay: float = 0.1  # geometric tap power ratio; 1.0 = equal power
    max_doppler_normalized: float = 0.0  # peak Doppler in subcarrier spacings
    sync_blocks: int = 25
    n_candidates: int = 50
    n_l: int = -2
    n_u: int = 2
    trials: int = 500
    master_seed: int = 0
    key_hex: str = DEFAULT_KEY_HEX
    epoch: int = 0
    code_rate: str = "1_3"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.channel not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.channel!r}")
        pilots = tuple((int(i), complex(v)) for i, v in self.pilot_positions)
        object.__setattr__(self, "pilot_positions", pilots)

    def ofdm_config(self) -> OfdmConfig:
        return OfdmConfig(
            n_carriers=self.n_carriers,
            cp1_samples=self.cp1_samples,
            cp2_samples=self.cp2_samples,
            psk_order=self.psk_order,
            pilot_positions=dict(self.pilot_positions),
            sample_interval=self.sample_interval,
        )

    def sync_config(self) -> SyncConfig:
        return SyncConfig(
            n_blocks=self.sync_blocks,
            candidates=np.arange(self.n_candidates),
            n_l=self.n_l,
            n_u=self.n_u,
        )

    def key(self) -> SecretKey:
        return SecretKey.from_hex(self.key_hex)

    def signal_sample_power(self) -> float:
        config = self.ofdm_config()
        return config.symbol_power / config.n_carriers

    def noise_sigma2(self) -> float:
        return self.signal_sample_power() * 10 ** (-self.snr_db / 10)

    def jammer_power(self) -> float:
        return self.signal_sample_power() * 10 ** (-self.sjr_db / 10)

    def to_json(self) -> str:
        payload = asdict(self)
        payload["pilot_positions"] = {
            str(i): [v.real, v.imag] for i, v in self.pilot_positions
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def scenario_hash(self) -> str:
        import hashlib

        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def table1_scenario(**overrides) -> Scenario:
    """Canonical preset: 128 carriers, CP split 16+8 samples, 16-ary phase
    alphabet, 50 candidate sequence offsets, SNR 15 dB, SJR 0 dB."""
    return replace(Scenario(), **overrides) if overrides else Scenario()


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario from a JSON file with descriptive validation errors."""
    text = Path(path).read_text()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    if not isinstance(payload, dict):
        raise ScenarioFormatError(f"{path}: top level must be an object")
    known = set(Scenario.__dataclass_fields__)
    unknown = set(payload) - known
    if unknown:
        raise ScenarioFormatError(
            f"{path}: unknown field(s) {sorted(unknown)}"
        )
    missing = known - set(payload)
    if missing:
        raise ScenarioFormatError(
            f"{path}: missing required field(s) {sorted(missing)}"
        )
    pilots = payload["pilot_positions"]
    try:
        payload["pilot_positions"] = tuple(
            (int(i), complex(v[0], v[1])) for i, v in sorted(
                pilots.items(), key=lambda kv: int(kv[0]))
        )
    except (TypeError, ValueError, IndexError) as exc:
        raise ScenarioFormatError(
            f"{path}: field 'pilot_positions' must map carrier index to "
            f"[real, imag]: {exc}"
        ) from exc
    try:
        return Scenario(**payload)
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(scenario.to_json())


# ---------------------------------------------------------------------------
# Reports


@dataclass
class ExperimentReport:
    """Per-trial records plus aggregates; aggregates are always recomputable
    from the records."""

    kind: str
    scenario_hash: str
    columns: list
    records: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0

    def records_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for rec in self.records:
            writer.writerow([_csv_cell(rec[c]) for c in self.columns])
        return buf.getvalue()

    def aggregates_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key, value in sorted(_flatten(self.aggregates).items()):
            writer.writerow([key, _csv_cell(value)])
        return buf.getvalue()

    def summary_text(self) -> str:
        lines = [
            f"experiment: {self.kind}",
            f"scenario_hash: {self.scenario_hash}",
            f"trials: {len(self.records)}",
            f"wall_clock_s: {self.wall_clock_s:.2f}",
        ]
        for key, value in sorted(_flatten(self.aggregates).items()):
            lines.append(f"{key}: {_csv_cell(value)}")
        return "\n".join(lines) + "\n"


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return value


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in d.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        elif isinstance(value, (list, tuple, np.ndarray)):
            out[name] = " ".join(repr(float(v)) for v in np.asarray(value).ravel())
        else:
            out[name] = value
    return out


def emit_report(report: ExperimentReport, out_dir: str | Path) -> dict:
    """Write records.csv, aggregates.csv and summary.txt; returns the paths.

    The CSV files are a pure function of (scenario, master_seed); only the
    text summary carries wall-clock metadata.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": out / f"{report.kind}_records.csv",
        "aggregates": out / f"{report.kind}_aggregates.csv",
        "summary": out / f"{report.kind}_summary.txt",
    }
    paths["records"].write_text(report.records_csv())
    paths["aggregates"].write_text(report.aggregates_csv())
    paths["summary"].write_text(report.summary_text())
    return paths


# ---------------------------------------------------------------------------
# Synchronization experiment


def _trial_rng(scenario: Scenario, trial: int) -> np.random.Generator:
    return np.random.default_rng([scenario.master_seed, trial])


def _draw_fading(scenario: Scenario, config: OfdmConfig,
                 rng: np.random.Generator) -> FadingSpec | None:
    if scenario.channel == "awgn":
        return None
    dt = config.sample_interval
    max_doppler = 0.0
    if scenario.channel == "doppler":
        # peak Doppler given in subcarrier spacings 1/T_s
        max_doppler = 2 * np.pi * scenario.max_doppler_normalized / config.t_body
    taps = random_multipath_taps(
        rng, scenario.n_paths, scenario.max_delay_samples * dt,
        total_power=1.0, max_doppler=max_doppler, decay=scenario.tap_decay)
    return FadingSpec(taps=taps)


def _draw_offsets(scenario: Scenario, config: OfdmConfig,
                  rng: np.random.Generator) -> OffsetSpec:
    t0 = int(rng.integers(0, config.block_samples)) * config.sample_interval
    nu = float(rng.uniform(scenario.n_l, scenario.n_u))
    omega0 = 2 * np.pi * nu / config.t_body
    phi0 = float(rng.uniform(0, 2 * np.pi))
    return OffsetSpec(t0=t0, omega0=omega0, phi0=phi0)


def _sync_trial(scenario: Scenario, trial: int) -> dict:
    config = scenario.ofdm_config()
    sync_cfg = scenario.sync_config()
    rng = _trial_rng(scenario, trial)
    dt = config.sample_interval

    k0 = int(rng.integers(0, scenario.n_candidates))
    offsets = _draw_offsets(scenario, config, rng)
    nu_true = offsets.omega0 * config.t_body / (2 * np.pi)

    n_blocks = scenario.sync_blocks + 4
    blocks = random_symbol_blocks(rng, n_blocks, config)
    wave = build_waveform(blocks, scenario.key(), scenario.epoch, config,
                          phase_index_offset=k0)
    fading = _draw_fading(scenario, config, rng)
    if fading is not None:
        wave = apply_fading(wave, fading)
    wave = apply_offsets(wave, offsets)

    jam = None
    if scenario.jammer_strategy != "none" and scenario.sjr_db is not None:
        jam_offsets = _draw_offsets(scenario, config, rng)
        jam_spec = JammerSpec(
            strategy=scenario.jammer_strategy,
            power=scenario.jammer_power(),
            offsets=jam_offsets,
            cp_phase_mode=scenario.jammer_cp_mode,
        )
        jam = generate_jamming(jam_spec, config, wave.samples.size, rng)
    r = combine(wave, jam, scenario.noise_sigma2(), rng)

    phase_seq = PhaseSequence(scenario.key(), scenario.epoch,
                              config.n_carriers, config.psk_order)
    record = {
        "trial": trial,
        "t0_true": offsets.t0,
        "k0_true": k0,
        "nu_true": nu_true,
        "time_error": math.nan,
        "freq_error": math.nan,
        "peak_metric": math.nan,
        "low_confidence": 0,
        "error": None,
    }
    try:
        est, _ = synchronize(r, config, sync_cfg, phase_seq)
    except Exception as exc:  # trial-level failures are recorded, not fatal
        record["error"] = f"{type(exc).__name__}: {exc}"
        return record

    backoff_t = sync_cfg.backoff(config) * dt
    est_time = est.t0_hat + est.t0p_hat - backoff_t - est.k0_hat * config.t_block
    true_time = offsets.t0 - k0 * config.t_block
    delta = est_time - true_time
    delta -= config.t_block * round(delta / config.t_block)
    record["time_error"] = abs(delta) / config.t_block
    record["freq_error"] = abs(est.total_cfo_normalized() - nu_true)
    record["peak_metric"] = est.peak_metric
    record["low_confidence"] = int(est.low_confidence)
    return record


SYNC_COLUMNS = ["trial", "t0_true", "k0_true", "nu_true", "time_error",
                "freq_error", "peak_metric", "low_confidence", "error"]

TIME_THRESHOLDS = (0.01, 0.02, 0.05)
FREQ_THRESHOLDS = (0.02, 0.04, 0.1)


def _cdf_fraction(errors: np.ndarray, threshold: float) -> float:
    """Fraction of trials below the threshold; failed trials count against."""
    below = np.sum(errors[np.isfinite(errors)] < threshold)
    return float(below / errors.size)


def run_sync_experiment(scenario: Scenario, n_workers: int = 1) -> ExperimentReport:
    """Monte-Carlo synchronization error CDFs.

    Per trial: random offsets, sequence offset and data are drawn, the full
    received signal (fading, jamming, noise) is built and the two-stage
    synchronizer runs. Errors are normalized: time by the block duration,
    frequency by the subcarrier spacing.
    """
    start = time.monotonic()
    trials = range(scenario.trials)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(lambda t: _sync_trial(scenario, t), trials))
    else:
        records = [_sync_trial(scenario, t) for t in trials]

    time_err = np.array([r["time_error"] for r in records])
    freq_err = np.array([r["freq_error"] for r in records])
    aggregates = {
        "n_failed": int(sum(r["error"] is not None for r in records)),
        "time_cdf": {f"lt_{t}": _cdf_fraction(time_err, t) for t in TIME_THRESHOLDS},
        "freq_cdf": {f"lt_{t}": _cdf_fraction(freq_err, t) for t in FREQ_THRESHOLDS},
        "time_error_sorted": np.sort(time_err[np.isfinite(time_err)]),
        "freq_error_sorted": np.sort(freq_err[np.isfinite(freq_err)]),
    }
    return ExperimentReport(
        kind="sync",
        scenario_hash=scenario.scenario_hash(),
        columns=SYNC_COLUMNS,
        records=records,
        aggregates=aggregates,
        wall_clock_s=time.monotonic() - start,
    )


# ---------------------------------------------------------------------------
# Coded BER experiment (symbol level, perfect synchronization)


@lru_cache(maxsize=None)
def _encoder_for_rate(rate_label: str) -> LdpcEncoder:
    return LdpcEncoder(load_alist(bundled_code_path(rate_label)))


def _ber_point(scenario: Scenario, rate_label: str, snr_db: float,
               precoding: bool, rician_k0_db: float | None, seed_tag: int,
               target_errors: int, max_codewords: int,
               batch_size: int = 25) -> dict:
    """BER at one (rate, SNR) operating point.

    Unit-power QPSK symbols; the jammer transmits an independent codeword
    from the same codebook at equal symbol power; the secret phase rotation
    (when precoding is on) randomizes the jamming term. Perfect
    synchronization and, on fading channels, perfect channel knowledge are
    assumed. Stops once target_errors bit errors accumulate.
    """
    enc = _encoder_for_rate(rate_label)
    code = enc.code
    rng = np.random.default_rng([scenario.master_seed, 7001, seed_tag])
    sigma2 = 10 ** (-snr_db / 10)
    jam_amp = 10 ** (-scenario.sjr_db / 20)
    m = scenario.psk_order
    k0_lin = None if rician_k0_db is None else 10 ** (rician_k0_db / 10)

    n_sym = code.n // 2
    bit_errors = 0
    bits_counted = 0
    codewords = 0
    while bit_errors < target_errors and codewords < max_codewords:
        b = min(batch_size, max_codewords - codewords)
        msg = rng.integers(0, 2, size=(b, enc.k)).astype(np.uint8)
        cw = enc.encode(msg)
        s = qpsk_map(cw.ravel()).reshape(b, n_sym)

        jam_msg = rng.integers(0, 2, size=(b, enc.k)).astype(np.uint8)
        j = qpsk_map(enc.encode(jam_msg).ravel()).reshape(b, n_sym) * jam_amp
        if precoding:
            theta = 2 * np.pi * rng.integers(0, m, size=(b, n_sym)) / m
            j = j * np.exp(1j * theta)

        g = rng.normal(0, math.sqrt(sigma2 / 2), size=(b, n_sym, 2))
        noise = g[:, :, 0] + 1j * g[:, :, 1]

        if k0_lin is None:
            r = s + j + noise
            llr = llr_qpsk(r.ravel(), jam_amp ** 2 + sigma2).reshape(b, code.n)
        else:
            # direct path plus diffuse component with power ratio K0,
            # normalized to unit average gain so the sweep isolates fading
            # severity; the fade is constant over one OFDM block and
            # independent across blocks, and the receiver equalizes with
            # known per-block gains
            n_groups = -(-n_sym // scenario.n_carriers)
            gh = rng.normal(0, math.sqrt(1 / (2 * k0_lin)), size=(b, n_groups, 2))
            h_blocks = (1 + gh[:, :, 0] + 1j * gh[:, :, 1]) / math.sqrt(1 + 1 / k0_lin)
            h = np.repeat(h_blocks, scenario.n_carriers, axis=1)[:, :n_sym]
            r = (h * s + j + noise) / h
            noise_sym = (jam_amp ** 2 + sigma2) / np.abs(h) ** 2
            llr = llr_qpsk(r.ravel(), 1.0).reshape(b, code.n)
            llr /= np.repeat(noise_sym, 2, axis=1)
        hard, _, _ = ldpc_bp_decode(code, llr)
        decoded_msg = enc.extract_message(hard)
        bit_errors += int(np.sum(decoded_msg != msg))
        bits_counted += msg.size
        codewords += b

    ber = bit_errors / bits_counted
    return {
        "rate": rate_label,
        "snr_db": snr_db,
        "precoding": int(precoding),
        "rician_k0_db": rician_k0_db,
        "codewords": codewords,
        "bits": bits_counted,
        "bit_errors": bit_errors,
        "ber": ber,
    }


BER_COLUMNS = ["rate", "snr_db", "precoding", "rician_k0_db", "codewords",
               "bits", "bit_errors", "ber"]


def run_ber_experiment(scenario: Scenario, rates: list, snrs_db: list,
                       precoding: bool = True,
                       rician_k0_db_list: list | None = None,
                       target_errors: int = 100,
                       max_codewords: int = 200) -> ExperimentReport:
    """Coded BER sweep over (rate, SNR) points, optionally over Rician K0.

    Runs at the symbol level with perfect synchronization; the disguised
    jammer sends an independent codeword from the same codebook at the
    scenario's SJR.
    """
    start = time.monotonic()
    records = []
    tag = 0
    k0_list = [None] if rician_k0_db_list is None else rician_k0_db_list
    for k0_db in k0_list:
        for rate in rates:
            for snr in snrs_db:
                records.append(_ber_point(
                    scenario, rate, float(snr), precoding, k0_db, tag,
                    target_errors, max_codewords))
                tag += 1
    aggregates = {
        f"ber.rate{r['rate']}.snr{r['snr_db']:g}"
        + ("" if r["rician_k0_db"] is None else f".k0{r['rician_k0_db']:g}"):
        r["ber"]
        for r in records
    }
    return ExperimentReport(
        kind="ber",
        scenario_hash=scenario.scenario_hash(),
        columns=BER_COLUMNS,
        records=records,
        aggregates=aggregates,
        wall_clock_s=time.monotonic() - start,
    )


# ---------------------------------------------------------------------------
# Correlation surfaces


def _plain_surface(r: ComplexSignal, config: OfdmConfig,
                   sync_cfg: SyncConfig) -> np.ndarray:
    """Averaged CP1 correlation over trial time offsets with no despreading
    (classical receiver, unit CP phase): complex array over the tau grid."""
    x = r.samples
    n_c = config.n_carriers
    block = config.block_samples
    cp = config.cp_samples
    cp1 = config.cp1_samples
    prods = x[: x.size - n_c] * np.conj(x[n_c:]) * r.sample_interval
    csum = np.concatenate([[0.0 + 0j], np.cumsum(prods)])
    w = csum[cp1:] - csum[:-cp1]
    ks = np.arange(sync_cfg.first_block, sync_cfg.first_block + sync_cfg.n_blocks)
    starts = ks[:, None] * block + np.arange(block)[None, :] - cp
    return w[starts].mean(axis=0)


def correlation_surface(scenario: Scenario, precoding: bool = True,
                        n_trials: int = 1,
                        signal_offset_samples: int | None = None,
                        jammer_offset_samples: int | None = None) -> dict:
    """Trial-averaged magnitude of the pre-FFT correlation.

    With precoding the surface spans the (time offset, candidate sequence
    offset) grid; without it the candidate axis collapses (unit CP phase).
    The legitimate and jamming time offsets stay fixed across trials so the
    averaged peaks do not smear; data, CP phases and noise are redrawn.
    Returns the surface, the axes, and the true offsets.
    """
    config = scenario.ofdm_config()
    sync_cfg = scenario.sync_config()
    dt = config.sample_interval
    seed_rng = np.random.default_rng([scenario.master_seed, 4242])
    block = config.block_samples
    if signal_offset_samples is None:
        signal_offset_samples = int(seed_rng.integers(0, block))
    if jammer_offset_samples is None:
        jammer_offset_samples = int(
            (signal_offset_samples + block // 2) % block)
    k0 = int(seed_rng.integers(0, scenario.n_candidates))
    phase_seq = PhaseSequence(scenario.key(), scenario.epoch,
                              config.n_carriers, config.psk_order)

    acc = None
    n_blocks = scenario.sync_blocks + 4
    for trial in range(n_trials):
        rng = np.random.default_rng([scenario.master_seed, 4242, trial])
        blocks = random_symbol_blocks(rng, n_blocks, config)
        if precoding:
            wave = build_waveform(blocks, scenario.key(), scenario.epoch,
                                  config, phase_index_offset=k0)
        else:
            wave = build_plain_waveform(blocks, config)
        wave = apply_offsets(wave, OffsetSpec(t0=signal_offset_samples * dt))

        jam = None
        if scenario.jammer_strategy != "none":
            jam_spec = JammerSpec(
                strategy=scenario.jammer_strategy,
                power=scenario.jammer_power(),
                offsets=OffsetSpec(t0=jammer_offset_samples * dt),
                cp_phase_mode=scenario.jammer_cp_mode,
            )
            jam = generate_jamming(jam_spec, config, wave.samples.size, rng)
        r = combine(wave, jam, scenario.noise_sigma2(), rng)

        if precoding:
            surf = np.abs(pre_fft_surface(r, config, sync_cfg, phase_seq))
        else:
            surf = np.abs(_plain_surface(r, config, sync_cfg))
        acc = surf if acc is None else acc + surf

    return {
        "surface": acc / n_trials,
        "tau_samples": np.arange(block),
        "candidates": sync_cfg.candidates if precoding else None,
        "signal_offset_samples": signal_offset_samples,
        "jammer_offset_samples": jammer_offset_samples,
        "k0": k0 if precoding else None,
    }


def surface_csv(result: dict) -> str:
    """Plot-ready CSV of a correlation surface (one row per grid cell)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    surf = result["surface"]
    if surf.ndim == 1:
        writer.writerow(["tau_samples", "magnitude"])
        for tau, mag in zip(result["tau_samples"], surf):
            writer.writerow([tau, repr(float(mag))])
    else:
        writer.writerow(["tau_samples", "candidate", "magnitude"])
        for i, tau in enumerate(result["tau_samples"]):
            for j, d in enumerate(result["candidates"]):
                writer.writerow([tau, d, repr(float(surf[i, j]))])
    return buf.getvalue()
