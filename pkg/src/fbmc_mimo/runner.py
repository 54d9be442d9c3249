"""Scenario execution: channel -> theory SINR and waveform simulation -> tables.

Power bookkeeping: every CMT symbol carries unit energy, so the transmit
waveform has power 2 per complex sample (unit power in each of the s and q
dimensions). The per-antenna SNR is ``1 / sigma_v2``, where ``sigma_v2`` is
the per-real-dimension noise variance of the stacked model; the waveform
noise is therefore ``2 sigma_v2`` per complex sample. OFDM symbols have unit
power per complex sample and see noise ``sigma_v2`` per complex sample.
"""

from __future__ import annotations

import dataclasses
import functools
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from . import detectors
from .channel import (
    align,
    apply_channel,
    identity_channel,
    realize_flat_random,
    realize_sui4,
    subcarrier_gains,
)
from .config import FORMAT_VERSION, ScenarioConfig, parse_config
from .metrics import SinrReport, aggregate, from_db, measure_sinr, to_db
from .modem import (
    cmt_demodulate,
    cmt_modulate,
    ofdm_demodulate,
    ofdm_modulate,
    parse_alphabet,
    random_symbols,
)
from .prototype import design_prototype

log = logging.getLogger(__name__)

SWEEP_KEYS = ("N", "L", "snr_in_db", "K")
CSV_COLUMNS = ("subcarrier", "user", "theory_mf_db", "theory_mmse_db", "sim_mf_db", "sim_mmse_db")


class TrialError(RuntimeError):
    def __init__(self, trial, cause):
        self.trial = trial
        super().__init__(f"trial {trial} failed: {cause}")


@functools.lru_cache(maxsize=16)
def _prototype(L, O):
    return design_prototype(L, O)


def trial_seed(master_seed: int, trial: int, stream: int = 0) -> np.random.SeedSequence:
    """Fixed splitting rule: one independent seed per (stream, trial)."""
    return np.random.SeedSequence([master_seed, stream, trial])


def realize_channel(cfg: ScenarioConfig, seed):
    if cfg.channel == "SUI4":
        return realize_sui4(cfg.K, cfg.N, cfg.fs_hz, seed)
    if cfg.channel == "FLAT_RANDOM":
        return realize_flat_random(cfg.K, cfg.N, cfg.fs_hz, seed)
    return identity_channel(cfg.K, cfg.N, cfg.fs_hz)


def _theory(cfg, H, sigma_v2):
    L, K = H.shape[0], H.shape[2]
    mf = np.empty((L, K))
    mmse = np.empty((L, K))
    weights = []
    for k in range(L):
        if cfg.modem == "CMT":
            sys = detectors.stack_real(H[k], sigma_v2)
            w_mf = detectors.mf_weights(sys)
            w_mmse = detectors.mmse_weights(sys)
            mf[k] = detectors.sinr_mf_theory(sys)
            mmse[k] = detectors.sinr_mmse_theory(sys, w_mmse)
            weights.append((w_mf.W, w_mmse.W))
        else:
            W_mf = detectors.complex_mf_weights(H[k])
            W_mmse = detectors.complex_mmse_weights(H[k], sigma_v2)
            mf[k] = detectors.complex_sinr(W_mf, H[k], sigma_v2)
            mmse[k] = detectors.complex_sinr(W_mmse, H[k], sigma_v2)
            weights.append((W_mf, W_mmse))
    return mf, mmse, weights


def _simulate_cmt(cfg, ch, weights, sigma_v2, data_rng, noise_seed):
    L, T, O = cfg.L, cfg.num_symbols, cfg.O
    proto = _prototype(L, O)
    s = random_symbols((cfg.K, L, T), parse_alphabet(cfg.alphabet), data_rng)
    rx = apply_channel(cmt_modulate(s, proto), ch, 2 * sigma_v2, noise_seed)
    y = cmt_demodulate(align(rx, ch), proto, L, T)  # (N, L, T)
    x = np.concatenate([y.real, y.imag], axis=0).transpose(1, 0, 2)  # (L, 2N, T)
    keep = slice(O, T - O)
    ref = s[:, :, keep].transpose(1, 0, 2)  # (L, K, T')
    out = []
    for which in (0, 1):
        W = np.stack([w[which] for w in weights])  # (L, 2N, K)
        s_hat = np.einsum("kam,kat->kmt", W, x[:, :, keep])
        out.append(measure_sinr(s_hat, ref))
    return out


def _simulate_ofdm(cfg, ch, weights, sigma_v2, data_rng, noise_seed):
    L, T = cfg.L, cfg.num_symbols
    a = parse_alphabet(cfg.alphabet)
    s = (random_symbols((cfg.K, L, T), a, data_rng) + 1j * random_symbols((cfg.K, L, T), a, data_rng)) / np.sqrt(2)
    rx = apply_channel(ofdm_modulate(s, L, cfg.cp_len), ch, sigma_v2, noise_seed)
    y = ofdm_demodulate(align(rx, ch), L, cfg.cp_len, T)  # (N, L, T)
    x = y.transpose(1, 0, 2)  # (L, N, T)
    ref = s.transpose(1, 0, 2)
    out = []
    for which in (0, 1):
        W = np.stack([w[which] for w in weights])  # (L, N, K)
        s_hat = np.einsum("kam,kat->kmt", W.conj(), x)
        out.append(measure_sinr(s_hat, ref))
    return out


def run_trial(cfg: ScenarioConfig, seed: np.random.SeedSequence) -> SinrReport:
    """One channel realization: closed-form and simulated SINR per (k, user)."""
    ch_seed, data_seed, noise_seed = seed.spawn(3)
    sigma_v2 = cfg.sigma_v2
    ch = realize_channel(cfg, ch_seed)
    if cfg.modem == "OFDM":
        # the prefix absorbs the delay spread; the FFT window starts at its end
        ch = dataclasses.replace(ch, timing_offset=0)
    H = subcarrier_gains(ch, cfg.L)
    th_mf, th_mmse, weights = _theory(cfg, H, sigma_v2)
    sim = _simulate_cmt if cfg.modem == "CMT" else _simulate_ofdm
    sim_mf, sim_mmse = sim(cfg, ch, weights, sigma_v2, np.random.default_rng(data_seed), noise_seed)
    if cfg.detector == "MF":
        sim_mmse = np.full_like(sim_mmse, np.nan)
    elif cfg.detector == "MMSE":
        sim_mf = np.full_like(sim_mf, np.nan)
    meta = dict(seed=tuple(seed.entropy), L=cfg.L, N=cfg.N, K=cfg.K, sigma_v2=sigma_v2)
    return SinrReport(th_mf, th_mmse, sim_mf, sim_mmse, meta)


@dataclass
class ResultTable:
    """Trial-mean SINR in dB per (subcarrier, user), plus the scenario echo."""

    config: ScenarioConfig
    theory_mf_db: np.ndarray
    theory_mmse_db: np.ndarray
    sim_mf_db: np.ndarray
    sim_mmse_db: np.ndarray
    num_trials: int
    reports: list = field(default_factory=list, repr=False)
    format_version: int = FORMAT_VERSION

    FIELDS = ("theory_mf_db", "theory_mmse_db", "sim_mf_db", "sim_mmse_db")

    def mean_over_subcarriers_db(self, name: str) -> np.ndarray:
        """Per-user linear mean across subcarriers (of the trial means), in dB."""
        return to_db(np.mean(from_db(getattr(self, name)), axis=0))

    def per_trial_db(self, name: str) -> np.ndarray:
        """Stack of per-trial values, shape (trials, L, K), in dB."""
        key = name.removesuffix("_db")
        return np.stack([r.db(key) for r in self.reports])


def _table_from_reports(cfg, reports) -> ResultTable:
    if len(reports) == 1:
        means = {f"{n}_db": reports[0].db(n) for n in SinrReport.FIELDS}
    else:
        agg = aggregate(reports)
        means = {f"{n}_db": agg[n].mean_db for n in SinrReport.FIELDS}
    return ResultTable(cfg, num_trials=len(reports), reports=list(reports), **means)


def run_scenario(cfg: ScenarioConfig, stream: int = 0) -> ResultTable:
    reports = []
    for t in range(cfg.num_trials):
        try:
            reports.append(run_trial(cfg, trial_seed(cfg.master_seed, t, stream)))
        except Exception as exc:  # abort the run, naming the trial
            raise TrialError(t, exc) from exc
        log.debug("trial %d/%d done", t + 1, cfg.num_trials)
    return _table_from_reports(cfg, reports)


def run_sweep(cfg: ScenarioConfig, key: str, values) -> list[ResultTable]:
    """One table per value. For an N sweep with ``nested_antennas`` every value
    reuses the same trial seeds, so larger arrays extend smaller ones;
    otherwise each value gets its own seed stream."""
    if key not in SWEEP_KEYS:
        raise ValueError(f"cannot sweep {key!r}; choose one of {', '.join(SWEEP_KEYS)}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    tables = []
    for i, v in enumerate(values):
        if key == "snr_in_db":
            sub = cfg.replace(snr_in_db=v, target_sinr_db=None)
        else:
            sub = cfg.replace(**{key: int(v)})
        stream = 0 if (key == "N" and cfg.nested_antennas) else i + 1
        tables.append(run_scenario(sub, stream))
    return tables


# ---------------------------------------------------------------------------
# CSV persistence


def _fmt(x: float) -> str:
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def format_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    buf.write(f"# format_version = {table.format_version}\n")
    for line in table.config.to_text().splitlines():
        buf.write(f"# {line}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    L, K = table.theory_mf_db.shape
    for k in range(L):
        for l in range(K):
            vals = [_fmt(getattr(table, f)[k, l]) for f in ResultTable.FIELDS]
            buf.write(f"{k},{l}," + ",".join(vals) + "\n")
    return buf.getvalue()


def write_csv(table: ResultTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(table))


def read_csv(path) -> ResultTable:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    meta, body = [], []
    for line in lines:
        (meta if line.startswith("#") else body).append(line)
    echo = {}
    cfg_lines = []
    for line in meta:
        key, _, value = line[1:].strip().partition("=")
        key, value = key.strip(), value.strip()
        if key == "format_version":
            echo[key] = int(value)
        else:
            cfg_lines.append(f"{key} = {value}")
    cfg = parse_config("\n".join(cfg_lines))
    if tuple(body[0].split(",")) != CSV_COLUMNS:
        raise ValueError(f"unexpected header {body[0]!r}")
    rows = [r.split(",") for r in body[1:] if r]
    L = max(int(r[0]) for r in rows) + 1
    K = max(int(r[1]) for r in rows) + 1
    arrays = {f: np.full((L, K), np.nan) for f in ResultTable.FIELDS}
    for r in rows:
        k, l = int(r[0]), int(r[1])
        for f, v in zip(ResultTable.FIELDS, r[2:]):
            arrays[f][k, l] = float(v)
    return ResultTable(cfg, num_trials=cfg.num_trials, format_version=echo.get("format_version", 0), **arrays)
