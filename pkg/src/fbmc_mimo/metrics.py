"""SINR measurement, PAPR statistics and Monte-Carlo aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_SYMBOLS = 100
# SINR above this is reported as infinite (exact reconstruction)
INF_THRESHOLD = 1e26


def to_db(x):
    with np.errstate(divide="ignore"):
        return 10 * np.log10(np.asarray(x, dtype=float))


def from_db(x):
    return 10 ** (np.asarray(x, dtype=float) / 10)


def measure_sinr(estimates, reference) -> np.ndarray:
    """SINR of ``estimates`` against ``reference`` along the last axis.

    A least-squares gain ``alpha`` absorbs any scaling, so the result is
    ``|alpha|^2 E|s|^2 / E|s_hat - alpha s|^2``. Works for real or complex
    symbols; leading axes (subcarrier, user, ...) are kept.
    """
    est = np.asarray(estimates)
    ref = np.asarray(reference)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {ref.shape}")
    if est.shape[-1] < MIN_SYMBOLS:
        raise ValueError(f"need at least {MIN_SYMBOLS} symbols, got {est.shape[-1]}")
    p_ref = np.mean(np.abs(ref) ** 2, axis=-1)
    if np.any(p_ref == 0):
        raise ValueError("reference has zero power")
    alpha = np.mean(est * np.conj(ref), axis=-1) / p_ref
    err = np.mean(np.abs(est - alpha[..., None] * ref) ** 2, axis=-1)
    sig = np.abs(alpha) ** 2 * p_ref
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = sig / err
    return np.where((err == 0) | (sinr > INF_THRESHOLD), np.inf, sinr)


@dataclass
class PaprCcdf:
    thresholds_db: np.ndarray
    probability: np.ndarray
    papr_db: np.ndarray  # per-block PAPR
    num_excluded: int  # zero-power blocks

    def at(self, threshold_db: float) -> float:
        """P(PAPR > threshold) read off directly from the block values."""
        return float(np.mean(self.papr_db > threshold_db))


def papr_ccdf(signal, block_len: int, step_db: float = 0.1) -> PaprCcdf:
    """Empirical CCDF of per-block ``max|x|^2 / mean|x|^2``."""
    x = np.asarray(signal).ravel()
    if block_len < 1:
        raise ValueError("block_len must be positive")
    if len(x) < 100 * block_len:
        raise ValueError(f"need at least {100 * block_len} samples, got {len(x)}")
    nblk = len(x) // block_len
    p = np.abs(x[: nblk * block_len].reshape(nblk, block_len)) ** 2
    mean = p.mean(axis=1)
    ok = mean > 0
    papr_db = to_db(p[ok].max(axis=1) / mean[ok])
    top = max(float(np.max(papr_db)), 0.0) if papr_db.size else 0.0
    thresholds = np.round(np.arange(0.0, top + step_db, step_db), 10)
    prob = np.mean(papr_db[None, :] > thresholds[:, None] + 1e-12, axis=1) if papr_db.size else np.zeros_like(thresholds)
    return PaprCcdf(thresholds, prob, papr_db, int(np.count_nonzero(~ok)))


@dataclass
class SinrReport:
    """Per (subcarrier, user) SINR of one trial, linear scale.

    ``sim_*`` arrays may be NaN when that detector was not simulated.
    """

    theory_mf: np.ndarray
    theory_mmse: np.ndarray
    sim_mf: np.ndarray
    sim_mmse: np.ndarray
    meta: dict = field(default_factory=dict)

    FIELDS = ("theory_mf", "theory_mmse", "sim_mf", "sim_mmse")

    @property
    def shape(self):
        return np.shape(self.theory_mf)

    def db(self, name: str) -> np.ndarray:
        return to_db(getattr(self, name))


@dataclass
class AggregateCell:
    mean_db: np.ndarray
    ci_low_db: np.ndarray
    ci_high_db: np.ndarray
    num_infinite: np.ndarray
    num_trials: int


def config_key(meta: dict) -> tuple:
    return tuple(sorted((k, v) for k, v in meta.items() if k != "seed"))


def aggregate(reports, z: float = 1.959963984540054) -> dict[str, AggregateCell]:
    """Linear-domain mean and normal-approximation CI per cell across trials.

    Infinite cells are excluded per cell and counted; a cell that is
    infinite in every trial reports ``inf``.
    """
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("aggregate needs at least two reports")
    key = config_key(reports[0].meta)
    shape = reports[0].shape
    for r in reports[1:]:
        if config_key(r.meta) != key or r.shape != shape:
            raise ValueError("reports come from different configurations")
    out = {}
    for name in SinrReport.FIELDS:
        stack = np.stack([np.asarray(getattr(r, name), dtype=float) for r in reports])
        inf = np.isinf(stack)
        valid = ~inf & ~np.isnan(stack)
        x = np.where(valid, stack, 0.0)
        n = valid.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(n > 0, x.sum(axis=0) / n, np.nan)
            ss = np.sum(np.where(valid, (stack - mean) ** 2, 0.0), axis=0)
            sd = np.where(n > 1, np.sqrt(ss / (n - 1)), 0.0)
        half = z * sd / np.sqrt(np.maximum(n, 1))
        all_inf = inf.all(axis=0)
        mean = np.where(all_inf, np.inf, mean)
        out[name] = AggregateCell(
            mean_db=to_db(mean),
            ci_low_db=to_db(np.where(all_inf, np.inf, np.maximum(mean - half, 0.0))),
            ci_high_db=to_db(np.where(all_inf, np.inf, mean + half)),
            num_infinite=inf.sum(axis=0),
            num_trials=len(reports),
        )
    return out
