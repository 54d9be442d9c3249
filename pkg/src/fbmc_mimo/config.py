"""Scenario files: line-based ``key = value`` with ``#`` comments.

Example::

    # single-user processing gain
    name = fig4_single_user
    modem = CMT
    L = 32
    O = 6
    N = 128
    K = 1
    detector = BOTH
    channel = SUI4
    snr_in_db = -1
    num_symbols = 240
    num_trials = 200
    master_seed = 2014
    alphabet = 2PAM

``snr_in_db`` may be ``NOISE_FREE``. Instead of ``snr_in_db`` a scenario may
give ``target_sinr_db``, in which case the per-antenna SNR is
``target - 10 log10 N``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .channel import DEFAULT_FS_HZ
from .modem import parse_alphabet

FORMAT_VERSION = 1

MODEMS = ("CMT", "OFDM")
DETECTORS = ("MF", "MMSE", "BOTH")
CHANNELS = ("SUI4", "FLAT_RANDOM", "IDENTITY")
NOISE_FREE = "NOISE_FREE"


class ConfigError(ValueError):
    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class ScenarioConfig:
    modem: str
    L: int
    O: int
    N: int
    K: int
    detector: str
    channel: str
    num_symbols: int
    num_trials: int
    master_seed: int
    alphabet: str
    snr_in_db: float | None = None  # None means noise free
    fs_hz: float = DEFAULT_FS_HZ
    target_sinr_db: float | None = None
    cp_len: int = 0
    nested_antennas: bool = False
    name: str = "scenario"

    @property
    def noise_free(self) -> bool:
        return self.snr_in_db is None and self.target_sinr_db is None

    @property
    def effective_snr_db(self) -> float | None:
        if self.target_sinr_db is not None:
            return self.target_sinr_db - 10 * math.log10(self.N)
        return self.snr_in_db

    @property
    def sigma_v2(self) -> float:
        """Noise variance per real dimension of the stacked model (unit signal)."""
        snr = self.effective_snr_db
        return 0.0 if snr is None else 10 ** (-snr / 10)

    def replace(self, **changes) -> "ScenarioConfig":
        new = dataclasses.replace(self, **changes)
        validate(new)
        return new

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "snr_in_db":
                if self.target_sinr_db is not None:
                    continue
                v = NOISE_FREE if v is None else _fmt(v)
            elif f.name == "target_sinr_db":
                if v is None:
                    continue
                v = _fmt(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = _fmt(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


REQUIRED = (
    "modem", "L", "O", "N", "K", "detector", "channel", "num_symbols",
    "num_trials", "master_seed", "alphabet",
)  # fmt: skip


def _to_int(v):
    if not v.lstrip("+-").isdigit():
        raise ValueError(f"expected an integer, got {v!r}")
    return int(v)


def _to_float(v):
    x = float(v)
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {v!r}")
    return x


def _to_bool(v):
    low = v.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {v!r}")


def _choice(options):
    def conv(v):
        u = v.upper()
        if u not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return u

    return conv


def _snr(v):
    return None if v.upper() == NOISE_FREE else _to_float(v)


CONVERTERS = {
    "modem": _choice(MODEMS),
    "L": _to_int,
    "O": _to_int,
    "N": _to_int,
    "K": _to_int,
    "detector": _choice(DETECTORS),
    "channel": _choice(CHANNELS),
    "snr_in_db": _snr,
    "target_sinr_db": _to_float,
    "num_symbols": _to_int,
    "num_trials": _to_int,
    "master_seed": _to_int,
    "alphabet": str,
    "fs_hz": _to_float,
    "cp_len": _to_int,
    "nested_antennas": _to_bool,
    "name": str,
}


def parse_config(text: str) -> ScenarioConfig:
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONVERTERS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        try:
            values[key] = CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
        lines[key] = lineno

    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    has_snr = "snr_in_db" in values
    has_target = "target_sinr_db" in values
    if has_snr == has_target:
        raise ConfigError("give exactly one of snr_in_db or target_sinr_db")
    cfg = ScenarioConfig(**values)
    try:
        validate(cfg)
    except ConfigError as exc:
        raise ConfigError(exc.message, lines.get(exc.key), exc.key) from None
    return cfg


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def validate(cfg: ScenarioConfig) -> None:
    """Raise :class:`ConfigError` (with the offending ``key``) on violations."""

    def bad(key, msg):
        raise ConfigError(msg, key=key)

    if cfg.L < 2 or cfg.L % 2:
        bad("L", f"L must be even and >= 2, got {cfg.L}")
    if cfg.O < 3:
        bad("O", f"O must be >= 3, got {cfg.O}")
    if cfg.N < 1:
        bad("N", f"N must be >= 1, got {cfg.N}")
    if cfg.K < 1:
        bad("K", f"K must be >= 1, got {cfg.K}")
    if cfg.num_symbols <= 2 * cfg.O:
        bad("num_symbols", f"num_symbols must exceed 2*O = {2 * cfg.O}")
    if cfg.master_seed < 0:
        bad("master_seed", "master_seed must be >= 0")
    if cfg.num_trials < 1:
        bad("num_trials", "num_trials must be >= 1")
    if not cfg.fs_hz > 0:
        bad("fs_hz", "fs_hz must be positive")
    if cfg.cp_len < 0:
        bad("cp_len", "cp_len must be >= 0")
    if cfg.snr_in_db is not None and cfg.target_sinr_db is not None:
        bad("target_sinr_db", "give exactly one of snr_in_db or target_sinr_db")
    try:
        parse_alphabet(cfg.alphabet)
    except ValueError as exc:
        bad("alphabet", str(exc))
