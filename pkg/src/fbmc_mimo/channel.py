"""Multi-user, multi-antenna tapped-delay-line channels and AWGN."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

# SUI-4 omni profile
SUI4_DELAYS_S = (0.0, 1.5e-6, 4.0e-6)
SUI4_POWERS_DB = (0.0, -4.0, -8.0)

DEFAULT_FS_HZ = 2.8e6
MAX_DELAY_SAMPLES = 1 << 20


@dataclass(frozen=True)
class ChannelSet:
    """Impulse responses ``taps[user, antenna, delay]`` at ``sample_rate_hz``.

    ``timing_offset`` is the delay (in samples) the receiver's symbol clock
    is locked to; subcarrier gains are referenced to it.
    """

    taps: np.ndarray
    sample_rate_hz: float = DEFAULT_FS_HZ
    timing_offset: int = 0

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=complex)
        if t.ndim != 3 or 0 in t.shape:
            raise ValueError("taps must be a nonempty (K, N, D) array")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample rate must be positive")
        if not 0 <= self.timing_offset <= t.shape[2] - 1:
            raise ValueError("timing offset must lie within the tap support")
        object.__setattr__(self, "taps", t)

    @property
    def num_users(self) -> int:
        return self.taps.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.taps.shape[1]

    @property
    def max_delay(self) -> int:
        return self.taps.shape[2] - 1

    def antennas(self, n: int) -> "ChannelSet":
        """The first ``n`` antennas (realizations are prefix-consistent in N)."""
        if not 1 <= n <= self.num_antennas:
            raise ValueError(f"cannot take {n} of {self.num_antennas} antennas")
        return ChannelSet(self.taps[:, :n], self.sample_rate_hz, self.timing_offset)


def _check_dims(K, N):
    if K < 1 or N < 1:
        raise ValueError(f"need K >= 1 and N >= 1, got K={K}, N={N}")


def _complex_gaussian(rng, shape):
    # antenna axis first so a larger N extends a smaller N's draws
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2)


def realize_sui4(K: int, N: int, fs: float = DEFAULT_FS_HZ, rng_seed=None) -> ChannelSet:
    """I.i.d. Rayleigh SUI-4 realizations, unit expected power per link.

    Tap delays are rounded to the nearest sample at ``fs``; no Doppler, no
    Ricean component, no antenna correlation. For a fixed seed, the first
    ``n`` antennas do not depend on ``N``. The receiver timing is set to the
    profile's power-weighted mean delay (2 samples at 2.8 MHz).
    """
    _check_dims(K, N)
    if not fs > 0 or not np.isfinite(fs):
        raise ValueError(f"sample rate must be positive and finite, got {fs}")
    delays = np.rint(np.asarray(SUI4_DELAYS_S) * fs).astype(int)
    if delays.max() > MAX_DELAY_SAMPLES:
        raise ValueError(f"delay of {delays.max()} samples is not representable")
    powers = 10 ** (np.asarray(SUI4_POWERS_DB) / 10)
    powers /= powers.sum()
    rng = np.random.default_rng(rng_seed)
    g = _complex_gaussian(rng, (N, K, len(delays)))
    taps = np.zeros((K, N, delays.max() + 1), dtype=complex)
    for j, d in enumerate(delays):
        taps[:, :, d] += np.sqrt(powers[j]) * g[:, :, j].T
    timing = int(np.rint(np.dot(powers, delays)))
    return ChannelSet(taps, float(fs), timing)


def realize_flat_random(K: int, N: int, fs: float = DEFAULT_FS_HZ, rng_seed=None) -> ChannelSet:
    """Single unit-variance complex Gaussian tap per link."""
    _check_dims(K, N)
    rng = np.random.default_rng(rng_seed)
    g = _complex_gaussian(rng, (N, K))
    return ChannelSet(g.T[:, :, None], float(fs))


def identity_channel(K: int, N: int, fs: float = DEFAULT_FS_HZ) -> ChannelSet:
    _check_dims(K, N)
    return ChannelSet(np.ones((K, N, 1), dtype=complex), float(fs))


def subcarrier_gains(ch: ChannelSet, L: int) -> np.ndarray:
    """Flat gains ``H[k, i, l]`` at the subcarrier centers ``(k + 1/2) fs / L``.

    Delays are measured from ``ch.timing_offset``.
    """
    d = np.arange(ch.taps.shape[2]) - ch.timing_offset
    f = (np.arange(L) + 0.5) / L
    E = np.exp(-2j * np.pi * np.outer(f, d))  # (L, D)
    return np.einsum("kd,lid->kil", E, ch.taps)


def apply_channel(signals, ch: ChannelSet, noise_var: float = 0.0, rng_seed=None) -> np.ndarray:
    """Per-antenna sum of user signals convolved with their links, plus AWGN.

    ``signals`` has shape (K, n). The output has shape (N, n + max_delay)
    (full linear convolution). ``noise_var`` is the variance per complex
    sample, split evenly between real and imaginary parts.
    """
    x = np.atleast_2d(np.asarray(signals, dtype=complex))
    if x.shape[0] != ch.num_users:
        raise ValueError(f"got {x.shape[0]} user signals for {ch.num_users} users")
    if noise_var < 0:
        raise ValueError("noise variance must be >= 0")
    n = x.shape[1]
    y = np.zeros((ch.num_antennas, n + ch.max_delay), dtype=complex)
    for d in range(ch.taps.shape[2]):
        tap = ch.taps[:, :, d]
        if np.any(tap):
            y[:, d : d + n] += tap.T @ x
    if noise_var > 0:
        rng = np.random.default_rng(rng_seed)
        y += np.sqrt(noise_var) * _complex_gaussian(rng, y.shape)
    return y


def align(received, ch: ChannelSet) -> np.ndarray:
    """Drop the leading ``ch.timing_offset`` samples (receiver symbol timing)."""
    return np.asarray(received)[..., ch.timing_offset :]


CSV_COLUMNS = ("user", "antenna", "delay_samples", "re", "im")


def write_channel_csv(ch: ChannelSet, path) -> None:
    """Rows for every delay that is active on at least one link."""
    active = np.flatnonzero(np.any(ch.taps != 0, axis=(0, 1)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for l in range(ch.num_users):
            for i in range(ch.num_antennas):
                for d in active:
                    v = ch.taps[l, i, d]
                    w.writerow([l, i, d, repr(float(v.real)), repr(float(v.imag))])


def read_channel_csv(path, fs: float = DEFAULT_FS_HZ, timing_offset: int = 0) -> ChannelSet:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected channel CSV header {header}")
        rows = [(int(a), int(b), int(c), float(d), float(e)) for a, b, c, d, e in r]
    if not rows:
        raise ValueError("channel CSV has no rows")
    K = max(r[0] for r in rows) + 1
    N = max(r[1] for r in rows) + 1
    D = max(r[2] for r in rows) + 1
    taps = np.zeros((K, N, D), dtype=complex)
    for l, i, d, re_, im_ in rows:
        taps[l, i, d] = re_ + 1j * im_
    return ChannelSet(taps, fs, timing_offset)
