"""CMT transmultiplexer and a CP-OFDM baseline.

Conventions shared by both modems:

* ``L`` subcarriers at normalized centers ``(k + 1/2) / L``, k = 0..L-1, so the
  band is fully packed with no DC subcarrier.
* CMT symbols are real PAM values spaced ``L/2`` samples apart on every
  subcarrier. Symbol ``n`` of subcarrier ``k`` is rotated by ``j**(k + n)``
  and the carrier is referenced to the filter center, which puts neighbours
  (in time and in frequency) in phase quadrature.
* Grids are ``(..., L, T)`` arrays; leading axes are batched (users, antennas).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .prototype import PrototypeFilter

_J_POWERS = np.array([1, 1j, -1, -1j])


def pam_alphabet(M: int) -> np.ndarray:
    """Zero-mean, unit-average-power M-PAM levels in ascending order."""
    if M < 2 or M % 2:
        raise ValueError(f"PAM order must be an even integer >= 2, got {M}")
    levels = np.arange(-(M - 1), M, 2, dtype=float)
    return levels / np.sqrt(np.mean(levels**2))


def parse_alphabet(name: str) -> np.ndarray:
    """``'2PAM'`` / ``'4-PAM'`` / ``'8pam'`` -> normalized levels."""
    m = re.fullmatch(r"\s*(\d+)\s*-?\s*PAM\s*", name, flags=re.IGNORECASE)
    if not m:
        raise ValueError(f"unknown alphabet {name!r}; expected e.g. '2PAM' or '4PAM'")
    return pam_alphabet(int(m.group(1)))


@dataclass(frozen=True)
class PamGrid:
    """Real PAM symbols indexed (subcarrier, symbol time)."""

    symbols: np.ndarray
    alphabet: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=float)
        a = np.asarray(self.alphabet, dtype=float)
        if s.ndim != 2:
            raise ValueError("PamGrid symbols must be a 2-D (L, T) array")
        if not np.all(np.isin(s, a)):
            raise ValueError("grid contains symbols outside the alphabet")
        object.__setattr__(self, "symbols", s)
        object.__setattr__(self, "alphabet", a)

    @property
    def num_subcarriers(self) -> int:
        return self.symbols.shape[0]

    @property
    def num_symbols(self) -> int:
        return self.symbols.shape[1]

    @classmethod
    def random(cls, L, T, alphabet, rng=None) -> "PamGrid":
        rng = np.random.default_rng(rng)
        a = np.asarray(alphabet, dtype=float)
        return cls(rng.choice(a, size=(L, T)), a)


def random_symbols(shape, alphabet, rng) -> np.ndarray:
    """Uniform draws from ``alphabet`` with arbitrary shape."""
    return np.asarray(alphabet, dtype=float)[rng.integers(0, len(alphabet), size=shape)]


def _symbols_of(grid) -> np.ndarray:
    return np.asarray(getattr(grid, "symbols", grid))


def cmt_signal_length(T: int, proto: PrototypeFilter) -> int:
    return (T - 1) * (proto.num_subcarriers // 2) + len(proto)


def _toggle_exponent(L, T):
    """Exponent e[k, n] with j**e = j**(k+n) * exp(j*pi*(k+1/2)*n)."""
    k = np.arange(L)[:, None]
    n = np.arange(T)[None, :]
    return (k + 2 * n + 2 * k * n) % 4


def _carrier(k, m, D, L):
    # exp(j*2*pi*(k+1/2)*(m-D)/L) with the phase reduced exactly mod 2L
    e = ((2 * k + 1) * (np.asarray(m) - D)) % (2 * L)
    return np.exp(1j * np.pi * e / L)


def cmt_modulate(grid, proto: PrototypeFilter, method: str = "polyphase") -> np.ndarray:
    """CMT synthesis filter bank.

    Parameters
    ----------
    grid : PamGrid or array, shape (..., L, T)
        Real PAM symbols per subcarrier and symbol time.
    proto : PrototypeFilter
    method : {'polyphase', 'direct'}
        ``'direct'`` is the per-subcarrier convolution reference;
        ``'polyphase'`` is the IFFT/overlap-add equivalent.

    Returns
    -------
    ndarray, shape (..., (T-1)*L/2 + len(proto))
        Complex baseband samples. With a unit-energy prototype every symbol
        contributes unit energy.
    """
    s = _symbols_of(grid)
    L = proto.num_subcarriers
    if s.ndim < 2 or s.shape[-2] != L:
        raise ValueError(f"grid has {s.shape[-2] if s.ndim >= 2 else '?'} subcarriers, prototype expects {L}")
    if np.iscomplexobj(s):
        raise ValueError("CMT carries real PAM symbols")
    if method == "direct":
        return _cmt_modulate_direct(s, proto)
    if method == "polyphase":
        return _cmt_modulate_polyphase(s, proto)
    raise ValueError(f"unknown method {method!r}")


def _cmt_modulate_direct(s, proto):
    L = proto.num_subcarriers
    M = L // 2
    T = s.shape[-1]
    p = proto.coefficients
    D = proto.group_delay
    n_out = cmt_signal_length(T, proto)
    m = np.arange(n_out)
    n = np.arange(T)
    batch = s.shape[:-2]
    out = np.zeros(batch + (n_out,), dtype=complex)
    for idx in np.ndindex(*batch):
        x = np.zeros(n_out, dtype=complex)
        for k in range(L):
            up = np.zeros((T - 1) * M + 1, dtype=complex)
            up[::M] = s[idx + (k,)] * _J_POWERS[(k + n) % 4]
            x += np.convolve(up, p) * _carrier(k, m, D, L)
        out[idx] = x
    return out


def _cmt_modulate_polyphase(s, proto):
    L = proto.num_subcarriers
    M = L // 2
    T = s.shape[-1]
    O = proto.overlap_factor
    p = proto.coefficients
    D = proto.group_delay
    nlen = len(p)

    c = s * _J_POWERS[_toggle_exponent(L, T)]  # (..., L, T)
    G = L * np.fft.ifft(c, axis=-2)  # (..., L, T), index (u - D) mod L
    G = np.roll(G, D % L, axis=-2)  # index u mod L
    G = np.moveaxis(G, -2, -1)  # (..., T, L)
    u = np.arange(nlen)
    shaped = p * np.exp(1j * np.pi * (u - D) / L)
    blocks = G[..., u % L] * shaped  # (..., T, O*L+1)

    # overlap-add at hop M
    nseg = 2 * O + 1
    padded = np.zeros(blocks.shape[:-1] + (nseg * M,), dtype=complex)
    padded[..., :nlen] = blocks
    padded = padded.reshape(blocks.shape[:-1] + (nseg, M))
    acc = np.zeros(blocks.shape[:-2] + (T + nseg - 1, M), dtype=complex)
    for q in range(nseg):
        acc[..., q : q + T, :] += padded[..., :, q, :]
    out = acc.reshape(blocks.shape[:-2] + (-1,))
    return out[..., : cmt_signal_length(T, proto)]


def cmt_demodulate(signal, proto: PrototypeFilter, L: int, T: int, method: str = "polyphase") -> np.ndarray:
    """CMT analysis filter bank (down-conversion, matched filter, sampling).

    Returns the complex outputs ``y[..., k, n]`` before any equalization:
    back to back, ``Re(y)`` is the transmitted PAM grid and ``Im(y)`` holds
    the ISI/ICI term. Only the first ``(T-1)*L/2 + len(proto)`` samples of
    ``signal`` are used.
    """
    r = np.asarray(signal)
    if L != proto.num_subcarriers:
        raise ValueError(f"L={L} does not match prototype ({proto.num_subcarriers})")
    if T < 1:
        raise ValueError("T must be positive")
    need = cmt_signal_length(T, proto)
    if r.shape[-1] < need:
        raise ValueError(f"signal too short: {r.shape[-1]} samples, need {need} for T={T}")
    r = r[..., :need].astype(complex, copy=False)
    if method == "direct":
        return _cmt_demodulate_direct(r, proto, T)
    if method == "polyphase":
        return _cmt_demodulate_polyphase(r, proto, T)
    raise ValueError(f"unknown method {method!r}")


def _cmt_demodulate_direct(r, proto, T):
    L = proto.num_subcarriers
    M = L // 2
    p = proto.coefficients
    D = proto.group_delay
    m = np.arange(r.shape[-1])
    n = np.arange(T)
    batch = r.shape[:-1]
    out = np.zeros(batch + (L, T), dtype=complex)
    for idx in np.ndindex(*batch):
        for k in range(L):
            z = np.convolve(r[idx] * np.conj(_carrier(k, m, D, L)), p)
            out[idx + (k,)] = z[n * M + 2 * D] * np.conj(_J_POWERS[(k + n) % 4])
    return out


def _cmt_demodulate_polyphase(r, proto, T, chunk=8):
    L = proto.num_subcarriers
    M = L // 2
    O = proto.overlap_factor
    p = proto.coefficients
    D = proto.group_delay
    nlen = len(p)
    u = np.arange(nlen)
    shaped = p * np.exp(-1j * np.pi * (u - D) / L)
    derot = np.conj(_J_POWERS[_toggle_exponent(L, T)])

    batch = r.shape[:-1]
    flat = r.reshape((-1, r.shape[-1]))
    out = np.empty((flat.shape[0], L, T), dtype=complex)
    for start in range(0, flat.shape[0], chunk):
        rows = flat[start : start + chunk]
        win = np.lib.stride_tricks.sliding_window_view(rows, nlen, axis=-1)[:, ::M][:, :T]
        w = np.zeros(win.shape[:-1] + ((O + 1) * L,), dtype=complex)
        w[..., :nlen] = win * shaped
        folded = w.reshape(win.shape[:-1] + (O + 1, L)).sum(axis=-2)
        folded = np.roll(folded, -(D % L), axis=-1)
        Y = np.fft.fft(folded, axis=-1)  # (rows, T, L)
        out[start : start + chunk] = np.swapaxes(Y, -1, -2) * derot
    return out.reshape(batch + (L, T))


# ---------------------------------------------------------------------------
# CP-OFDM baseline on the same half-bin-offset subcarrier grid


def ofdm_signal_length(T: int, L: int, cp_len: int) -> int:
    return T * (L + cp_len)


def ofdm_modulate(grid, L: int, cp_len: int) -> np.ndarray:
    """CP-OFDM with subcarriers at ``(k + 1/2)/L``.

    Because the tones are half-bin offset, each symbol is anti-periodic in
    ``L``; the channel still acts as a (twisted) circular convolution on the
    retained block, so bin k sees the gain at ``(k + 1/2)/L``.
    """
    X = np.asarray(grid)
    if cp_len < 0:
        raise ValueError("cp_len must be >= 0")
    if X.ndim < 2 or X.shape[-2] != L:
        raise ValueError(f"grid must have shape (..., {L}, T)")
    T = X.shape[-1]
    m = np.arange(-cp_len, L)
    x = np.fft.ifft(X, axis=-2, norm="ortho")  # (..., L, T), time index 0..L-1
    # the half-bin ramp makes the prefix the negated tail
    body = x[..., m % L, :] * np.exp(1j * np.pi * m / L)[:, None]
    return np.moveaxis(body, -1, -2).reshape(X.shape[:-2] + (T * (L + cp_len),))


def ofdm_demodulate(signal, L: int, cp_len: int, T: int) -> np.ndarray:
    if cp_len < 0:
        raise ValueError("cp_len must be >= 0")
    r = np.asarray(signal)
    need = ofdm_signal_length(T, L, cp_len)
    if r.shape[-1] < need:
        raise ValueError(f"signal too short: {r.shape[-1]} samples, need {need}")
    blocks = r[..., :need].reshape(r.shape[:-1] + (T, L + cp_len))[..., cp_len:]
    blocks = blocks * np.exp(-1j * np.pi * np.arange(L) / L)
    Y = np.fft.fft(blocks, axis=-1, norm="ortho")
    return np.swapaxes(Y, -1, -2)
