"""Godard-type blind single-tap equalizer for CMT subcarrier outputs."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

DIVERGENCE_LIMIT = 1e6


class EqualizerDivergedError(RuntimeError):
    pass


def godard_R(alphabet, p: int = 2) -> float:
    """Dispersion constant ``E|s|^(2p) / E|s|^p`` over a uniform alphabet."""
    a = np.abs(np.asarray(alphabet, dtype=float))
    if a.size == 0:
        raise ValueError("alphabet is empty")
    if not np.any(a):
        raise ValueError("alphabet is all zeros")
    if p < 1:
        raise ValueError("p must be >= 1")
    return float(np.mean(a ** (2 * p)) / np.mean(a**p))


@dataclass(frozen=True)
class GodardParams:
    R: float = 1.0
    p: int = 2
    mu: float = 1e-3
    num_iterations: int | None = None

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.num_iterations is not None and self.num_iterations < 1:
            raise ValueError("num_iterations must be positive")

    @classmethod
    def for_alphabet(cls, alphabet, p=2, **kw) -> "GodardParams":
        return cls(R=godard_R(alphabet, p), p=p, **kw)


def godard_cost(y, params: GodardParams) -> float:
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty sequence")
    return float(np.mean((np.abs(y) ** params.p - params.R) ** 2))


def godard_step(w: complex, u: complex, params: GodardParams, real_part: bool = True) -> complex:
    """One stochastic-gradient update of the tap ``w`` for input ``u``.

    With ``real_part`` the output is ``y = Re(w u)``, which is what a CMT
    receiver slices; the cost then penalizes the Gaussian-like quadrature
    leakage into the real part and pins the carrier phase up to a sign.
    Otherwise ``y = w u`` (classical CMA, phase-blind).
    """
    y = w * u
    if real_part:
        y = y.real
    mag = abs(y)
    if mag == 0:
        return w
    e = (mag**params.p - params.R) * mag ** (params.p - 2) * y
    return w - params.mu * e * np.conj(u)


@dataclass
class BlindEqualizerResult:
    taps: np.ndarray  # tap after each update, len(stream) + 1 entries
    outputs: np.ndarray  # equalizer output y(n) computed with the tap before update n
    costs: np.ndarray  # instantaneous (|y|^p - R)^2
    residual: float  # min over sign of |w g - (+-1)| (or 0 when no gain given)

    @property
    def final_tap(self) -> complex:
        return complex(self.taps[-1])


def run_blind_equalizer(
    stream,
    true_gain: complex | None,
    params: GodardParams,
    w0: complex = 1.0 + 0.0j,
    real_part: bool = True,
) -> BlindEqualizerResult:
    """Adapt a single complex tap over ``stream``.

    ``true_gain`` is only used to report the residual combined gain error.
    Raises :class:`EqualizerDivergedError` when ``|w|`` exceeds 1e6.
    """
    u = np.asarray(stream, dtype=complex)
    n = len(u) if params.num_iterations is None else min(len(u), params.num_iterations)
    taps = np.empty(n + 1, dtype=complex)
    outputs = np.empty(n, dtype=float if real_part else complex)
    costs = np.empty(n)
    w = complex(w0)
    taps[0] = w
    for i in range(n):
        y = w * u[i]
        y = y.real if real_part else y
        outputs[i] = y
        costs[i] = (abs(y) ** params.p - params.R) ** 2
        w = godard_step(w, u[i], params, real_part=real_part)
        if not np.isfinite(w) or abs(w) > DIVERGENCE_LIMIT:
            raise EqualizerDivergedError(f"tap diverged at iteration {i} (|w|={abs(w):.3g})")
        taps[i + 1] = w
    residual = 0.0
    if true_gain is not None:
        c = w * true_gain
        if real_part:
            residual = float(min(abs(c - 1), abs(c + 1)))
        else:
            # phase is unobservable for the complex criterion
            residual = float(abs(abs(c) - 1))
    return BlindEqualizerResult(taps, outputs, costs, residual)


def open_eye_metric(y, alphabet) -> float:
    """Mean distance from ``Re(y)`` to the nearest alphabet point."""
    a = np.sort(np.asarray(alphabet, dtype=float))
    yr = np.real(np.asarray(y))
    return float(np.mean(np.min(np.abs(yr[:, None] - a[None, :]), axis=1)))


def write_trajectory_csv(result: BlindEqualizerResult, path) -> None:
    """Columns: iteration, re, im, cost (cost is NaN for the initial tap)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "re", "im", "cost"])
        for i, tap in enumerate(result.taps):
            cost = result.costs[i - 1] if i > 0 else float("nan")
            w.writerow([i, f"{tap.real:.12g}", f"{tap.imag:.12g}", f"{cost:.12g}"])
