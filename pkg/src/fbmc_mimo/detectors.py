"""Per-subcarrier linear multiuser detectors on the real-stacked model.

For one subcarrier the base station sees ``x = sum_l (s_l + j q_l) h_l + v``
with real PAM ``s`` and real ISI/ICI ``q``. Stacking real and imaginary parts
gives ``x~ = A [s; q] + v~`` with ``A = [H~ H^]``, ``h~ = [Re h; Im h]`` and
``h^ = [-Im h; Re h]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

COND_LIMIT = 1e12


class DegenerateUserError(ValueError):
    """A user's channel vector is identically zero."""


class SingularSystemError(LinAlgError):
    """The MMSE normal matrix is singular or too ill-conditioned to solve."""


@dataclass(frozen=True)
class StackedSystem:
    A: np.ndarray
    sigma_v2: float

    @property
    def num_antennas(self) -> int:
        return self.A.shape[0] // 2

    @property
    def num_users(self) -> int:
        return self.A.shape[1] // 2

    @property
    def H_tilde(self) -> np.ndarray:
        return self.A[:, : self.num_users]

    @property
    def H_breve(self) -> np.ndarray:
        return self.A[:, self.num_users :]

    @property
    def Gamma(self) -> np.ndarray:
        """First K rows of the 2K identity (selects the s part)."""
        K = self.num_users
        return np.eye(K, 2 * K)

    @property
    def D(self) -> np.ndarray:
        """Diagonal of squared stacked-channel norms, as a vector."""
        return np.sum(self.H_tilde**2, axis=0)


@dataclass(frozen=True)
class DetectorWeights:
    W: np.ndarray
    kind: str


def stack_real(H, sigma_v2: float = 0.0) -> StackedSystem:
    """Build ``A = [H~ H^]`` (2N x 2K) from complex gains ``H`` (N x K)."""
    H = np.asarray(H, dtype=complex)
    if H.ndim == 1:
        H = H[:, None]
    if H.ndim != 2 or 0 in H.shape:
        raise ValueError("H must be a nonempty N x K matrix")
    if sigma_v2 < 0:
        raise ValueError("sigma_v2 must be >= 0")
    dead = np.flatnonzero(~np.any(H != 0, axis=0))
    if dead.size:
        raise DegenerateUserError(f"users {dead.tolist()} have all-zero channels")
    Ht = np.vstack([H.real, H.imag])
    Hb = np.vstack([-H.imag, H.real])
    return StackedSystem(np.hstack([Ht, Hb]), float(sigma_v2))


def mf_weights(sys: StackedSystem) -> DetectorWeights:
    """Matched filter: column l is ``h~_l / ||h~_l||^2``."""
    return DetectorWeights(sys.H_tilde / sys.D, "MF")


def mf_as_simplified_mmse(sys: StackedSystem) -> DetectorWeights:
    """MMSE weights with the off-diagonal and noise terms dropped."""
    G = np.diag(np.diag(sys.A.T @ sys.A))
    return DetectorWeights(sys.A @ np.linalg.inv(G) @ sys.Gamma.T, "MF")


def mmse_weights(sys: StackedSystem) -> DetectorWeights:
    """``W_o = A (A^T A + sigma_v2 I)^-1 Gamma^T`` via a Cholesky solve."""
    K2 = sys.A.shape[1]
    G = sys.A.T @ sys.A + sys.sigma_v2 * np.eye(K2)
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystemError(
            f"A^T A + sigma_v2 I is singular or ill-conditioned (cond={cond:.3g}); "
            "duplicate users need sigma_v2 > 0"
        )
    try:
        factor = cho_factor(G)
    except LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    return DetectorWeights(sys.A @ cho_solve(factor, sys.Gamma.T), "MMSE")


def detect(w: DetectorWeights, x_stacked) -> np.ndarray:
    """``s_hat = W^T x~``; ``x_stacked`` may be a 2N vector or 2N x T block."""
    x = np.asarray(x_stacked, dtype=float)
    if x.shape[0] != w.W.shape[0]:
        raise ValueError(f"input has {x.shape[0]} rows, weights expect {w.W.shape[0]}")
    return w.W.T @ x


def _sinr_from_weights(W, sys: StackedSystem) -> np.ndarray:
    K = sys.num_users
    P_s = (W.T @ sys.H_tilde) ** 2  # [l, i] = (w_l^T h~_i)^2
    P_q = (W.T @ sys.H_breve) ** 2
    signal = np.diag(P_s)
    interference = P_s.sum(axis=1) - signal + P_q.sum(axis=1)
    noise = sys.sigma_v2 * np.sum(W**2, axis=0)
    denom = interference + noise
    with np.errstate(divide="ignore"):
        out = np.where(denom > 0, signal / np.where(denom > 0, denom, 1.0), np.inf)
    return out.reshape(K)


def sinr_mf_theory(sys: StackedSystem) -> np.ndarray:
    """Closed-form MF SINR per user (linear), unit-variance s and q."""
    Ht, Hb = sys.H_tilde, sys.H_breve
    D = sys.D
    if np.any(D == 0):
        raise DegenerateUserError("zero-norm user")
    C_s = (Ht.T @ Ht) ** 2
    C_q = (Ht.T @ Hb) ** 2
    cross = C_s.sum(axis=1) - np.diag(C_s) + C_q.sum(axis=1) - np.diag(C_q)
    denom = cross + sys.sigma_v2 * D
    with np.errstate(divide="ignore"):
        return np.where(denom > 0, D**2 / np.where(denom > 0, denom, 1.0), np.inf)


def sinr_mmse_theory(sys: StackedSystem, weights: DetectorWeights | None = None) -> np.ndarray:
    """Closed-form MMSE SINR per user; the own-q term counts as interference."""
    if weights is None:
        weights = mmse_weights(sys)
    return _sinr_from_weights(weights.W, sys)


# ---------------------------------------------------------------------------
# complex-valued counterparts for the OFDM baseline (x = H s + v)


def complex_mf_weights(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    norms = np.sum(np.abs(H) ** 2, axis=0)
    if np.any(norms == 0):
        raise DegenerateUserError("zero-norm user")
    return H / norms


def complex_mmse_weights(H, sigma2: float) -> np.ndarray:
    """Columns ``w_l`` such that ``s_hat = W^H x``."""
    H = np.asarray(H, dtype=complex)
    G = H.conj().T @ H + sigma2 * np.eye(H.shape[1])
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularSystemError(f"H^H H + sigma2 I is ill-conditioned (cond={cond:.3g})")
    return H @ np.linalg.inv(G)


def complex_sinr(W, H, sigma2: float) -> np.ndarray:
    """Per-user SINR of ``s_hat = W^H x`` for unit-power complex symbols."""
    P = np.abs(W.conj().T @ H) ** 2
    signal = np.diag(P)
    denom = P.sum(axis=1) - signal + sigma2 * np.sum(np.abs(W) ** 2, axis=0)
    with np.errstate(divide="ignore"):
        return np.where(denom > 0, signal / np.where(denom > 0, denom, 1.0), np.inf)
