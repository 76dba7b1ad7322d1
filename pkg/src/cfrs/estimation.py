"""Pilot assignment and MMSE channel estimation statistics.

Users sharing a pilot contaminate each other's estimates. With pilot power p
and pilot length tau_p, the estimate of link (k, l) is

    ghat_kl = hbar_kl + sqrt(p tau_p) R_kl Psi_kl (z_kl - zbar_kl),

where z_kl is the despread pilot observation (shared by all users on the same
pilot) and Psi_kl = (sum_{i in P_k} p tau_p R_il + sigma^2 I)^{-1}. The
estimation-error covariance is C_kl = R_kl - Q_kl with
Q_kl = p tau_p R_kl Psi_kl R_kl, and the cross-moment of two co-pilot
estimates is Qbar_kil = p tau_p R_il Psi_kl R_kl.
"""

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .geometry import LinkStatistics
from .rng import complex_normal


class EstimationError(RuntimeError):
    """Raised when the pilot observation covariance is not invertible."""


@dataclass(frozen=True)
class PilotAssignment:
    pilot_of: np.ndarray  # (K,) pilot index of each user, in [0, tau_p)
    tau_p: int

    @property
    def copilot(self):
        """(K, K) boolean matrix; entry (k, i) is True iff i shares k's pilot."""
        return self.pilot_of[:, None] == self.pilot_of[None, :]

    def copilot_set(self, k):
        return np.flatnonzero(self.pilot_of == self.pilot_of[k])


def assign_pilots(K, tau_p, rng, balanced=True) -> PilotAssignment:
    """Assign each of K users one of tau_p pilots.

    Balanced assignment spreads users as evenly as possible over the pilots
    (random grouping); unbalanced draws pilots independently at random.
    """
    if tau_p < 1:
        raise ValueError("tau_p must be positive")
    if balanced:
        order = rng.permutation(K)
        pilot_of = np.empty(K, dtype=int)
        pilot_of[order] = np.arange(K) % tau_p
    else:
        pilot_of = rng.integers(0, tau_p, size=K)
    return PilotAssignment(pilot_of=pilot_of, tau_p=tau_p)


@dataclass(frozen=True)
class EstimationStatistics:
    Psi: np.ndarray   # (K, L, N, N) inverse pilot-observation covariances
    Q: np.ndarray     # (K, L, N, N) estimate covariances
    C: np.ndarray     # (K, L, N, N) error covariances, R - Q
    Qbar: np.ndarray  # (K, K, L, N, N) co-pilot estimate cross-moments; zero off pilot group


def estimation_statistics(stats: LinkStatistics, pilots: PilotAssignment,
                          cfg: SystemConfig) -> EstimationStatistics:
    """Second-order statistics of the MMSE channel estimates for all links."""
    K, L, N = stats.K, stats.L, stats.N
    ptau = cfg.p_pilot_mw * cfg.tau_p
    eye = np.eye(N)
    # One observation covariance per (pilot, AP); users on the same pilot share it.
    Psi = np.empty((K, L, N, N), dtype=complex)
    per_pilot = {}
    for t in np.unique(pilots.pilot_of):
        members = np.flatnonzero(pilots.pilot_of == t)
        S = ptau * stats.R[members].sum(axis=0) + cfg.noise_mw * eye  # (L, N, N)
        try:
            per_pilot[t] = np.linalg.inv(S)
        except np.linalg.LinAlgError as exc:
            raise EstimationError(f"pilot {t}: observation covariance is singular") from exc
        Psi[members] = per_pilot[t][None]
    PsiR = np.einsum("klab,klbc->klac", Psi, stats.R)
    copilot = pilots.copilot
    Qbar = np.einsum("ilab,klbc->kilac", stats.R, PsiR) * ptau
    Qbar = Qbar * copilot[:, :, None, None, None]
    Q = Qbar[np.arange(K), np.arange(K)]  # Qbar_kkl == Q_kl by construction
    C = stats.R - Q
    return EstimationStatistics(Psi=Psi, Q=Q, C=C, Qbar=Qbar)


def perfect_csi_statistics(stats: LinkStatistics) -> EstimationStatistics:
    """Statistics of an oracle estimator that returns the true channel.

    Q = R and C = 0, and estimates of different users are uncorrelated, so the
    cross-moment tensor is diagonal. Keeps the downstream code path identical.
    """
    K, L, N = stats.K, stats.L, stats.N
    Qbar = np.zeros((K, K, L, N, N), dtype=complex)
    Qbar[np.arange(K), np.arange(K)] = stats.R
    return EstimationStatistics(
        Psi=np.zeros((K, L, N, N), dtype=complex),
        Q=stats.R.copy(),
        C=np.zeros((K, L, N, N), dtype=complex),
        Qbar=Qbar,
    )


def estimate_channel(g, stats: LinkStatistics, est: EstimationStatistics,
                     pilots: PilotAssignment, cfg: SystemConfig, rng):
    """Run the pilot phase for one channel realization.

    g has shape (K, L, N). Returns (ghat, gtilde) with ghat + gtilde = g.
    The despread pilot noise is drawn per (pilot, AP) and shared by all users
    on that pilot, which is what correlates co-pilot estimation errors.
    """
    ptau = cfg.p_pilot_mw * cfg.tau_p
    scattered = g - stats.hbar                       # (K, L, N)
    noise = complex_normal(rng, (pilots.tau_p, stats.L, stats.N)) * np.sqrt(cfg.noise_mw)
    indicator = (np.arange(pilots.tau_p)[:, None] == pilots.pilot_of[None, :]).astype(float)
    innovation = np.sqrt(ptau) * np.einsum("ti,iln->tln", indicator, scattered) + noise
    B = np.sqrt(ptau) * np.einsum("klab,klbc->klac", stats.R, est.Psi)
    ghat = stats.hbar + np.einsum("klab,klb->kla", B, innovation[pilots.pilot_of])
    return ghat, g - ghat
