"""Closed-form spectral efficiency of the rate-splitting downlink.

The downlink superimposes one common message, precoded at AP l by the sum of
that AP's channel estimates, on K private messages precoded by the individual
estimates (maximum-ratio). Treating the statistical mean of the effective
channel as the only channel knowledge at each user yields a use-and-then-
forget style lower bound whose SINRs depend on the channel statistics alone.

All user/AP coupling enters through a small set of per-(k, i, l) scalars that
are cached once per network, so re-evaluating the bound for a new power
allocation costs a handful of small einsums. That cache is what the
optimizers iterate on.
"""

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .estimation import EstimationStatistics, PilotAssignment
from .geometry import LinkStatistics

_REAL_TOL = 1e-10


class DegenerateStatisticsError(RuntimeError):
    """Raised when a normalization or SINR denominator is not positive."""


def _ensure_real(x, name):
    """Drop an imaginary part that must vanish analytically; the residue is
    checked against numerical roundoff."""
    x = np.asarray(x)
    scale = np.max(np.abs(x)) if x.size else 0.0
    resid = np.max(np.abs(x.imag)) if np.iscomplexobj(x) else 0.0
    if scale > 0 and resid > _REAL_TOL * scale:
        raise DegenerateStatisticsError(
            f"{name}: imaginary residue {resid:.3e} exceeds tolerance at scale {scale:.3e}")
    return x.real if np.iscomplexobj(x) else x


@dataclass(frozen=True)
class PowerAllocation:
    """Per-AP power split rho (fraction on the common message) and per-link
    private power-control coefficients eta, both inside [0, 1]."""

    rho: np.ndarray  # (L,)
    eta: np.ndarray  # (K, L)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        if rho.ndim != 1 or eta.ndim != 2 or eta.shape[1] != rho.shape[0]:
            raise ValueError("rho must be (L,) and eta (K, L)")
        if np.any(rho < 0) or np.any(rho > 1):
            raise ValueError("rho entries must lie in [0, 1]")
        if np.any(eta < 0) or np.any(eta > 1):
            raise ValueError("eta entries must lie in [0, 1]")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def equal_split(cls, K, L, rho0):
        return cls(rho=np.full(L, float(rho0)), eta=np.ones((K, L)))

    @classmethod
    def no_rs(cls, K, L):
        return cls(rho=np.zeros(L), eta=np.ones((K, L)))

    def to_vector(self):
        """Flatten to [rho (L entries), eta (K*L entries, row-major)]."""
        return np.concatenate([self.rho, self.eta.ravel()])

    @classmethod
    def from_vector(cls, vec, K, L):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (L + K * L,):
            raise ValueError(f"expected vector of length {L + K * L}")
        return cls(rho=vec[:L].copy(), eta=vec[L:].reshape(K, L).copy())


@dataclass(frozen=True)
class SEReport:
    sinr_common: np.ndarray   # (K,) common-message SINR at each user
    sinr_private: np.ndarray  # (K,)
    se_common: float          # prelog * log2(1 + min_k sinr_common)
    se_private: np.ndarray    # (K,) prelog * log2(1 + sinr_private)
    sum_se: float
    prelog: float


# ---------------------------------------------------------------------------
# Per-tuple moments of estimate/channel inner products. These are the slow,
# readable forms used by the validation suite; the cache below vectorizes the
# same algebra.
# ---------------------------------------------------------------------------

def closed_moments(k, i, l, stats: LinkStatistics, est: EstimationStatistics,
                   pilots: PilotAssignment):
    """First and second moments of g_kl^H ghat_il.

    Returns (first, second) where first = E{g_kl^H ghat_il} (complex) and
    second = E{|g_kl^H ghat_il|^2} (real).
    """
    hk = stats.hbar[k, l]
    hi = stats.hbar[i, l]
    a = hk.conj() @ hi
    copilot = pilots.pilot_of[k] == pilots.pilot_of[i]
    first = a + (np.trace(est.Qbar[k, i, l]) if copilot else 0.0)
    second = (np.abs(a) ** 2
              + (hi.conj() @ stats.R[k, l] @ hi).real
              + (hk.conj() @ est.Q[i, l] @ hk).real
              + np.trace(est.Q[i, l] @ stats.R[k, l]).real)
    if copilot:
        tq = np.trace(est.Qbar[k, i, l])
        second += np.abs(tq) ** 2 + 2.0 * (np.conj(a) * tq).real
    return first, float(second)


def upsilon_moments(k, i, j, l, stats: LinkStatistics, est: EstimationStatistics,
                    pilots: PilotAssignment):
    """Cross-moments that govern the common-precoder interference at user k.

    Returns (u4, u5) with
      u4 = E{(ghat_kl^H ghat_il)^* (ghat_kl^H ghat_jl)} and
      u5 = E{ghat_il^H C_kl ghat_jl},
    so that u4 + u5 = E{(g_kl^H ghat_il)^* (g_kl^H ghat_jl)}. The pilot
    sharing pattern of (k, i, j) decides which coupling terms survive.
    """
    hk = stats.hbar[k, l]
    hi = stats.hbar[i, l]
    hj = stats.hbar[j, l]
    a_i = hk.conj() @ hi
    a_j = hk.conj() @ hj
    ik = pilots.pilot_of[i] == pilots.pilot_of[k]
    jk = pilots.pilot_of[j] == pilots.pilot_of[k]
    ji = pilots.pilot_of[j] == pilots.pilot_of[i]
    u4 = np.conj(a_i) * a_j + hi.conj() @ est.Q[k, l] @ hj
    if ji:
        u4 += hk.conj() @ est.Qbar[i, j, l] @ hk
        u4 += np.trace(est.Qbar[i, j, l] @ est.Q[k, l])
    if ik:
        u4 += np.conj(np.trace(est.Qbar[k, i, l])) * a_j
    if jk:
        u4 += np.trace(est.Qbar[k, j, l]) * np.conj(a_i)
    if ik and jk:
        u4 += np.conj(np.trace(est.Qbar[k, i, l])) * np.trace(est.Qbar[k, j, l])
    u5 = hi.conj() @ est.C[k, l] @ hj
    if ji:
        u5 += np.trace(est.Qbar[i, j, l] @ est.C[k, l])
    return complex(u4), complex(u5)


def normalization_coeffs(stats: LinkStatistics, est: EstimationStatistics,
                         pilots: PilotAssignment):
    """Average-power normalizers of the two precoders.

    mu_c[l] = 1 / E{|| sum_i ghat_il ||^2} for the common precoder and
    mu_p[i, l] = 1 / E{|| ghat_il ||^2} for the private ones.
    """
    hbar = stats.hbar
    s = hbar.sum(axis=0)                                     # (L, N)
    common = np.einsum("ln,ln->l", s.conj(), s)              # ||sum_i hbar||^2
    trQbar = np.trace(est.Qbar, axis1=-2, axis2=-1)          # (K, K, L)
    common = common + trQbar.sum(axis=(0, 1))
    common = _ensure_real(common, "common normalizer")
    trQ = np.trace(est.Q, axis1=-2, axis2=-1)
    private = np.einsum("kln,kln->kl", hbar.conj(), hbar) + trQ
    private = _ensure_real(private, "private normalizer")
    if np.any(common <= 0) or np.any(private <= 0):
        raise DegenerateStatisticsError("precoder normalizer is not positive")
    return 1.0 / common, 1.0 / private


# ---------------------------------------------------------------------------
# Cached per-link scalars and the SINR assembly.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SECache:
    """Everything the closed-form bound needs, reduced to per-(k, i, l)
    scalars so that new allocations are cheap to score."""

    c1: np.ndarray       # (K, L) complex: coherent common gain at user k via AP l
    c2: np.ndarray       # (K, L) real: common-precoder variance seen by user k
    p1: np.ndarray       # (K, K, L) complex: coherent private gain of stream i at k
    p2: np.ndarray       # (K, K, L) real: private variance terms
    p3: np.ndarray       # (K, K, L) complex: line-of-sight-only coherent gain
    mu_c: np.ndarray     # (L,)
    mu_p: np.ndarray     # (K, L)
    copilot: np.ndarray  # (K, K) bool
    p_dl: float
    noise: float
    prelog: float


def build_cache(stats: LinkStatistics, est: EstimationStatistics,
                pilots: PilotAssignment, cfg: SystemConfig) -> SECache:
    hbar = stats.hbar
    copilot = pilots.copilot
    hdot = np.einsum("kln,iln->kil", hbar.conj(), hbar)            # hbar_kl^H hbar_il
    trQbar = np.trace(est.Qbar, axis1=-2, axis2=-1)                # (K, K, L)
    p1 = hdot + trQbar * copilot[:, :, None]
    c1 = p1.sum(axis=1)

    trQR = np.einsum("ilnm,klmn->kil", est.Q, stats.R, optimize=True)
    hQh = np.einsum("kln,ilnm,klm->kil", hbar.conj(), est.Q, hbar, optimize=True)
    hRh = np.einsum("iln,klnm,ilm->kil", hbar.conj(), stats.R, hbar, optimize=True)
    p2 = _ensure_real(trQR + hQh + hRh, "private variance terms")

    p3 = hdot

    # Common-precoder variance: pilot-coupled estimate cross-moments plus the
    # line-of-sight outer sum.
    trQbarR = np.einsum("ijlnm,klmn->kijl", est.Qbar, stats.R, optimize=True)
    hQbarh = np.einsum("kln,ijlnm,klm->kijl", hbar.conj(), est.Qbar, hbar, optimize=True)
    s = hbar.sum(axis=0)                                           # (L, N)
    sRs = np.einsum("ln,klnm,lm->kl", s.conj(), stats.R, s, optimize=True)
    c2 = _ensure_real((trQbarR + hQbarh).sum(axis=(1, 2)) + sRs,
                      "common variance terms")

    mu_c, mu_p = normalization_coeffs(stats, est, pilots)
    return SECache(c1=c1, c2=c2, p1=p1, p2=p2, p3=p3, mu_c=mu_c, mu_p=mu_p,
                   copilot=copilot, p_dl=cfg.p_dl_mw, noise=cfg.noise_mw,
                   prelog=cfg.prelog)


def _sinr_terms(cache: SECache, rho, eta):
    """Batched SINR assembly. rho is (P, L), eta is (P, K, L); returns
    (sinr_common, sinr_private), each (P, K)."""
    K = cache.p1.shape[0]
    a = np.sqrt(rho * cache.mu_c)                                  # (P, L)
    Tc1 = np.abs(np.einsum("pl,kl->pk", a, cache.c1)) ** 2
    Tc2 = np.einsum("pl,kl->pk", rho * cache.mu_c, cache.c2)

    w = (1.0 - rho)[:, None, :] * eta * cache.mu_p[None]           # (P, K, L)
    b = np.sqrt(w)
    Tp1 = np.abs(np.einsum("pil,kil->pki", b, cache.p1)) ** 2
    Tp2 = np.einsum("pil,kil->pki", w, cache.p2)
    Tp3 = np.abs(np.einsum("pil,kil->pki", b, cache.p3)) ** 2

    mask = cache.copilot[None]                                     # (1, K, K)
    inter = Tp2.sum(axis=2) + np.where(mask, Tp1, Tp3).sum(axis=2)  # (P, K)
    p_over_k = cache.p_dl / K
    den_c = cache.p_dl * Tc2 + p_over_k * inter + cache.noise
    if np.any(den_c <= 0):
        raise DegenerateStatisticsError("common SINR denominator is not positive")
    sinr_c = cache.p_dl * Tc1 / den_c

    own = Tp1[:, np.arange(K), np.arange(K)]
    den_p = p_over_k * (inter - own) + cache.noise
    if np.any(den_p <= 0):
        raise DegenerateStatisticsError("private SINR denominator is not positive")
    sinr_p = p_over_k * own / den_p
    return sinr_c, sinr_p


def evaluate_cache(cache: SECache, alloc: PowerAllocation) -> SEReport:
    sinr_c, sinr_p = _sinr_terms(cache, alloc.rho[None], alloc.eta[None])
    sinr_c, sinr_p = sinr_c[0], sinr_p[0]
    se_common = cache.prelog * np.log2(1.0 + sinr_c.min())
    se_private = cache.prelog * np.log2(1.0 + sinr_p)
    return SEReport(sinr_common=sinr_c, sinr_private=sinr_p,
                    se_common=float(se_common), se_private=se_private,
                    sum_se=float(se_common + se_private.sum()), prelog=cache.prelog)


def sum_se_batch(cache: SECache, rho, eta):
    """Sum spectral efficiency for a batch of allocations.

    rho has shape (P, L) and eta (P, K, L); returns (P,). Used as the
    vectorized objective by the optimizers.
    """
    sinr_c, sinr_p = _sinr_terms(cache, np.asarray(rho, dtype=float),
                                 np.asarray(eta, dtype=float))
    se = np.log2(1.0 + sinr_c.min(axis=1)) + np.log2(1.0 + sinr_p).sum(axis=1)
    return cache.prelog * se


def sum_se_closed(stats: LinkStatistics, est: EstimationStatistics,
                  pilots: PilotAssignment, cfg: SystemConfig,
                  alloc: PowerAllocation) -> SEReport:
    """Convenience wrapper: build the cache and score one allocation."""
    return evaluate_cache(build_cache(stats, est, pilots, cfg), alloc)


# ---------------------------------------------------------------------------
# Scalar special case: spatially uncorrelated scattering with aligned
# line-of-sight phases. Never touches matrix algebra.
# ---------------------------------------------------------------------------

def uncorrelated_cache(beta_los, beta_nlos, pilots: PilotAssignment,
                       cfg: SystemConfig) -> SECache:
    """Cache for R_kl = beta_nlos_kl I and phase-aligned LoS vectors, built
    from scalar formulas only."""
    beta_los = np.asarray(beta_los, dtype=float)
    beta_nlos = np.asarray(beta_nlos, dtype=float)
    K, L = beta_los.shape
    N = cfg.N
    ptau = cfg.p_pilot_mw * cfg.tau_p
    copilot = pilots.copilot

    denom = ptau * np.einsum("ki,il->kl", copilot.astype(float), beta_nlos) + cfg.noise_mw
    gamma = ptau * beta_nlos ** 2 / denom

    sqrt_los = np.sqrt(beta_los)
    sqrt_gam = np.sqrt(gamma)
    los_ki = N * sqrt_los[:, None, :] * sqrt_los[None, :, :]       # (K, K, L)
    gam_ki = N * sqrt_gam[:, None, :] * sqrt_gam[None, :, :]
    p1 = los_ki + gam_ki * copilot[:, :, None]
    c1 = p1.sum(axis=1)
    p2 = (N * beta_nlos[:, None, :] * gamma[None]
          + N * beta_los[:, None, :] * gamma[None]
          + N * beta_los[None] * beta_nlos[:, None, :])
    p3 = los_ki

    pair = np.einsum("ij,il,jl->l", copilot.astype(float), sqrt_gam, sqrt_gam)
    c2 = (N * pair[None, :] * (beta_nlos + beta_los)
          + N * beta_nlos * (sqrt_los.sum(axis=0)[None, :] ** 2))

    mu_c = 1.0 / c1.sum(axis=0).real
    mu_p = 1.0 / (N * beta_los + N * gamma)
    if np.any(mu_c <= 0) or np.any(mu_p <= 0):
        raise DegenerateStatisticsError("precoder normalizer is not positive")
    return SECache(c1=c1.astype(complex), c2=c2, p1=p1.astype(complex), p2=p2,
                   p3=p3.astype(complex), mu_c=mu_c, mu_p=mu_p, copilot=copilot,
                   p_dl=cfg.p_dl_mw, noise=cfg.noise_mw, prelog=cfg.prelog)


def sum_se_uncorrelated(beta_los, beta_nlos, pilots: PilotAssignment,
                        cfg: SystemConfig, alloc: PowerAllocation) -> SEReport:
    return evaluate_cache(uncorrelated_cache(beta_los, beta_nlos, pilots, cfg), alloc)
