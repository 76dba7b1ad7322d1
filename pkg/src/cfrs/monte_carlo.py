"""Monte Carlo evaluation of the rate-splitting downlink.

Draws coherence blocks (channel, pilot noise, estimates), forms the common
and private precoders, and evaluates either the per-block achievable rates
(successive decoding of the common message, then the private one) or the
sample-moment version of the statistical lower bound. Also hosts the sample
estimators of every closed-form moment used by the validation suite.
"""

from dataclasses import dataclass

import numpy as np

from .closed_form import PowerAllocation, normalization_coeffs
from .config import SystemConfig
from .estimation import (EstimationStatistics, PilotAssignment,
                         perfect_csi_statistics)
from .geometry import LinkStatistics, hermitian_sqrt
from .rng import complex_normal

_CHUNK_ENTRY_BUDGET = 4_000_000


class ChannelSampler:
    """Vectorized per-block sampler of channels and their MMSE estimates.

    The pilot noise of a coherence block is drawn once per (pilot, AP) and
    shared by every user on that pilot, which reproduces the estimation-error
    correlation between co-pilot users.
    """

    def __init__(self, stats: LinkStatistics, est: EstimationStatistics,
                 pilots: PilotAssignment, cfg: SystemConfig, perfect_csi=False):
        self.stats = stats
        self.est = est
        self.pilots = pilots
        self.cfg = cfg
        self.perfect_csi = perfect_csi
        self.Rhalf = hermitian_sqrt(stats.R)
        ptau = cfg.p_pilot_mw * cfg.tau_p
        self.Bmat = np.sqrt(ptau) * np.einsum("klab,klbc->klac", stats.R, est.Psi)
        self.indicator = (np.arange(pilots.tau_p)[:, None]
                          == pilots.pilot_of[None, :]).astype(float)
        self.mu_c, self.mu_p = normalization_coeffs(stats, est, pilots)

    def draw(self, n, rng):
        """Return (g, ghat), each of shape (n, K, L, N)."""
        stats, cfg = self.stats, self.cfg
        w = complex_normal(rng, (n, stats.K, stats.L, stats.N))
        scattered = np.einsum("klnm,bklm->bkln", self.Rhalf, w)
        g = stats.hbar[None] + scattered
        if self.perfect_csi:
            return g, g
        ptau = cfg.p_pilot_mw * cfg.tau_p
        noise = complex_normal(rng, (n, self.pilots.tau_p, stats.L, stats.N))
        innovation = (np.sqrt(ptau)
                      * np.einsum("ti,biln->btln", self.indicator, scattered)
                      + np.sqrt(cfg.noise_mw) * noise)
        innovation = innovation[:, self.pilots.pilot_of]            # (n, K, L, N)
        ghat = stats.hbar[None] + np.einsum("klxy,bkly->bklx", self.Bmat, innovation)
        return g, ghat

    def chunk_size(self, requested):
        per_block = self.stats.K ** 2 * self.stats.L * self.stats.N
        return max(1, min(requested, _CHUNK_ENTRY_BUDGET // max(per_block, 1)))


def build_precoders(ghat, mu_c, mu_p):
    """Average-power-normalized precoders from estimates of shape (..., K, L, N).

    Returns (v_c, v_p): the common precoder sqrt(mu_c) sum_i ghat_il of shape
    (..., L, N) and the private ones sqrt(mu_p) ghat_il of shape (..., K, L, N).
    """
    v_c = np.sqrt(mu_c)[:, None] * ghat.sum(axis=-3)
    v_p = np.sqrt(mu_p)[:, :, None] * ghat
    return v_c, v_p


def instantaneous_sinrs(ghat, v_c, v_p, C, alloc: PowerAllocation, cfg: SystemConfig):
    """Per-block SINRs of the common and private messages at every user.

    Each user decodes the common message first (all private streams are
    noise), strips it, then decodes its own private stream. Estimation-error
    power enters through the error covariances C. Leading axes of ghat are
    batch axes; returns (sinr_c, sinr_p) of shape (..., K).
    """
    K = ghat.shape[-3]
    p_d = cfg.p_dl_mw
    rho = alloc.rho
    w = (1.0 - rho)[None, :] * alloc.eta                            # (K, L)
    sw = np.sqrt(w)

    a_c = np.einsum("...kln,...ln->...kl", ghat.conj(), v_c)
    m = np.einsum("...kln,...iln->...kil", ghat.conj(), v_p, optimize=True)
    Cv_c = np.einsum("klnm,...lm->...kln", C, v_c, optimize=True)
    cc = np.einsum("...ln,...kln->...kl", v_c.conj(), Cv_c).real
    Cv_p = np.einsum("klnm,...ilm->...kiln", C, v_p, optimize=True)
    cp = np.einsum("...iln,...kiln->...kil", v_p.conj(), Cv_p).real

    s_c = np.einsum("l,...kl->...k", np.sqrt(rho), a_c)
    s_p = np.einsum("il,...kil->...ki", sw, m)                      # (..., K, K)
    coh = np.abs(s_p) ** 2
    err_c = np.einsum("l,...kl->...k", rho, cc)
    err_p = np.einsum("il,...kil->...k", w, cp)

    num_c = p_d * np.abs(s_c) ** 2
    den_c = p_d * err_c + (p_d / K) * (coh.sum(axis=-1) + err_p) + cfg.noise_mw
    sinr_c = num_c / den_c

    own = coh[..., np.arange(K), np.arange(K)]
    den_p = (p_d / K) * (coh.sum(axis=-1) - own + err_p) + cfg.noise_mw
    sinr_p = (p_d / K) * own / den_p
    return sinr_c, sinr_p


@dataclass(frozen=True)
class AchievableReport:
    sum_se: float
    stderr: float             # standard error of the sum estimate
    se_common: float          # mean common-message SE (limited by the worst user)
    se_private: np.ndarray    # (K,) mean private SEs
    n_blocks: int
    prelog: float


def achievable_sum_se(stats: LinkStatistics, est: EstimationStatistics,
                      pilots: PilotAssignment, cfg: SystemConfig,
                      alloc: PowerAllocation, n_blocks, rng,
                      perfect_csi=False, chunk=2048) -> AchievableReport:
    """Ergodic achievable sum SE averaged over sampled coherence blocks."""
    if n_blocks < 2:
        raise ValueError("n_blocks must be at least 2")
    if perfect_csi:
        est = perfect_csi_statistics(stats)
    sampler = ChannelSampler(stats, est, pilots, cfg, perfect_csi=perfect_csi)
    chunk = sampler.chunk_size(chunk)
    se_c_sum = 0.0
    se_p_sum = np.zeros(stats.K)
    done = 0
    totals = []
    while done < n_blocks:
        n = min(chunk, n_blocks - done)
        _, ghat = sampler.draw(n, rng)
        v_c, v_p = build_precoders(ghat, sampler.mu_c, sampler.mu_p)
        sinr_c, sinr_p = instantaneous_sinrs(ghat, v_c, v_p, est.C, alloc, cfg)
        se_c = np.log2(1.0 + sinr_c.min(axis=-1))
        se_p = np.log2(1.0 + sinr_p)
        se_c_sum += se_c.sum()
        se_p_sum += se_p.sum(axis=0)
        totals.append(se_c + se_p.sum(axis=-1))
        done += n
    total = np.concatenate(totals)
    prelog = cfg.prelog
    stderr = prelog * total.std(ddof=1) / np.sqrt(n_blocks)
    return AchievableReport(
        sum_se=float(prelog * total.mean()),
        stderr=float(stderr),
        se_common=float(prelog * se_c_sum / n_blocks),
        se_private=prelog * se_p_sum / n_blocks,
        n_blocks=n_blocks,
        prelog=prelog,
    )


def mc_uatf_sinrs(stats: LinkStatistics, est: EstimationStatistics,
                  pilots: PilotAssignment, cfg: SystemConfig,
                  alloc: PowerAllocation, n_draws, rng,
                  perfect_csi=False, chunk=4096):
    """Sample-moment assembly of the statistical SINR lower bounds.

    Estimates the mean and mean-square of the effective common and private
    channels over n_draws blocks and assembles them exactly as the
    closed-form bound does. Returns (sinr_c, sinr_p), each (K,).
    """
    if perfect_csi:
        est = perfect_csi_statistics(stats)
    sampler = ChannelSampler(stats, est, pilots, cfg, perfect_csi=perfect_csi)
    chunk = sampler.chunk_size(chunk)
    K = stats.K
    sqrho = np.sqrt(alloc.rho)
    sw = np.sqrt((1.0 - alloc.rho)[None, :] * alloc.eta)
    mean_c = np.zeros(K, dtype=complex)
    msq_c = np.zeros(K)
    mean_p = np.zeros(K, dtype=complex)
    msq_p = np.zeros((K, K))
    done = 0
    while done < n_draws:
        n = min(chunk, n_draws - done)
        g, ghat = sampler.draw(n, rng)
        v_c, v_p = build_precoders(ghat, sampler.mu_c, sampler.mu_p)
        rec_c = np.einsum("l,bkln,bln->bk", sqrho, g.conj(), v_c, optimize=True)
        rec_p = np.einsum("il,bkln,biln->bki", sw, g.conj(), v_p, optimize=True)
        mean_c += rec_c.sum(axis=0)
        msq_c += (np.abs(rec_c) ** 2).sum(axis=0)
        mean_p += rec_p[:, np.arange(K), np.arange(K)].sum(axis=0)
        msq_p += (np.abs(rec_p) ** 2).sum(axis=0)
        done += n
    mean_c /= n_draws
    msq_c /= n_draws
    mean_p /= n_draws
    msq_p /= n_draws
    p_d = cfg.p_dl_mw
    var_c = msq_c - np.abs(mean_c) ** 2
    den_c = p_d * var_c + (p_d / K) * msq_p.sum(axis=1) + cfg.noise_mw
    sinr_c = p_d * np.abs(mean_c) ** 2 / den_c
    own = np.abs(mean_p) ** 2
    den_p = (p_d / K) * (msq_p.sum(axis=1) - own) + cfg.noise_mw
    sinr_p = (p_d / K) * own / den_p
    return sinr_c, sinr_p


def expected_tx_power(alloc: PowerAllocation, cfg: SystemConfig):
    """Analytic per-AP average transmit power, shape (L,)."""
    return cfg.p_dl_mw * (alloc.rho
                          + (1.0 - alloc.rho) * alloc.eta.sum(axis=0) / alloc.eta.shape[0])


def mc_moment_estimators(stats: LinkStatistics, est: EstimationStatistics,
                         pilots: PilotAssignment, cfg: SystemConfig,
                         selector, n_draws, rng, alloc: PowerAllocation = None,
                         chunk=8192):
    """Sample estimator of one closed-form moment.

    selector is a tuple naming the quantity and its indices:
      ("first", k, i, l)           E{g_kl^H ghat_il}
      ("second", k, i, l)          E{|g_kl^H ghat_il|^2}
      ("upsilon3", k, i, j, l)     E{(g_kl^H ghat_il)^* (g_kl^H ghat_jl)}
      ("upsilon4", k, i, j, l)     E{(ghat_kl^H ghat_il)^* (ghat_kl^H ghat_jl)}
      ("upsilon5", k, i, j, l)     E{ghat_il^H C_kl ghat_jl}
      ("common_norm", l)           E{|| sum_i ghat_il ||^2}
      ("private_norm", i, l)       E{|| ghat_il ||^2}
      ("tx_power", l)              E{|| x_l ||^2} with fresh data symbols (needs alloc)

    Returns (estimate, stderr); the estimate is complex for the moments that
    are complex-valued.
    """
    name, *idx = selector
    if name == "tx_power" and alloc is None:
        raise ValueError("tx_power selector requires an allocation")
    sampler = ChannelSampler(stats, est, pilots, cfg)
    chunk = sampler.chunk_size(chunk)
    samples = []
    done = 0
    while done < n_draws:
        n = min(chunk, n_draws - done)
        g, ghat = sampler.draw(n, rng)
        if name == "first":
            k, i, l = idx
            vals = np.einsum("bn,bn->b", g[:, k, l].conj(), ghat[:, i, l])
        elif name == "second":
            k, i, l = idx
            vals = np.abs(np.einsum("bn,bn->b", g[:, k, l].conj(), ghat[:, i, l])) ** 2
        elif name == "upsilon3":
            k, i, j, l = idx
            xi = np.einsum("bn,bn->b", g[:, k, l].conj(), ghat[:, i, l])
            xj = np.einsum("bn,bn->b", g[:, k, l].conj(), ghat[:, j, l])
            vals = xi.conj() * xj
        elif name == "upsilon4":
            k, i, j, l = idx
            xi = np.einsum("bn,bn->b", ghat[:, k, l].conj(), ghat[:, i, l])
            xj = np.einsum("bn,bn->b", ghat[:, k, l].conj(), ghat[:, j, l])
            vals = xi.conj() * xj
        elif name == "upsilon5":
            k, i, j, l = idx
            vals = np.einsum("bn,nm,bm->b", ghat[:, i, l].conj(), est.C[k, l],
                             ghat[:, j, l])
        elif name == "common_norm":
            (l,) = idx
            s = ghat[:, :, l].sum(axis=1)
            vals = np.einsum("bn,bn->b", s.conj(), s).real
        elif name == "private_norm":
            i, l = idx
            vals = np.einsum("bn,bn->b", ghat[:, i, l].conj(), ghat[:, i, l]).real
        elif name == "tx_power":
            (l,) = idx
            v_c, v_p = build_precoders(ghat, sampler.mu_c, sampler.mu_p)
            s_c = complex_normal(rng, (n,))
            s_i = complex_normal(rng, (n, stats.K))
            amp_c = np.sqrt(cfg.p_dl_mw * alloc.rho[l])
            amp_p = np.sqrt(cfg.p_dl_mw * (1.0 - alloc.rho[l]) * alloc.eta[:, l]
                            / stats.K)
            x = (amp_c * v_c[:, l] * s_c[:, None]
                 + np.einsum("i,bin,bi->bn", amp_p, v_p[:, :, l], s_i))
            vals = np.einsum("bn,bn->b", x.conj(), x).real
        else:
            raise ValueError(f"unknown selector {name!r}")
        samples.append(vals)
        done += n
    samples = np.concatenate(samples)
    mean = samples.mean()
    if np.iscomplexobj(samples):
        var = samples.real.var(ddof=1) + samples.imag.var(ddof=1)
    else:
        var = samples.var(ddof=1)
        mean = float(mean)
    return mean, float(np.sqrt(var / n_draws))
