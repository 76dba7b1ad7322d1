"""Power allocation: statistical heuristics and a real-coded genetic search.

The heuristics steer power with nothing but the large-scale gains. The
genetic algorithm optimizes the closed-form sum SE directly; its objective is
batched over the population, so one call scores all candidates.
"""

from dataclasses import dataclass

import numpy as np

from .closed_form import PowerAllocation, SECache, sum_se_batch


def heuristic_split(zeta, rho0, epsilon=1.2, exponent=0.5):
    """Per-AP power-splitting factors from the large-scale gains.

    Starting from a common factor rho0, each AP's split is nudged by how far
    its (root-mean) user gain sits from the network average; the step size
    omega = min(rho0, 1 - rho0) / epsilon keeps every factor inside (0, 1).
    APs with stronger average links put more power on the common message.
    """
    zeta = np.asarray(zeta, dtype=float)
    if not 0.0 <= rho0 <= 1.0:
        raise ValueError("rho0 must lie in [0, 1]")
    if epsilon <= 1.0:
        raise ValueError("epsilon must exceed 1 to keep the factors in bounds")
    zl = zeta.mean(axis=0) ** exponent
    dev = zl - zl.mean()
    m = np.max(np.abs(dev))
    if m == 0.0:
        return np.full(zeta.shape[1], float(rho0))
    omega = min(rho0, 1.0 - rho0) / epsilon
    return rho0 + omega * dev / m


def heuristic_control(zeta, exponent=0.25):
    """Private power-control coefficients from the large-scale gains.

    eta_kl grows with the user's average gain (stronger users get more of
    their share) and shrinks for APs whose average gain is high (which are
    already well heard). All entries land in (0, 1] and the best user at the
    weakest AP gets exactly 1.
    """
    zeta = np.asarray(zeta, dtype=float)
    if np.any(zeta <= 0):
        raise ValueError("zeta must be positive")
    zk = zeta.mean(axis=1) ** exponent
    zl = zeta.mean(axis=0) ** exponent
    return (zk / zk.max())[:, None] * (zl.min() / zl)[None, :]


@dataclass(frozen=True)
class GAConfig:
    pop_size: int = 50
    generations: int = 200
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    mutation_sigma: float = 0.08
    elitism: int = 2
    tournament: int = 3
    blend_alpha: float = 0.5


@dataclass(frozen=True)
class GAResult:
    x: np.ndarray
    value: float
    best_history: np.ndarray  # best-so-far fitness per generation (nondecreasing)
    mean_history: np.ndarray


def ga_optimize(objective, dim, ga_cfg: GAConfig, rng, bounds=(0.0, 1.0),
                init=None) -> GAResult:
    """Maximize a batched objective over a box with a real-coded GA.

    objective maps a (P, dim) population to (P,) fitness values. Tournament
    selection, blend crossover, Gaussian mutation clamped to the box, and
    elitism; with elites carried over unchanged the best-so-far trace never
    decreases. Optional init rows are injected into the initial population.
    """
    lo, hi = bounds
    P = ga_cfg.pop_size
    if P < max(2, ga_cfg.elitism + 1):
        raise ValueError("population too small")
    pop = rng.uniform(lo, hi, size=(P, dim))
    if init is not None:
        init = np.atleast_2d(np.asarray(init, dtype=float))
        take = min(len(init), P)
        pop[:take] = np.clip(init[:take], lo, hi)
    fit = np.asarray(objective(pop), dtype=float)
    best_hist = []
    mean_hist = []
    n_child = P - ga_cfg.elitism
    for _ in range(ga_cfg.generations):
        elite_idx = np.argsort(fit)[-ga_cfg.elitism:]
        elites, elite_fit = pop[elite_idx].copy(), fit[elite_idx].copy()

        cand = rng.integers(0, P, size=(2, n_child, ga_cfg.tournament))
        winners = cand[np.arange(2)[:, None, None], np.arange(n_child)[None, :, None],
                       np.argmax(fit[cand], axis=2)[:, :, None]][:, :, 0]
        pa, pb = pop[winners[0]], pop[winners[1]]
        u = rng.uniform(-ga_cfg.blend_alpha, 1.0 + ga_cfg.blend_alpha,
                        size=(n_child, dim))
        cross = rng.random(n_child) < ga_cfg.crossover_rate
        children = np.where(cross[:, None], pa + u * (pb - pa), pa)

        mutate = rng.random((n_child, dim)) < ga_cfg.mutation_rate
        children = children + mutate * rng.normal(0.0, ga_cfg.mutation_sigma,
                                                  size=(n_child, dim))
        children = np.clip(children, lo, hi)

        pop = np.concatenate([elites, children], axis=0)
        fit = np.concatenate([elite_fit, np.asarray(objective(children), dtype=float)])
        best_hist.append(fit.max())
        mean_hist.append(fit.mean())
    best = int(np.argmax(fit))
    return GAResult(x=pop[best].copy(), value=float(fit[best]),
                    best_history=np.maximum.accumulate(np.asarray(best_hist)),
                    mean_history=np.asarray(mean_hist))


# ---------------------------------------------------------------------------
# Closed-form objectives for the three searchable variable sets.
# ---------------------------------------------------------------------------

def optimize_rho(cache: SECache, eta, ga_cfg: GAConfig, rng, init=None) -> GAResult:
    """GA over the per-AP splitting factors with eta held fixed."""
    eta = np.asarray(eta, dtype=float)

    def objective(pop):
        return sum_se_batch(cache, pop, np.broadcast_to(eta, (len(pop),) + eta.shape))

    return ga_optimize(objective, eta.shape[1], ga_cfg, rng, init=init)


def optimize_eta(cache: SECache, rho, ga_cfg: GAConfig, rng, init=None) -> GAResult:
    """GA over the private power-control matrix with rho held fixed."""
    rho = np.asarray(rho, dtype=float)
    K = cache.p1.shape[0]
    L = rho.shape[0]

    def objective(pop):
        return sum_se_batch(cache, np.broadcast_to(rho, (len(pop), L)),
                            pop.reshape(len(pop), K, L))

    init_vecs = None if init is None else [np.asarray(e).ravel() for e in init]
    return ga_optimize(objective, K * L, ga_cfg, rng, init=init_vecs)


def optimize_joint(cache: SECache, ga_cfg: GAConfig, rng, init=None):
    """GA over rho and eta together. init takes PowerAllocation seeds.

    Returns (PowerAllocation, GAResult).
    """
    K = cache.p1.shape[0]
    L = cache.c1.shape[1]

    def objective(pop):
        return sum_se_batch(cache, pop[:, :L], pop[:, L:].reshape(len(pop), K, L))

    init_vecs = None if init is None else [a.to_vector() for a in init]
    res = ga_optimize(objective, L + K * L, ga_cfg, rng, init=init_vecs)
    return PowerAllocation.from_vector(res.x, K, L), res


def best_on_grid(cache: SECache, allocations):
    """Score a list of allocations on the cache; return (best_alloc, value, values)."""
    values = np.array([sum_se_batch(cache, a.rho[None], a.eta[None])[0]
                       for a in allocations])
    best = int(np.argmax(values))
    return allocations[best], float(values[best]), values
