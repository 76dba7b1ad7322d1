"""One network drop evaluated across propagation environments.

The geometry (positions, large-scale gains, scattering-cluster angles) and
the pilot assignment are frozen from the seed; the Rician factor and angular
spread can then be swept without redrawing anything, which is what the
environment-adaptive optimizer trains and evaluates on.
"""

import numpy as np

from .allocation import (GAConfig, best_on_grid, heuristic_control,
                         heuristic_split, optimize_joint)
from .closed_form import (PowerAllocation, build_cache, evaluate_cache,
                          sum_se_batch)
from .config import SystemConfig
from .estimation import assign_pilots, estimation_statistics
from .geometry import draw_geometry, link_statistics
from .rng import substream

DEFAULT_RHO_GRID = np.linspace(0.0, 0.99, 21)


class EnvScenario:
    def __init__(self, cfg: SystemConfig, seed=None):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else seed
        self.geometry = draw_geometry(cfg, substream(self.seed, "geometry"))
        self.pilots = assign_pilots(cfg.K, cfg.tau_p, substream(self.seed, "pilots"),
                                    balanced=cfg.balanced_pilots)

    @property
    def zeta(self):
        return self.geometry.zeta

    @property
    def dims(self):
        return self.cfg.K, self.cfg.L

    def statistics(self, env=None):
        kwargs = {}
        if env is not None:
            kwargs = {"rician_db": env.kappa_db, "asd_deg": env.asd_deg}
        return link_statistics(self.cfg, self.geometry, **kwargs)

    def cache(self, env=None):
        stats = self.statistics(env)
        est = estimation_statistics(stats, self.pilots, self.cfg)
        return build_cache(stats, est, self.pilots, self.cfg)

    # -- baseline allocations ------------------------------------------------

    def no_rs_value(self, cache):
        K, L = self.dims
        return evaluate_cache(cache, PowerAllocation.no_rs(K, L)).sum_se

    def best_equal_split(self, cache, rho_grid=DEFAULT_RHO_GRID):
        K, L = self.dims
        allocs = [PowerAllocation.equal_split(K, L, r) for r in rho_grid]
        return best_on_grid(cache, allocs)

    def best_heuristic(self, cache, rho_grid=DEFAULT_RHO_GRID):
        """Heuristic splitting swept over the initial factor, joined with the
        heuristic power control; best grid point by the closed-form value."""
        K, L = self.dims
        eta = heuristic_control(self.zeta)
        allocs = [PowerAllocation(rho=heuristic_split(self.zeta, r), eta=eta)
                  for r in rho_grid]
        return best_on_grid(cache, allocs)

    def expert(self, env, ga_cfg: GAConfig, rng, rho_grid=DEFAULT_RHO_GRID,
               cache=None, candidates=None):
        """Genetic joint optimization seeded with the statistical baselines.

        candidates, if given, is a pool of allocation vectors (rows of length
        L + K*L) screened after the GA run; the better of the two wins. Pass
        a cross-screened training set here so that held-out references are
        held to the same standard as the stored experts.

        Returns (PowerAllocation, closed-form sum SE)."""
        K, L = self.dims
        if cache is None:
            cache = self.cache(env)
        heur, _, _ = self.best_heuristic(cache, rho_grid)
        equal, _, _ = self.best_equal_split(cache, rho_grid)
        alloc, res = optimize_joint(cache, ga_cfg, rng, init=[heur, equal])
        best, value = alloc, res.value
        if candidates is not None and len(candidates):
            cand = np.asarray(candidates, dtype=float)
            vals = sum_se_batch(cache, cand[:, :L], cand[:, L:].reshape(len(cand), K, L))
            j = int(np.argmax(vals))
            if vals[j] > value:
                best = PowerAllocation.from_vector(cand[j], K, L)
                value = float(vals[j])
        return best, value


def verify_dataset(dataset, scenario: EnvScenario, tol=1e-10):
    """Re-score every expert vector on its environment's cache and compare to
    the stored value. Guards against loading a dataset into the wrong
    scenario. Raises ValueError on mismatch."""
    from .closed_form import sum_se_batch
    from .diffusion import Environment

    K, L = scenario.dims
    for m in range(len(dataset)):
        env = Environment(float(dataset.kappa_db[m]), float(dataset.asd_deg[m]))
        cache = scenario.cache(env)
        alloc = PowerAllocation.from_vector(dataset.x0[m], K, L)
        value = sum_se_batch(cache, alloc.rho[None], alloc.eta[None])[0]
        if not np.isclose(value, dataset.sum_se[m], rtol=tol, atol=tol):
            raise ValueError(
                f"record {m}: stored value {dataset.sum_se[m]!r} does not match "
                f"recomputed {value!r}")
