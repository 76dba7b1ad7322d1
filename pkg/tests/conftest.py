"""Shared fixtures.

The desk-scale configuration (two access points, three users, two antennas)
is small enough that closed-form and Monte Carlo quantities can be compared
in seconds, so most statistical tests run on it. Session scope lets the
module tests and the acceptance suite share the same statistics objects.
"""

import numpy as np
import pytest

from cfrs.closed_form import build_cache
from cfrs.config import SystemConfig
from cfrs.estimation import assign_pilots, estimation_statistics
from cfrs.geometry import draw_geometry, link_statistics
from cfrs.rng import substream


@pytest.fixture(scope="session")
def desk_cfg():
    return SystemConfig(L=2, K=3, N=2, tau_p=2, seed=7)


@pytest.fixture(scope="session")
def desk_pieces(desk_cfg):
    """(cfg, stats, est, pilots) on the desk-scale network."""
    geo = draw_geometry(desk_cfg, substream(desk_cfg.seed, "geometry"))
    stats = link_statistics(desk_cfg, geo)
    pilots = assign_pilots(desk_cfg.K, desk_cfg.tau_p,
                           substream(desk_cfg.seed, "pilots"))
    est = estimation_statistics(stats, pilots, desk_cfg)
    return desk_cfg, stats, est, pilots


@pytest.fixture(scope="session")
def desk_cache(desk_pieces):
    cfg, stats, est, pilots = desk_pieces
    return build_cache(stats, est, pilots, cfg)


@pytest.fixture(scope="session")
def full_pieces():
    """One network drop at the default full scale (20 APs, 4 users)."""
    cfg = SystemConfig(seed=3)
    geo = draw_geometry(cfg, substream(cfg.seed, "geometry"))
    stats = link_statistics(cfg, geo)
    pilots = assign_pilots(cfg.K, cfg.tau_p, substream(cfg.seed, "pilots"))
    est = estimation_statistics(stats, pilots, cfg)
    return cfg, stats, est, pilots


def random_allocation(K, L, rng):
    """In-bounds power allocation with no structure, for invariance checks."""
    from cfrs.closed_form import PowerAllocation

    return PowerAllocation(rho=rng.uniform(0.05, 0.95, size=L),
                           eta=rng.uniform(0.05, 1.0, size=(K, L)))
