"""Experiment orchestration: figure-style sweeps emitting CSV files.

Every experiment writes exactly one CSV (fixed column set per experiment id)
plus a JSON sidecar holding the fully resolved configuration and seed, so a
result file can always be traced back to the run that produced it. All
randomness flows from the single spec seed through named substreams; reruns
of the same spec are byte-identical. Geometry-indexed work items can be
dispatched to a process pool sized by the CFRS_WORKERS environment variable
without changing any output.
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .allocation import (GAConfig, best_on_grid, heuristic_control,
                         heuristic_split, optimize_eta, optimize_rho)
from .closed_form import PowerAllocation, build_cache, evaluate_cache, sum_se_batch
from .config import SystemConfig
from .diffusion import (Environment, EpsNetwork, TrainConfig, DiffusionTrainer,
                        build_expert_dataset, make_schedule, reverse_sample)
from .estimation import assign_pilots, estimation_statistics, perfect_csi_statistics
from .geometry import draw_geometry, link_statistics
from .monte_carlo import achievable_sum_se
from .rng import substream
from .scenario import EnvScenario

EXPERIMENT_IDS = ("cdf", "power_sweep", "rho_sweep_split", "rho_sweep_control",
                  "ap_sweep", "rician_sweep", "train_diffusion", "eval_dynamic")

# Small network used for the conditional-optimizer experiments. The
# statistical heuristics need an AP-rich drop to behave as designed, so this
# keeps eight access points while shrinking the antenna count.
DIFFUSION_SYSTEM = SystemConfig(K=4, L=8, N=2, tau_p=2, seed=60)
TRAIN_KAPPAS_DB = tuple(float(x) for x in np.arange(-10.0, 19.0, 4.0))
TRAIN_ASDS_DEG = tuple(float(x) for x in np.arange(5.0, 81.0, 15.0))
HELD_OUT_KAPPAS_DB = (-8.0, 0.0, 8.0, 16.0)
HELD_OUT_ASDS_DEG = (12.5, 42.5, 72.5)


class ConfigError(ValueError):
    """Raised for config-file syntax or constraint problems."""


def _default_rho_grid():
    return tuple(float(x) for x in np.linspace(0.0, 0.99, 21))


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str = "cdf"
    system: SystemConfig = field(default_factory=SystemConfig)
    seed: int = 1
    out_dir: str = "results"
    n_geometries: int = 50
    n_blocks: int = 10000
    rho_grid: tuple = field(default_factory=_default_rho_grid)
    power_grid_dbm: tuple = (3.0, 13.0, 23.0, 33.0, 43.0)
    ap_grid: tuple = (4, 8, 12, 16, 20)
    kappa_grid_db: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    ue_grid: tuple = (4, 6)
    ga_pop: int = 24
    ga_generations: int = 60
    train_steps: int = 30000
    train_lr: float = 1e-3

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_IDS:
            raise ConfigError(f"unknown experiment id {self.experiment!r}; "
                              f"expected one of {', '.join(EXPERIMENT_IDS)}")
        for name in ("n_geometries", "n_blocks", "ga_pop", "ga_generations", "train_steps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        for name in ("rho_grid", "power_grid_dbm", "ap_grid", "kappa_grid_db", "ue_grid"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must not be empty")
        if self.train_lr <= 0:
            raise ConfigError("train_lr must be positive")

    @property
    def ga_config(self):
        return GAConfig(pop_size=self.ga_pop, generations=self.ga_generations)


# -- config file handling -----------------------------------------------------

_SYSTEM_INT_KEYS = ("L", "K", "N", "tau_c", "tau_p", "N_c")
_SYSTEM_FLOAT_KEYS = ("area_side", "d_H", "asd_deg", "rician_db",
                      "p_pilot_dbm", "p_dl_dbm", "noise_dbm")
_SYSTEM_BOOL_KEYS = ("shadowing", "balanced_pilots")
_SPEC_INT_KEYS = ("seed", "n_geometries", "n_blocks", "ga_pop",
                  "ga_generations", "train_steps")
_SPEC_FLOAT_KEYS = ("train_lr",)
_SPEC_STR_KEYS = ("experiment", "out_dir")
_SPEC_FLOAT_GRID_KEYS = ("rho_grid", "power_grid_dbm", "kappa_grid_db")
_SPEC_INT_GRID_KEYS = ("ap_grid", "ue_grid")


def _parse_scalar(key, raw, lineno, kind):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            if raw.lower() in ("true", "false"):
                return raw.lower() == "true"
            raise ValueError
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse {key} = {raw!r} as {kind.__name__}")


def parse_config_text(text, path="<config>"):
    """Parse `key = value` lines into an ExperimentSpec.

    Blank lines and '#' comments are skipped; unknown keys and malformed
    values are rejected with the offending line number; field constraints are
    reported with the field name. An empty file yields the full defaults.
    """
    system_kwargs = {}
    spec_kwargs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}: line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if not raw:
            raise ConfigError(f"{path}: line {lineno}: empty value for {key!r}")
        if key in _SYSTEM_INT_KEYS:
            system_kwargs[key] = _parse_scalar(key, raw, lineno, int)
        elif key in _SYSTEM_FLOAT_KEYS:
            system_kwargs[key] = _parse_scalar(key, raw, lineno, float)
        elif key in _SYSTEM_BOOL_KEYS:
            system_kwargs[key] = _parse_scalar(key, raw, lineno, bool)
        elif key in _SPEC_INT_KEYS:
            spec_kwargs[key] = _parse_scalar(key, raw, lineno, int)
        elif key in _SPEC_FLOAT_KEYS:
            spec_kwargs[key] = _parse_scalar(key, raw, lineno, float)
        elif key in _SPEC_STR_KEYS:
            spec_kwargs[key] = raw
        elif key in _SPEC_FLOAT_GRID_KEYS:
            spec_kwargs[key] = tuple(_parse_scalar(key, p.strip(), lineno, float)
                                     for p in raw.split(",") if p.strip())
        elif key in _SPEC_INT_GRID_KEYS:
            spec_kwargs[key] = tuple(_parse_scalar(key, p.strip(), lineno, int)
                                     for p in raw.split(",") if p.strip())
        else:
            raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
    try:
        system = SystemConfig(**system_kwargs)
        return ExperimentSpec(system=system, **spec_kwargs)
    except ValueError as exc:  # constraint violations carry the field name
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(path) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), path=str(path))


def serialize_config(spec: ExperimentSpec) -> str:
    """Render a spec as config text; parse_config_text() restores it exactly."""
    lines = []
    for key in _SPEC_STR_KEYS:
        lines.append(f"{key} = {getattr(spec, key)}")
    for key in _SPEC_INT_KEYS + _SPEC_FLOAT_KEYS:
        lines.append(f"{key} = {getattr(spec, key)!r}")
    for key in _SPEC_FLOAT_GRID_KEYS + _SPEC_INT_GRID_KEYS:
        lines.append(f"{key} = {', '.join(repr(v) for v in getattr(spec, key))}")
    for key in _SYSTEM_INT_KEYS + _SYSTEM_FLOAT_KEYS:
        lines.append(f"{key} = {getattr(spec.system, key)!r}")
    for key in _SYSTEM_BOOL_KEYS:
        lines.append(f"{key} = {'true' if getattr(spec.system, key) else 'false'}")
    return "\n".join(lines) + "\n"


# -- shared plumbing ----------------------------------------------------------

def _pmap(fn, items):
    """Map fn over items, optionally on a process pool (CFRS_WORKERS).

    Results come back in input order and every item derives its own RNG
    substream, so the worker count never changes the output.
    """
    items = list(items)
    workers = int(os.environ.get("CFRS_WORKERS", "1"))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_report(spec: ExperimentSpec, columns, rows, extra_meta=None):
    os.makedirs(spec.out_dir, exist_ok=True)
    csv_path = os.path.join(spec.out_dir, f"{spec.experiment}.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    meta = {
        "experiment": spec.experiment,
        "seed": spec.seed,
        "system": asdict(spec.system),
        "parameters": {
            "n_geometries": spec.n_geometries,
            "n_blocks": spec.n_blocks,
            "rho_grid": list(spec.rho_grid),
            "power_grid_dbm": list(spec.power_grid_dbm),
            "ap_grid": list(spec.ap_grid),
            "kappa_grid_db": list(spec.kappa_grid_db),
            "ue_grid": list(spec.ue_grid),
            "ga_pop": spec.ga_pop,
            "ga_generations": spec.ga_generations,
            "train_steps": spec.train_steps,
            "train_lr": spec.train_lr,
        },
        "columns": list(columns),
        "rows": len(rows),
    }
    if extra_meta:
        meta.update(extra_meta)
    sidecar_path = csv_path + ".json"
    with open(sidecar_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [csv_path, sidecar_path]


def _geometry_pieces(cfg: SystemConfig, seed, tag, index):
    geometry = draw_geometry(cfg, substream(seed, tag, "geometry", str(index)))
    pilots = assign_pilots(cfg.K, cfg.tau_p, substream(seed, tag, "pilots", str(index)),
                           balanced=cfg.balanced_pilots)
    stats = link_statistics(cfg, geometry)
    est = estimation_statistics(stats, pilots, cfg)
    return geometry, pilots, stats, est


def _best_equal(cache, rho_grid, K, L):
    allocs = [PowerAllocation.equal_split(K, L, r) for r in rho_grid]
    return best_on_grid(cache, allocs)


def _best_heuristic(cache, zeta, rho_grid):
    eta = heuristic_control(zeta)
    allocs = [PowerAllocation(rho=heuristic_split(zeta, r), eta=eta) for r in rho_grid]
    return best_on_grid(cache, allocs)


# -- runners ------------------------------------------------------------------

def _cdf_item(args):
    spec, g = args
    cfg = spec.system
    _, pilots, stats, est = _geometry_pieces(cfg, spec.seed, "cdf", g)
    cache = build_cache(stats, est, pilots, cfg)
    K, L = cfg.K, cfg.L
    no_rs = PowerAllocation.no_rs(K, L)
    rs, _, _ = _best_equal(cache, spec.rho_grid, K, L)
    out = {}
    out["uatf_no_rs"] = evaluate_cache(cache, no_rs).sum_se
    out["uatf_rs"] = evaluate_cache(cache, rs).sum_se
    mc_rng = substream(spec.seed, "cdf", "mc", str(g))
    out["achievable_no_rs"] = achievable_sum_se(stats, est, pilots, cfg, no_rs,
                                                spec.n_blocks, mc_rng).sum_se
    out["achievable_rs"] = achievable_sum_se(stats, est, pilots, cfg, rs,
                                             spec.n_blocks, mc_rng).sum_se
    return out


def _run_cdf(spec):
    results = _pmap(_cdf_item, [(spec, g) for g in range(spec.n_geometries)])
    rows = []
    for g, out in enumerate(results):
        for variant in ("uatf_no_rs", "uatf_rs", "achievable_no_rs", "achievable_rs"):
            rows.append((g, variant, out[variant]))
    return ("geometry_id", "variant", "sum_se"), rows


def _power_item(args):
    spec, g = args
    cfg0 = spec.system
    K, L = cfg0.K, cfg0.L
    geometry, pilots, stats, _ = _geometry_pieces(cfg0, spec.seed, "power", g)
    out = {}
    for p_dbm in spec.power_grid_dbm:
        cfg = cfg0.with_overrides(p_dl_dbm=float(p_dbm))
        est_i = estimation_statistics(stats, pilots, cfg)
        est_p = perfect_csi_statistics(stats)
        for csi, est in (("imperfect", est_i), ("perfect", est_p)):
            cache = build_cache(stats, est, pilots, cfg)
            no_rs = PowerAllocation.no_rs(K, L)
            rs, _, _ = _best_equal(cache, spec.rho_grid, K, L)
            for variant, alloc in (("no_rs", no_rs), ("rs", rs)):
                rep = achievable_sum_se(stats, est, pilots, cfg, alloc,
                                        spec.n_blocks,
                                        substream(spec.seed, "power", "mc",
                                                  str(g), csi, variant, repr(float(p_dbm))),
                                        perfect_csi=(csi == "perfect"))
                out[(float(p_dbm), csi, variant)] = (
                    evaluate_cache(cache, alloc).sum_se, rep.sum_se, rep.stderr)
    return out


def _run_power_sweep(spec):
    results = _pmap(_power_item, [(spec, g) for g in range(spec.n_geometries)])
    rows = []
    for p_dbm in spec.power_grid_dbm:
        for csi in ("imperfect", "perfect"):
            for variant in ("no_rs", "rs"):
                key = (float(p_dbm), csi, variant)
                closed = np.mean([r[key][0] for r in results])
                ach = np.mean([r[key][1] for r in results])
                stderr = np.sqrt(np.mean([r[key][2] ** 2 for r in results])
                                 / len(results))
                rows.append((float(p_dbm), csi, variant, float(closed),
                             float(ach), float(stderr)))
    return ("p_dl_dbm", "csi", "variant", "sum_se_uatf",
            "sum_se_achievable", "achievable_stderr"), rows


def _split_item(args):
    spec, g = args
    out = {}
    for channel in ("rician", "rayleigh"):
        cfg = spec.system if channel == "rician" else \
            spec.system.with_overrides(rician_db=float("-inf"))
        _, pilots, stats, est = _geometry_pieces(cfg, spec.seed, f"split-{channel}", g)
        cache = build_cache(stats, est, pilots, cfg)
        K, L = cfg.K, cfg.L
        zeta = stats.zeta
        eta_equal = np.ones((K, L))
        equal_rhos = np.stack([np.full(L, r) for r in spec.rho_grid])
        heur_rhos = np.stack([heuristic_split(zeta, r) for r in spec.rho_grid])
        eta_batch = np.broadcast_to(eta_equal, (len(spec.rho_grid), K, L))
        out[(channel, "equal")] = sum_se_batch(cache, equal_rhos, eta_batch)
        out[(channel, "heuristic")] = sum_se_batch(cache, heur_rhos, eta_batch)
        init = [equal_rhos[int(np.argmax(out[(channel, "equal")]))],
                heur_rhos[int(np.argmax(out[(channel, "heuristic")]))]]
        res = optimize_rho(cache, eta_equal, spec.ga_config,
                           substream(spec.seed, f"split-{channel}", "ga", str(g)),
                           init=init)
        out[(channel, "ga")] = np.full(len(spec.rho_grid), res.value)
    return out


def _run_rho_sweep_split(spec):
    results = _pmap(_split_item, [(spec, g) for g in range(spec.n_geometries)])
    rows = []
    for channel in ("rician", "rayleigh"):
        for i, rho0 in enumerate(spec.rho_grid):
            for variant in ("equal", "heuristic", "ga"):
                mean = np.mean([r[(channel, variant)][i] for r in results])
                rows.append((channel, float(rho0), variant, float(mean)))
    return ("channel", "rho0", "variant", "sum_se"), rows


def _control_item(args):
    spec, g = args
    cfg = spec.system
    K, L = cfg.K, cfg.L
    _, pilots, stats, est = _geometry_pieces(cfg, spec.seed, "control", g)
    cache = build_cache(stats, est, pilots, cfg)
    eta_equal = np.ones((K, L))
    eta_heur = heuristic_control(stats.zeta)
    n = len(spec.rho_grid)
    rhos = np.stack([np.full(L, r) for r in spec.rho_grid])
    out = {
        "equal": sum_se_batch(cache, rhos, np.broadcast_to(eta_equal, (n, K, L))),
        "heuristic": sum_se_batch(cache, rhos, np.broadcast_to(eta_heur, (n, K, L))),
    }
    ga = np.empty(n)
    for i, rho0 in enumerate(spec.rho_grid):
        res = optimize_eta(cache, rhos[i], spec.ga_config,
                           substream(spec.seed, "control", "ga", str(g), repr(float(rho0))),
                           init=[eta_equal.ravel(), eta_heur.ravel()])
        ga[i] = res.value
    out["ga"] = ga
    return out


def _run_rho_sweep_control(spec):
    results = _pmap(_control_item, [(spec, g) for g in range(spec.n_geometries)])
    rows = []
    for i, rho0 in enumerate(spec.rho_grid):
        for variant in ("equal", "heuristic", "ga"):
            mean = np.mean([r[variant][i] for r in results])
            rows.append((float(rho0), variant, float(mean)))
    return ("rho0", "variant", "sum_se"), rows


def _ap_item(args):
    spec, n_aps, g = args
    cfg = spec.system.with_overrides(L=int(n_aps))
    _, pilots, stats, est = _geometry_pieces(cfg, spec.seed, f"ap-{n_aps}", g)
    cache = build_cache(stats, est, pilots, cfg)
    K, L = cfg.K, cfg.L
    no_rs = evaluate_cache(cache, PowerAllocation.no_rs(K, L)).sum_se
    _, rs, _ = _best_equal(cache, spec.rho_grid, K, L)
    _, rs_heur, _ = _best_heuristic(cache, stats.zeta, spec.rho_grid)
    return {"no_rs": no_rs, "rs": rs, "rs_heuristic": rs_heur}


def _run_ap_sweep(spec):
    items = [(spec, n_aps, g) for n_aps in spec.ap_grid
             for g in range(spec.n_geometries)]
    results = _pmap(_ap_item, items)
    rows = []
    for j, n_aps in enumerate(spec.ap_grid):
        chunk = results[j * spec.n_geometries:(j + 1) * spec.n_geometries]
        for variant in ("no_rs", "rs", "rs_heuristic"):
            rows.append((int(n_aps), variant,
                         float(np.mean([c[variant] for c in chunk]))))
    return ("n_aps", "variant", "sum_se"), rows


def _rician_item(args):
    spec, kappa_db, n_ues, g = args
    cfg = spec.system.with_overrides(K=int(n_ues), tau_p=max(1, int(n_ues) // 2),
                                     rician_db=float(kappa_db))
    _, pilots, stats, est = _geometry_pieces(cfg, spec.seed,
                                             f"rician-{n_ues}-{kappa_db}", g)
    cache = build_cache(stats, est, pilots, cfg)
    K, L = cfg.K, cfg.L
    no_rs = evaluate_cache(cache, PowerAllocation.no_rs(K, L)).sum_se
    _, rs, _ = _best_equal(cache, spec.rho_grid, K, L)
    return {"no_rs": no_rs, "rs": rs}


def _run_rician_sweep(spec):
    items = [(spec, kappa_db, n_ues, g) for kappa_db in spec.kappa_grid_db
             for n_ues in spec.ue_grid for g in range(spec.n_geometries)]
    results = _pmap(_rician_item, items)
    rows = []
    idx = 0
    for kappa_db in spec.kappa_grid_db:
        for n_ues in spec.ue_grid:
            chunk = results[idx:idx + spec.n_geometries]
            idx += spec.n_geometries
            for variant in ("no_rs", "rs"):
                rows.append((float(kappa_db), int(n_ues), variant,
                             float(np.mean([c[variant] for c in chunk]))))
    return ("kappa_db", "n_ues", "variant", "sum_se"), rows


def training_envs():
    return [Environment(k, a) for k in TRAIN_KAPPAS_DB for a in TRAIN_ASDS_DEG]


def held_out_envs():
    return [Environment(k, a) for k in HELD_OUT_KAPPAS_DB for a in HELD_OUT_ASDS_DEG]


def _diffusion_pieces(spec):
    scenario = EnvScenario(spec.system, seed=spec.seed)
    dataset = build_expert_dataset(scenario, training_envs(), spec.ga_config,
                                   substream(spec.seed, "expert"))
    return scenario, dataset


def _run_train_diffusion(spec):
    scenario, dataset = _diffusion_pieces(spec)
    K, L = scenario.dims
    dim = L + K * L
    schedule = make_schedule()
    net = EpsNetwork(dim, rng=substream(spec.seed, "init"))
    trainer = DiffusionTrainer(net, schedule, dataset,
                               TrainConfig(steps=spec.train_steps, lr=spec.train_lr),
                               substream(spec.seed, "train"))
    held = held_out_envs()
    caches = [scenario.cache(env) for env in held]
    eval_every = max(500, spec.train_steps // 40)
    rows = []
    done = 0
    while done < spec.train_steps:
        n = min(eval_every, spec.train_steps - done)
        trainer.run(n)
        done += n
        window = np.mean(trainer.loss_history[-min(200, done):])
        values = []
        for i, env in enumerate(held):
            x = reverse_sample(net, schedule, env, dim,
                               substream(spec.seed, "eval", str(done), str(i)))
            alloc = PowerAllocation.from_vector(x, K, L)
            values.append(sum_se_batch(caches[i], alloc.rho[None], alloc.eta[None])[0])
        rows.append((done, float(window), float(np.mean(values))))
    extra = {"expert_mean_sum_se": float(dataset.sum_se.mean())}
    return ("step", "loss_window_mean", "held_out_mean_sum_se"), rows, extra


def _run_eval_dynamic(spec):
    scenario, dataset = _diffusion_pieces(spec)
    K, L = scenario.dims
    dim = L + K * L
    schedule = make_schedule()
    net = EpsNetwork(dim, rng=substream(spec.seed, "init"))
    trainer = DiffusionTrainer(net, schedule, dataset,
                               TrainConfig(steps=spec.train_steps, lr=spec.train_lr),
                               substream(spec.seed, "train"))
    trainer.run(spec.train_steps)
    rows = []
    for i, env in enumerate(held_out_envs()):
        cache = scenario.cache(env)
        no_rs = scenario.no_rs_value(cache)
        _, heur, _ = scenario.best_heuristic(cache)
        x = reverse_sample(net, schedule, env, dim,
                           substream(spec.seed, "sample", str(i)))
        alloc = PowerAllocation.from_vector(x, K, L)
        diff = float(sum_se_batch(cache, alloc.rho[None], alloc.eta[None])[0])
        _, expert = scenario.expert(env, spec.ga_config,
                                    substream(spec.seed, "held-expert", str(i)),
                                    cache=cache, candidates=dataset.x0)
        for variant, value in (("no_rs", no_rs), ("heuristic", heur),
                               ("diffusion", diff), ("expert", expert)):
            rows.append((env.kappa_db, env.asd_deg, variant, float(value)))
    return ("env_kappa_db", "env_asd_deg", "variant", "sum_se"), rows


_RUNNERS = {
    "cdf": _run_cdf,
    "power_sweep": _run_power_sweep,
    "rho_sweep_split": _run_rho_sweep_split,
    "rho_sweep_control": _run_rho_sweep_control,
    "ap_sweep": _run_ap_sweep,
    "rician_sweep": _run_rician_sweep,
    "train_diffusion": _run_train_diffusion,
    "eval_dynamic": _run_eval_dynamic,
}

# reproduce <figure-id> presets: one spec per figure-style sweep
FIGURE_PRESETS = {
    "fig2": ExperimentSpec(experiment="cdf"),
    "fig3": ExperimentSpec(experiment="power_sweep", n_geometries=10, n_blocks=4000),
    "fig4": ExperimentSpec(experiment="rho_sweep_split", n_geometries=20),
    "fig5": ExperimentSpec(experiment="rho_sweep_control", n_geometries=10),
    "fig6": ExperimentSpec(experiment="ap_sweep", n_geometries=20),
    "fig7": ExperimentSpec(experiment="rician_sweep", n_geometries=20),
    "fig8": ExperimentSpec(experiment="train_diffusion", system=DIFFUSION_SYSTEM, seed=60),
    "fig9": ExperimentSpec(experiment="eval_dynamic", system=DIFFUSION_SYSTEM, seed=60),
}


def run_experiment(spec: ExperimentSpec):
    """Execute one experiment; returns the list of files written."""
    runner = _RUNNERS.get(spec.experiment)
    if runner is None:
        raise ConfigError(f"unknown experiment id {spec.experiment!r}")
    out = runner(spec)
    if len(out) == 3:
        columns, rows, extra = out
    else:
        columns, rows = out
        extra = None
    return _write_report(spec, columns, rows, extra_meta=extra)
