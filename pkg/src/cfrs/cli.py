"""Command-line entry point.

Subcommands: run a config file, reproduce a figure-style sweep, train and
save the conditional optimizer, generate an allocation for an environment,
and validate the closed forms against their Monte Carlo estimators. Errors
print a single JSON object to stderr and exit nonzero so scripts can parse
failures.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .allocation import GAConfig
from .closed_form import PowerAllocation, sum_se_batch
from .config import SystemConfig
from .diffusion import (Environment, EpsNetwork, TrainConfig, build_expert_dataset,
                        load_checkpoint, make_schedule, reverse_sample,
                        save_checkpoint, train)
from .estimation import assign_pilots, estimation_statistics
from .experiments import (DIFFUSION_SYSTEM, FIGURE_PRESETS, ConfigError,
                          parse_config, run_experiment, training_envs)
from .geometry import draw_geometry, link_statistics
from .monte_carlo import mc_moment_estimators
from .rng import substream
from .scenario import EnvScenario


def _fail(message, code=1):
    print(json.dumps({"error": message}), file=sys.stderr)
    return code


def _cmd_run(args):
    spec = parse_config(args.config)
    if args.out_dir is not None:
        spec = replace(spec, out_dir=args.out_dir)
    files = run_experiment(spec)
    print(json.dumps({"written": files}))
    return 0


def _cmd_reproduce(args):
    preset = FIGURE_PRESETS.get(args.figure)
    if preset is None:
        raise ConfigError(f"unknown figure id {args.figure!r}; "
                          f"expected one of {', '.join(sorted(FIGURE_PRESETS))}")
    if args.out_dir is not None:
        preset = replace(preset, out_dir=args.out_dir)
    files = run_experiment(preset)
    print(json.dumps({"written": files}))
    return 0


def _cmd_train(args):
    system = DIFFUSION_SYSTEM
    scenario = EnvScenario(system, seed=args.seed)
    ga_cfg = GAConfig(pop_size=24, generations=60)
    dataset = build_expert_dataset(scenario, training_envs(), ga_cfg,
                                   substream(args.seed, "expert"))
    schedule = make_schedule()
    K, L = scenario.dims
    net = EpsNetwork(L + K * L, rng=substream(args.seed, "init"))
    net, losses = train(dataset, schedule,
                        TrainConfig(steps=args.steps, lr=args.lr),
                        substream(args.seed, "train"), net=net)
    os.makedirs(args.out_dir, exist_ok=True)
    ckpt = os.path.join(args.out_dir, "diffusion.npz")
    ds_path = os.path.join(args.out_dir, "expert_dataset.csv")
    save_checkpoint(ckpt, net, schedule)
    dataset.save_csv(ds_path)
    print(json.dumps({
        "written": [ckpt, ds_path],
        "steps": args.steps,
        "final_loss": float(np.mean(losses[-min(200, len(losses)):])),
        "expert_mean_sum_se": float(dataset.sum_se.mean()),
    }))
    return 0


def _cmd_infer(args):
    net, schedule = load_checkpoint(args.checkpoint)
    env = Environment(args.kappa_db, args.asd_deg)
    system = DIFFUSION_SYSTEM
    K, L = system.K, system.L
    dim = L + K * L
    if net.dim != dim:
        raise ConfigError(f"checkpoint dimension {net.dim} does not match the "
                          f"packaged system (L + K*L = {dim})")
    x = reverse_sample(net, schedule, env, dim, substream(args.seed, "infer"))
    alloc = PowerAllocation.from_vector(x, K, L)
    result = {
        "kappa_db": args.kappa_db,
        "asd_deg": args.asd_deg,
        "in_training_range": env.in_training_range(),
        "rho": [float(v) for v in alloc.rho],
        "eta": [[float(v) for v in row] for row in alloc.eta],
    }
    if args.evaluate:
        scenario = EnvScenario(system, seed=args.seed)
        cache = scenario.cache(env)
        result["sum_se"] = float(sum_se_batch(cache, alloc.rho[None], alloc.eta[None])[0])
    print(json.dumps(result))
    return 0


def _cmd_validate(args):
    cfg = SystemConfig(K=3, L=2, N=2, tau_p=2, seed=args.seed)
    geometry = draw_geometry(cfg, substream(args.seed, "geometry"))
    pilots = assign_pilots(cfg.K, cfg.tau_p, substream(args.seed, "pilots"))
    stats = link_statistics(cfg, geometry)
    est = estimation_statistics(stats, pilots, cfg)

    from .closed_form import closed_moments, normalization_coeffs, upsilon_moments
    checks = []
    rng = substream(args.seed, "mc")
    mu_c, mu_p = normalization_coeffs(stats, est, pilots)

    def check(name, closed, selector, tol):
        estimate, _ = mc_moment_estimators(stats, est, pilots, cfg, selector,
                                           args.draws, rng)
        rel = abs(estimate - closed) / max(abs(closed), 1e-300)
        checks.append({"name": name, "closed": _c2j(closed), "monte_carlo": _c2j(estimate),
                       "rel_err": float(rel), "tol": tol, "ok": bool(rel <= tol)})

    first, second = closed_moments(0, 1, 0, stats, est, pilots)
    check("first_moment[0,1,0]", first, ("first", 0, 1, 0), 0.01)
    check("second_moment[0,1,0]", second, ("second", 0, 1, 0), 0.02)
    u4, u5 = upsilon_moments(0, 1, 2, 0, stats, est, pilots)
    check("upsilon4[0,1,2,0]", u4, ("upsilon4", 0, 1, 2, 0), 0.02)
    check("upsilon5[0,1,2,0]", u5, ("upsilon5", 0, 1, 2, 0), 0.02)
    check("common_normalizer[0]", 1.0 / mu_c[0], ("common_norm", 0), 0.02)
    check("private_normalizer[0,0]", 1.0 / mu_p[0, 0], ("private_norm", 0, 0), 0.02)

    ok = all(c["ok"] for c in checks)
    print(json.dumps({"ok": ok, "draws": args.draws, "checks": checks}, indent=2))
    return 0 if ok else 3


def _c2j(value):
    value = complex(value)
    if value.imag == 0.0:
        return value.real
    return {"re": value.real, "im": value.imag}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cfrs",
        description="Rate-splitting cell-free massive MIMO simulator and optimizer")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment described by a config file")
    p_run.add_argument("config", help="path to a key = value config file")
    p_run.add_argument("--out-dir", default=None, help="override the output directory")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("reproduce", help="run a packaged figure-style sweep")
    p_rep.add_argument("figure", help="figure id, fig2 through fig9")
    p_rep.add_argument("--out-dir", default=None, help="override the output directory")
    p_rep.set_defaults(func=_cmd_reproduce)

    p_train = sub.add_parser("train", help="build the expert dataset and train the optimizer")
    p_train.add_argument("--steps", type=int, default=30000)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--seed", type=int, default=60)
    p_train.add_argument("--out-dir", default="results")
    p_train.set_defaults(func=_cmd_train)

    p_inf = sub.add_parser("infer", help="generate an allocation for an environment")
    p_inf.add_argument("--kappa-db", type=float, required=True)
    p_inf.add_argument("--asd-deg", type=float, required=True)
    p_inf.add_argument("--checkpoint", default="results/diffusion.npz")
    p_inf.add_argument("--seed", type=int, default=60)
    p_inf.add_argument("--evaluate", action="store_true",
                       help="also report the closed-form sum SE on the packaged drop")
    p_inf.set_defaults(func=_cmd_infer)

    p_val = sub.add_parser("validate", help="check closed-form moments against Monte Carlo")
    p_val.add_argument("--draws", type=int, default=200000)
    p_val.add_argument("--seed", type=int, default=7)
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(str(exc), code=2)
    except FileNotFoundError as exc:
        return _fail(f"file not found: {exc.filename}", code=2)
    except (ValueError, OSError) as exc:
        return _fail(str(exc), code=1)


if __name__ == "__main__":
    sys.exit(main())
