"""Command-line entry point.

Subcommands map one-to-one onto the experiment shapes:

    beammix generate --config cfg.txt --seed 7 --out runs/gen
    beammix train    --config cfg.txt --out runs/a      # mixture per config
    beammix eval     --config cfg.txt --out runs/a      # re-evaluate checkpoint
    beammix sweep    --config cfg.txt --out runs/sweep  # proportion sweep + theory
    beammix theory   --config cfg.txt --out runs/a      # Hessians + C(q) only
    beammix report   --out runs/sweep                   # human-readable summary

--seed overrides the first config seed; --config defaults to the built-in
desk-scale configuration (print it with `beammix report --show-config`).
"""

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, config_to_text, default_config, load_config
from .data import save_dataset
from .experiments import (
    RunResult,
    build_family_pools,
    emit_results,
    estimate_reference_hessians,
    evaluate_model,
    mixed_test_set,
    run_mixed,
    run_sweep,
    theory_ridge,
)
from .net import load_checkpoint
from .theory import (
    c_of_q_rational,
    diagonalize_pair,
    lambda_matrix,
    sweep_q,
    u_shape_violations,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="experiment config file")
    parser.add_argument("--seed", type=int, metavar="N", help="override the master seed")
    parser.add_argument("--out", metavar="DIR", default="out", help="output directory")


def _load_cfg(args):
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,) + tuple(cfg.seeds[1:]))
    return cfg


def _cmd_generate(args) -> int:
    cfg = _load_cfg(args)
    os.makedirs(args.out, exist_ok=True)
    pools = build_family_pools(cfg, cfg.master_seed)
    for fam, pool in pools.items():
        train_path = os.path.join(args.out, f"{fam}_train.chnl")
        test_path = os.path.join(args.out, f"{fam}_test.chnl")
        save_dataset(pool.train, train_path)
        save_dataset(pool.test, test_path)
        print(f"{fam}: {pool.train.n} train -> {train_path}, {pool.test.n} test -> {test_path}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    result = run_mixed(cfg, np.asarray(cfg.train_proportions))
    emit_results(result, args.out)
    print(f"trained on {dict(zip(cfg.train_families, result.mixture_counts))}")
    print(f"final train loss {result.final_train_loss:.4f}")
    _print_rate_rows(result.rates)
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    ckpt = os.path.join(args.out, "checkpoint.bnet")
    net_cfg, params = load_checkpoint(ckpt)
    cfg = replace(cfg, net=net_cfg)
    pools = build_family_pools(cfg, cfg.master_seed)
    test_sets = {fam: pools[fam].test for fam in cfg.scenes}
    mixed = mixed_test_set(cfg, pools, cfg.master_seed)
    if mixed is not None:
        test_sets["mixed"] = mixed
    rows, _ = evaluate_model(params, cfg, test_sets, cfg.master_seed)
    result = RunResult(
        kind="eval",
        seed=cfg.master_seed,
        train_families=list(cfg.train_families),
        proportions=list(cfg.train_proportions),
        n_train=0,
        epochs=0,
        mixture_counts=[],
        rates=rows,
    )
    emit_results(result, args.out)
    _print_rate_rows(rows)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    result = run_sweep(cfg)
    emit_results(result, args.out)
    t = result.theory
    print(f"theory argmin C(q) at q = {t['argmin_c_q']:.2f}; "
          f"empirical best rate at q = {t['argmax_rate_q']:.2f}")
    return 0


def _cmd_theory(args) -> int:
    """Hessians and the C(q) curve for an existing checkpoint (no training)."""
    cfg = _load_cfg(args)
    net_cfg, params = load_checkpoint(os.path.join(args.out, "checkpoint.bnet"))
    cfg = replace(cfg, net=net_cfg)
    master = cfg.master_seed
    if len(cfg.train_families) < 2:
        raise ConfigError("theory needs at least two training families")
    pools = build_family_pools(cfg, master)
    fams = cfg.train_families[:2]
    hessians = estimate_reference_hessians(cfg, pools, params, master)
    sigma_star = hessians["mixed"]
    sigmas = [hessians[f] for f in fams]
    q_vectors = [np.array([1.0 - t, t]) for t in cfg.q_grid]
    curve = sweep_q(sigma_star, sigmas, q_grid=q_vectors, ridge=theory_ridge(cfg, sigmas))
    pair = diagonalize_pair(sigma_star, sigmas)
    lam = lambda_matrix(pair.d_star, pair.d_k)
    rows = []
    for i, t in enumerate(cfg.q_grid):
        c_direct = float(curve.c_values[i])
        try:
            c_rat = float(c_of_q_rational(lam, q_vectors[i]))
        except ValueError:
            c_rat = float("nan")
        rows.append(
            {
                "q": float(t),
                "rate": float("nan"),
                "loss": float("nan"),
                "extra_loss": float("nan"),
                "C_direct": c_direct,
                "C_rational": c_rat,
                "log_C": float(np.log(c_direct)) if c_direct > 0 else float("nan"),
            }
        )
    argmin_idx, violations = u_shape_violations(curve.c_values)
    result = RunResult(
        kind="theory",
        seed=master,
        train_families=list(fams),
        proportions=list(cfg.train_proportions),
        n_train=0,
        epochs=0,
        mixture_counts=[],
        sweep_rows=rows,
        theory={
            "argmin_c_q": float(cfg.q_grid[argmin_idx]),
            "argmax_rate_q": None,
            "u_shape_violations": violations,
            "hessian_samples": cfg.hessian_samples,
            "fd_step": cfg.fd_step,
            "ridge": theory_ridge(cfg, sigmas),
            "reference_model_q": None,
            "offdiag_frobenius": [float(x) for x in pair.offdiag_norms],
            "excluded_dimensions": [int(i) for i in lam.excluded],
        },
        hessians=hessians,
    )
    emit_results(result, args.out)
    print(f"theory argmin C(q) at q = {cfg.q_grid[argmin_idx]:.2f} "
          f"(u-shape violations: {violations})")
    return 0


def _print_rate_rows(rows) -> None:
    for r in rows:
        print(
            f"  {r['test_set']:<12} SNR {r['snr_db']:>5.1f} dB  "
            f"rate {r['avg_rate']:.3f}  oracle {r['avg_oracle_rate']:.3f}  "
            f"ratio {r['ratio']:.3f}"
        )


def _cmd_report(args) -> int:
    if args.show_config:
        print(config_to_text(_load_cfg(args)), end="")
        return 0
    path = os.path.join(args.out, "results.json")
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    print(f"kind: {data['kind']}  seed: {data['seed']}")
    if data.get("mixture_counts"):
        counts = dict(zip(data["train_families"], data["mixture_counts"]))
        print(f"training mixture: {counts}")
    if data.get("final_train_loss") is not None:
        print(f"final train loss: {data['final_train_loss']:.4f}")
    if data.get("rates"):
        _print_rate_rows(data["rates"])
    if data.get("sweep"):
        print("  q      rate    loss    extra   C_direct   C_rational  log_C")
        for r in data["sweep"]:
            print(
                f"  {r['q']:<5.2f}  {r['rate']:<6.3f}  {r['loss']:<6.3f}  "
                f"{r['extra_loss']:<6.3f}  {r['C_direct']:<9.4g}  "
                f"{r['C_rational']:<10.4g}  {r['log_C']:.4g}"
            )
    if data.get("theory"):
        t = data["theory"]
        print(f"theory: argmin C at q = {t['argmin_c_q']}, "
              f"empirical argmax rate at q = {t.get('argmax_rate_q')}")
    if data.get("scaling"):
        s = data["scaling"]
        print(f"scaling fit: alpha = {s['alpha']:.4f}, R^2 = {s['r_squared']:.4f}")
    print(f"wall clock: {data['wall_clock_s']:.1f} s")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="beammix",
        description="Self-supervised beamforming workbench and data-mixing theory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, helptext in [
        ("generate", _cmd_generate, "materialize channel datasets"),
        ("train", _cmd_train, "train on the configured mixture and evaluate"),
        ("eval", _cmd_eval, "re-evaluate an existing checkpoint"),
        ("sweep", _cmd_sweep, "proportion sweep with the theory overlay"),
        ("theory", _cmd_theory, "Hessians and C(q) for an existing checkpoint"),
        ("report", _cmd_report, "summarize results.json"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name == "report":
            p.add_argument(
                "--show-config",
                action="store_true",
                help="print the effective config instead of a results summary",
            )
        p.set_defaults(func=fn)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
