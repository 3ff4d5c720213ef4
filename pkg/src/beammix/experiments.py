"""Experiment runners: pure/mixed training, proportion sweeps, results I/O.

A run is fully determined by (config, master seed). Every random stream is
derived from the master seed through named domains, so reruns are
bit-identical:

    dataset generation   sample i of family f uses base(f) + i
    estimation noise     input j of a set uses base(set) + j
    mixing / shuffling   one derived seed per purpose
    init / SGD           one derived seed per training run

Evaluation draws estimation noise per *test set*, not per run, so every
model sees identical evaluation inputs. SNR enters evaluation as
sigma^2 = P * 10**(-SNR_dB / 10) with P fixed by the network config; the
beamformer itself does not depend on sigma^2, so one forward pass serves
the whole SNR grid.
"""

import json
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import mrt_rate
from .channel import estimate_channel
from .config import ExperimentConfig
from .data import (
    ChannelDataset,
    MixSpec,
    generate_dataset,
    largest_remainder_counts,
    mix_datasets,
)
from .net import (
    DegenerateBeamformerError,
    NetConfig,
    NetParams,
    TrainingDivergedError,
    TrainSchedule,
    _output_stage,
    encode_csi,
    forward,
    init_params,
    train,
)
from .theory import (
    HessianEstimate,
    c_of_q_rational,
    diagonalize_pair,
    expected_input_hessian,
    extra_loss_empirical,
    fit_scaling_law,
    lambda_matrix,
    sweep_q,
    u_shape_violations,
)

SCHEMA_VERSION = 1

# seed-derivation domains
_GEN_TRAIN = 1
_GEN_TEST = 2
_EST_TRAIN = 3
_EST_EVAL = 4
_MIX_TRAIN = 5
_MIX_TEST = 6
_INIT = 7
_SGD = 8
_MIX_THEORY = 9

_REFERENCE_TAG = 999


def derive_seed(master: int, domain: int, index: int = 0) -> int:
    """Deterministic 63-bit seed for a named stream."""
    seq = np.random.SeedSequence(entropy=(int(master), int(domain), int(index)))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> 1)


@dataclass(frozen=True)
class FamilyPools:
    train: ChannelDataset
    test: ChannelDataset


def build_family_pools(cfg: ExperimentConfig, master: int) -> dict[str, FamilyPools]:
    """Per-family train pool (n_total) and held-out test pool (n_eval)."""
    pools = {}
    for i, (fam, scene) in enumerate(cfg.scenes.items()):
        pools[fam] = FamilyPools(
            train=generate_dataset(
                scene, cfg.geometry, cfg.n_total, derive_seed(master, _GEN_TRAIN, i)
            ),
            test=generate_dataset(
                scene, cfg.geometry, cfg.n_eval, derive_seed(master, _GEN_TEST, i)
            ),
        )
    return pools


def mixed_test_set(cfg: ExperimentConfig, pools, master: int) -> ChannelDataset | None:
    """Half-mixed test set over the first two training families."""
    if len(cfg.train_families) < 2:
        return None
    fams = cfg.train_families[:2]
    sources = [pools[f].test for f in fams]
    spec = MixSpec(proportions=np.array([0.5, 0.5]), total_n=cfg.n_eval)
    return mix_datasets(sources, spec, derive_seed(master, _MIX_TEST, 0))


def estimate_reference_hessians(
    cfg: ExperimentConfig, pools, params: NetParams, master: int
) -> dict[str, HessianEstimate]:
    """Expected input Hessians per training family and for the half mix.

    Estimation draws from the full per-family sample pools (train + test,
    the same channel distribution) so the sample budget is not limited by
    the evaluation set size; the half-mixed estimation set stands in for
    the test mixture p*.
    """
    fams = cfg.train_families[:2]
    merged = {
        fam: ChannelDataset(samples=pools[fam].train.samples + pools[fam].test.samples)
        for fam in fams
    }
    hessians = {
        fam: expected_input_hessian(
            params, merged[fam], cfg.net, min(cfg.hessian_samples, merged[fam].n),
            cfg.fd_step,
        )
        for fam in fams
    }
    pool_n = min(d.n for d in merged.values())
    mixed = mix_datasets(
        [merged[f] for f in fams],
        MixSpec(proportions=np.array([0.5, 0.5]), total_n=pool_n),
        derive_seed(master, _MIX_THEORY, 0),
    )
    hessians["mixed"] = expected_input_hessian(
        params, mixed, cfg.net, min(cfg.hessian_samples, mixed.n), cfg.fd_step,
        dataset_id="mixed",
    )
    return hessians


def theory_ridge(cfg: ExperimentConfig, sigmas) -> float:
    """Spectral-floor regularizer: ridge_fraction of the mean diagonal."""
    mats = [s.matrix if isinstance(s, HessianEstimate) else np.asarray(s) for s in sigmas]
    d = mats[0].shape[0]
    return cfg.ridge_fraction * float(np.mean([abs(np.trace(m)) for m in mats])) / d


def make_training_pairs(dataset: ChannelDataset, pnr_db: float, est_base: int):
    """(noisy encoded CSI, true channel) pairs; input j uses est_base + j."""
    pairs = []
    for j, s in enumerate(dataset.samples):
        noisy = estimate_channel(s.h, pnr_db, est_base + j)
        pairs.append((encode_csi(noisy), s.h[None, :]))
    return pairs


def _stack_eval_inputs(dataset: ChannelDataset, pnr_db: float, est_base: int):
    x = np.stack(
        [
            encode_csi(estimate_channel(s.h, pnr_db, est_base + j))
            for j, s in enumerate(dataset.samples)
        ]
    )
    h = dataset.h_matrix()[:, None, :]
    return x, h


def _signal_and_interference(params: NetParams, x, h, config: NetConfig):
    """Eval-mode per-sample signal power and interference (independent of
    sigma^2, so one pass covers every SNR point)."""
    u, _ = forward(params, x, config, mode="eval")
    if u.ndim == 2:
        u = u[None]
    if config.unit_modulus:
        u = np.exp(1j * np.angle(u))
    # reuse the output stage at an arbitrary noise level, then strip it
    rates, ctx = _output_stage(u, h, config)
    sig = ctx["sig"]
    interference = ctx["denom"] - config.noise_var
    return sig, interference


@dataclass
class RunResult:
    """Machine-readable outcome of one experiment run."""

    kind: str
    seed: int
    train_families: list[str]
    proportions: list[float]
    n_train: int
    epochs: int
    mixture_counts: list[int]
    rates: list[dict] = field(default_factory=list)
    sweep_rows: list[dict] = field(default_factory=list)
    theory: dict | None = None
    scaling: dict | None = None
    final_train_loss: float | None = None
    wall_clock_s: float = 0.0
    # binary artifacts, not serialized into results.json
    checkpoint: tuple[NetConfig, NetParams] | None = None
    hessians: dict[str, HessianEstimate] = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "train_families": list(self.train_families),
            "proportions": [float(p) for p in self.proportions],
            "n_train": self.n_train,
            "epochs": self.epochs,
            "mixture_counts": [int(c) for c in self.mixture_counts],
            "final_train_loss": self.final_train_loss,
            "rates": self.rates,
            "sweep": self.sweep_rows,
            "theory": self.theory,
            "scaling": self.scaling,
            "wall_clock_s": self.wall_clock_s,
        }


def evaluate_model(
    params: NetParams,
    cfg: ExperimentConfig,
    test_sets: dict[str, ChannelDataset],
    master: int,
) -> tuple[list[dict], dict[str, float]]:
    """Average rate vs SNR per test set, with the MRT oracle curve.

    Returns (rate rows, per-set test loss at the training noise level).
    Every per-sample network rate is checked against the per-sample oracle
    rate; a violation would mean a power-constraint bug.
    """
    rows: list[dict] = []
    losses: dict[str, float] = {}
    p = cfg.net.power_p
    for set_index, (name, ds) in enumerate(test_sets.items()):
        est_base = derive_seed(master, _EST_EVAL, set_index)
        x, h = _stack_eval_inputs(ds, cfg.pnr_db, est_base)
        sig, interference = _signal_and_interference(params, x, h, cfg.net)
        h_energy = np.sum(np.abs(ds.h_matrix()) ** 2, axis=1)
        for snr_db in cfg.snr_grid_db:
            sigma2 = p * 10.0 ** (-snr_db / 10.0)
            net_rates = np.log2(1.0 + sig / (sigma2 + interference))[:, 0]
            oracle_rates = np.log2(1.0 + p * h_energy / sigma2)
            if np.any(net_rates > oracle_rates + 1e-9):
                raise RuntimeError(
                    f"network rate exceeds the MRT oracle on test set {name!r}"
                )
            rows.append(
                {
                    "test_set": name,
                    "snr_db": float(snr_db),
                    "avg_rate": float(net_rates.mean()),
                    "avg_oracle_rate": float(oracle_rates.mean()),
                    "ratio": float(net_rates.mean() / oracle_rates.mean()),
                }
            )
        train_sigma2 = cfg.net.noise_var
        losses[name] = float(
            -np.log2(1.0 + sig / (train_sigma2 + interference))[:, 0].mean()
        )
    return rows, losses


def _train_run(
    cfg: ExperimentConfig,
    pools,
    q: np.ndarray,
    master: int,
    run_tag: int,
    epochs: int | None = None,
):
    """Mix the training pools at q and run SGD; returns (params, history, counts)."""
    sources = [pools[f].train for f in cfg.train_families]
    spec = MixSpec(proportions=q, total_n=cfg.n_total)
    mixture = mix_datasets(sources, spec, derive_seed(master, _MIX_TRAIN, run_tag))
    counts = largest_remainder_counts(cfg.n_total, q)
    pairs = make_training_pairs(
        mixture, cfg.pnr_db, derive_seed(master, _EST_TRAIN, run_tag)
    )
    params0 = init_params(cfg.net, derive_seed(master, _INIT, run_tag))
    schedule = TrainSchedule(
        epochs=epochs if epochs is not None else cfg.train_epochs,
        batch_size=cfg.train_batch_size,
        learning_rate=cfg.train_learning_rate,
        seed=derive_seed(master, _SGD, run_tag),
    )
    params, history = train(params0, pairs, cfg.net, schedule)
    return params, history, counts


def run_mixed(
    cfg: ExperimentConfig, q, master_seed: int | None = None, kind: str = "mixed"
) -> RunResult:
    """Train on the q-mixture of the configured families and evaluate on
    every family's held-out set plus the half-mixed set."""
    master = cfg.master_seed if master_seed is None else master_seed
    q = np.asarray(q, dtype=np.float64)
    start = time.perf_counter()
    pools = build_family_pools(cfg, master)
    params, history, counts = _train_run(cfg, pools, q, master, run_tag=0)

    test_sets = {fam: pools[fam].test for fam in cfg.scenes}
    mixed = mixed_test_set(cfg, pools, master)
    if mixed is not None:
        test_sets["mixed"] = mixed
    rows, losses = evaluate_model(params, cfg, test_sets, master)

    return RunResult(
        kind=kind,
        seed=master,
        train_families=list(cfg.train_families),
        proportions=[float(v) for v in q],
        n_train=cfg.n_total,
        epochs=cfg.train_epochs,
        mixture_counts=[int(c) for c in counts],
        rates=rows,
        final_train_loss=history[-1],
        wall_clock_s=time.perf_counter() - start,
        checkpoint=(cfg.net, params),
        loss_history=history,
    )


def run_pure(
    cfg: ExperimentConfig,
    train_family: str,
    test_families=None,
    master_seed: int | None = None,
) -> RunResult:
    """Train on a single family (a one-hot mixture, so results coincide
    with run_mixed at the degenerate q) and evaluate everywhere."""
    if train_family not in cfg.train_families:
        raise ValueError(f"{train_family!r} is not one of the training families")
    q = np.array(
        [1.0 if f == train_family else 0.0 for f in cfg.train_families]
    )
    del test_families  # evaluation always covers every configured family
    return run_mixed(cfg, q, master_seed=master_seed, kind="pure")


def run_sweep(cfg: ExperimentConfig, master_seed: int | None = None) -> RunResult:
    """Proportion sweep with the theory overlay.

    Per grid point t: train on the (1-t, t) mixture of the first two
    training families and record the mixed-test average rate and loss.
    The Hessians are estimated once, at the half-mixed reference model,
    and C(q) is evaluated on the same grid in both the direct (trace) and
    rational (diagonalized) forms.
    """
    if len(cfg.train_families) < 2:
        raise ValueError("a sweep needs at least two training families")
    if len(cfg.q_grid) < 3:
        raise ValueError("q grid needs at least 3 points")
    master = cfg.master_seed if master_seed is None else master_seed
    start = time.perf_counter()
    fams = cfg.train_families[:2]
    pools = build_family_pools(cfg, master)
    mixed = mixed_test_set(cfg, pools, master)

    rates_per_q: list[float] = []
    losses_per_q: list[float] = []
    failures: list[dict] = []
    eval_cfg = replace(cfg, snr_grid_db=(cfg.sweep_eval_snr_db,))
    for i, t in enumerate(cfg.q_grid):
        q = np.array([1.0 - t, t])
        try:
            params, _, _ = _train_run(
                cfg, pools, q, master, run_tag=i, epochs=cfg.sweep_epochs
            )
            rows, losses = evaluate_model(params, eval_cfg, {"mixed": mixed}, master)
        except (TrainingDivergedError, DegenerateBeamformerError) as exc:
            failures.append({"q": float(t), "error": str(exc)})
            rates_per_q.append(float("nan"))
            losses_per_q.append(float("nan"))
            continue
        rates_per_q.append(rows[0]["avg_rate"])
        losses_per_q.append(losses["mixed"])

    # dedicated half-mixed reference run for the Hessians, independent of
    # the grid contents
    ref_params, _, _ = _train_run(
        cfg,
        pools,
        np.array([0.5, 0.5]),
        master,
        run_tag=_REFERENCE_TAG,
        epochs=cfg.sweep_epochs,
    )
    hessians = estimate_reference_hessians(cfg, pools, ref_params, master)
    sigma_star = hessians["mixed"]
    sigmas = [hessians[f] for f in fams]
    q_vectors = [np.array([1.0 - t, t]) for t in cfg.q_grid]
    curve = sweep_q(sigma_star, sigmas, q_grid=q_vectors, ridge=theory_ridge(cfg, sigmas))
    pair = diagonalize_pair(sigma_star, sigmas)
    lam = lambda_matrix(pair.d_star, pair.d_k)
    c_rational = []
    for qv in q_vectors:
        try:
            c_rational.append(c_of_q_rational(lam, qv))
        except ValueError:
            c_rational.append(float("nan"))
    losses_arr = np.asarray(losses_per_q)
    finite = np.isfinite(losses_arr)
    extra = np.full(losses_arr.shape, np.nan)
    if finite.any():
        extra[finite] = extra_loss_empirical(losses_arr[finite])

    sweep_rows = []
    for i, t in enumerate(cfg.q_grid):
        c_direct = float(curve.c_values[i])
        sweep_rows.append(
            {
                "q": float(t),
                "rate": float(rates_per_q[i]),
                "loss": float(losses_per_q[i]),
                "extra_loss": float(extra[i]),
                "C_direct": c_direct,
                "C_rational": float(c_rational[i]),
                "log_C": float(np.log(c_direct)) if c_direct > 0 else float("nan"),
            }
        )
    argmin_idx, violations = u_shape_violations(curve.c_values)
    rates_arr = np.asarray(rates_per_q)
    best_rate_idx = int(np.nanargmax(rates_arr)) if np.isfinite(rates_arr).any() else 0
    theory = {
        "argmin_c_q": float(cfg.q_grid[argmin_idx]),
        "argmax_rate_q": float(cfg.q_grid[best_rate_idx]),
        "u_shape_violations": violations,
        "failed_points": failures,
        "hessian_samples": cfg.hessian_samples,
        "fd_step": cfg.fd_step,
        "ridge": theory_ridge(cfg, sigmas),
        "reference_model_q": 0.5,
        "offdiag_frobenius": [float(x) for x in pair.offdiag_norms],
        "excluded_dimensions": [int(i) for i in lam.excluded],
    }
    return RunResult(
        kind="sweep",
        seed=master,
        train_families=list(fams),
        proportions=[0.5, 0.5],
        n_train=cfg.n_total,
        epochs=cfg.sweep_epochs,
        mixture_counts=[],
        sweep_rows=sweep_rows,
        theory=theory,
        wall_clock_s=time.perf_counter() - start,
        checkpoint=(cfg.net, ref_params),
        hessians=hessians,
    )


def run_scaling(cfg: ExperimentConfig, master_seed: int | None = None) -> RunResult:
    """Half-mixed training at several sample counts; log-log fit of the
    oracle-referenced extra loss against n.

    The attainable minimum loss in the extra-loss definition is unknown for
    self-supervised training; the mean oracle loss (negative MRT rate) of
    the test set is a strict lower bound and serves as the reference, which
    keeps every extra loss positive so the log-linear fit is well defined.
    """
    master = cfg.master_seed if master_seed is None else master_seed
    start = time.perf_counter()
    pools = build_family_pools(cfg, master)
    mixed = mixed_test_set(cfg, pools, master)
    if mixed is None:
        raise ValueError("scaling runs need two training families")
    q = np.array([0.5, 0.5])
    oracle_loss = -float(
        np.mean(
            [
                mrt_rate(s.h, cfg.net.power_p, cfg.net.noise_var)
                for s in mixed.samples
            ]
        )
    )
    rows = []
    extra_losses = []
    for i, n in enumerate(cfg.scaling_n_values):
        sub_cfg = replace(cfg, n_total=int(n))
        params, _, _ = _train_run(sub_cfg, pools, q, master, run_tag=200 + i)
        _, losses = evaluate_model(params, cfg, {"mixed": mixed}, master)
        extra = losses["mixed"] - oracle_loss
        rows.append(
            {"n": int(n), "test_loss": losses["mixed"], "extra_loss": float(extra)}
        )
        extra_losses.append(extra)
    fit = fit_scaling_law(list(cfg.scaling_n_values), extra_losses)
    return RunResult(
        kind="scaling",
        seed=master,
        train_families=list(cfg.train_families),
        proportions=[float(v) for v in q],
        n_train=max(cfg.scaling_n_values),
        epochs=cfg.train_epochs,
        mixture_counts=[],
        scaling={
            "oracle_loss": oracle_loss,
            "points": rows,
            "alpha": fit.alpha,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
        },
        wall_clock_s=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Emission


def _write_atomic(path: str, payload: bytes) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _csv_text(header: list[str], rows: list[list]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def emit_results(result: RunResult, out_dir) -> None:
    """Write results.json plus the CSV and binary artifacts of the run.

    All files are written atomically (temp + rename). Reruns with the same
    config and seed produce byte-identical output except the wall_clock_s
    field of results.json.
    """
    os.makedirs(out_dir, exist_ok=True)
    payload = json.dumps(result.to_json_dict(), indent=2) + "\n"
    _write_atomic(os.path.join(out_dir, "results.json"), payload.encode())

    if result.rates:
        header = ["test_set", "snr_db", "avg_rate", "avg_oracle_rate", "ratio"]
        rows = [[r[k] for k in header] for r in result.rates]
        _write_atomic(
            os.path.join(out_dir, "rates_vs_snr.csv"),
            _csv_text(header, rows).encode(),
        )
    if result.sweep_rows:
        header = ["q", "rate", "loss", "extra_loss", "C_direct", "C_rational", "log_C"]
        rows = [[r[k] for k in header] for r in result.sweep_rows]
        _write_atomic(
            os.path.join(out_dir, "sweep.csv"), _csv_text(header, rows).encode()
        )
    if result.loss_history:
        header = ["epoch", "train_loss"]
        rows = [[i, float(v)] for i, v in enumerate(result.loss_history)]
        _write_atomic(
            os.path.join(out_dir, "train_history.csv"),
            _csv_text(header, rows).encode(),
        )
    if result.checkpoint is not None:
        from .net import save_checkpoint

        net_cfg, params = result.checkpoint
        tmp = os.path.join(out_dir, "checkpoint.bnet.tmp")
        save_checkpoint(tmp, net_cfg, params)
        os.replace(tmp, os.path.join(out_dir, "checkpoint.bnet"))
    for name, est in result.hessians.items():
        from .theory import save_hessian

        tmp = os.path.join(out_dir, f"hessian_{name}.hess.tmp")
        save_hessian(tmp, est)
        os.replace(tmp, os.path.join(out_dir, f"hessian_{name}.hess"))
