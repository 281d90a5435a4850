"""Experiment drivers behind the CLI subcommands.

Every driver writes its artifacts plus ``summary.json`` into an output
directory and returns an exit code: 0 success, 1 usage/config error,
2 non-convergence or failed verdict.
"""

from __future__ import annotations

import dataclasses
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import analysis as an
from .. import geometry as geo
from ..neural import NeuralAutoencoder, init_mlp, load_checkpoint, save_checkpoint, train
from ..oracle import OracleAutoencoder, build_oracle, verify_oracle
from . import artifacts, plotting
from .config import ExperimentConfig

CONVERGENCE_THRESHOLD = 0.05


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    return out


def sample_points(cfg: ExperimentConfig, seed: int | None = None) -> geo.PointSet:
    s = cfg.sampling_seed if seed is None else seed
    if cfg.n_points is not None:
        return geo.sample_uniform(cfg.manifold, cfg.n_points, s)
    return geo.sample_per_component(cfg.manifold, cfg.n_per_component, s)


def _analysis(model, cfg: ExperimentConfig, slack: float):
    a = cfg.analysis
    pts = geo.sample_uniform(cfg.manifold, a.n_samples, a.seed)
    return an.analyze(model, cfg.manifold, pts, a.epsilon_grid, a.sup_grid, a.refine_iters, slack)


def cmd_sample(cfg: ExperimentConfig, outdir, seed: int | None = None) -> int:
    t0 = time.perf_counter()
    out = _outdir(outdir)
    pts = sample_points(cfg, seed)
    pts.to_csv(out / "points.csv")
    plotting.projections(out / "points.svg", pts.coords, pts.component_id, "Sampled points")
    counts = np.bincount(pts.component_id, minlength=len(cfg.manifold)).tolist()
    artifacts.write_json(out / "summary.json", artifacts.summary(
        "sample", cfg.config_hash(), time.perf_counter() - t0,
        n_points=len(pts), per_component_counts=counts,
        total_measure=geo.total_measure(cfg.manifold)))
    return 0


def train_and_report(cfg: ExperimentConfig, outdir, command: str = "train",
                     verbose: bool = False) -> tuple[int, dict]:
    """Train one autoencoder, analyse it and write the full artifact set."""
    t0 = time.perf_counter()
    out = _outdir(outdir)
    seed = cfg.training.seed
    pts = sample_points(cfg)
    enc = init_mlp(cfg.encoder_widths, cfg.encoder_activations, [seed, 0])
    dec = init_mlp(cfg.decoder_widths, cfg.decoder_activations, [seed, 1])
    enc, dec, history = train(enc, dec, pts, cfg.training, log_every=100 if verbose else 0)
    model = NeuralAutoencoder(enc, dec, history)

    X = pts.coords
    U = model.encode(X)
    X_hat = model.decode(U)
    pts.to_csv(out / "original.csv")
    err = artifacts.write_decoded_csv(out / "decoded.csv", pts.component_id, X, X_hat)
    artifacts.write_bottleneck_csv(out / "bottleneck.csv", pts.component_id, U)
    artifacts.write_history_csv(out / "loss_history.csv", history)
    save_checkpoint(enc, out / "encoder.json")
    save_checkpoint(dec, out / "decoder.json")

    report = _analysis(model, cfg, cfg.analysis.slack)
    artifacts.write_json(out / "analysis.json", report.to_dict())

    plotting.projections(out / "original.svg", X, pts.component_id, "Original data", lines=True)
    plotting.projections(out / "decoded.svg", X_hat, pts.component_id, "Decoded data")
    plotting.bottleneck(out / "bottleneck.svg", U, pts.component_id)
    plotting.loss_curve(out / "loss.svg", history)

    final_loss = history[-1] if history else float("nan")
    converged = bool(history) and final_loss <= CONVERGENCE_THRESHOLD
    overlap = an.latent_overlap_fraction(U, pts.component_id) if U.shape[1] == 1 else None
    fields = dict(
        seed=seed,
        n_points=len(pts),
        final_loss=final_loss,
        converged=converged,
        mean_reconstruction_error=float(err.mean()),
        fraction_error_below_0_1=float((err < 0.1).mean()),
        bottleneck_overlap_fraction=overlap,
        sup_error_estimate=report.sup_error_estimate,
        reach=report.reach,
        bound_satisfied=report.bound_satisfied,
    )
    artifacts.write_json(out / "summary.json", artifacts.summary(
        command, cfg.config_hash(), time.perf_counter() - t0, **fields))
    return (0 if converged else 2), fields


def cmd_train(cfg: ExperimentConfig, outdir, verbose=False) -> int:
    return train_and_report(cfg, outdir, verbose=verbose)[0]


def cmd_reproduce_circles(seed: int, outdir, epochs: int | None = None, verbose=False) -> int:
    from .config import circles_config

    training = {"seed": seed}
    if epochs is not None:
        training["epochs"] = epochs
    cfg = circles_config(**training)
    cfg = dataclasses.replace(cfg, sampling_seed=seed)
    return train_and_report(cfg, outdir, command="reproduce-circles", verbose=verbose)[0]


def _protected_points(cfg: ExperimentConfig) -> np.ndarray:
    o = cfg.oracle
    S = [np.asarray(p, dtype=np.float64) for p in o.protected_points]
    if o.n_random_protected:
        S += list(geo.sample_uniform(cfg.manifold, o.n_random_protected, o.protected_seed).coords)
    return np.asarray(S, dtype=np.float64).reshape(-1, 3)


def cmd_oracle(cfg: ExperimentConfig, outdir) -> int:
    t0 = time.perf_counter()
    out = _outdir(outdir)
    if cfg.oracle is None:
        raise ValueError("config has no oracle section")
    oa = build_oracle(cfg.manifold, cfg.oracle.delta, _protected_points(cfg))
    oa.save(out / "oracle.json")
    rep = verify_oracle(oa, cfg.oracle.n_samples, cfg.oracle.seed)
    report = _analysis(oa, cfg, cfg.oracle.slack)
    artifacts.write_json(out / "analysis.json", report.to_dict())
    ok = rep.ok and report.bound_satisfied
    fields = dataclasses.asdict(rep)
    fields.update(sup_error_estimate=report.sup_error_estimate,
                  bound_satisfied=report.bound_satisfied, invariants_hold=ok)
    artifacts.write_json(out / "summary.json", artifacts.summary(
        "oracle", cfg.config_hash(), time.perf_counter() - t0, **fields))
    return 0 if ok else 2


def cmd_analyze(cfg: ExperimentConfig, outdir, model_dir=None) -> int:
    """Analyse a trained checkpoint pair from ``model_dir``, or the oracle."""
    t0 = time.perf_counter()
    out = _outdir(outdir)
    src = Path(model_dir) if model_dir is not None else out
    if (src / "encoder.json").exists() and (src / "decoder.json").exists():
        model = NeuralAutoencoder(load_checkpoint(src / "encoder.json"),
                                  load_checkpoint(src / "decoder.json"))
        kind, slack = "neural", cfg.analysis.slack
    elif (src / "oracle.json").exists():
        model, kind = OracleAutoencoder.load(src / "oracle.json"), "oracle"
        slack = cfg.oracle.slack if cfg.oracle is not None else 0.01
    elif cfg.oracle is not None:
        model = build_oracle(cfg.manifold, cfg.oracle.delta, _protected_points(cfg))
        kind, slack = "oracle", cfg.oracle.slack
    else:
        raise ValueError(f"no checkpoints in {src} and no oracle section in the config")
    if model.ambient_dim != cfg.manifold.ambient_dim:
        raise ValueError("model dimension does not match the manifold")
    report = _analysis(model, cfg, slack)
    artifacts.write_json(out / "analysis.json", report.to_dict())
    artifacts.write_json(out / "summary.json", artifacts.summary(
        "analyze", cfg.config_hash(), time.perf_counter() - t0, model=kind,
        **report.to_dict()))
    return 0 if report.bound_satisfied else 2


def _sweep_member(args):
    cfg, seed, outdir = args
    member = dataclasses.replace(cfg, training=dataclasses.replace(cfg.training, seed=seed))
    try:
        code, fields = train_and_report(member, outdir, command="sweep-member")
        return {"seed": seed, "exit_code": code, "error": None, **fields}
    except Exception as e:  # recorded per member, not fatal to the sweep
        return {"seed": seed, "exit_code": 1, "error": f"{type(e).__name__}: {e}"}


def cmd_sweep(cfg: ExperimentConfig, seeds, outdir, jobs: int = 1) -> int:
    t0 = time.perf_counter()
    seeds = list(seeds)
    if not seeds:
        raise ValueError("sweep needs at least one seed")
    out = _outdir(outdir)
    tasks = [(cfg, s, out / f"seed_{s}") for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_sweep_member, tasks))
    else:
        runs = [_sweep_member(t) for t in tasks]
    keep = ("seed", "exit_code", "error", "final_loss", "converged", "sup_error_estimate",
            "reach", "bound_satisfied", "mean_reconstruction_error",
            "fraction_error_below_0_1", "bottleneck_overlap_fraction")
    runs = [{k: r.get(k) for k in keep} for r in runs]
    sweep = {"schema_version": artifacts.SCHEMA_VERSION, "config_hash": cfg.config_hash(),
             "seeds": seeds, "runs": runs}
    artifacts.write_json(out / "sweep.json", sweep)
    failed = [r["seed"] for r in runs if r["error"] or not r["bound_satisfied"]]
    artifacts.write_json(out / "summary.json", artifacts.summary(
        "sweep", cfg.config_hash(), time.perf_counter() - t0, seeds=seeds,
        n_converged=sum(bool(r["converged"]) for r in runs), failed_seeds=failed))
    return 2 if failed else 0
