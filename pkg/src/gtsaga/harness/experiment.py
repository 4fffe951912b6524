"""Seed sweeps, on-disk traces and certificate reports."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..algorithm import run
from ..analysis import iteration_complexity_bound, predicted_iteration_complexity, rate_certificate
from ..errors import DivergenceDetected
from ..problems import declared_constants, solve_minimizer
from ..trace import STOP_DIVERGED, Trace
from .config import RunConfig

AGGREGATE_HEADER = ("k", "geomean_opt_gap_sq", "seeds")


def trace_filename(seed: int) -> str:
    return f"trace_seed{seed}.csv"


@dataclass
class ExperimentResult:
    traces: dict  # seed -> Trace
    out_dir: Path | None = None
    files: list = field(default_factory=list)
    diverged: dict = field(default_factory=dict)  # seed -> DivergenceDetected

    @property
    def seeds(self) -> list:
        return sorted(self.traces)


def aggregate(traces) -> tuple[np.ndarray, np.ndarray]:
    """Per-k geometric mean of ``opt_gap_sq`` over the rounds recorded by every trace."""
    traces = list(traces)
    if not traces:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    common = set(traces[0].k)
    for tr in traces[1:]:
        common &= set(tr.k)
    ks = np.array(sorted(common), dtype=np.int64)
    logs = np.zeros(ks.size)
    for tr in traces:
        pos = {k: i for i, k in enumerate(tr.k)}
        gaps = np.array([tr.opt_gap_sq[pos[k]] for k in ks])
        with np.errstate(divide="ignore"):
            logs += np.log(gaps)
    return ks, np.exp(logs / len(traces))


def aggregate_csv(traces) -> str:
    traces = list(traces)
    ks, gm = aggregate(traces)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    n = len(traces)
    for k, g in zip(ks.tolist(), gm.tolist()):
        w.writerow([k, repr(g), n])
    return buf.getvalue()


def _one_seed(cfg: RunConfig, seed: int, cert):
    try:
        tr = run(
            cfg.problem, cfg.W, alpha=cfg.alpha, max_iters=cfg.max_iters, master_seed=seed,
            algorithm=cfg.algorithm, x0=cfg.x0, metrics_every=cfg.metrics_every,
            target_gap=cfg.target_gap, certificate=cert, track_staleness=cfg.track_staleness,
            backend=cfg.backend,
        )
        return tr, None
    except DivergenceDetected as exc:
        return exc.trace, exc


def run_experiment(cfg: RunConfig, out_dir=None, workers: int | None = None) -> ExperimentResult:
    """Run seeds ``master_seed .. master_seed + seeds - 1`` and optionally write their traces.

    Files written to ``out_dir``: one ``trace_seed<s>.csv`` per seed, plus
    ``aggregate.csv`` when ``seeds > 1`` and ``summary.json`` always.  Seeds
    that diverge still get their partial trace; the first divergence is
    re-raised after everything is on disk.
    """
    cert = solve_minimizer(cfg.problem)
    seeds = [cfg.master_seed + s for s in range(cfg.seeds)]
    workers = workers or cfg.workers
    if workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda s: _one_seed(cfg, s, cert), seeds))
    else:
        outcomes = [_one_seed(cfg, s, cert) for s in seeds]
    result = ExperimentResult(traces={s: tr for s, (tr, _) in zip(seeds, outcomes)})
    result.diverged = {s: exc for s, (_, exc) in zip(seeds, outcomes) if exc is not None}

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.out_dir = out
        for s in seeds:
            path = out / trace_filename(s)
            result.traces[s].write_csv(path)
            result.files.append(path)
        if len(seeds) > 1:
            path = out / "aggregate.csv"
            path.write_text(aggregate_csv(result.traces.values()))
            result.files.append(path)
        path = out / "summary.json"
        path.write_text(json.dumps(summary(cfg, result), indent=2, sort_keys=True) + "\n")
        result.files.append(path)

    if result.diverged:
        raise result.diverged[min(result.diverged)]
    return result


def summary(cfg: RunConfig, result: ExperimentResult) -> dict:
    """Run metadata (wall-clock times are the only non-reproducible field)."""
    seeds = {}
    for s in result.seeds:
        tr = result.traces[s]
        entry = {
            "stop_reason": tr.stop_reason,
            "iterations": tr.k[-1] if tr.k else 0,
            "final_opt_gap_sq": tr.opt_gap_sq[-1] if tr.k else None,
            "grad_evals": tr.grad_evals[-1] if tr.k else 0,
            "wall_clock_s": tr.wall_clock,
        }
        if tr.stop_reason == STOP_DIVERGED:
            exc = result.diverged[s]
            entry["diverged_at"] = exc.k
            entry["divergence_norm"] = exc.norm if math.isfinite(exc.norm) else "inf"
        seeds[str(s)] = entry
    return {
        "algorithm": cfg.algorithm,
        "alpha": cfg.alpha,
        "alpha_mode": cfg.alpha_mode,
        "sigma": cfg.W.sigma,
        "n": cfg.problem.n,
        "dim": cfg.problem.dim,
        "sizes": list(cfg.problem.sizes),
        "max_iters": cfg.max_iters,
        "target_gap": cfg.target_gap,
        "metrics_every": cfg.metrics_every,
        "seeds": seeds,
    }


def report_certificate(cfg: RunConfig) -> dict:
    """Rate certificate for the configured step size, with the predicted round count.

    With ``target_gap`` set, the prediction is for shrinking the initial
    ``||xbar^0 - x*||^2`` to ``target_gap``; without it, for a relative
    accuracy of 1e-8.  :class:`CertificateFailure` propagates unchanged.
    """
    mu, lip, Q, m, M = declared_constants(cfg.problem)
    cert = rate_certificate(cfg.alpha, mu, lip, cfg.W.sigma, m, M)
    doc = cert.to_dict()
    doc["alpha_mode"] = cfg.alpha_mode
    doc["Q"] = Q
    x_star = solve_minimizer(cfg.problem).x_star
    if cfg.x0 is None:
        xbar0 = np.zeros(cfg.problem.dim)
    else:
        xbar0 = cfg.x0 if cfg.x0.ndim == 1 else cfg.x0.mean(axis=0)
    u0 = float(np.sum((xbar0 - x_star) ** 2))
    if cfg.target_gap is not None and cfg.target_gap > 0 and u0 > 0:
        eps, scale = cfg.target_gap, u0
    else:
        eps, scale = 1e-8, 1.0
    doc["initial_gap"] = u0
    doc["predicted_iterations"] = {
        "eps_target": eps,
        "u0_scale": scale,
        "bound": iteration_complexity_bound(mu, lip, cfg.W.sigma, m, M, eps, scale),
        "iterations": predicted_iteration_complexity(mu, lip, cfg.W.sigma, m, M, eps, scale),
    }
    return doc


def load_traces(paths) -> list[tuple[str, Trace]]:
    return [(Path(p).stem, Trace.read_csv(p)) for p in paths]
