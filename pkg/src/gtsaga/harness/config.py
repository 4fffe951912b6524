"""Run configuration: JSON schema, validation and resolution.

A configuration document looks like::

    {
      "problem":  {"generate": "quadratic", "n": 8, "m": 32, "p": 10, "Q": 10, "seed": 1},
      "topology": {"kind": "ring", "self_weight": 0.3333333333333333},
      "algorithm": "gt-saga",
      "alpha": "theoretical",
      "max_iters": 200000,
      "target_gap": 1e-12,
      "master_seed": 0,
      "seeds": 20,
      "metrics_every": 100,
      "track_staleness": false
    }

``problem`` is one of: a path string or ``{"file": path}`` (paths are
resolved against the config's directory), an inline problem document
(``dim``/``constants``/``nodes``), or a ``generate`` block (``quadratic``
takes ``n, m, p, Q, seed``; ``logistic`` takes ``n, m, p, reg, seed`` and
optional ``flip``).  ``topology.kind`` is ``complete``, ``ring``
(``self_weight``), ``erdos_renyi`` (``p``, ``seed``; Metropolis weights) or
``custom`` (``matrix``).  ``topology.n`` defaults to the problem's node count.
Optional keys: ``x0`` (shared vector or per-node rows), ``workers``
(threads for seed sweeps), ``backend`` (``numba`` or ``numpy``).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import topology as topo
from ..algorithm import ALGORITHMS
from ..analysis import theoretical_step_size
from ..errors import ConfigError, GTSagaError
from ..problems import (
    FiniteSumProblem,
    declared_constants,
    generate_logistic_problem,
    generate_quadratic_problem,
    load_problem,
    problem_from_dict,
)

TOP_LEVEL_KEYS = {
    "problem", "topology", "algorithm", "alpha", "max_iters", "target_gap", "master_seed",
    "seeds", "metrics_every", "track_staleness", "x0", "workers", "backend",
}


@dataclass(eq=False)
class RunConfig:
    problem: FiniteSumProblem
    W: topo.WeightMatrix
    algorithm: str
    alpha: float
    max_iters: int
    target_gap: float | None = None
    master_seed: int = 0
    seeds: int = 1
    metrics_every: int = 1
    track_staleness: bool = False
    x0: np.ndarray | None = None
    workers: int = 1
    backend: str | None = None
    alpha_mode: str = "explicit"
    raw: dict = field(default_factory=dict)
    source: Path | None = None


def _int(doc: dict, key: str, default=None, minimum: int | None = None, path: str = "") -> int:
    where = f"{path}{key}"
    if key not in doc:
        if default is None:
            raise ConfigError(where, "required field is missing")
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(where, f"expected an integer, got {v!r}")
    v = int(v)
    if minimum is not None and v < minimum:
        raise ConfigError(where, f"must be >= {minimum}, got {v}")
    return v


def _real(doc: dict, key: str, default=None, path: str = "") -> float:
    where = f"{path}{key}"
    if key not in doc:
        if default is None:
            raise ConfigError(where, "required field is missing")
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(where, f"expected a finite number, got {v!r}")
    return float(v)


def _problem(spec: Any, base: Path) -> FiniteSumProblem:
    if isinstance(spec, str):
        spec = {"file": spec}
    if not isinstance(spec, dict):
        raise ConfigError("problem", "expected a path, an inline problem or a generate block")
    try:
        if "file" in spec:
            path = Path(spec["file"])
            if not path.is_absolute():
                path = base / path
            if not path.exists():
                raise ConfigError("problem.file", f"no such file: {path}")
            return load_problem(path)
        if "generate" in spec:
            kind = spec["generate"]
            if kind == "quadratic":
                return generate_quadratic_problem(
                    _int(spec, "n", minimum=1, path="problem."),
                    _int(spec, "m", minimum=1, path="problem."),
                    _int(spec, "p", minimum=1, path="problem."),
                    _real(spec, "Q", path="problem."),
                    _int(spec, "seed", default=0, path="problem."),
                )
            if kind == "logistic":
                return generate_logistic_problem(
                    _int(spec, "n", minimum=1, path="problem."),
                    _int(spec, "m", minimum=1, path="problem."),
                    _int(spec, "p", minimum=1, path="problem."),
                    _real(spec, "reg", path="problem."),
                    _int(spec, "seed", default=0, path="problem."),
                    _real(spec, "flip", default=0.1, path="problem."),
                )
            raise ConfigError("problem.generate", f"unknown generator {kind!r}; expected 'quadratic' or 'logistic'")
        if "nodes" in spec:
            return problem_from_dict(spec)
    except ConfigError:
        raise
    except (GTSagaError, OSError, json.JSONDecodeError) as exc:
        raise ConfigError("problem", str(exc)) from exc
    raise ConfigError("problem", "expected one of 'file', 'generate' or an inline document with 'nodes'")


def _topology(spec: Any, n_nodes: int) -> topo.WeightMatrix:
    if not isinstance(spec, dict):
        raise ConfigError("topology", "expected an object with a 'kind' field")
    kind = spec.get("kind")
    n = _int(spec, "n", default=n_nodes, minimum=1, path="topology.")
    if n != n_nodes:
        raise ConfigError("topology.n", f"topology has {n} nodes but the problem has {n_nodes}")
    try:
        if kind == "complete":
            return topo.build_complete(n)
        if kind == "ring":
            return topo.build_ring(n, _real(spec, "self_weight", default=1.0 / 3.0, path="topology."))
        if kind == "erdos_renyi":
            g = topo.erdos_renyi(n, _real(spec, "p", path="topology."), _int(spec, "seed", default=0, path="topology."))
            return topo.metropolis_weights(g)
        if kind == "custom":
            if "matrix" not in spec:
                raise ConfigError("topology.matrix", "required for kind 'custom'")
            try:
                M = np.asarray(spec["matrix"], dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise ConfigError("topology.matrix", f"not a numeric matrix: {exc}") from exc
            if M.shape != (n, n):
                raise ConfigError("topology.matrix", f"expected a {n}x{n} matrix, got shape {M.shape}")
            return topo.from_matrix(M)
    except ConfigError:
        raise
    except GTSagaError as exc:
        raise ConfigError("topology", str(exc)) from exc
    raise ConfigError("topology.kind", f"unknown kind {kind!r}; expected complete, ring, erdos_renyi or custom")


def parse_config(text: str, base_dir=None) -> RunConfig:
    """Validate a JSON configuration document and resolve problem, weights and step size."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be an object")
    unknown = sorted(set(doc) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    if "problem" not in doc:
        raise ConfigError("problem", "required field is missing")
    if "topology" not in doc:
        raise ConfigError("topology", "required field is missing")
    prob = _problem(doc["problem"], base)
    W = _topology(doc["topology"], prob.n)

    algorithm = doc.get("algorithm", "gt-saga")
    if algorithm not in ALGORITHMS:
        raise ConfigError("algorithm", f"unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}")

    alpha_spec = doc.get("alpha", "theoretical")
    if alpha_spec == "theoretical":
        try:
            mu, lip, _, m, M = declared_constants(prob)
        except GTSagaError as exc:
            raise ConfigError("problem.constants", str(exc)) from exc
        alpha, mode = theoretical_step_size(mu, lip, W.sigma, m, M), "theoretical"
    else:
        alpha, mode = _real(doc, "alpha"), "explicit"
        if alpha <= 0:
            raise ConfigError("alpha", f"must be > 0 or \"theoretical\", got {alpha_spec!r}")

    target = doc.get("target_gap")
    if target is not None:
        target = _real(doc, "target_gap")
        if target < 0:
            raise ConfigError("target_gap", "must be non-negative")

    staleness = doc.get("track_staleness", False)
    if not isinstance(staleness, bool):
        raise ConfigError("track_staleness", f"expected true or false, got {staleness!r}")
    if staleness and algorithm != "gt-saga":
        raise ConfigError("track_staleness", "staleness is only defined for gt-saga")

    x0 = doc.get("x0")
    if x0 is not None:
        try:
            x0 = np.asarray(x0, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ConfigError("x0", f"not numeric: {exc}") from exc
        if x0.shape not in ((prob.dim,), (prob.n, prob.dim)) or not np.all(np.isfinite(x0)):
            raise ConfigError("x0", f"expected shape ({prob.dim},) or ({prob.n}, {prob.dim}) of finite values, got {x0.shape}")

    backend = doc.get("backend")
    if backend not in (None, "numba", "numpy"):
        raise ConfigError("backend", f"expected 'numba' or 'numpy', got {backend!r}")

    return RunConfig(
        problem=prob,
        W=W,
        algorithm=algorithm,
        alpha=alpha,
        max_iters=_int(doc, "max_iters", minimum=1),
        target_gap=target,
        master_seed=_int(doc, "master_seed", default=0, minimum=0),
        seeds=_int(doc, "seeds", default=1, minimum=1),
        metrics_every=_int(doc, "metrics_every", default=1, minimum=1),
        track_staleness=staleness,
        x0=x0,
        workers=_int(doc, "workers", default=1, minimum=1),
        backend=backend,
        alpha_mode=mode,
        raw=doc,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror or exc}") from exc
    cfg = parse_config(text, base_dir=path.parent)
    cfg.source = path
    return cfg


def output_dir(cli_value=None, env=None) -> Path:
    """``GTSAGA_OUT_DIR`` wins over ``--out``; the fallback is ``./gtsaga_out``."""
    env = os.environ if env is None else env
    return Path(env.get("GTSAGA_OUT_DIR") or cli_value or "gtsaga_out")
