"""Per-iteration run records and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

CSV_HEADER = ("k", "consensus_sq", "opt_gap_sq", "staleness", "tracking_sq", "grad_evals")

STOP_TARGET = "target"
STOP_MAX_ITERS = "max_iters"
STOP_DIVERGED = "diverged"


@dataclass
class Trace:
    k: list = field(default_factory=list)
    consensus_sq: list = field(default_factory=list)
    opt_gap_sq: list = field(default_factory=list)
    staleness: list = field(default_factory=list)
    tracking_sq: list = field(default_factory=list)
    grad_evals: list = field(default_factory=list)
    stop_reason: str | None = None
    wall_clock: float = 0.0

    def append(self, k, sample, grad_evals):
        self.k.append(int(k))
        self.consensus_sq.append(float(sample.consensus_sq))
        self.opt_gap_sq.append(float(sample.opt_gap_sq))
        self.staleness.append(None if sample.staleness is None else float(sample.staleness))
        self.tracking_sq.append(float(sample.tracking_sq))
        self.grad_evals.append(int(grad_evals))

    def __len__(self) -> int:
        return len(self.k)

    def column(self, name: str) -> np.ndarray:
        vals = getattr(self, name)
        if name == "staleness":
            return np.array([math.nan if v is None else v for v in vals], dtype=float)
        return np.asarray(vals)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(self.k, self.consensus_sq, self.opt_gap_sq, self.staleness, self.tracking_sq, self.grad_evals):
            k, c, o, s, t, g = row
            w.writerow([k, repr(c), repr(o), "" if s is None else repr(s), repr(t), g])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "Trace":
        tr = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader, ()))
            if header != CSV_HEADER:
                raise ValueError(f"{path}: unexpected trace header {header}")
            for k, c, o, s, t, g in reader:
                tr.k.append(int(k))
                tr.consensus_sq.append(float(c))
                tr.opt_gap_sq.append(float(o))
                tr.staleness.append(float(s) if s else None)
                tr.tracking_sq.append(float(t))
                tr.grad_evals.append(int(g))
        return tr
