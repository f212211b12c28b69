"""Damped fixed-point iteration on R^3 with an iterate trace."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigError, ConvergenceError


class EquilibriumMeans(NamedTuple):
    """(x1, x2, y) = (E[pi^1 sigma0^1], E[pi^2 sigma0^2], E[pi^2 gamma^2])."""

    x1: float
    x2: float
    y: float

    def array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def of(cls, z) -> "EquilibriumMeans":
        z = np.asarray(z, dtype=float)
        return cls(float(z[0]), float(z[1]), float(z[2]))


@dataclass
class FixedPointResult:
    means: EquilibriumMeans
    iterations: int
    residual: float
    trace: list = field(default_factory=list)  # rows (iter, x1, x2, y, residual)


def check_settings(tol, max_iter, damping):
    if not tol > 0:
        raise ConfigError(f"fp_tol must be > 0, got {tol}")
    if max_iter < 1:
        raise ConfigError(f"fp_max_iter must be >= 1, got {max_iter}")
    if not 0 < damping <= 1:
        raise ConfigError(f"damping must lie in (0, 1], got {damping}")


def iterate(R: Callable[[EquilibriumMeans], EquilibriumMeans], z0, tol: float, max_iter: int,
            damping: float = 1.0) -> FixedPointResult:
    """Iterate ``z <- (1-d) z + d R(z)`` until ``||R(z) - z||_2 <= tol``.

    The returned ``means`` is the last iterate ``z`` whose residual met the
    tolerance; ``iterations`` counts the updates applied to reach it.
    """
    check_settings(tol, max_iter, damping)
    z = np.asarray(z0, dtype=float).copy()
    trace = []
    for k in range(max_iter + 1):
        r = np.asarray(R(EquilibriumMeans.of(z)), dtype=float)
        res = float(np.linalg.norm(r - z))
        trace.append((k, z[0], z[1], z[2], res))
        if res <= tol:
            return FixedPointResult(EquilibriumMeans.of(z), k, res, trace)
        if not np.all(np.isfinite(r)):
            break
        z = (1.0 - damping) * z + damping * r
    raise ConvergenceError(f"fixed point not reached in {max_iter} iterations (residual {res:.3e})",
                           residual=res, trace=trace)


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "x1", "x2", "y", "residual"])
        for k, x1, x2, y, res in trace:
            w.writerow([k, fmt(x1), fmt(x2), fmt(y), fmt(res)])


def fmt(x) -> str:
    """CSV number format: 12 significant digits."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.12g}"
