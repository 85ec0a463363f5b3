"""Dual coordinate descent for box-constrained convex quadratic programs.

Minimizes ``0.5 * a^T Q a - d^T a`` subject to ``0 <= a <= cap`` by exact
one-dimensional minimization with clipping, one coordinate at a time.  The
gradient ``Q a - d`` is kept up to date incrementally, so an update costs
one column sweep of ``Q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit

# Below this, the 1-D restriction is treated as linear.
DIAG_EPS = 1e-12


class SolverError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-6
    max_epochs: int = 1000
    shuffle: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if int(self.max_epochs) < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs!r}")
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")
        object.__setattr__(self, "tol", float(self.tol))
        object.__setattr__(self, "max_epochs", int(self.max_epochs))
        object.__setattr__(self, "shuffle", bool(self.shuffle))
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        return {"tol": self.tol, "max_epochs": self.max_epochs,
                "shuffle": self.shuffle, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        return cls(**{k: d[k] for k in ("tol", "max_epochs", "shuffle", "seed") if k in d})


def _is_symmetric(q, rtol=1e-12, block=1024) -> bool:
    # blockwise, so a 20k x 20k Gram needs no full-size temporaries
    l = q.shape[0]
    for i in range(0, l, block):
        a = q[i:i + block]
        b = q[:, i:i + block].T
        if np.any(np.abs(a - b) > rtol * np.maximum(1.0, np.abs(a))):
            return False
    return True


@dataclass(frozen=True)
class BoxQP:
    q: np.ndarray
    d: np.ndarray
    cap: float

    def __post_init__(self):
        q = np.ascontiguousarray(self.q, dtype=np.float64)
        d = np.ascontiguousarray(self.d, dtype=np.float64).ravel()
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"q must be square, got shape {q.shape}")
        if d.shape[0] != q.shape[0]:
            raise ValueError(f"d has length {d.shape[0]}, q is {q.shape[0]}x{q.shape[0]}")
        if not np.isfinite(self.cap) or self.cap <= 0:
            raise ValueError(f"cap must be positive, got {self.cap!r}")
        if not _is_symmetric(q):
            raise ValueError("q is not symmetric")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "cap", float(self.cap))

    @property
    def size(self) -> int:
        return self.d.shape[0]


@dataclass(frozen=True)
class SolveResult:
    alpha: np.ndarray
    epochs_run: int
    final_pg_norm: float
    objective: float
    converged: bool
    degenerate_updates: int = 0

    def to_dict(self) -> dict:
        return {"epochs_run": self.epochs_run, "final_pg_norm": self.final_pg_norm,
                "objective": self.objective, "converged": self.converged,
                "degenerate_updates": self.degenerate_updates}


def objective(qp: BoxQP, alpha) -> float:
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    if alpha.shape[0] != qp.size:
        raise ValueError(f"alpha has length {alpha.shape[0]}, expected {qp.size}")
    return float(0.5 * alpha @ (qp.q @ alpha) - qp.d @ alpha)


def projected_gradient(grad, alpha, cap) -> np.ndarray:
    """Zero exactly where the box KKT conditions hold."""
    pg = np.array(grad, dtype=np.float64, copy=True)
    lo = alpha <= 0.0
    hi = alpha >= cap
    pg[lo] = np.minimum(pg[lo], 0.0)
    pg[hi] = np.maximum(pg[hi], 0.0)
    return pg


@njit(cache=True, nogil=True)
def _sweep(q, diag, cap, alpha, grad, order):
    l = alpha.shape[0]
    degenerate = 0
    for k in range(order.shape[0]):
        i = order[k]
        g = grad[i]
        old = alpha[i]
        if diag[i] < DIAG_EPS:
            degenerate += 1
            if g < 0.0:
                new = cap
            elif g > 0.0:
                new = 0.0
            else:
                new = old
        else:
            new = old - g / diag[i]
            if new < 0.0:
                new = 0.0
            elif new > cap:
                new = cap
        delta = new - old
        if delta != 0.0:
            alpha[i] = new
            for j in range(l):
                grad[j] += delta * q[j, i]
    return degenerate


def _sweep_checked(q, diag, cap, alpha, grad, order, hook):
    """Pure-Python sweep that reports every single-coordinate update."""
    degenerate = 0
    for i in order:
        g = grad[i]
        old = alpha[i]
        if diag[i] < DIAG_EPS:
            degenerate += 1
            new = cap if g < 0 else (0.0 if g > 0 else old)
        else:
            new = min(max(old - g / diag[i], 0.0), cap)
        delta = new - old
        if delta != 0.0:
            alpha[i] = new
            grad += delta * q[:, i]
        if hook is not None:
            hook(int(i), alpha, grad)
    return degenerate


def solve(qp: BoxQP, cfg: Optional[SolverConfig] = None, warm_start=None,
          hook: Optional[Callable] = None) -> SolveResult:
    """Run cyclic (or seeded shuffled) coordinate descent to a projected-gradient tolerance.

    ``hook(i, alpha, grad)``, if given, is called after every coordinate
    update; it switches to a slower pure-Python sweep and is meant for
    debugging and tests.
    """
    cfg = cfg or SolverConfig()
    q, d, cap = qp.q, qp.d, qp.cap
    l = qp.size
    diag = np.ascontiguousarray(np.diag(q))
    bad = np.flatnonzero(diag < 0)
    if bad.size:
        raise SolverError(
            f"negative diagonal entry q[{bad[0]},{bad[0]}] = {diag[bad[0]]!r}; q is not PSD")

    if warm_start is None:
        alpha = np.zeros(l)
        grad = -d.copy()
    else:
        alpha = np.array(warm_start, dtype=np.float64).ravel()
        if alpha.shape[0] != l:
            raise ValueError(f"warm_start has length {alpha.shape[0]}, expected {l}")
        if np.any(alpha < 0) or np.any(alpha > cap) or not np.all(np.isfinite(alpha)):
            raise ValueError("warm_start lies outside the box [0, cap]")
        grad = q @ alpha - d

    rng = np.random.default_rng(cfg.seed) if cfg.shuffle else None
    order = np.arange(l, dtype=np.int64)
    degenerate = 0
    epochs = 0
    converged = False
    while True:
        pg_norm = float(np.max(np.abs(projected_gradient(grad, alpha, cap)))) if l else 0.0
        if pg_norm <= cfg.tol:
            # confirm against a fresh gradient; drift can only hide a violation
            grad = q @ alpha - d
            pg_norm = float(np.max(np.abs(projected_gradient(grad, alpha, cap)))) if l else 0.0
            if pg_norm <= cfg.tol:
                converged = True
                break
        if epochs >= cfg.max_epochs:
            break
        if rng is not None:
            rng.shuffle(order)
        if hook is None:
            degenerate += _sweep(q, diag, cap, alpha, grad, order)
        else:
            degenerate += _sweep_checked(q, diag, cap, alpha, grad, order, hook)
        epochs += 1

    # report from a fresh gradient, not the incrementally maintained one
    qa = q @ alpha
    fresh = qa - d
    final_pg = float(np.max(np.abs(projected_gradient(fresh, alpha, cap)))) if l else 0.0
    obj = float(0.5 * alpha @ qa - d @ alpha)
    alpha.setflags(write=False)
    return SolveResult(alpha=alpha, epochs_run=epochs, final_pg_norm=final_pg,
                       objective=obj, converged=converged and final_pg <= cfg.tol,
                       degenerate_updates=degenerate)
