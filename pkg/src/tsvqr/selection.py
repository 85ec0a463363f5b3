"""Evaluation metrics, GACV scoring and grid search over hyperparameters."""

from __future__ import annotations

import csv
import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import Dataset, Hyperparams, KernelSpec, build_augmented_gram, pinball_loss
from .dcdm import SolverConfig
from .model import TrainedModel, classify_support_vectors, fit, predict

POWERS_OF_TWO = tuple(2.0 ** k for k in range(-8, 9))
EPS_GRID = tuple(round(0.01 * k, 2) for k in range(1, 11))
TAU_GRID = (0.10, 0.25, 0.50, 0.75, 0.90)


@dataclass(frozen=True)
class EvalReport:
    """Test-set metrics.  ``mape``/``gacv`` are None when undefined."""

    risk: float
    rmse: float
    mae: float
    mape: Optional[float]
    gacv: Optional[float] = None
    sv_count: int = 0
    fit_seconds: float = 0.0
    predict_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {"risk": self.risk, "rmse": self.rmse, "mae": self.mae, "mape": self.mape,
                "gacv": self.gacv, "sv_count": self.sv_count,
                "fit_seconds": self.fit_seconds, "predict_seconds": self.predict_seconds}


def metrics(y, yhat, tau: float) -> dict:
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("cannot evaluate on an empty set")
    if y.shape != yhat.shape:
        raise ValueError(f"{y.size} targets but {yhat.size} predictions")
    r = y - yhat
    abs_r = np.abs(r)
    if np.any(y == 0):
        mape = None
    else:
        with np.errstate(over="ignore"):
            mape = float(np.mean(abs_r / np.abs(y)))
    return {"risk": float(np.mean(pinball_loss(r, tau))),
            "rmse": float(np.sqrt(np.mean(r * r))),
            "mae": float(np.mean(abs_r)),
            "mape": mape}


def evaluate(model: TrainedModel, test: Dataset, tau: Optional[float] = None,
             train: Optional[Dataset] = None) -> EvalReport:
    """Risk, RMSE, MAE and MAPE on ``test``; GACV on ``train`` when given."""
    tau = model.hyper.tau if tau is None else tau
    if test.n_samples == 0:
        raise ValueError("cannot evaluate on an empty set")
    t0 = time.perf_counter()
    yhat = predict(model, test.inputs)
    elapsed = time.perf_counter() - t0
    m = metrics(test.targets, yhat, tau)
    g = gacv(model, train, tau) if train is not None else None
    census = classify_support_vectors(model)
    return EvalReport(risk=m["risk"], rmse=m["rmse"], mae=m["mae"], mape=m["mape"],
                      gacv=g, sv_count=int(census.i_sv.size),
                      fit_seconds=model.fit_seconds, predict_seconds=elapsed)


def gacv_score(residuals, n_sv: int, tau: float) -> Optional[float]:
    """Sum of pinball losses over (l - |I_SV|); None when the denominator is not positive."""
    residuals = np.asarray(residuals, dtype=np.float64).ravel()
    denom = residuals.size - n_sv
    if denom <= 0:
        return None
    return float(np.sum(pinball_loss(residuals, tau)) / denom)


def gacv(model: TrainedModel, data: Dataset, tau: Optional[float] = None,
         sv_rule: str = "both") -> Optional[float]:
    tau = model.hyper.tau if tau is None else tau
    r = data.targets - predict(model, data.inputs)
    return gacv_score(r, classify_support_vectors(model, rule=sv_rule).i_sv.size, tau)


@dataclass(frozen=True)
class GridSpec:
    c_values: tuple = POWERS_OF_TWO
    p_values: tuple = POWERS_OF_TWO
    eps_values: tuple = EPS_GRID
    tau_values: tuple = TAU_GRID
    tie_c: bool = True
    tie_eps: bool = True

    def __post_init__(self):
        for name in ("c_values", "p_values", "eps_values", "tau_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must not be empty")
            if any(not (v > 0 and math.isfinite(v)) for v in vals):
                raise ValueError(f"{name} must be positive: {vals}")
            object.__setattr__(self, name, vals)
        if any(not 0 < t < 1 for t in self.tau_values):
            raise ValueError(f"tau_values must lie in (0, 1): {self.tau_values}")

    def c_pairs(self):
        if self.tie_c:
            return [(c, c) for c in self.c_values]
        return list(itertools.product(self.c_values, self.c_values))

    def eps_pairs(self):
        if self.tie_eps:
            return [(e, e) for e in self.eps_values]
        return list(itertools.product(self.eps_values, self.eps_values))

    def kernels(self, family: str) -> List[KernelSpec]:
        if family == "linear":
            return [KernelSpec.linear()]
        return [KernelSpec(family, p) for p in self.p_values]

    def cells(self, tau: float, family: str, solver: SolverConfig) -> List[Hyperparams]:
        return [Hyperparams(c1=c1, c2=c2, eps1=e1, eps2=e2, tau=tau, kernel=k, solver=solver)
                for k in self.kernels(family)
                for c1, c2 in self.c_pairs()
                for e1, e2 in self.eps_pairs()]


@dataclass
class CellResult:
    hyper: Hyperparams
    gacv: Optional[float] = None
    report: Optional[EvalReport] = None
    converged: tuple = (False, False)
    epochs: tuple = (0, 0)
    error: Optional[str] = None
    model: Optional[TrainedModel] = field(default=None, repr=False)

    def rank_key(self):
        risk = self.report.risk if self.report is not None else math.inf
        return (self.gacv is None, self.gacv if self.gacv is not None else 0.0,
                risk, self.hyper.c1 + self.hyper.c2)


def _run_cell(train: Dataset, h: Hyperparams, gram, keep_model: bool) -> CellResult:
    try:
        model = fit(train, h, gram=gram)
        report = evaluate(model, train, h.tau, train=train)
    except Exception as exc:  # a failed cell is recorded, not fatal
        return CellResult(hyper=h, error=f"{type(exc).__name__}: {exc}")
    lo, up = model.diagnostics
    return CellResult(hyper=h, gacv=report.gacv, report=report,
                      converged=(lo.converged, up.converged),
                      epochs=(lo.epochs_run, up.epochs_run),
                      model=model if keep_model else None)


def grid_search(train: Dataset, grid: GridSpec, tau: float, kernel_family: str = "gaussian",
                solver: Optional[SolverConfig] = None, n_jobs: int = 1,
                keep_models: bool = False) -> List[CellResult]:
    """Fit every grid cell and rank ascending by GACV.

    Undefined GACV ranks last; ties go to lower training risk, then to the
    smaller C1 + C2, then to grid order.  One Gram matrix is built per
    kernel parameter and shared by the cells that use it.
    """
    solver = solver or SolverConfig()
    cells = grid.cells(tau, kernel_family, solver)
    grams = {}
    for h in cells:
        if h.kernel not in grams:
            try:
                grams[h.kernel] = build_augmented_gram(train, h.kernel)
            except Exception as exc:
                grams[h.kernel] = exc

    def job(h):
        g = grams[h.kernel]
        if isinstance(g, Exception):
            return CellResult(hyper=h, error=f"{type(g).__name__}: {g}")
        return _run_cell(train, h, g, keep_models)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(job, cells))
    else:
        results = [job(h) for h in cells]
    order = sorted(range(len(results)), key=lambda i: (results[i].rank_key(), i))
    return [results[i] for i in order]


CSV_COLUMNS = ("rank", "c1", "c2", "eps1", "eps2", "tau", "kernel", "p", "gacv", "risk",
               "rmse", "mae", "mape", "sv_count", "converged_lower", "converged_upper",
               "epochs_lower", "epochs_upper", "fit_seconds", "predict_seconds", "error")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results_csv(results: Sequence[CellResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rank, r in enumerate(results, 1):
            h, rep = r.hyper, r.report
            w.writerow([_fmt(v) for v in (
                rank, h.c1, h.c2, h.eps1, h.eps2, h.tau, h.kernel.kind, h.kernel.param,
                r.gacv,
                rep.risk if rep else None, rep.rmse if rep else None,
                rep.mae if rep else None, rep.mape if rep else None,
                rep.sv_count if rep else None,
                r.converged[0], r.converged[1], r.epochs[0], r.epochs[1],
                rep.fit_seconds if rep else None, rep.predict_seconds if rep else None,
                r.error)])
