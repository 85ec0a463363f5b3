"""Twin support vector quantile regression: dual assembly, fitting, prediction."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (AugmentedGram, Dataset, Hyperparams, KernelSpec, Standardizer,
                   as_matrix, build_augmented_gram, kernel_matrix)
from .dcdm import BoxQP, SolveResult, solve

SCHEMA_VERSION = 1

# |residual| at or below this counts as zero in coverage statistics
ZERO_RESIDUAL = 1e-8


def _check_lengths(gram: AugmentedGram, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != gram.size:
        raise ValueError(f"gram is {gram.size}x{gram.size} but there are {y.shape[0]} targets")
    return y


def assemble_lower_dual(gram: AugmentedGram, y, h: Hyperparams) -> BoxQP:
    """d = C1*tau*Q e - Y + eps1*e, box [0, C1]."""
    y = _check_lengths(gram, y)
    rowsum = gram.matrix.sum(axis=1)
    d = h.c1 * h.tau * rowsum - y + h.eps1
    return BoxQP(gram.matrix, d, h.c1)


def assemble_upper_dual(gram: AugmentedGram, y, h: Hyperparams) -> BoxQP:
    """d = C2*(1-tau)*Q e + Y + eps2*e, box [0, C2]."""
    y = _check_lengths(gram, y)
    rowsum = gram.matrix.sum(axis=1)
    d = h.c2 * (1.0 - h.tau) * rowsum + y + h.eps2
    return BoxQP(gram.matrix, d, h.c2)


@dataclass(frozen=True)
class TrainedModel:
    hyper: Hyperparams
    alpha_lower: np.ndarray
    alpha_upper: np.ndarray
    train_inputs: np.ndarray
    train_targets: np.ndarray
    diagnostics: tuple = (None, None)
    standardizer: Optional[Standardizer] = None
    feature_names: Optional[tuple] = None
    fit_seconds: float = 0.0

    @property
    def n_features(self) -> int:
        return self.train_inputs.shape[1]

    @property
    def n_samples(self) -> int:
        return self.train_inputs.shape[0]

    @property
    def converged(self) -> bool:
        return all(r is not None and r.converged for r in self.diagnostics)

    @property
    def coef_lower(self) -> np.ndarray:
        """Expansion coefficients of f1 over the augmented kernel, C1*tau - alpha."""
        return self.hyper.c1 * self.hyper.tau - self.alpha_lower

    @property
    def coef_upper(self) -> np.ndarray:
        """Expansion coefficients of f2, alpha* - C2*(1 - tau)."""
        return self.alpha_upper - self.hyper.c2 * (1.0 - self.hyper.tau)

    @property
    def linear_cache(self) -> Optional[tuple]:
        """Explicit (u1, u2) = ([w1; b1], [w2; b2]) for a linear kernel, else None."""
        if self.hyper.kernel.kind != "linear":
            return None
        G = np.hstack([self.train_inputs, np.ones((self.n_samples, 1))])
        return G.T @ self.coef_lower, G.T @ self.coef_upper

    def augmented_kernel(self, X) -> np.ndarray:
        """K(x_j, x) + 1 for every training row j (rows) and query x (columns)."""
        return kernel_matrix(self.hyper.kernel, self.train_inputs, X) + 1.0

    def prepare(self, x) -> np.ndarray:
        X = as_matrix(x, self.n_features)
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return X


def fit(data: Dataset, h: Hyperparams, standardize: bool = False,
        gram: Optional[AugmentedGram] = None, warm_start=None) -> TrainedModel:
    """Train both bound regressors.

    ``gram`` may be passed in when it was already built for the same inputs
    and kernel (grid search reuses it across C and epsilon values).
    ``warm_start`` is an optional ``(alpha_lower, alpha_upper)`` pair.
    """
    t0 = time.perf_counter()
    scaler = None
    if standardize:
        scaler = Standardizer.fit(data.inputs)
        data = scaler.apply(data)
    if gram is None:
        gram = build_augmented_gram(data, h.kernel)
    elif gram.size != data.n_samples:
        raise ValueError(f"gram is {gram.size}x{gram.size} for {data.n_samples} samples")
    lo_qp = assemble_lower_dual(gram, data.targets, h)
    up_qp = assemble_upper_dual(gram, data.targets, h)
    ws_lo, ws_up = warm_start if warm_start is not None else (None, None)
    lo = solve(lo_qp, h.solver, ws_lo)
    up = solve(up_qp, h.solver, ws_up)
    elapsed = time.perf_counter() - t0
    return TrainedModel(hyper=h, alpha_lower=lo.alpha, alpha_upper=up.alpha,
                        train_inputs=data.inputs, train_targets=data.targets,
                        diagnostics=(lo, up), standardizer=scaler,
                        feature_names=data.feature_names, fit_seconds=elapsed)


def _linear_eval(u, X):
    return X @ u[:-1] + u[-1]


def predict_lower(model: TrainedModel, x, path: str = "auto") -> np.ndarray:
    """f1 at each query row: sum_j (C1*tau - alpha_j) * (K(x_j, x) + 1).

    ``path`` selects ``"kernel"`` expansion or the cached ``"linear"``
    weights; ``"auto"`` uses the weights when the kernel is linear.
    """
    X = model.prepare(x)
    if _use_linear(model, path):
        return _linear_eval(model.linear_cache[0], X)
    return model.coef_lower @ model.augmented_kernel(X)


def predict_upper(model: TrainedModel, x, path: str = "auto") -> np.ndarray:
    """f2 at each query row: sum_j (alpha*_j - C2*(1 - tau)) * (K(x_j, x) + 1)."""
    X = model.prepare(x)
    if _use_linear(model, path):
        return _linear_eval(model.linear_cache[1], X)
    return model.coef_upper @ model.augmented_kernel(X)


def _use_linear(model, path):
    if path not in ("auto", "kernel", "linear"):
        raise ValueError(f"unknown prediction path {path!r}")
    if path == "linear" and model.hyper.kernel.kind != "linear":
        raise ValueError("linear path requires a linear kernel")
    return path == "linear" or (path == "auto" and model.hyper.kernel.kind == "linear")


def predict_bounds(model: TrainedModel, x, path: str = "auto"):
    """(f1, f2, f) for a batch of queries, sharing one kernel evaluation."""
    X = model.prepare(x)
    if _use_linear(model, path):
        u1, u2 = model.linear_cache
        fl, fu = _linear_eval(u1, X), _linear_eval(u2, X)
    else:
        K = model.augmented_kernel(X)
        fl, fu = model.coef_lower @ K, model.coef_upper @ K
    return fl, fu, 0.5 * (fl + fu)


def predict(model: TrainedModel, x, path: str = "auto") -> np.ndarray:
    """Final decision function, the mean of the two bound regressors."""
    return predict_bounds(model, x, path)[2]


def predict_decomposed(model: TrainedModel, x) -> tuple:
    """The two terms of f: 0.5*(alpha* - alpha)^T k(x) and 0.5*[C1*tau - C2*(1-tau)] e^T k(x).

    Their sum equals :func:`predict` up to rounding.
    """
    h = model.hyper
    K = model.augmented_kernel(model.prepare(x))
    first = 0.5 * (model.alpha_upper - model.alpha_lower) @ K
    second = 0.5 * (h.c1 * h.tau - h.c2 * (1.0 - h.tau)) * K.sum(axis=0)
    return first, second


@dataclass(frozen=True)
class SupportVectorCensus:
    on_lower: np.ndarray
    below_lower: np.ndarray
    above_lower: np.ndarray
    on_upper: np.ndarray
    above_upper: np.ndarray
    below_upper: np.ndarray
    i_sv: np.ndarray

    @property
    def inside(self) -> np.ndarray:
        """Points strictly between the two insensitive bounds (both multipliers zero)."""
        return np.intersect1d(self.above_lower, self.below_upper)

    def counts(self) -> dict:
        return {k: int(getattr(self, k).size) for k in
                ("on_lower", "below_lower", "above_lower", "on_upper",
                 "above_upper", "below_upper", "inside", "i_sv")}


def _split(alpha, cap, tol):
    zero = alpha <= tol
    full = ~zero & (alpha >= cap - tol)
    mid = ~zero & ~full
    return np.flatnonzero(mid), np.flatnonzero(full), np.flatnonzero(zero)


SV_RULES = ("both", "either")


def classify_support_vectors(model: TrainedModel, tol_sv: Optional[float] = None,
                             rule: str = "both") -> SupportVectorCensus:
    """Sort training points by where their multipliers sit in [0, C].

    For f1: interior multipliers lie on the lower bound, multipliers at C1
    lie below it and zeros lie above it.  For f2 the roles of above and
    below swap.  ``tol_sv`` defaults to 1e-6 * C for each dual.

    ``i_sv`` holds the points with both multipliers positive (``rule="both"``),
    which are the points the fit passes through.  ``rule="either"`` takes the
    union instead; at a converged fit that union is usually every point,
    because each point sits below f1 + eps1 or above f2 - eps2.
    """
    if rule not in SV_RULES:
        raise ValueError(f"unknown support-vector rule {rule!r}; expected one of {SV_RULES}")
    h = model.hyper
    tol1 = 1e-6 * h.c1 if tol_sv is None else tol_sv
    tol2 = 1e-6 * h.c2 if tol_sv is None else tol_sv
    on_lo, below_lo, above_lo = _split(model.alpha_lower, h.c1, tol1)
    on_up, above_up, below_up = _split(model.alpha_upper, h.c2, tol2)
    pos_lo, pos_up = model.alpha_lower > tol1, model.alpha_upper > tol2
    i_sv = np.flatnonzero(pos_lo & pos_up if rule == "both" else pos_lo | pos_up)
    return SupportVectorCensus(on_lo, below_lo, above_lo, on_up, above_up, below_up, i_sv)


def coverage_stats(model: TrainedModel, data: Dataset) -> tuple:
    """Counts of positive, negative and zero residuals y - f(x)."""
    r = data.targets - predict(model, data.inputs)
    zero = np.abs(r) <= ZERO_RESIDUAL
    p = int(np.sum((r > 0) & ~zero))
    n = int(np.sum((r < 0) & ~zero))
    return p, n, int(np.sum(zero))


# -- persistence ------------------------------------------------------------

def _floats(a) -> list:
    return [float(v) for v in np.asarray(a).ravel()]


def model_to_dict(model: TrainedModel) -> dict:
    h = model.hyper
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kernel": h.kernel.to_dict(),
        "hyperparams": h.to_dict(),
        "standardization": model.standardizer.to_dict() if model.standardizer else None,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "alpha_lower": _floats(model.alpha_lower),
        "alpha_upper": _floats(model.alpha_upper),
        "train_inputs": [_floats(row) for row in model.train_inputs],
        "train_targets": _floats(model.train_targets),
        "diagnostics": {
            "lower": model.diagnostics[0].to_dict() if model.diagnostics[0] else None,
            "upper": model.diagnostics[1].to_dict() if model.diagnostics[1] else None,
        },
    }
    cache = model.linear_cache
    if cache is not None:
        u1, u2 = cache
        doc["linear_cache"] = {"w1": _floats(u1[:-1]), "b1": float(u1[-1]),
                               "w2": _floats(u2[:-1]), "b2": float(u2[-1])}
    return doc


def _result_from(d, alpha) -> Optional[SolveResult]:
    if d is None:
        return None
    return SolveResult(alpha=alpha, epochs_run=d["epochs_run"],
                       final_pg_norm=d["final_pg_norm"], objective=d["objective"],
                       converged=d["converged"], degenerate_updates=d.get("degenerate_updates", 0))


def model_from_dict(doc: dict) -> TrainedModel:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema_version {version!r}")
    h = Hyperparams.from_dict(doc["hyperparams"])
    if KernelSpec.from_dict(doc["kernel"]) != h.kernel:
        raise ValueError("kernel entry disagrees with hyperparams.kernel")
    a_lo = np.asarray(doc["alpha_lower"], dtype=np.float64)
    a_up = np.asarray(doc["alpha_upper"], dtype=np.float64)
    X = np.asarray(doc["train_inputs"], dtype=np.float64)
    if X.ndim != 2 or not (X.shape[0] == a_lo.shape[0] == a_up.shape[0]):
        raise ValueError("multiplier and training-input lengths disagree")
    y = np.asarray(doc.get("train_targets") or np.full(X.shape[0], np.nan), dtype=np.float64)
    std = doc.get("standardization")
    diag = doc.get("diagnostics") or {}
    names = doc.get("feature_names")
    return TrainedModel(
        hyper=h, alpha_lower=a_lo, alpha_upper=a_up, train_inputs=X, train_targets=y,
        diagnostics=(_result_from(diag.get("lower"), a_lo), _result_from(diag.get("upper"), a_up)),
        standardizer=Standardizer.from_dict(std) if std else None,
        feature_names=tuple(names) if names else None)


def save_model(model: TrainedModel, path) -> None:
    # json writes floats with repr, which round-trips doubles exactly.  Wall-clock
    # timings are left out so that refitting the same data rewrites the same bytes.
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> TrainedModel:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ValueError(f"{path}: not a model file (no schema_version)")
    return model_from_dict(doc)

