"""Datasets, kernels, augmented Gram matrices and the pinball loss."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .dcdm import SolverConfig

KERNELS = ("linear", "gaussian", "wavelet")

# Dense l x l float64 Gram matrices; 20k rows is ~3.2 GB.
DEFAULT_MAX_GRAM_ROWS = 20_000

WAVELET_FREQ = 1.75


class GramTooLargeError(MemoryError):
    pass


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.targets, dtype=np.float64).ravel()
        if x.ndim != 2:
            raise ValueError(f"inputs must be 2-D, got shape {x.shape}")
        if x.shape[0] < 1:
            raise ValueError("dataset needs at least one row")
        if y.shape[0] != x.shape[0]:
            raise ValueError(
                f"{x.shape[0]} input rows but {y.shape[0]} targets")
        if not np.all(np.isfinite(x)):
            raise ValueError("inputs contain non-finite values")
        if not np.all(np.isfinite(y)):
            raise ValueError("targets contain non-finite values")
        names = self.feature_names
        if names is not None:
            names = tuple(str(n) for n in names)
            if len(names) != x.shape[1]:
                raise ValueError(
                    f"{len(names)} feature names for {x.shape[1]} columns")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    def __len__(self):
        return self.n_samples


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice. ``param`` is the Gaussian width or the wavelet dilation."""

    kind: str = "gaussian"
    param: Optional[float] = 1.0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        param = self.param
        if kind == "linear":
            param = None
        else:
            if param is None or not np.isfinite(param) or param <= 0:
                raise ValueError(f"{kind} kernel needs a positive parameter, got {param!r}")
            param = float(param)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "param", param)

    @classmethod
    def linear(cls):
        return cls("linear", None)

    @classmethod
    def gaussian(cls, p: float):
        return cls("gaussian", p)

    @classmethod
    def wavelet(cls, a: float):
        return cls("wavelet", a)

    def with_param(self, param):
        return KernelSpec(self.kind, param)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "param": self.param}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["kind"], d.get("param"))


@dataclass(frozen=True)
class Hyperparams:
    c1: float = 1.0
    c2: float = 1.0
    eps1: float = 0.05
    eps2: float = 0.05
    tau: float = 0.5
    kernel: KernelSpec = field(default_factory=KernelSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        for name in ("c1", "c2", "eps1", "eps2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be positive, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau!r}")
        object.__setattr__(self, "tau", float(self.tau))

    def mirrored(self) -> "Hyperparams":
        """Parameters of the problem obtained by negating the targets."""
        return Hyperparams(c1=self.c2, c2=self.c1, eps1=self.eps2, eps2=self.eps1,
                           tau=1.0 - self.tau, kernel=self.kernel, solver=self.solver)

    def to_dict(self) -> dict:
        return {
            "c1": self.c1, "c2": self.c2, "eps1": self.eps1, "eps2": self.eps2,
            "tau": self.tau, "kernel": self.kernel.to_dict(),
            "solver": self.solver.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(c1=d["c1"], c2=d["c2"], eps1=d["eps1"], eps2=d["eps2"],
                   tau=d["tau"], kernel=KernelSpec.from_dict(d["kernel"]),
                   solver=SolverConfig.from_dict(d.get("solver", {})))


@dataclass(frozen=True)
class AugmentedGram:
    """K(A, A^T) + ee^T, with its diagonal cached for the solver."""

    matrix: np.ndarray
    diag: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def kernel_eval(spec: KernelSpec, x, z) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    z = np.asarray(z, dtype=np.float64).ravel()
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {z.shape[0]}")
    if spec.kind == "linear":
        return float(x @ z)
    diff = x - z
    if spec.kind == "gaussian":
        return float(np.exp(-(diff @ diff) / (2.0 * spec.param ** 2)))
    a = spec.param
    return float(np.prod(np.cos(WAVELET_FREQ * diff / a) * np.exp(-diff ** 2 / (2.0 * a * a))))


def kernel_matrix(spec: KernelSpec, X, Z) -> np.ndarray:
    """Kernel values between every row of ``X`` and every row of ``Z``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    if X.shape[1] != Z.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]} features")
    if spec.kind == "linear":
        return X @ Z.T
    if spec.kind == "gaussian":
        # cdist sums (x_d - z_d)^2 per pair, so identical rows give exactly 0
        sq = cdist(X, Z, "sqeuclidean")
        return np.exp(-sq / (2.0 * spec.param ** 2))
    a = spec.param
    K = np.ones((X.shape[0], Z.shape[0]))
    for d in range(X.shape[1]):
        D = X[:, d][:, None] - Z[:, d][None, :]
        K *= np.cos(WAVELET_FREQ * D / a) * np.exp(-D * D / (2.0 * a * a))
    return K


def build_augmented_gram(data: Dataset, spec: KernelSpec,
                         max_rows: int = DEFAULT_MAX_GRAM_ROWS) -> AugmentedGram:
    l = data.n_samples
    if l > max_rows:
        raise GramTooLargeError(
            f"{l} samples exceeds the dense Gram cap of {max_rows} rows "
            f"(~{8 * l * l / 1e9:.1f} GB); raise max_rows explicitly to proceed")
    M = kernel_matrix(spec, data.inputs, data.inputs)
    if spec.kind == "linear":
        # BLAS need not return an exactly symmetric X X^T
        M = 0.5 * (M + M.T)
    M += 1.0
    M.setflags(write=False)
    diag = np.ascontiguousarray(np.diag(M))
    diag.setflags(write=False)
    return AugmentedGram(M, diag)


def pinball_loss(r, tau: float):
    """Check loss: tau*r for r > 0, -(1 - tau)*r otherwise. Works elementwise."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
    r = np.asarray(r, dtype=np.float64)
    out = np.where(r > 0, tau * r, -(1.0 - tau) * r)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Standardizer:
    """Per-feature zero-mean, unit-variance scaling fit on a training split."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, inputs) -> "Standardizer":
        X = np.asarray(inputs, dtype=np.float64)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        # constant columns are centred only
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def transform(self, inputs) -> np.ndarray:
        X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if X.shape[1] != self.mean.shape[0]:
            raise ValueError(
                f"dimension mismatch: {X.shape[1]} vs {self.mean.shape[0]} features")
        return (X - self.mean) / self.scale

    def apply(self, data: Dataset) -> Dataset:
        return Dataset(self.transform(data.inputs), data.targets, data.feature_names)

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean],
                "scale": [float(v) for v in self.scale]}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=np.float64),
                   np.asarray(d["scale"], dtype=np.float64))


def as_matrix(x, n_features: int) -> np.ndarray:
    """Coerce a single query vector or a batch of queries to shape (m, n)."""
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(1, -1) if X.shape[0] == n_features else X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(
            f"dimension mismatch: expected {n_features} features, got shape {np.shape(x)}")
    return X


def names_or_default(names: Optional[Sequence[str]], n: int) -> list:
    if names:
        return list(names)
    return [f"x{i}" for i in range(n)]
