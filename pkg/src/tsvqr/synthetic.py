"""Seeded generators for the benchmark regression families and the sinc example.

Randomness comes from numpy's PCG64 bit generator.  Each dataset spawns
independent child streams from ``SeedSequence(seed)`` in a fixed order:
stream 0 draws test inputs, stream 1 training noise, stream 2 test noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import norm

from .core import Dataset

FAMILIES = ("A1", "A2", "A3", "B1", "B2", "B3", "Sinc")

# (n_train, n_test) per family
DEFAULT_COUNTS = {
    "A1": (401, 400), "A2": (401, 400), "A3": (405, 400),
    "B1": (801, 161), "B2": (801, 161), "B3": (805, 400),
    "Sinc": (500, 500),
}

DOMAINS = {f: (-4.0, 4.0) for f in FAMILIES}
DOMAINS["Sinc"] = (-1.0, 1.0)


def _rng(ss: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(ss))


def noise(family: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """Raw noise draws for a family (before any input-dependent scaling)."""
    if family == "A1":
        return rng.chisquare(3, size)
    if family == "A2":
        return rng.chisquare(5, size)
    if family in ("A3", "B3"):
        return rng.laplace(0.0, 1.0, size)
    if family == "B1":
        return rng.normal(0.3, 0.6, size)
    if family == "B2":
        return rng.normal(0.5, 0.8, size)
    if family == "Sinc":
        return rng.standard_normal(size)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def sinc_sigma(x):
    return 0.1 * np.exp(1.0 + np.asarray(x, dtype=np.float64))


def response(family: str, x, xi=None) -> np.ndarray:
    """Family response at ``x`` given noise ``xi``; ``xi=None`` gives the noiseless curve."""
    x = np.asarray(x, dtype=np.float64)
    xi = np.zeros_like(x) if xi is None else np.asarray(xi, dtype=np.float64)
    if family.startswith("A"):
        return (1.0 - x + 2.0 * x ** 2) * np.exp(-0.5 * x ** 2) + 0.2 * (1.0 + 0.2 * x) * xi
    if family.startswith("B"):
        s = np.sin(0.5 * np.pi - x)
        return 6.0 * s + 3.0 * s * xi
    if family == "Sinc":
        # np.sinc(2x) = sin(2 pi x) / (2 pi x), equal to 1 at x = 0
        return np.sinc(2.0 * x) + sinc_sigma(x) * xi
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    n_train: Optional[int] = None
    n_test: Optional[int] = None
    seed: int = 0
    noise: bool = True

    def __post_init__(self):
        fam = {f.lower(): f for f in FAMILIES}.get(str(self.family).lower())
        if fam is None:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        n_tr, n_te = DEFAULT_COUNTS[fam]
        n_tr = n_tr if self.n_train is None else int(self.n_train)
        n_te = n_te if self.n_test is None else int(self.n_test)
        if n_tr < 1 or n_te < 1:
            raise ValueError("sample counts must be >= 1")
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "n_train", n_tr)
        object.__setattr__(self, "n_test", n_te)
        object.__setattr__(self, "seed", int(self.seed))


def generate(spec: GeneratorSpec):
    """Training inputs on an even grid over the domain, test inputs uniform at random."""
    lo, hi = DOMAINS[spec.family]
    s_xtest, s_ntrain, s_ntest = np.random.SeedSequence(spec.seed).spawn(3)
    x_train = np.linspace(lo, hi, spec.n_train)
    x_test = _rng(s_xtest).uniform(lo, hi, spec.n_test)
    if spec.noise:
        xi_train = noise(spec.family, spec.n_train, _rng(s_ntrain))
        xi_test = noise(spec.family, spec.n_test, _rng(s_ntest))
    else:
        xi_train = xi_test = None
    names = ("x",)
    train = Dataset(x_train[:, None], response(spec.family, x_train, xi_train), names)
    test = Dataset(x_test[:, None], response(spec.family, x_test, xi_test), names)
    return train, test


def sinc_quantile_oracle(x, tau: float):
    """Conditional tau-quantile of the heteroscedastic sinc model."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
    x = np.asarray(x, dtype=np.float64)
    out = np.sinc(2.0 * x) + sinc_sigma(x) * norm.ppf(tau)
    return float(out) if out.ndim == 0 else out


def generate_sinc(n: int, seed: int = 0, grid: bool = False) -> Dataset:
    """``n`` noisy sinc samples, x uniform on [-1, 1] (or an even grid)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    s_x, s_noise = np.random.SeedSequence(seed).spawn(2)
    x = np.linspace(-1.0, 1.0, n) if grid else _rng(s_x).uniform(-1.0, 1.0, n)
    xi = _rng(s_noise).standard_normal(n)
    return Dataset(x[:, None], response("Sinc", x, xi), ("x",))


def write_csv(data: Dataset, path, target_name: str = "target") -> None:
    names = data.feature_names or tuple(f"x{i}" for i in range(data.n_features))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + [target_name])
        for row, y in zip(data.inputs, data.targets):
            w.writerow([repr(float(v)) for v in row] + [repr(float(y))])


def read_csv(path, target_col: Optional[str] = None) -> Dataset:
    """Read a dataset CSV: header row, numeric columns, target last unless named.

    Malformed rows raise ``ValueError`` naming the 1-based line number.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise ValueError(f"{path}:1: need at least one feature column and a target column")
    if target_col is None:
        t = len(header) - 1
    else:
        if target_col not in header:
            raise ValueError(f"{path}:1: no column named {target_col!r}")
        t = header.index(target_col)
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        try:
            values.append([float(c) for c in row])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric value in row {row!r}") from None
    if not values:
        raise ValueError(f"{path}: no data rows")
    M = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(M), axis=1))[0]) + 2
        raise ValueError(f"{path}:{bad}: non-finite value")
    feats = [j for j in range(len(header)) if j != t]
    return Dataset(M[:, feats], M[:, t], tuple(header[j] for j in feats))


def read_features_csv(path, n_features: int, target_col: Optional[str] = None):
    """Read query inputs; a trailing (or named) target column is allowed and returned."""
    path = Path(path)
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if header is None:
        raise ValueError(f"{path}: empty file")
    if len(header) == n_features + 1 or target_col is not None:
        ds = read_csv(path, target_col)
        if ds.n_features != n_features:
            raise ValueError(f"{path}: {ds.n_features} feature columns, model expects {n_features}")
        return ds.inputs, ds.targets
    if len(header) != n_features:
        raise ValueError(f"{path}: {len(header)} columns, model expects {n_features} features")
    # feature-only file: reuse the parser with a dummy target column
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != n_features:
            raise ValueError(f"{path}:{lineno}: expected {n_features} columns, got {len(row)}")
        try:
            out.append([float(c) for c in row])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric value in row {row!r}") from None
    if not out:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(out, dtype=np.float64), None
