"""Standardization, least squares fits and design diagnostics.

Every other module consumes a :class:`StandardizedDesign`: covariates
centered with ``sum(x) = 0`` and ``sum(x**2) = n`` per column, response
centered.  The intercept is never materialized as a column.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateColumnError,
    DimensionError,
    InputError,
    RankDeficiencyError,
    ZeroVarianceError,
)

# relative singular-value cutoff for declaring rank deficiency
RANK_TOL = 1e-10


@dataclass(frozen=True)
class RawDataset:
    x: np.ndarray
    y: np.ndarray
    column_names: list = field(default_factory=list)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape[0] != y.shape[0]:
            raise DimensionError(f"x has {x.shape[0]} rows but y has {y.shape[0]} entries")
        names = list(self.column_names) or [f"x{k + 1}" for k in range(x.shape[1])]
        if len(names) != x.shape[1]:
            raise DimensionError(f"{len(names)} column names for {x.shape[1]} columns")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def K(self):
        return self.x.shape[1]


@dataclass(frozen=True)
class StandardizedDesign:
    x: np.ndarray
    y: np.ndarray
    centers: np.ndarray
    scales: np.ndarray
    y_mean: float
    column_names: list

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def K(self):
        return self.x.shape[1]

    def to_original_coefficients(self, beta):
        """Map coefficients on the standardized scale back to raw units."""
        return np.asarray(beta, dtype=float) / self.scales

    def from_original_coefficients(self, beta):
        return np.asarray(beta, dtype=float) * self.scales

    def subset(self, columns):
        """Design restricted to (or reordered by) ``columns``."""
        columns = np.asarray(columns, dtype=int)
        return StandardizedDesign(
            x=self.x[:, columns],
            y=self.y,
            centers=self.centers[columns],
            scales=self.scales[columns],
            y_mean=self.y_mean,
            column_names=[self.column_names[k] for k in columns],
        )


@dataclass(frozen=True)
class OlsFit:
    beta_hat: np.ndarray
    sigma_hat_sq: float
    sigma_n: np.ndarray
    sigma_n_inv: np.ndarray
    s_diag: np.ndarray
    n: int

    @property
    def sigma_hat(self):
        return float(np.sqrt(self.sigma_hat_sq))

    @property
    def degenerate(self):
        return self.sigma_hat_sq <= 0.0

    @property
    def z_stats(self):
        """Full-model Z-statistics ``sqrt(n) * beta / (sigma_hat * sqrt(s_kk))``."""
        if self.degenerate:
            raise ZeroVarianceError("residual variance is zero; Z-statistics are undefined")
        return np.sqrt(self.n) * self.beta_hat / (self.sigma_hat * np.sqrt(self.s_diag))


def standardize(raw: RawDataset) -> StandardizedDesign:
    """Center and rescale covariates so each column has mean 0 and ``sum(x**2) = n``."""
    n, K = raw.x.shape
    if n <= K:
        raise DimensionError(f"need n > K, got n={n}, K={K}")
    x = raw.x
    centers = x.mean(axis=0)
    xc = x - centers
    scales = np.sqrt((xc**2).sum(axis=0) / n)
    for k in range(K):
        if scales[k] == 0.0 or scales[k] <= 1e-14 * max(1.0, np.abs(x[:, k]).max()):
            raise DegenerateColumnError(raw.column_names[k])
    # columns already meeting the centering/scaling condition pass through untouched
    done = (np.abs(x.sum(axis=0)) <= 1e-12 * n) & (np.abs((x**2).sum(axis=0) - n) <= 1e-12 * n)
    centers = np.where(done, 0.0, centers)
    scales = np.where(done, 1.0, scales)
    xs = (x - centers) / scales
    y_mean = float(raw.y.mean())
    return StandardizedDesign(
        x=xs,
        y=raw.y - y_mean,
        centers=centers,
        scales=scales,
        y_mean=y_mean,
        column_names=list(raw.column_names),
    )


def _check_rank(s, ncols, what):
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size else 0
    if rank < ncols:
        raise RankDeficiencyError(rank, ncols, what)


def fit_ols(design: StandardizedDesign) -> OlsFit:
    x, y = design.x, design.y
    n, K = x.shape
    if n <= K:
        raise DimensionError(f"need n > K, got n={n}, K={K}")
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    _check_rank(s, K, "design")
    beta = vt.T @ ((u.T @ y) / s)
    resid = y - x @ beta
    rss = float(resid @ resid)
    sigma_hat_sq = rss / (n - K)
    # exact fits leave round-off residue; treat it as zero
    if sigma_hat_sq <= 1e-24 * max(float(y @ y) / n, np.finfo(float).tiny):
        sigma_hat_sq = 0.0
    sigma_n = x.T @ x / n
    sigma_n_inv = (vt.T * (n / s**2)) @ vt
    sigma_n_inv = 0.5 * (sigma_n_inv + sigma_n_inv.T)
    return OlsFit(
        beta_hat=beta,
        sigma_hat_sq=sigma_hat_sq,
        sigma_n=sigma_n,
        sigma_n_inv=sigma_n_inv,
        s_diag=np.diag(sigma_n_inv).copy(),
        n=n,
    )


def restricted_ols(design: StandardizedDesign, model) -> np.ndarray:
    """Least squares on the selected columns; zeros elsewhere."""
    model = np.asarray(model).astype(bool)
    if model.shape != (design.K,):
        raise DimensionError(f"model indicator has shape {model.shape}, expected ({design.K},)")
    beta = np.zeros(design.K)
    if not model.any():
        return beta
    xs = design.x[:, model]
    u, s, vt = np.linalg.svd(xs, full_matrices=False)
    _check_rank(s, xs.shape[1], "selected submatrix")
    beta[model] = vt.T @ ((u.T @ design.y) / s)
    return beta


def restricted_z_stats(design: StandardizedDesign, model, sigma_hat) -> np.ndarray:
    """Z-statistics of the restricted OLS fit, zero outside the model.

    The full-model ``sigma_hat`` is used so that values are comparable
    across rules.
    """
    model = np.asarray(model).astype(bool)
    z = np.zeros(design.K)
    if not model.any():
        return z
    beta = restricted_ols(design, model)[model]
    xs = design.x[:, model]
    n = design.n
    s_kk = np.diag(np.linalg.inv(xs.T @ xs / n))
    z[model] = np.sqrt(n) * beta / (sigma_hat * np.sqrt(s_kk))
    return z


def quadratic_expand(raw: RawDataset, binary_columns=()) -> RawDataset:
    """Main effects, all pairwise products ``a.b`` and squares ``a.2`` of non-binary columns."""
    names = raw.column_names
    if len(set(names)) != len(names):
        dupes = sorted({c for c in names if names.count(c) > 1})
        raise InputError(f"duplicate column labels: {dupes}")
    binary = set(binary_columns)
    unknown = binary - set(names)
    if unknown:
        raise InputError(f"binary columns not in dataset: {sorted(unknown)}")
    x = raw.x
    cols = [x[:, k] for k in range(raw.K)]
    out_names = list(names)
    for i, j in itertools.combinations(range(raw.K), 2):
        cols.append(x[:, i] * x[:, j])
        out_names.append(f"{names[i]}.{names[j]}")
    for k, name in enumerate(names):
        if name not in binary:
            cols.append(x[:, k] ** 2)
            out_names.append(f"{name}.2")
    return RawDataset(x=np.column_stack(cols), y=raw.y.copy(), column_names=out_names)


@dataclass(frozen=True)
class DesignReport:
    """Diagnostics for the design conditions. Never fatal."""

    column_sum_residual: float
    column_ss_residual: float
    response_sum_residual: float
    max_row_norm_ratio: float
    min_eigenvalue: float
    max_eigenvalue: float
    condition_number: float

    @property
    def standardized(self):
        return max(self.column_sum_residual, self.column_ss_residual) <= 1e-8

    def as_dict(self):
        return {k: float(v) for k, v in self.__dict__.items()}


def check_design_conditions(design: StandardizedDesign) -> DesignReport:
    x = design.x
    n = x.shape[0]
    eig = np.linalg.eigvalsh(x.T @ x / n)
    lo, hi = float(eig[0]), float(eig[-1])
    lo_clipped = max(lo, 0.0)
    return DesignReport(
        column_sum_residual=float(np.abs(x.sum(axis=0)).max() / n),
        column_ss_residual=float(np.abs((x**2).sum(axis=0) - n).max() / n),
        response_sum_residual=float(abs(design.y.sum()) / n),
        max_row_norm_ratio=float(np.linalg.norm(x, axis=1).max() / np.sqrt(n)),
        min_eigenvalue=lo,
        max_eigenvalue=hi,
        condition_number=float(hi / lo_clipped) if lo_clipped > 0 else float("inf"),
    )


def read_csv(path, response, columns=None) -> RawDataset:
    """Load a numeric CSV with a header row.

    Raises :class:`InputError` naming the 1-based file row for any
    malformed or missing value.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if response not in header:
            raise InputError(f"{path}: response column {response!r} not in header")
        width = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise InputError(f"{path}: row {lineno} has {len(row)} fields, expected {width}")
            try:
                vals = [float(c) if c.strip() else float("nan") for c in row]
            except ValueError as exc:
                raise InputError(f"{path}: row {lineno}: {exc}") from None
            if not np.all(np.isfinite(vals)):
                raise InputError(f"{path}: row {lineno} has a missing or non-finite value")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    data = np.array(rows)
    yi = header.index(response)
    names = [h for h in header if h != response] if columns is None else list(columns)
    idx = [header.index(c) for c in names]
    return RawDataset(x=data[:, idx], y=data[:, yi], column_names=names)
