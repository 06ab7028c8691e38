"""SVS Gibbs sampler for the rescaled spike and slab model.

One sweep updates, in order: coefficients (jointly or in blocks),
spike/slab indicators, slab precisions, the complexity weight ``w`` and the
error precision; the hypervariances are then ``gamma = indicator * tau_sq``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import InputError, SamplerError
from .model import PriorConfig, RescaledResponse
from .regression import StandardizedDesign


@dataclass(frozen=True)
class GibbsConfig:
    burn_in: int = 2500
    samples: int = 5000
    thin: int = 1
    seed: int = 0
    block_size: int | None = None  # None: joint coefficient update
    null_draws: bool = True
    keep_trace: bool = True

    def __post_init__(self):
        if self.samples < 100:
            raise InputError(f"samples must be at least 100, got {self.samples}")
        if self.thin < 1:
            raise InputError(f"thin must be >= 1, got {self.thin}")
        if self.burn_in < 0:
            raise InputError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.block_size is not None and self.block_size < 1:
            raise InputError(f"block_size must be >= 1, got {self.block_size}")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must be a 64-bit unsigned value")


@dataclass(frozen=True)
class GibbsState:
    beta: np.ndarray
    indicator: np.ndarray
    tau_sq: np.ndarray
    w: float
    sigma_sq: float

    @property
    def gamma(self):
        return self.indicator * self.tau_sq


@dataclass(frozen=True)
class SamplerData:
    """Cross-products shared by every sweep of one chain."""

    x: np.ndarray
    y_star: np.ndarray
    xtx: np.ndarray
    xty: np.ndarray
    lambda_n: float
    sigma_n_chol: np.ndarray | None

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def K(self):
        return self.x.shape[1]

    @classmethod
    def build(cls, design, y_star: RescaledResponse):
        x = design.x if isinstance(design, StandardizedDesign) else np.asarray(design, dtype=float)
        xtx = x.T @ x
        n = x.shape[0]
        try:
            chol = linalg.cholesky(xtx / n, lower=True)
        except linalg.LinAlgError:
            chol = None
        return cls(
            x=x,
            y_star=y_star.y_star,
            xtx=xtx,
            xty=x.T @ y_star.y_star,
            lambda_n=y_star.lambda_n,
            sigma_n_chol=chol,
        )


@dataclass(frozen=True)
class PosteriorSummary:
    beta_star: np.ndarray
    shrink_mean: np.ndarray
    shrink_sq_mean: np.ndarray
    sigma_sq_samples: np.ndarray
    w_samples: np.ndarray
    null_draws: np.ndarray
    beta_draws: np.ndarray | None = None
    gamma_mean: np.ndarray | None = None
    column_names: list = field(default_factory=list)

    @property
    def K(self):
        return self.beta_star.shape[0]

    def to_dict(self, coverage=0.90):
        names = self.column_names or [f"x{k + 1}" for k in range(self.K)]
        intervals = null_intervals(self, coverage) if self.null_draws.size else None
        s2 = self.sigma_sq_samples
        coords = []
        for k, name in enumerate(names):
            entry = {
                "name": name,
                "beta_star": float(self.beta_star[k]),
                "shrink_mean": float(self.shrink_mean[k]),
                "shrink_sq_mean": float(self.shrink_sq_mean[k]),
            }
            if intervals is not None:
                entry["null_interval"] = [float(intervals[k, 0]), float(intervals[k, 1])]
            coords.append(entry)
        return {
            "coefficients": coords,
            "null_coverage": coverage,
            "sigma_sq": {
                "mean": float(s2.mean()),
                "sd": float(s2.std(ddof=1)),
                "quantiles": {
                    str(q): float(v) for q, v in zip((0.05, 0.5, 0.95), np.quantile(s2, (0.05, 0.5, 0.95)))
                },
            },
            "w": {"mean": float(self.w_samples.mean()), "sd": float(self.w_samples.std(ddof=1))},
            "retained": int(s2.size),
        }

    def write_json(self, path, coverage=0.90, extra=None):
        payload = self.to_dict(coverage)
        if extra:
            payload = {**extra, **payload}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_trace(self, path):
        if self.beta_draws is None:
            raise InputError("chain was run without keep_trace; no draws to export")
        names = self.column_names or [f"x{k + 1}" for k in range(self.K)]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iteration", "sigma_sq", "w"] + [f"beta.{c}" for c in names])
            for i in range(self.beta_draws.shape[0]):
                row = [self.sigma_sq_samples[i], self.w_samples[i], *self.beta_draws[i]]
                wr.writerow([i] + [f"{v:.17g}" for v in row])


# --- full conditionals -------------------------------------------------------


def _chol_draw(a, rhs, scale, rng):
    """Draw from N(a^-1 rhs, scale * a^-1) for symmetric positive definite ``a``."""
    try:
        c = linalg.cholesky(a, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise SamplerError("coefficient precision matrix is not positive definite") from None
    mean = linalg.cho_solve((c, True), rhs, check_finite=False)
    z = rng.standard_normal(a.shape[0])
    return mean + np.sqrt(scale) * linalg.solve_triangular(c, z, lower=True, trans="T", check_finite=False)


def draw_beta(state: GibbsState, data: SamplerData, rng) -> np.ndarray:
    """Joint coefficient draw given the hypervariances and error variance.

    The conditional precision is ``(X'X + s2*lam*G^-1) / (s2*lam)``; the mean
    is the generalized ridge estimate.
    """
    ridge = state.sigma_sq * data.lambda_n
    a = data.xtx.copy()
    a[np.diag_indices_from(a)] += ridge / state.gamma
    return _chol_draw(a, data.xty, ridge, rng)


def block_partition(K, block_size):
    return [np.arange(s, min(s + block_size, K)) for s in range(0, K, block_size)]


def draw_beta_blocked(state: GibbsState, data: SamplerData, rng, block_size) -> np.ndarray:
    """Coefficient update in contiguous blocks, each conditioned on the rest."""
    K = data.K
    if not 1 <= block_size <= K:
        raise InputError(f"block_size must be in [1, {K}], got {block_size}")
    ridge = state.sigma_sq * data.lambda_n
    beta = state.beta.copy()
    gamma = state.gamma
    for idx in block_partition(K, block_size):
        a = data.xtx[np.ix_(idx, idx)].copy()
        a[np.diag_indices_from(a)] += ridge / gamma[idx]
        # X_j'(Y* - X_{-j} beta_{-j}) from the stored cross-products
        rhs = data.xty[idx] - data.xtx[idx] @ beta + data.xtx[np.ix_(idx, idx)] @ beta[idx]
        beta[idx] = _chol_draw(a, rhs, ridge, rng)
    return beta


def indicator_probabilities(beta, tau_sq, w, prior: PriorConfig):
    """Conditional probability that each indicator sits at the spike value v0."""
    v0 = prior.v0
    b2 = beta**2 / (2.0 * tau_sq)
    log_w1 = np.log1p(-w) - 0.5 * np.log(v0) - b2 / v0
    log_w2 = np.log(w) - b2
    m = np.maximum(log_w1, log_w2)
    p1 = np.exp(log_w1 - m)
    p2 = np.exp(log_w2 - m)
    return p1 / (p1 + p2)


def draw_indicators(beta, tau_sq, w, prior: PriorConfig, rng):
    p_spike = indicator_probabilities(beta, tau_sq, w, prior)
    spike = rng.random(beta.shape[0]) < p_spike
    return np.where(spike, prior.v0, 1.0)


def draw_tau_sq(beta, indicator, prior: PriorConfig, rng):
    """Slab variances via ``tau^-2 ~ Gamma(a1 + 1/2, a2 + beta^2 / (2 * indicator))``."""
    rate = prior.a2 + beta**2 / (2.0 * indicator)
    precision = rng.gamma(prior.a1 + 0.5, 1.0 / rate)
    return 1.0 / precision


def draw_w(indicator, prior: PriorConfig, rng):
    n_slab = int(np.sum(indicator == 1.0))
    n_spike = indicator.shape[0] - n_slab
    return float(rng.beta(1.0 + n_slab, 1.0 + n_spike))


def draw_sigma_sq(beta, data: SamplerData, prior: PriorConfig, rng):
    """Error variance via ``sigma^-2 ~ Gamma(b1 + n/2, b2 + ||Y* - X beta||^2 / (2 lambda_n))``."""
    r = data.y_star - data.x @ beta
    rate = prior.b2 + float(r @ r) / (2.0 * data.lambda_n)
    return 1.0 / rng.gamma(prior.b1 + 0.5 * data.n, 1.0 / rate)


def gibbs_sweep(state, design, y_star, prior, rng, *, block_size=None, data=None, sweep=None):
    """One full sweep of the sampler; returns the new state."""
    if data is None:
        data = SamplerData.build(design, y_star)
    _check_finite(state.gamma, "hypervariance is not a positive finite value", sweep, positive=True)
    if block_size is None or block_size >= data.K:
        beta = draw_beta(state, data, rng)
    else:
        beta = draw_beta_blocked(state, data, rng, block_size)
    _check_finite(beta, "non-finite coefficient draw", sweep)
    indicator = draw_indicators(beta, state.tau_sq, state.w, prior, rng)
    tau_sq = draw_tau_sq(beta, indicator, prior, rng)
    _check_finite(tau_sq, "non-finite slab variance draw", sweep, positive=True)
    w = draw_w(indicator, prior, rng)
    sigma_sq = draw_sigma_sq(beta, data, prior, rng)
    if not (np.isfinite(sigma_sq) and sigma_sq > 0.0):
        raise SamplerError("non-finite error variance draw", sweep=sweep)
    return GibbsState(beta=beta, indicator=indicator, tau_sq=tau_sq, w=w, sigma_sq=sigma_sq)


def _check_finite(v, msg, sweep, positive=False):
    bad = ~np.isfinite(v)
    if positive:
        bad |= v <= 0.0
    if bad.any():
        raise SamplerError(msg, coordinate=int(np.flatnonzero(bad)[0]), sweep=sweep)


def sample_null_reference(state: GibbsState, design, rng, data: SamplerData | None = None):
    """One draw from ``N(0, sigma^2 V Sigma_n V)`` with ``V = (Sigma_n + G^-1)^-1``."""
    if data is None:
        x = design.x if isinstance(design, StandardizedDesign) else np.asarray(design, dtype=float)
        n = x.shape[0]
        xtx = x.T @ x
        try:
            chol = linalg.cholesky(xtx / n, lower=True)
        except linalg.LinAlgError:
            chol = None
    else:
        n, xtx, chol = data.n, data.xtx, data.sigma_n_chol
    sigma_n = xtx / n
    if chol is None:
        # positive semidefinite square root for a singular Sigma_n
        vals, vecs = linalg.eigh(0.5 * (sigma_n + sigma_n.T))
        if vals.min() < -1e-10 * max(vals.max(), 1.0):
            raise SamplerError("null covariance is not positive semidefinite")
        chol = vecs * np.sqrt(np.clip(vals, 0.0, None))
    a = sigma_n.copy()
    a[np.diag_indices_from(a)] += 1.0 / state.gamma
    z = chol @ rng.standard_normal(a.shape[0])
    try:
        c = linalg.cho_factor(a, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise SamplerError("Sigma_n + G^-1 is not positive definite") from None
    return np.sqrt(state.sigma_sq) * linalg.cho_solve(c, z, check_finite=False)


def null_intervals(summary: PosteriorSummary, coverage=0.90):
    """Equal-tailed per-coordinate intervals of the null reference draws, shape (K, 2)."""
    draws = summary.null_draws
    if draws.size == 0:
        raise InputError("summary holds no null reference draws")
    if not 0.0 < coverage <= 1.0:
        raise InputError(f"coverage must lie in (0, 1], got {coverage}")
    tail = 0.5 * (1.0 - coverage)
    lo = np.quantile(draws, tail, axis=0)
    hi = np.quantile(draws, 1.0 - tail, axis=0)
    return np.column_stack([lo, hi])


def initial_state(data: SamplerData, prior: PriorConfig, rng) -> GibbsState:
    K = data.K
    a = data.xtx.copy()
    a[np.diag_indices_from(a)] += 1e-8 * max(1.0, np.trace(a) / K)
    beta = linalg.solve(a, data.xty, assume_a="pos")
    tau_sq = 1.0 / rng.gamma(prior.a1, 1.0 / prior.a2, size=K)
    return GibbsState(beta=beta, indicator=np.ones(K), tau_sq=tau_sq, w=0.5, sigma_sq=1.0)


def run_chain(design, y_star: RescaledResponse, prior: PriorConfig | None = None,
              config: GibbsConfig | None = None, *, state: GibbsState | None = None) -> PosteriorSummary:
    """Run burn-in, then ``config.samples`` sweeps keeping every ``thin``-th.

    Deterministic given ``config.seed``.
    """
    prior = prior or PriorConfig()
    config = config or GibbsConfig()
    data = SamplerData.build(design, y_star)
    K = data.K
    if config.block_size is not None and config.block_size > K:
        raise InputError(f"block_size {config.block_size} exceeds K={K}")
    rng = np.random.default_rng(config.seed)
    if state is None:
        state = initial_state(data, prior, rng)
    block = config.block_size
    for it in range(config.burn_in):
        state = gibbs_sweep(state, None, None, prior, rng, block_size=block, data=data, sweep=it)

    n_keep = -(-config.samples // config.thin)
    betas = np.empty((n_keep, K))
    nulls = np.empty((n_keep, K)) if config.null_draws else np.empty((0, K))
    shrink = np.zeros(K)
    shrink_sq = np.zeros(K)
    gamma_sum = np.zeros(K)
    s2 = np.empty(n_keep)
    ws = np.empty(n_keep)
    j = 0
    for it in range(config.samples):
        sweep = config.burn_in + it
        state = gibbs_sweep(state, None, None, prior, rng, block_size=block, data=data, sweep=sweep)
        if it % config.thin:
            continue
        g = state.gamma
        d = g / (1.0 + g)
        betas[j] = state.beta
        shrink += d
        shrink_sq += d * d
        gamma_sum += g
        s2[j] = state.sigma_sq
        ws[j] = state.w
        if config.null_draws:
            nulls[j] = sample_null_reference(state, None, rng, data=data)
        j += 1

    names = list(design.column_names) if isinstance(design, StandardizedDesign) else []
    return PosteriorSummary(
        beta_star=betas.mean(axis=0),
        shrink_mean=shrink / n_keep,
        shrink_sq_mean=shrink_sq / n_keep,
        sigma_sq_samples=s2,
        w_samples=ws,
        null_draws=nulls,
        beta_draws=betas if config.keep_trace else None,
        gamma_mean=gamma_sum / n_keep,
        column_names=names,
    )


def batch_means_se(draws, n_batches=50):
    """Monte Carlo standard error of the mean of each column by batch means."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    m = draws.shape[0] // n_batches
    if m < 1:
        raise InputError("too few draws for batch means")
    batches = draws[: m * n_batches].reshape(n_batches, m, -1).mean(axis=1)
    return batches.std(axis=0, ddof=1) / np.sqrt(n_batches)
