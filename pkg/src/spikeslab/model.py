"""Closed-form pieces of the rescaled spike and slab hierarchy.

Conditional posterior means are generalized ridge estimators with ridge
matrix ``sigma_sq * lambda_n * diag(1/gamma)``.  Gamma laws are shape/rate
throughout.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, linalg

from .errors import DomainError, InputError, QuadratureError, ZeroVarianceError
from .regression import OlsFit, StandardizedDesign


@dataclass(frozen=True)
class PriorConfig:
    v0: float = 0.005
    a1: float = 5.0
    a2: float = 50.0
    b1: float = 0.0001
    b2: float = 0.0001
    lambda_n: float | None = None  # None means lambda_n = n

    def __post_init__(self):
        if not 0.0 < self.v0 < 1.0:
            raise InputError(f"v0 must lie in (0, 1), got {self.v0}")
        for name in ("a1", "a2", "b1", "b2"):
            if not getattr(self, name) > 0.0:
                raise InputError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lambda_n is not None and self.lambda_n < 0.0:
            raise InputError(f"lambda_n must be nonnegative, got {self.lambda_n}")

    def resolve_lambda(self, n):
        return float(n) if self.lambda_n is None else float(self.lambda_n)


@dataclass(frozen=True)
class RescaledResponse:
    y_star: np.ndarray
    sigma_hat: float
    lambda_n: float


def rescale_response(design: StandardizedDesign, fit: OlsFit, prior: PriorConfig | None = None):
    """``Y* = sqrt(n) * Y / sigma_hat`` using the full-model variance estimate."""
    prior = prior or PriorConfig()
    if fit.degenerate:
        raise ZeroVarianceError("cannot rescale the response: full-model residual variance is zero")
    sigma_hat = fit.sigma_hat
    n = design.n
    return RescaledResponse(
        y_star=(np.sqrt(n) / sigma_hat) * design.y,
        sigma_hat=sigma_hat,
        lambda_n=prior.resolve_lambda(n),
    )


def xi_statistic(design: StandardizedDesign, fit: OlsFit) -> np.ndarray:
    """``xi_k = sum_i x_ik y_i / (sigma_hat * sqrt(n))`` on the centered, unrescaled response."""
    if fit.degenerate:
        raise ZeroVarianceError("xi is undefined when the residual variance is zero")
    return design.x.T @ design.y / (fit.sigma_hat * np.sqrt(design.n))


def _as_x(design):
    return design.x if isinstance(design, StandardizedDesign) else np.asarray(design, dtype=float)


def conditional_posterior_mean(design, y_star, gamma, sigma_sq, lambda_n=None) -> np.ndarray:
    """Generalized ridge solution ``(X'X + sigma_sq*lambda_n*G^-1)^-1 X'Y*``.

    ``y_star`` may be a :class:`RescaledResponse` (which supplies
    ``lambda_n``) or a plain vector, in which case ``lambda_n`` defaults to n.
    """
    x = _as_x(design)
    if isinstance(y_star, RescaledResponse):
        lam = y_star.lambda_n if lambda_n is None else lambda_n
        y = y_star.y_star
    else:
        y = np.asarray(y_star, dtype=float)
        lam = float(x.shape[0]) if lambda_n is None else lambda_n
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0.0) or sigma_sq <= 0.0:
        raise DomainError("gamma and sigma_sq must be positive")
    a = x.T @ x
    a[np.diag_indices_from(a)] += sigma_sq * lam / gamma
    return linalg.solve(a, x.T @ y, assume_a="pos")


def penalized_objective(design, y, beta, gamma, sigma_sq, lambda_n) -> float:
    """``||Y - X beta||^2 + lambda_n * sum(sigma_sq * beta_k^2 / gamma_k)``."""
    x = _as_x(design)
    beta = np.asarray(beta, dtype=float)
    r = np.asarray(y, dtype=float) - x @ beta
    return float(r @ r + lambda_n * np.sum(sigma_sq * beta**2 / np.asarray(gamma, dtype=float)))


def ridge_estimate(design, y, gamma, sigma_sq, lambda_n) -> np.ndarray:
    """Minimizer of :func:`penalized_objective` on the raw (centered) response."""
    return conditional_posterior_mean(design, y, gamma, sigma_sq, lambda_n)


# --- hypervariance posterior -------------------------------------------------


def _log_g(u, a1, a2):
    # gamma(a1, rate a2) log density
    return a1 * np.log(a2) - special.gammaln(a1) + (a1 - 1.0) * np.log(u) - a2 * u


def log_hypervariance_density(u, xi, w, prior: PriorConfig):
    """Log of the unnormalized posterior density of a hypervariance given w."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0):
        raise DomainError("hypervariance density is defined for u > 0 only")
    if not 0.0 < w < 1.0:
        raise DomainError(f"w must lie in (0, 1), got {w}")
    v0, a1, a2 = prior.v0, prior.a1, prior.a2
    log_g0 = np.log(v0) - 2.0 * np.log(u) + _log_g(v0 / u, a1, a2)
    log_g1 = -2.0 * np.log(u) + _log_g(1.0 / u, a1, a2)
    mix = np.logaddexp(np.log1p(-w) + log_g0, np.log(w) + log_g1)
    return u * xi**2 / (2.0 * (1.0 + u)) - 0.5 * np.log1p(u) + mix


def hypervariance_density(u, xi, w, prior: PriorConfig | None = None):
    """Unnormalized posterior density of a hypervariance ``u`` given ``w``."""
    prior = prior or PriorConfig()
    return np.exp(log_hypervariance_density(u, xi, w, prior))


def _shifted_integrand(xi, w, prior):
    # on t in (0,1) with u = t/(1-t); divided by exp(xi^2/2) to avoid overflow
    shift = 0.5 * xi**2

    def f(t):
        if t <= 0.0 or t >= 1.0:
            return 0.0
        u = t / (1.0 - t)
        return float(np.exp(log_hypervariance_density(u, xi, w, prior) - shift)) / (1.0 - t) ** 2

    return f


def _breakpoints(prior):
    # modes of the spike and slab components on the t scale
    tau_sq_mode = prior.a2 / (prior.a1 + 1.0)
    pts = []
    for u in (prior.v0 * tau_sq_mode, tau_sq_mode, prior.v0, 1.0):
        pts.append(u / (1.0 + u))
    return sorted(set(pts))


QUAD_TOL = 1e-8


def _integrate(f, lo, hi, prior):
    pts = [p for p in _breakpoints(prior) if lo < p < hi]
    val, err = integrate.quad(f, lo, hi, points=pts or None, limit=400, epsabs=1e-13, epsrel=1e-12)
    return val, err


@functools.lru_cache(maxsize=4096)
def _log_normalizer(xi, w, prior):
    val, err = _integrate(_shifted_integrand(xi, w, prior), 0.0, 1.0, prior)
    if not val > 0.0 or err > QUAD_TOL * max(val, 1.0):
        raise QuadratureError("normalizing integral did not converge", err)
    return float(np.log(val) + 0.5 * xi**2)


@dataclass(frozen=True)
class HypervarianceDensity:
    """Normalized posterior density of one hypervariance, conditional on w."""

    xi: float
    w: float
    prior: PriorConfig = PriorConfig()

    @property
    def log_normalizer(self):
        return _log_normalizer(float(self.xi), float(self.w), self.prior)

    @property
    def normalizer(self):
        return float(np.exp(self.log_normalizer))

    def pdf(self, u):
        return np.exp(log_hypervariance_density(u, self.xi, self.w, self.prior) - self.log_normalizer)

    def cdf(self, t):
        return hypervariance_cdf(t, self.xi, self.w, self.prior)

    def cdf_standardized(self, s):
        """CDF on the ``gamma / (1 + gamma)`` scale."""
        s = np.asarray(s, dtype=float)
        return hypervariance_cdf(s / (1.0 - s), self.xi, self.w, self.prior)


def hypervariance_cdf(t, xi, w, prior: PriorConfig | None = None):
    """Posterior probability that the hypervariance is at most ``t``."""
    prior = prior or PriorConfig()
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0.0):
        raise DomainError("cdf is defined for t > 0 only")
    log_z = _log_normalizer(float(xi), float(w), prior)
    f = _shifted_integrand(float(xi), float(w), prior)
    scale = np.exp(0.5 * xi**2 - log_z)
    out = np.empty_like(ts)
    for i, ti in enumerate(ts):
        if np.isinf(ti):
            out[i] = 1.0
            continue
        upper = ti / (1.0 + ti)
        # integrate the shorter side for accuracy near either end
        if upper <= 0.5:
            val, err = _integrate(f, 0.0, upper, prior)
            p = val * scale
        else:
            val, err = _integrate(f, upper, 1.0, prior)
            p = 1.0 - val * scale
        if err * scale > QUAD_TOL:
            raise QuadratureError(f"cdf integral at t={ti:g} did not converge", err * scale)
        out[i] = min(max(p, 0.0), 1.0)
    return float(out[0]) if scalar else out


# --- fixed-hypervariance limit law -------------------------------------------


def fixed_gamma_limit(gamma0, sigma0_matrix, beta0):
    """Mean and covariance of the limiting law of the fixed-gamma posterior mean.

    With ``M = (Sigma0 + Gamma0^-1)^-1`` the limit is ``N(M Sigma0 beta0,
    M Sigma0 M)``, i.e. mean ``V0^-1 beta0`` and covariance
    ``V0^-1 Sigma0^-1 V0^-T`` for ``V0 = I + Sigma0^-1 Gamma0^-1``.
    """
    gamma0 = np.asarray(gamma0, dtype=float)
    s0 = np.atleast_2d(np.asarray(sigma0_matrix, dtype=float))
    beta0 = np.asarray(beta0, dtype=float)
    if np.any(gamma0 <= 0.0):
        raise DomainError("gamma0 must be positive")
    try:
        linalg.cholesky(s0)
    except linalg.LinAlgError:
        raise InputError("Sigma0 must be positive definite") from None
    a = s0.copy()
    a[np.diag_indices_from(a)] += 1.0 / gamma0
    m = linalg.inv(a, check_finite=True)
    m = 0.5 * (m + m.T)
    mean = m @ s0 @ beta0
    cov = m @ s0 @ m
    return mean, 0.5 * (cov + cov.T)
