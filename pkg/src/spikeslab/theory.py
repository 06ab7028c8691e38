"""Closed-form limit laws and Monte Carlo checks of the asymptotic results.

The complexity pmfs describe the limiting number of selected coefficients
for backward, forward and hard-threshold selection in an orthogonal design
whose coordinates are ordered with the ``k0`` signals first.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .bench import SimulationSpec, chain_seed, gen_breiman, misclassification_curve
from .errors import InputError
from .gibbs import GibbsConfig, run_chain
from .model import PriorConfig, conditional_posterior_mean, fixed_gamma_limit, rescale_response, ridge_estimate
from .regression import fit_ols, standardize
from .selection import AlphaSchedule, backward_k, forward_k, stepwise_zstats, z_critical

PMF_RULES = ("backward", "forward", "olshard")


@dataclass(frozen=True)
class ComplexityPmf:
    rule: str
    probs: np.ndarray  # index k = 0..K
    K: int
    k0: int

    def __post_init__(self):
        if self.rule not in PMF_RULES:
            raise InputError(f"unknown rule {self.rule!r}")
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (self.K + 1,):
            raise InputError(f"probs must have K+1={self.K + 1} entries")
        object.__setattr__(self, "probs", p)

    def __getitem__(self, k):
        return float(self.probs[k])

    @property
    def mode(self):
        return int(np.argmax(self.probs))

    def total_variation(self, other: "ComplexityPmf"):
        return 0.5 * float(np.abs(self.probs - other.probs).sum())

    def rows(self):
        return [(k, float(p)) for k, p in enumerate(self.probs)]


def poisson_binomial(ps):
    """Pmf of a sum of independent Bernoulli(p_j) by the convolution recurrence."""
    pmf = np.zeros(len(ps) + 1)
    pmf[0] = 1.0
    for j, p in enumerate(ps, start=1):
        pmf[1 : j + 1] = pmf[1 : j + 1] * (1.0 - p) + pmf[:j] * p
        pmf[0] *= 1.0 - p
    return pmf


def _check_dims(K, k0):
    if not 1 <= k0 <= K:
        raise InputError(f"need 1 <= k0 <= K, got k0={k0}, K={K}")


def limit_complexity_pmf(rule, K, k0, schedule) -> ComplexityPmf:
    """Limiting pmf of the selected dimension.

    ``schedule`` is an :class:`AlphaSchedule` of length K (or a scalar
    level); entry j holds the level of the j-th test (1-based j = index + 1).
    """
    _check_dims(K, k0)
    if not isinstance(schedule, AlphaSchedule):
        schedule = AlphaSchedule.constant(K, schedule)
    if len(schedule) != K:
        raise InputError(f"schedule has {len(schedule)} levels for K={K}")
    a = np.concatenate([[np.nan], schedule.alphas, [0.0]])  # a[j] = alpha_j, a[K+1] = 0
    probs = np.zeros(K + 1)
    if rule == "backward":
        tail = np.ones(K + 2)  # tail[k] = prod_{j>k} (1 - alpha_j)
        for k in range(K - 1, -1, -1):
            tail[k] = tail[k + 1] * (1.0 - a[k + 1])
        probs[k0] = tail[k0]
        for k in range(k0 + 1, K + 1):
            probs[k] = a[k] * tail[k]
    elif rule == "forward":
        run = 1.0  # alpha_{k0+1} ... alpha_k
        for k in range(k0, K + 1):
            probs[k] = (1.0 - a[k + 1]) * run
            if k < K:
                run *= a[k + 1]
    elif rule == "olshard":
        probs[k0:] = poisson_binomial(a[k0 + 1 : K + 1])
    else:
        raise InputError(f"unknown rule {rule!r}; expected one of {PMF_RULES}")
    return ComplexityPmf(rule=rule, probs=probs, K=K, k0=k0)


def strong_signal_spec(K=25, k0=10, n=400, effect=8.0, reps=2000, master_seed=0, noise="gaussian"):
    """Orthogonal design with the ``k0`` signals first, each of size ``effect/sqrt(n)``."""
    _check_dims(K, k0)
    beta0 = np.zeros(K)
    beta0[:k0] = effect / np.sqrt(n)
    return SimulationSpec(n=n, K=K, layout="custom", beta0=tuple(beta0), r_squared=None,
                          orthogonal=True, reps=reps, master_seed=master_seed, noise=noise)


def _dimension_draw(rule, design, fit, zc):
    if rule == "olshard":
        return int(np.sum(np.abs(fit.z_stats) >= zc))
    path = stepwise_zstats(design, np.arange(design.K), fit.sigma_hat)
    if rule == "backward":
        return backward_k(path.z_tilde, zc)
    return forward_k(path.z_tilde, zc)


def mc_complexity_pmf(spec: SimulationSpec, rule, schedule, reps=None) -> ComplexityPmf:
    """Empirical pmf of the selected dimension on the a-priori ordering."""
    if not spec.orthogonal or spec.rho != 0.0:
        raise InputError("complexity Monte Carlo needs an orthogonal design")
    if rule not in PMF_RULES:
        raise InputError(f"unknown rule {rule!r}")
    K = spec.K
    if not isinstance(schedule, AlphaSchedule):
        schedule = AlphaSchedule.constant(K, schedule)
    zc = schedule.z
    reps = spec.reps if reps is None else reps
    counts = np.zeros(K + 1)
    k0 = 0
    for rep in range(reps):
        raw, truth = gen_breiman(spec, rep)
        k0 = truth.k0
        design = standardize(raw)
        counts[_dimension_draw(rule, design, fit_ols(design), zc)] += 1
    return ComplexityPmf(rule=rule, probs=counts / reps, K=K, k0=k0)


def mc_complexity_pmfs(spec: SimulationSpec, schedule, reps=None, rules=PMF_RULES):
    """All rules from shared replications (one data set feeds every rule)."""
    K = spec.K
    if not isinstance(schedule, AlphaSchedule):
        schedule = AlphaSchedule.constant(K, schedule)
    zc = schedule.z
    reps = spec.reps if reps is None else reps
    counts = {r: np.zeros(K + 1) for r in rules}
    k0 = 0
    for rep in range(reps):
        raw, truth = gen_breiman(spec, rep)
        k0 = truth.k0
        design = standardize(raw)
        fit = fit_ols(design)
        for r in rules:
            counts[r][_dimension_draw(r, design, fit, zc)] += 1
    return {r: ComplexityPmf(rule=r, probs=c / reps, K=K, k0=k0) for r, c in counts.items()}


def write_pmf_csv(path, pmfs, empirical=None):
    empirical = empirical or {}
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["rule", "k", "probability", "empirical"])
        for rule, pmf in pmfs.items():
            emp = empirical.get(rule)
            for k, p in pmf.rows():
                wr.writerow([rule, k, f"{p:.17g}", "" if emp is None else f"{emp[k]:.17g}"])


# --- risk curves -------------------------------------------------------------


@dataclass(frozen=True)
class RiskCurve:
    alphas: np.ndarray
    risk: np.ndarray
    rule: str
    std_error: np.ndarray | None = None

    @property
    def cutoffs(self):
        return z_critical(self.alphas)


def oracle_gamma(truth, large=1e6, small=1e-2):
    return np.where(truth.nonzero, large, small)


def risk_estimate(spec: SimulationSpec, alpha_grid, reps=None, gamma_mode="oracle",
                  prior: PriorConfig | None = None, svs_config: GibbsConfig | None = None):
    """Monte Carlo misclassification risk of Zcut and OLS-hard on an alpha grid.

    ``gamma_mode="oracle"`` uses the fixed-gamma posterior mean with large
    hypervariances on true signals and small ones elsewhere (sigma^2 = 1);
    ``"full"`` runs the sampler each replication.  Both rules see the same
    data.  Returns ``{"zcut": RiskCurve, "olshard": RiskCurve}``.
    """
    if gamma_mode not in ("oracle", "full"):
        raise InputError(f"unknown gamma mode {gamma_mode!r}")
    if gamma_mode == "oracle" and not spec.orthogonal:
        raise InputError("oracle-gamma risk needs an orthogonal design")
    alphas = np.asarray(alpha_grid, dtype=float)
    zc = z_critical(alphas)
    reps = spec.reps if reps is None else reps
    prior = prior or PriorConfig()
    svs_config = svs_config or GibbsConfig(null_draws=False, keep_trace=False)
    miss = {"zcut": np.zeros((reps, alphas.size)), "olshard": np.zeros((reps, alphas.size))}
    for rep in range(reps):
        raw, truth = gen_breiman(spec, rep)
        design = standardize(raw)
        fit = fit_ols(design)
        ystar = rescale_response(design, fit, prior)
        if gamma_mode == "oracle":
            beta_star = conditional_posterior_mean(design, ystar, oracle_gamma(truth), 1.0)
        else:
            seed = chain_seed(spec.master_seed, rep, 2)
            beta_star = run_chain(design, ystar, prior, replace(svs_config, seed=seed)).beta_star
        miss["zcut"][rep] = misclassification_curve(beta_star, truth, zc)
        miss["olshard"][rep] = misclassification_curve(fit.z_stats, truth, zc)
    return {
        rule: RiskCurve(alphas=alphas, risk=m.mean(axis=0), rule=rule,
                        std_error=m.std(axis=0, ddof=1) / np.sqrt(reps) if reps > 1 else None)
        for rule, m in miss.items()
    }


def write_risk_csv(path, curves):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["alpha", "cutoff", "rule", "risk"])
        for rule, c in curves.items():
            for a, z, r in zip(c.alphas, c.cutoffs, c.risk):
                wr.writerow([f"{a:.17g}", f"{z:.17g}", rule, f"{r:.17g}"])


# --- fixed-gamma limit law ---------------------------------------------------


@dataclass
class LimitCheck:
    """Empirical versus theoretical moments of the fixed-gamma posterior mean."""

    empirical_mean: np.ndarray
    empirical_cov: np.ndarray
    theory_mean: np.ndarray
    theory_cov: np.ndarray
    reps: int
    mean_std_error: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mean_std_error = np.sqrt(np.diag(self.empirical_cov) / self.reps)

    @property
    def mean_z(self):
        """Standardized mean discrepancies."""
        return (self.empirical_mean - self.theory_mean) / self.mean_std_error

    @property
    def cov_max_abs_error(self):
        return float(np.abs(self.empirical_cov - self.theory_cov).max())

    @property
    def cov_max_rel_error(self):
        """Largest entrywise error relative to the largest theoretical variance."""
        return self.cov_max_abs_error / float(np.abs(np.diag(self.theory_cov)).max())


def limit_distribution_check(gamma0, beta0, n=1000, reps=2000, master_seed=0, noise="gaussian"):
    """Replicate the fixed-gamma posterior mean under local alternatives ``beta0/sqrt(n)``.

    The design is exactly orthogonal with ``X'X = n I``, so ``Sigma0 = I``.
    """
    gamma0 = np.asarray(gamma0, dtype=float)
    beta0 = np.asarray(beta0, dtype=float)
    K = beta0.shape[0]
    if gamma0.shape != (K,):
        raise InputError("gamma0 and beta0 must have the same length")
    spec = SimulationSpec(n=n, K=K, layout="custom", beta0=tuple(beta0 / np.sqrt(n)), r_squared=None,
                          orthogonal=True, reps=reps, master_seed=master_seed, noise=noise)
    draws = np.empty((reps, K))
    for rep in range(reps):
        raw, _ = gen_breiman(spec, rep)
        design = standardize(raw)
        ystar = rescale_response(design, fit_ols(design))
        draws[rep] = conditional_posterior_mean(design, ystar, gamma0, 1.0)
    mean, cov = fixed_gamma_limit(gamma0, np.eye(K), beta0)
    return LimitCheck(empirical_mean=draws.mean(axis=0), empirical_cov=np.cov(draws, rowvar=False).reshape(K, K),
                      theory_mean=mean, theory_cov=cov, reps=reps)


# --- consistency of the ridge solution ---------------------------------------

LAMBDA_POLICIES = {
    "sqrt": lambda n: np.sqrt(n),
    "linear": lambda n: float(n),
    "zero": lambda n: 0.0,
}


@dataclass(frozen=True)
class ConsistencyRow:
    n: int
    lambda_n: float
    error_to_truth: float
    gap_to_ols: float


def consistency_sweep(lambda_policy, n_grid=(100, 400, 1600), K=10, beta0=None, reps=50, master_seed=0,
                      gamma=1.0, sigma_sq=1.0):
    """Mean ``||theta* - beta0||`` and ``||theta* - beta_ols||`` per n.

    ``theta*`` minimizes the penalized criterion at fixed ``gamma`` and
    ``sigma_sq`` on the raw response of an uncorrelated Gaussian design.
    """
    if lambda_policy not in LAMBDA_POLICIES:
        raise InputError(f"unknown lambda policy {lambda_policy!r}; expected one of {sorted(LAMBDA_POLICIES)}")
    if beta0 is None:
        beta0 = np.zeros(K)
        beta0[: K // 2] = 1.0
    beta0 = np.asarray(beta0, dtype=float)
    K = beta0.shape[0]
    rows = []
    for n in n_grid:
        lam = LAMBDA_POLICIES[lambda_policy](n)
        spec = SimulationSpec(n=n, K=K, layout="custom", beta0=tuple(beta0), r_squared=None,
                              reps=reps, master_seed=master_seed)
        err = gap = 0.0
        for rep in range(reps):
            raw, _ = gen_breiman(spec, rep)
            design = standardize(raw)
            ols = fit_ols(design).beta_hat
            theta = ridge_estimate(design, design.y, np.full(K, gamma), sigma_sq, lam) if lam > 0 else ols
            # compare on the raw-coefficient scale
            err += np.linalg.norm(design.to_original_coefficients(theta) - beta0)
            gap += np.linalg.norm(theta - ols)
        rows.append(ConsistencyRow(n=n, lambda_n=float(lam), error_to_truth=err / reps, gap_to_ols=gap / reps))
    return rows


# --- ordering recovery -------------------------------------------------------


@dataclass(frozen=True)
class RecoveryRow:
    n: int
    cutoff: float
    ordered_pattern: float  # P{sorted threshold vector = (1,...,1,0,...,0)}
    exact_support: float  # P{thresholded model equals the true support}


def ordering_recovery(beta0, n_grid=(100, 400, 1600), c_schedule=lambda n: n**0.25, reps=20,
                      master_seed=0, prior: PriorConfig | None = None, svs_config: GibbsConfig | None = None):
    """Probability that thresholding sorted ``|beta*|`` at ``C_n`` recovers the true pattern."""
    beta0 = np.asarray(beta0, dtype=float)
    K = beta0.shape[0]
    k0 = int(np.count_nonzero(beta0))
    if k0 == 0:
        raise InputError("ordering recovery needs at least one nonzero coefficient")
    prior = prior or PriorConfig()
    svs_config = svs_config or GibbsConfig(burn_in=500, samples=1000, null_draws=False, keep_trace=False)
    target = np.zeros(K, dtype=bool)
    target[:k0] = True
    rows = []
    for n in n_grid:
        cut = float(c_schedule(n))
        spec = SimulationSpec(n=n, K=K, layout="custom", beta0=tuple(beta0), r_squared=None,
                              reps=reps, master_seed=master_seed)
        pattern = support = 0
        for rep in range(reps):
            raw, truth = gen_breiman(spec, rep)
            design = standardize(raw)
            ystar = rescale_response(design, fit_ols(design), prior)
            seed = chain_seed(master_seed, rep, 3)
            bstar = run_chain(design, ystar, prior, replace(svs_config, seed=seed)).beta_star
            sorted_abs = np.sort(np.abs(bstar))[::-1]
            pattern += bool(np.array_equal(sorted_abs >= cut, target))
            support += bool(np.array_equal(np.abs(bstar) >= cut, truth.nonzero))
        rows.append(RecoveryRow(n=n, cutoff=cut, ordered_pattern=pattern / reps, exact_support=support / reps))
    return rows
