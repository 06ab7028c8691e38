"""Acceptance criteria, each at its stated tolerance.

Every test records one ``CRITERION n: PASS|FAIL ...`` line, printed at the
end of the session by the terminal-summary hook in ``conftest.py``.
"""

from argparse import Namespace
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

from spikeslab.bench import SimulationSpec, misclassification_curve, run_experiment
from spikeslab.cli import load_design
from spikeslab.gibbs import (
    GibbsConfig,
    GibbsState,
    SamplerData,
    batch_means_se,
    draw_beta,
    draw_indicators,
    draw_sigma_sq,
    draw_tau_sq,
    draw_w,
    run_chain,
)
from spikeslab.model import (
    HypervarianceDensity,
    PriorConfig,
    conditional_posterior_mean,
    penalized_objective,
    rescale_response,
)
from spikeslab.regression import fit_ols
from spikeslab.selection import zcut
from spikeslab.theory import (
    PMF_RULES,
    consistency_sweep,
    limit_complexity_pmf,
    limit_distribution_check,
    mc_complexity_pmfs,
    risk_estimate,
    strong_signal_spec,
)

import conftest
from conftest import correlated_design

PRIOR = PriorConfig()
DIABETES = Path(__file__).resolve().parents[1] / "data" / "diabetes.csv"
N_DRAWS = 10_000
SIGNIFICANCE = 0.01


def _record(number, ok, detail):
    line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _frozen_state(rng, K):
    return GibbsState(beta=rng.normal(0.0, 1.0, K), indicator=np.where(rng.random(K) < 0.5, PRIOR.v0, 1.0),
                      tau_sq=rng.uniform(0.2, 3.0, K), w=0.35, sigma_sq=1.1)


def test_criterion_01_full_conditionals(rng):
    K = 5
    d = correlated_design(120, K, rng, rho=0.5, beta=[1.0, 0, 0.5, 0, 0])
    ys = rescale_response(d, fit_ols(d))
    data = SamplerData.build(d, ys)
    state = _frozen_state(rng, K)
    r = np.random.default_rng(2024)
    pvals = {}

    # indicators: Bernoulli at the spike value with the analytic odds
    beta = np.array([0.02, 0.1, 0.2, 0.4, 1.0])
    tau = np.array([0.5, 1.0, 0.8, 1.5, 2.0])
    log_spike = np.log1p(-state.w) - 0.5 * np.log(PRIOR.v0) - beta**2 / (2 * PRIOR.v0 * tau)
    log_slab = np.log(state.w) - beta**2 / (2 * tau)
    p = 1.0 / (1.0 + np.exp(log_slab - log_spike))
    spikes = np.zeros(K)
    for _ in range(N_DRAWS):
        spikes += draw_indicators(beta, tau, state.w, PRIOR, r) == PRIOR.v0
    chi2 = float(np.sum((spikes - N_DRAWS * p) ** 2 / (N_DRAWS * p * (1 - p))))
    pvals["indicators"] = float(stats.chi2(K).sf(chi2))

    # slab variances: inverse gamma, tested through the precision
    b, ind = state.beta[:1].repeat(N_DRAWS), np.full(N_DRAWS, state.indicator[0])
    prec = 1.0 / draw_tau_sq(b, ind, PRIOR, r)
    rate = PRIOR.a2 + state.beta[0] ** 2 / (2 * state.indicator[0])
    pvals["slab variance"] = stats.kstest(prec, stats.gamma(PRIOR.a1 + 0.5, scale=1 / rate).cdf).pvalue

    # complexity weight: Beta(1 + slab count, 1 + spike count)
    ws = np.array([draw_w(state.indicator, PRIOR, r) for _ in range(N_DRAWS)])
    n_slab = int(np.sum(state.indicator == 1.0))
    pvals["weight"] = stats.kstest(ws, stats.beta(1 + n_slab, 1 + K - n_slab).cdf).pvalue

    # error variance: inverse gamma with the rescaled residual sum of squares
    s2 = np.array([draw_sigma_sq(state.beta, data, PRIOR, r) for _ in range(N_DRAWS)])
    resid = ys.y_star - d.x @ state.beta
    rate = PRIOR.b2 + resid @ resid / (2 * ys.lambda_n)
    pvals["error variance"] = stats.kstest(1 / s2, stats.gamma(PRIOR.b1 + d.n / 2, scale=1 / rate).cdf).pvalue

    # coefficients: mean against the generalized ridge solution
    gamma = state.gamma
    a = d.x.T @ d.x + np.diag(state.sigma_sq * ys.lambda_n / gamma)
    ridge = np.linalg.solve(a, d.x.T @ ys.y_star)
    draws = np.array([draw_beta(state, data, r) for _ in range(N_DRAWS)])
    z = (draws.mean(axis=0) - ridge) / (draws.std(axis=0, ddof=1) / np.sqrt(N_DRAWS))

    ok = min(pvals.values()) > SIGNIFICANCE and np.all(np.abs(z) < 4.0)
    detail = ", ".join(f"{k} p={v:.3f}" for k, v in pvals.items())
    _record(1, ok, f"{detail}; coefficient mean max |z|={np.abs(z).max():.2f} (< 4)")


def test_criterion_02_ridge_optimality():
    r = np.random.default_rng(77)
    worst = 0.0
    for _ in range(20):
        K = int(r.integers(2, 9))
        n = int(r.integers(K + 15, 120))
        d = correlated_design(n, K, r, rho=float(r.uniform(0, 0.9)), beta=r.normal(size=K))
        fit = fit_ols(d)
        ys = rescale_response(d, fit)
        gamma = r.uniform(0.05, 5.0, K)
        s2 = float(r.uniform(0.3, 3.0))
        theta = fit.sigma_hat * conditional_posterior_mean(d, ys, gamma, s2) / np.sqrt(n)
        obj = penalized_objective(d, d.y, theta, gamma, s2, float(n))
        h = 1e-5
        grad = np.array([(penalized_objective(d, d.y, theta + h * e, gamma, s2, float(n))
                          - penalized_objective(d, d.y, theta - h * e, gamma, s2, float(n))) / (2 * h)
                         for e in np.eye(K)])
        worst = max(worst, np.abs(grad).max() / (1 + obj))
    _record(2, worst <= 1e-6, f"max scaled gradient {worst:.2e} (<= 1e-6) over 20 triples")


def test_criterion_03_complexity_pmfs():
    spec = strong_signal_spec(K=25, k0=10, n=400, effect=8.0, reps=2000)
    emp = mc_complexity_pmfs(spec, 0.10)
    closed = {r: limit_complexity_pmf(r, 25, 10, 0.10) for r in PMF_RULES}
    tv = {r: closed[r].total_variation(emp[r]) for r in PMF_RULES}
    pf, po = emp["forward"][10], emp["olshard"][10]
    ok = abs(pf - 0.9) <= 0.03 and abs(po - 0.206) <= 0.03 and max(tv.values()) <= 0.05
    tvs = ", ".join(f"{r} {v:.3f}" for r, v in tv.items())
    _record(3, ok, f"P(kF=10)={pf:.4f} (0.9+-0.03), P(kO=10)={po:.4f} (0.206+-0.03); TV {tvs} (<= 0.05)")


def test_criterion_04_oracle_risk_dominance():
    spec = strong_signal_spec(K=25, k0=10, n=400, effect=3.0, reps=2000)
    alphas = np.round(np.arange(0.05, 0.951, 0.05), 2)
    curves = risk_estimate(spec, alphas)
    z, o = curves["zcut"].risk, curves["olshard"].risk
    ok = bool(np.all(z < o))
    _record(4, ok, f"Zcut risk < OLS-hard risk at {np.sum(z < o)}/{alphas.size} alphas "
                   f"(alpha=0.05: {z[0]:.3f} vs {o[0]:.3f}; alpha=0.95: {z[-1]:.3f} vs {o[-1]:.3f})")


def test_criterion_05_misclassification_curve():
    spec = SimulationSpec.scenario("B", 0.0, reps=1, master_seed=0)
    report = run_experiment(spec, rules=("zcut", "olshard"))
    first = report.first_rep
    cutoffs = np.linspace(1.0, 4.0, 61)
    zc = misclassification_curve(first["beta_star"], first["truth"], cutoffs)
    ol = misclassification_curve(first["z_stats"], first["truth"], cutoffs)
    frac = float(np.mean(zc <= ol))
    _record(5, frac >= 0.90, f"Zcut <= OLS-hard at {frac:.1%} of 61 cutoffs in [1, 4] (>= 90%)")


def _within(value, target, rel=0.40):
    return abs(value - target) <= rel * target


def test_criterion_06_breiman_tables():
    a = run_experiment(SimulationSpec.scenario("A", 0.0, reps=25, master_seed=0), rules=("zcut", "olshard"))
    agg = a.aggregate()
    zm, om = agg["zcut"]["total_miss"], agg["olshard"]["total_miss"]
    zf, of = agg["zcut"]["fdr"], agg["olshard"]["fdr"]
    ok_a = (zm < om and zf < of and not a.failures and _within(zm, 11.99) and _within(om, 14.06)
            and _within(zf, 0.097) and _within(of, 0.128))
    b = run_experiment(SimulationSpec.scenario("B", 0.9, reps=10, master_seed=0), rules=("zcut", "olshard"))
    bagg = b.aggregate()
    ratio = bagg["olshard"]["fdr"] / bagg["zcut"]["fdr"]
    ok_b = ratio >= 5.0 and not b.failures
    _record(6, ok_a and ok_b,
            f"A: TotalMiss {zm:.2f} vs {om:.2f} (ref 11.99/14.06 +-40%), FDR {zf:.3f} vs {of:.3f} "
            f"(ref 0.097/0.128 +-40%); B rho=0.9: FDR ratio {ratio:.1f} (>= 5)")


TABLE1_TOP6 = {"bmi": 9.54, "ltg": 9.25, "map": 5.64, "hdl": -4.37, "sex": -3.38, "age.sex": 2.43}


def test_criterion_07_diabetes():
    if not DIABETES.exists():
        conftest.ACCEPTANCE_LINES.append("CRITERION 7: SKIPPED diabetes data file is absent")
        pytest.skip("diabetes data file is absent; criterion 7 skipped")
    design = load_design(Namespace(input=DIABETES, response="y", quadratic=True))
    fit = fit_ols(design)
    ys = rescale_response(design, fit)
    summary = run_chain(design, ys, PRIOR, GibbsConfig(seed=0, null_draws=False, keep_trace=False))
    names = design.column_names
    selected = {names[k] for k in zcut(summary, design, 0.10).model.indices}
    six = set(TABLE1_TOP6)
    ok_sel = design.K == 64 and (selected == six or selected == six | {"bmi.map"})
    means = {v: float(summary.beta_star[names.index(v)]) for v in TABLE1_TOP6}
    err = max(abs(means[v] - t) for v, t in TABLE1_TOP6.items())
    s2 = float(summary.sigma_sq_samples.mean())
    ok = ok_sel and err <= 0.75 and 0.8 <= s2 <= 1.2
    _record(7, ok, f"K={design.K}; Zcut selects {sorted(selected)}; top-six posterior mean max error "
                   f"{err:.3f} (<= 0.75); sigma^2 posterior mean {s2:.3f} (in [0.8, 1.2])")


def test_criterion_08_penalization_contrast():
    root = consistency_sweep("sqrt", n_grid=(100, 400, 1600))
    linear = consistency_sweep("linear", n_grid=(100, 400, 1600))
    g = [row.gap_to_ols for row in root]
    gl = [row.gap_to_ols for row in linear]
    ratio = gl[-1] / gl[0]
    ok = g[0] > g[1] > g[2] and ratio >= 0.5
    _record(8, ok, f"lambda=sqrt(n) gaps {g[0]:.3f} > {g[1]:.3f} > {g[2]:.3f}; "
                   f"lambda=n endpoint ratio {ratio:.3f} (>= 0.5)")


def test_criterion_09_fixed_gamma_limit():
    beta0 = np.array([2.0, 1.0, 0.0, -1.0])
    target_mean, target_cov = beta0 / 2, np.eye(4) / 4
    results = []
    for noise in ("gaussian", "uniform"):
        chk = limit_distribution_check(np.ones(4), beta0, n=1000, reps=2000, noise=noise)
        mz = np.abs((chk.empirical_mean - target_mean) / chk.mean_std_error).max()
        cov_err = np.abs(chk.empirical_cov - target_cov).max()
        results.append((noise, mz, cov_err))
    # "within 10% of I/4" is read on the scale of the unit variance entries: 0.1 * 1/4
    ok = all(mz < 4.0 and ce <= 0.025 for _, mz, ce in results)
    detail = "; ".join(f"{n}: max |mean z| {mz:.2f} (< 4), max cov error {ce:.4f} (<= 0.025)"
                       for n, mz, ce in results)
    _record(9, ok, detail)


def test_criterion_10_hypervariance_density():
    r = np.random.default_rng(10)
    worst = 0.0
    monotone = True
    grid = np.geomspace(1e-4, 1e3, 40)
    for xi, w in zip(r.uniform(-5, 5, 20), r.uniform(0.02, 0.98, 20)):
        dens = HypervarianceDensity(float(xi), float(w))
        edges = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 49)])
        total = sum(integrate.quad(lambda u: float(dens.pdf(u)), lo, hi, limit=200, epsabs=1e-12)[0]
                    for lo, hi in zip(edges[:-1], edges[1:]))
        worst = max(worst, abs(total - 1.0))
        monotone &= bool(np.all(np.diff(dens.cdf(grid)) >= -1e-12))
    s = np.linspace(0.005, 0.995, 100)
    xi_sq = stats.chi2(1).ppf([0.25, 0.50, 0.75, 0.90])
    curves = np.array([HypervarianceDensity(float(np.sqrt(q)), 0.3).cdf_standardized(s) for q in xi_sq])
    # listed top to bottom: smaller percentiles keep more mass at small hypervariances
    ordered = bool(np.all(np.diff(curves, axis=0) <= 1e-12))
    ok = worst <= 1e-6 and monotone and ordered
    _record(10, ok, f"max |normalization - 1| {worst:.1e} (<= 1e-6) over 20 pairs; cdf monotone {monotone}; "
                    f"percentile curves ordered on 100 points {ordered}")


def test_criterion_11_blocked_updates():
    r = np.random.default_rng(11)
    d = correlated_design(150, 8, r, rho=0.8, beta=[1.0, 0, 0.5, 0, 0, -0.7, 0, 0])
    ys = rescale_response(d, fit_ols(d))
    base = dict(burn_in=1000, samples=20_000, null_draws=False, keep_trace=True)
    full = run_chain(d, ys, PRIOR, GibbsConfig(seed=1, **base))
    blocked = run_chain(d, ys, PRIOR, GibbsConfig(seed=2, block_size=2, **base))
    se = np.sqrt(batch_means_se(full.beta_draws) ** 2 + batch_means_se(blocked.beta_draws) ** 2)
    z = np.abs(full.beta_star - blocked.beta_star) / se
    _record(11, bool(np.all(z <= 3.0)), f"max |difference| / combined MC SE {z.max():.2f} (<= 3) over 8 means")
