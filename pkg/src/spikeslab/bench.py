"""Breiman-style simulations, selection metrics and the replication runner."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError, SpikeSlabError
from .gibbs import GibbsConfig, run_chain
from .model import PriorConfig, rescale_response
from .regression import RawDataset, fit_ols, standardize
from .selection import DEFAULT_GUARD, RULES, apply_rule

log = logging.getLogger(__name__)

LAYOUT_DIMS = {"A": (200, 100), "B": (800, 400)}


@dataclass(frozen=True)
class SimulationSpec:
    n: int = 200
    K: int = 100
    rho: float = 0.0
    layout: str = "A"
    r_squared: float | None = 0.75
    sigma0_sq: float = 1.0
    reps: int = 100
    master_seed: int = 0
    beta0: tuple | None = None  # custom layout only
    orthogonal: bool = False  # exactly orthogonalize the generated columns
    noise: str = "gaussian"  # or "uniform" (variance-matched, bounded)
    cluster_form: str = "corrected"  # or "literal"

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise InputError(f"rho must lie in [0, 1), got {self.rho}")
        if self.layout not in ("A", "B", "custom"):
            raise InputError(f"unknown layout {self.layout!r}")
        if self.layout == "custom" and self.beta0 is None:
            raise InputError("custom layout needs beta0")
        if self.beta0 is not None and len(self.beta0) != self.K:
            raise InputError(f"beta0 has {len(self.beta0)} entries for K={self.K}")
        if self.r_squared is not None and not 0.0 < self.r_squared < 1.0:
            raise InputError("r_squared must lie in (0, 1)")
        if self.n <= self.K:
            raise InputError(f"need n > K, got n={self.n}, K={self.K}")
        if self.noise not in ("gaussian", "uniform"):
            raise InputError(f"unknown noise law {self.noise!r}")
        if self.cluster_form not in ("corrected", "literal"):
            raise InputError(f"unknown cluster form {self.cluster_form!r}")

    @classmethod
    def scenario(cls, layout, rho=0.0, **kw):
        n, K = LAYOUT_DIMS[layout]
        kw.setdefault("n", n)
        kw.setdefault("K", K)
        return cls(layout=layout, rho=rho, **kw)


@dataclass(frozen=True)
class TrueModel:
    beta0: np.ndarray

    @property
    def support(self):
        return np.flatnonzero(self.beta0 != 0.0)

    @property
    def k0(self):
        return int(np.count_nonzero(self.beta0))

    @property
    def nonzero(self):
        return self.beta0 != 0.0


def ar_covariance(K, rho):
    idx = np.arange(K)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def cluster_coefficients(layout, K, form="corrected"):
    """Pre-scaling coefficients for the named layout."""
    beta = np.zeros(K)
    if layout == "B":
        h = 4
        for center in range(25, K, 25):
            for j in range(-h + 1, h):
                val = (h - abs(j)) ** 1.25 if form == "corrected" else abs(h - j) ** 1.25
                beta[center + j - 1] = val
    elif layout == "A":
        for center in range(10, K, 10):
            for j in range(-2, 3):
                beta[center + j - 1] = 1.0
    else:
        raise InputError(f"no cluster pattern for layout {layout!r}")
    return beta


def calibrate_r_squared(beta, rho, r_squared, sigma0_sq=1.0):
    """Scale ``beta`` so that ``b'Sb / (b'Sb + sigma0^2)`` equals ``r_squared`` under AR(rho)."""
    signal = float(beta @ ar_covariance(beta.shape[0], rho) @ beta)
    c = np.sqrt(r_squared * sigma0_sq / ((1.0 - r_squared) * signal))
    return c * beta


def theoretical_r_squared(beta, rho, sigma0_sq=1.0):
    signal = float(beta @ ar_covariance(beta.shape[0], rho) @ beta)
    return signal / (signal + sigma0_sq)


def true_model(spec: SimulationSpec) -> TrueModel:
    if spec.layout == "custom":
        beta = np.asarray(spec.beta0, dtype=float)
    else:
        beta = cluster_coefficients(spec.layout, spec.K, spec.cluster_form)
    if spec.r_squared is not None and spec.layout != "custom":
        beta = calibrate_r_squared(beta, spec.rho, spec.r_squared, spec.sigma0_sq)
    return TrueModel(beta0=beta)


def rep_rng(master_seed, rep_index):
    return np.random.default_rng([int(master_seed), int(rep_index)])


def chain_seed(master_seed, rep_index, stream=1):
    """Sampler seed for one replication, independent of the data stream."""
    return int(np.random.SeedSequence([int(master_seed), int(rep_index), int(stream)]).generate_state(1)[0])


def simulate_design(spec: SimulationSpec, rng):
    n, K, rho = spec.n, spec.K, spec.rho
    z = rng.standard_normal((n, K))
    if rho == 0.0:
        x = z
    else:
        x = np.empty_like(z)
        x[:, 0] = z[:, 0]
        s = np.sqrt(1.0 - rho**2)
        for k in range(1, K):
            x[:, k] = rho * x[:, k - 1] + s * z[:, k]
    if spec.orthogonal:
        xc = x - x.mean(axis=0)
        q, _ = np.linalg.qr(xc)
        x = np.sqrt(n) * q
    return x


def simulate_noise(spec: SimulationSpec, rng):
    sd = np.sqrt(spec.sigma0_sq)
    if spec.noise == "gaussian":
        return sd * rng.standard_normal(spec.n)
    return sd * np.sqrt(3.0) * rng.uniform(-1.0, 1.0, spec.n)


def gen_breiman(spec: SimulationSpec, rep_index=0):
    """Generate one replication: ``(RawDataset, TrueModel)``."""
    rng = rep_rng(spec.master_seed, rep_index)
    truth = true_model(spec)
    x = simulate_design(spec, rng)
    y = x @ truth.beta0 + simulate_noise(spec, rng)
    return RawDataset(x=x, y=y), truth


@dataclass(frozen=True)
class Metrics:
    k_hat: int
    false_positives: int
    false_negatives: int
    fdr: float
    fnr: float
    perf: float

    @property
    def total_miss(self):
        return self.false_positives + self.false_negatives


def evaluate(outcome, truth: TrueModel, design) -> Metrics:
    """Confusion counts and prediction accuracy of a selection outcome.

    ``perf`` compares fitted means on the standardized design with the
    true coefficients mapped to that scale.
    """
    selected = np.asarray(getattr(outcome, "selected", outcome), dtype=bool)
    estimate = getattr(outcome, "estimate", None)
    K = selected.shape[0]
    if truth.beta0.shape[0] != K:
        raise InputError("outcome and truth have different dimensions")
    nz = truth.nonzero
    fp = int(np.sum(selected & ~nz))
    fn = int(np.sum(~selected & nz))
    k_hat = int(selected.sum())
    perf = float("nan")
    if estimate is not None:
        beta0_std = truth.beta0 * design.scales
        fit0 = design.x @ beta0_std
        diff = design.x @ (estimate - beta0_std)
        perf = 1.0 - float(diff @ diff) / float(fit0 @ fit0)
    return Metrics(
        k_hat=k_hat,
        false_positives=fp,
        false_negatives=fn,
        fdr=fp / max(1, k_hat),
        fnr=fn / max(1, K - k_hat),
        perf=perf,
    )


def misclassification_curve(values, truth: TrueModel, cutoffs):
    """Total misclassified coefficients when thresholding ``|values|`` at each cutoff."""
    a = np.abs(np.asarray(values, dtype=float))
    nz = truth.nonzero
    sel = a[None, :] >= np.asarray(cutoffs, dtype=float)[:, None]
    return np.sum(sel & ~nz, axis=1) + np.sum(~sel & nz, axis=1)


@dataclass
class ExperimentReport:
    spec: SimulationSpec
    rules: tuple
    per_rep: list = field(default_factory=list)  # (rep, rule, Metrics)
    failures: list = field(default_factory=list)  # (rep, message)
    sigma_sq_means: list = field(default_factory=list)
    first_rep: dict | None = None

    def aggregate(self):
        out = {}
        for rule in self.rules:
            ms = [m for _, r, m in self.per_rep if r == rule]
            if not ms:
                continue
            out[rule] = {
                "k_hat": float(np.mean([m.k_hat for m in ms])),
                "perf": float(np.mean([m.perf for m in ms])),
                "total_miss": float(np.mean([m.total_miss for m in ms])),
                "fdr": float(np.mean([m.fdr for m in ms])),
                "fnr": float(np.mean([m.fnr for m in ms])),
                "reps": len(ms),
            }
        return out

    def write_csv(self, path, scenario=None):
        scenario = scenario or f"{self.spec.layout}-rho{self.spec.rho:g}"
        agg = self.aggregate()
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["scenario", "rule", "k_hat", "perf", "total_miss", "fdr", "fnr", "reps", "failures"])
            for rule, row in agg.items():
                wr.writerow([scenario, rule] + [f"{row[c]:.17g}" for c in ("k_hat", "perf", "total_miss", "fdr", "fnr")]
                            + [row["reps"], len(self.failures)])

    def write_per_rep_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["rep", "rule", "k_hat", "perf", "total_miss", "false_positives", "false_negatives", "fdr", "fnr"])
            for rep, rule, m in self.per_rep:
                wr.writerow([rep, rule, m.k_hat, f"{m.perf:.17g}", m.total_miss, m.false_positives,
                             m.false_negatives, f"{m.fdr:.17g}", f"{m.fnr:.17g}"])


def run_replication(spec, rep, rules, prior, svs_config, alpha, guard_c):
    raw, truth = gen_breiman(spec, rep)
    design = standardize(raw)
    fit = fit_ols(design)
    summary = None
    if any(r in ("zcut", "svsforwd") for r in rules):
        ystar = rescale_response(design, fit, prior)
        cfg = replace(svs_config, seed=chain_seed(spec.master_seed, rep))
        summary = run_chain(design, ystar, prior, cfg)
    metrics = {}
    for rule in rules:
        outcome = apply_rule(rule, design, fit, summary, alpha, guard_c)
        metrics[rule] = evaluate(outcome, truth, design)
    return design, fit, summary, truth, metrics


def run_experiment(spec: SimulationSpec, rules=RULES, svs_config: GibbsConfig | None = None,
                   prior: PriorConfig | None = None, alpha=0.10, guard_c=DEFAULT_GUARD,
                   progress=None) -> ExperimentReport:
    """Replicate generate -> standardize -> OLS -> SVS -> rules -> metrics.

    Deterministic given ``spec.master_seed``.  A failing replication is
    recorded in ``failures`` and excluded from the aggregates.
    """
    prior = prior or PriorConfig()
    svs_config = svs_config or GibbsConfig(null_draws=False, keep_trace=False)
    report = ExperimentReport(spec=spec, rules=tuple(rules))
    for rep in range(spec.reps):
        try:
            design, fit, summary, truth, metrics = run_replication(
                spec, rep, rules, prior, svs_config, alpha, guard_c)
        except SpikeSlabError as exc:
            log.warning("replication %d failed: %s", rep, exc)
            report.failures.append((rep, str(exc)))
            continue
        for rule, m in metrics.items():
            report.per_rep.append((rep, rule, m))
        if summary is not None:
            report.sigma_sq_means.append(float(summary.sigma_sq_samples.mean()))
        if report.first_rep is None:
            report.first_rep = {
                "z_stats": fit.z_stats,
                "beta_star": None if summary is None else summary.beta_star,
                "truth": truth,
            }
        if progress:
            progress(rep)
    return report


def write_scatter_csv(path, z_stats, beta_star, truth: TrueModel):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "z_stat", "beta_star", "is_nonzero"])
        for k in range(len(z_stats)):
            wr.writerow([k + 1, f"{z_stats[k]:.17g}", f"{beta_star[k]:.17g}", int(truth.nonzero[k])])


def write_misclassification_csv(path, cutoffs, curves):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["cutoff", "rule", "misclassified"])
        for rule, curve in curves.items():
            for c, m in zip(cutoffs, curve):
                wr.writerow([f"{c:.17g}", rule, int(m)])
