"""Model selection rules.

Hard thresholding (Zcut on posterior means, OLS-hard on Z-statistics),
fixed-cutoff models, and ordered forward/backward stepwise selection whose
test statistics come from a single orthogonal decomposition of the ordered
design.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import CollinearityError, DomainError, InputError
from .regression import StandardizedDesign, restricted_ols, restricted_z_stats

DEFAULT_GUARD = 3.0


def z_critical(alpha):
    """Two-sided standard normal cutoff; ``alpha = 1`` gives 0."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0.0) or np.any(alpha > 1.0):
        raise DomainError("alpha must lie in (0, 1]")
    return stats.norm.isf(alpha / 2.0)


@dataclass(frozen=True)
class ModelIndicator:
    selected: np.ndarray
    ordering_used: np.ndarray | None = None

    @property
    def k_hat(self):
        return int(self.selected.sum())

    @property
    def indices(self):
        return np.flatnonzero(self.selected)


@dataclass(frozen=True)
class AlphaSchedule:
    alphas: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        if a.ndim != 1 or np.any(a <= 0.0) or np.any(a >= 1.0):
            raise InputError("alphas must be a vector of values in (0, 1)")
        object.__setattr__(self, "alphas", a)

    @classmethod
    def constant(cls, K, alpha=0.10):
        return cls(np.full(K, float(alpha)))

    @property
    def z(self):
        return z_critical(self.alphas)

    def __len__(self):
        return self.alphas.shape[0]


@dataclass(frozen=True)
class StepwisePath:
    ordering: np.ndarray
    z_tilde: np.ndarray
    u_norms_sq: np.ndarray
    beta_last: np.ndarray


@dataclass(frozen=True)
class SelectionOutcome:
    model: ModelIndicator
    estimate: np.ndarray
    rule_name: str
    alpha: float

    @property
    def selected(self):
        return self.model.selected

    @property
    def k_hat(self):
        return self.model.k_hat


def _outcome(design, selected, rule, alpha, ordering=None):
    selected = np.asarray(selected, dtype=bool)
    return SelectionOutcome(
        model=ModelIndicator(selected=selected, ordering_used=ordering),
        estimate=restricted_ols(design, selected),
        rule_name=rule,
        alpha=float(alpha),
    )


def threshold_model(values, c) -> ModelIndicator:
    """Indicator of ``|values| >= c``."""
    if not c >= 0.0:
        raise DomainError(f"cutoff must be nonnegative, got {c}")
    return ModelIndicator(selected=np.abs(np.asarray(values, dtype=float)) >= c)


def zcut(summary, design: StandardizedDesign, alpha=0.10) -> SelectionOutcome:
    beta_star = getattr(summary, "beta_star", summary)
    sel = threshold_model(beta_star, float(z_critical(alpha))).selected
    return _outcome(design, sel, "zcut", alpha)


def ols_hard(fit, design: StandardizedDesign, alpha=0.10) -> SelectionOutcome:
    sel = threshold_model(fit.z_stats, float(z_critical(alpha))).selected
    return _outcome(design, sel, "olshard", alpha)


def stepwise_zstats(design: StandardizedDesign, ordering, sigma_hat, tol=1e-10) -> StepwisePath:
    """Sequential-fit Z-statistics for an ordered design.

    The k-th statistic tests the last coefficient of the least squares fit on
    the first k ordered columns.  With ``u_k`` the part of the k-th ordered
    column orthogonal to its predecessors, that coefficient is
    ``u_k'Y / ||u_k||^2`` and its standardized form reduces to
    ``u_k'Y / (||u_k|| * sigma_hat)``, so one QR factorization serves all k.
    """
    ordering = np.asarray(ordering, dtype=int)
    K = design.K
    if sorted(ordering.tolist()) != list(range(K)):
        raise InputError("ordering must be a permutation of the columns")
    if not sigma_hat > 0.0:
        raise DomainError("sigma_hat must be positive")
    xo = design.x[:, ordering]
    q, r = np.linalg.qr(xo, mode="reduced")
    diag = np.diag(r)
    col_norms = np.linalg.norm(xo, axis=0)
    for k in range(K):
        if abs(diag[k]) <= tol * col_norms[k]:
            raise CollinearityError(k + 1, design.column_names[ordering[k]])
    # u_k = r_kk q_k
    qty = q.T @ design.y
    u_norms_sq = diag**2
    beta_last = qty / diag
    z_tilde = np.sign(diag) * qty / sigma_hat
    return StepwisePath(ordering=ordering, z_tilde=z_tilde, u_norms_sq=u_norms_sq, beta_last=beta_last)


def backward_k(z_tilde, z_crit):
    """Largest k with ``|Z_k| >= z_k`` (0 if none)."""
    hits = np.flatnonzero(np.abs(z_tilde) >= z_crit)
    return int(hits[-1] + 1) if hits.size else 0


def forward_k(z_tilde, z_crit, guard_values=None, guard_c=None):
    """One less than the first k whose test fails; K if none fails.

    With a guard, a failing test only stops the scan when the guard value
    at that position is also ``<= guard_c``.
    """
    fail = np.abs(z_tilde) < z_crit
    if guard_values is not None and guard_c:
        fail &= np.abs(guard_values) <= guard_c
    idx = np.flatnonzero(fail)
    return int(idx[0]) if idx.size else len(z_tilde)


def _prefix_model(ordering, k, K):
    sel = np.zeros(K, dtype=bool)
    sel[ordering[:k]] = True
    return sel


def _schedule(schedule, K):
    if isinstance(schedule, AlphaSchedule):
        if len(schedule) != K:
            raise InputError(f"schedule has {len(schedule)} levels for K={K}")
        return schedule
    return AlphaSchedule.constant(K, schedule)


def backward_select(path: StepwisePath, schedule, design: StandardizedDesign) -> SelectionOutcome:
    K = design.K
    sched = _schedule(schedule, K)
    k = backward_k(path.z_tilde, sched.z)
    return _outcome(design, _prefix_model(path.ordering, k, K), "backward",
                    float(sched.alphas[0]), path.ordering)


def forward_select(path: StepwisePath, schedule, design: StandardizedDesign) -> SelectionOutcome:
    K = design.K
    sched = _schedule(schedule, K)
    k = forward_k(path.z_tilde, sched.z)
    return _outcome(design, _prefix_model(path.ordering, k, K), "forward",
                    float(sched.alphas[0]), path.ordering)


def rank_order(values):
    """Indices sorted by decreasing ``|values|``; ties keep column order."""
    return np.argsort(-np.abs(np.asarray(values, dtype=float)), kind="stable")


def _guarded_forward(ranking_values, design, fit, alpha, guard_c, rule):
    K = design.K
    ordering = rank_order(ranking_values)
    path = stepwise_zstats(design, ordering, fit.sigma_hat)
    sched = _schedule(alpha, K)
    guard = np.asarray(ranking_values, dtype=float)[ordering]
    k = forward_k(path.z_tilde, sched.z, guard, guard_c)
    return _outcome(design, _prefix_model(ordering, k, K), rule, float(sched.alphas[0]), ordering)


def svs_forward(summary, design: StandardizedDesign, fit, alpha=0.10, guard_c=DEFAULT_GUARD):
    """Forward stepwise on the ``|posterior mean|`` ranking.

    ``guard_c`` of 0 or None gives the unguarded rule.
    """
    beta_star = getattr(summary, "beta_star", summary)
    return _guarded_forward(beta_star, design, fit, alpha, guard_c, "svsforwd")


def ols_forward(fit, design: StandardizedDesign, alpha=0.10, guard_c=DEFAULT_GUARD):
    """Forward stepwise on the ``|Z|`` ranking, guarded by ``|Z|``."""
    return _guarded_forward(fit.z_stats, design, fit, alpha, guard_c, "olsforwd")


RULES = ("zcut", "olshard", "svsforwd", "olsforwd")


def apply_rule(rule, design, fit, summary=None, alpha=0.10, guard_c=DEFAULT_GUARD):
    if rule == "zcut":
        return zcut(summary, design, alpha)
    if rule == "olshard":
        return ols_hard(fit, design, alpha)
    if rule == "svsforwd":
        return svs_forward(summary, design, fit, alpha, guard_c)
    if rule == "olsforwd":
        return ols_forward(fit, design, alpha, guard_c)
    raise InputError(f"unknown rule {rule!r}; expected one of {RULES}")


def selection_table(design, fit, summary, outcomes, top=None):
    """Rows of (variable, beta_star, restricted-OLS Z per rule), ranked by ``|beta_star|``."""
    order = rank_order(summary.beta_star)
    if top is not None:
        order = order[:top]
    zs = {o.rule_name: restricted_z_stats(design, o.selected, fit.sigma_hat) for o in outcomes}
    rows = []
    for k in order:
        row = {"variable": design.column_names[k], "beta_star": float(summary.beta_star[k])}
        for rule, z in zs.items():
            row[rule] = float(z[k])
        rows.append(row)
    return rows


def write_selection_csv(path, rows, rules):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["variable", "beta_star", *rules])
        for row in rows:
            wr.writerow([row["variable"]] + [f"{row[c]:.17g}" for c in ("beta_star", *rules)])
