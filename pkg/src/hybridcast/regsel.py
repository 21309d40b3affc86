"""Penalized linear regression: OLS, ridge, lasso, and SCAD estimators.

All fits report coefficients on the caller's input scale. The sparse
estimators (lasso/scad) standardize predictors internally to zero mean
and unit population variance, which makes every cyclic coordinate-descent
update an exact univariate minimization via the matching threshold rule.

Conventions:
  * ridge objective:      sum (y_i - b0 - x_i.b)^2 + lam * ||b||^2
  * sparse objective:     (1/2n) ||y - Xb||^2 + sum p_lam(|b_j|)
With unit-variance columns the sparse lambda has the usual "max |X'y|/n
zeroes everything" scaling.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from . import numcore
from .errors import (
    IllConditioningError,
    ParameterError,
    ShapeError,
    SingularityError,
)

PENALTY_KINDS = ("none", "ridge", "lasso", "scad")


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family and strength; `a` only matters for kind='scad'."""

    kind: str
    lam: float = 0.0
    a: float = 3.7

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ParameterError(f"unknown penalty kind {self.kind!r}, expected one of {PENALTY_KINDS}")
        if self.lam < 0:
            raise ParameterError(f"penalty strength must be >= 0, got {self.lam}")
        if self.kind == "scad" and self.a <= 2:
            raise ParameterError(f"scad shape parameter must be > 2, got {self.a}")

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "lambda": self.lam, "a": self.a if self.kind == "scad" else None}


@dataclass
class RegressionFit:
    """Result of one regression fit.

    beta/beta0 are on the scale of the x/y passed in; `gram` is the
    (centered or standardized) feature Gram matrix the slope covariance
    is based on, with `dof` residual degrees of freedom.
    """

    beta: np.ndarray
    beta0: float
    penalty: PenaltySpec
    sigma2_hat: float
    gram_eigenvalues: np.ndarray
    support: tuple[int, ...]
    converged: bool
    iterations: int
    n_obs: int
    dof: int
    gram: np.ndarray
    objective_history: list[float] = field(default_factory=list)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = numcore.as_matrix(x, "x")
        return self.beta0 + x @ self.beta


# ---------------------------------------------------------------------------
# threshold rules and the SCAD penalty family


def soft_threshold(z: float, lam: float) -> float:
    """sign(z) * max(|z| - lam, 0); lam is assumed non-negative."""
    return math.copysign(max(abs(z) - lam, 0.0), z)


def scad_penalty(beta_abs: float, lam: float, a: float = 3.7) -> float:
    """Piecewise SCAD penalty value at |beta|.

    Linear (lam*|b|) near zero, quadratic blend on [lam, a*lam), then the
    constant cap (a+1)*lam^2/2 -- large coefficients are not penalized
    further.
    """
    if a <= 2:
        raise ParameterError(f"scad shape parameter must be > 2, got {a}")
    if beta_abs < 0:
        raise ParameterError(f"beta_abs must be >= 0, got {beta_abs}")
    if lam < 0:
        raise ParameterError(f"lam must be >= 0, got {lam}")
    if beta_abs < lam:
        return lam * beta_abs
    if beta_abs < a * lam:
        return -(beta_abs * beta_abs - 2.0 * a * lam * beta_abs + lam * lam) / (2.0 * (a - 1.0))
    return (a + 1.0) * lam * lam / 2.0


def scad_penalty_derivative(beta_abs: float, lam: float, a: float = 3.7) -> float:
    """Derivative of scad_penalty w.r.t. |beta|: lam, then a linear decay to 0."""
    if a <= 2:
        raise ParameterError(f"scad shape parameter must be > 2, got {a}")
    if beta_abs < 0:
        raise ParameterError(f"beta_abs must be >= 0, got {beta_abs}")
    if lam < 0:
        raise ParameterError(f"lam must be >= 0, got {lam}")
    if beta_abs <= lam:
        return lam
    return max(a * lam - beta_abs, 0.0) / (a - 1.0)


def scad_threshold(z: float, lam: float, a: float = 3.7) -> float:
    """Univariate SCAD estimate given the unpenalized estimate z.

    Soft-thresholds small z, linearly relaxes the shrinkage on
    (2*lam, a*lam], and returns z unchanged beyond a*lam; continuous in z.
    The first branch uses the positive-part soft threshold, which is the
    continuous completion of the rule (a literal |z - lam| kink would
    break continuity at z = 0).
    """
    if a <= 2:
        raise ParameterError(f"scad shape parameter must be > 2, got {a}")
    az = abs(z)
    if az <= 2.0 * lam:
        return soft_threshold(z, lam)
    if az <= a * lam:
        return ((a - 1.0) * z - math.copysign(a * lam, z)) / (a - 2.0)
    return z


# ---------------------------------------------------------------------------
# dense fits


def _check_xy(x, y):
    x = numcore.as_matrix(x, "x")
    y = numcore.as_vector(y, "y")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    return x, y


def _slope_inference(beta, gram, lam, sigma2, dof):
    """Approximate t statistics and p-values for slope coefficients.

    Uses Var(b) = sigma2 * W G W with W = (G + lam I)^-1; lam = 0 gives the
    exact OLS covariance.
    """
    m = len(beta)
    w = numcore.solve_spd(gram + lam * np.eye(m), np.eye(m))
    cov = sigma2 * (w @ gram @ w.T)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    se = np.maximum(se, 1e-300)
    t = beta / se
    p = 2.0 * scipy.stats.t.sf(np.abs(t), df=max(dof, 1))
    return t, p


def ols_fit(x, y, intercept: bool = True) -> RegressionFit:
    """Least-squares fit via the normal equations.

    Raises SingularityError (suggesting ridge) when X'X is rank deficient.
    """
    x, y = _check_xy(x, y)
    n, m = x.shape
    n_params = m + (1 if intercept else 0)
    if n < n_params:
        raise ParameterError(f"need at least as many rows as parameters: n={n}, parameters={n_params}")

    if intercept:
        x_mean = x.mean(axis=0)
        y_mean = float(y.mean())
        xc = x - x_mean
        yc = y - y_mean
    else:
        x_mean = np.zeros(m)
        y_mean = 0.0
        xc, yc = x, y

    gram = xc.T @ xc
    try:
        beta = numcore.solve_spd(gram, xc.T @ yc)
    except SingularityError as exc:
        raise SingularityError(
            "ols_fit: X'X is singular (collinear or duplicated columns); consider ridge_fit"
        ) from exc

    beta0 = y_mean - float(x_mean @ beta) if intercept else 0.0
    resid = yc - xc @ beta
    dof = max(n - n_params, 1)
    sigma2 = float(resid @ resid) / dof
    eigs = numcore.sym_eigenvalues(gram)

    t, p = _slope_inference(beta, gram, 0.0, sigma2, dof)
    support = tuple(int(j) for j in np.nonzero(p < 0.05)[0])
    return RegressionFit(
        beta=beta,
        beta0=beta0,
        penalty=PenaltySpec("none"),
        sigma2_hat=sigma2,
        gram_eigenvalues=eigs,
        support=support,
        converged=True,
        iterations=1,
        n_obs=n,
        dof=dof,
        gram=gram,
    )


def ridge_fit(x, y, lam: float, center: bool = True) -> RegressionFit:
    """Ridge closed form (X'X + lam I)^-1 X'y; intercept (if any) unpenalized.

    With center=True the slopes are solved on centered data and the
    intercept is recovered from the means; callers that want penalized
    inference on comparable coefficients should standardize x first.
    """
    x, y = _check_xy(x, y)
    if lam <= 0:
        raise ParameterError(f"ridge requires lam > 0, got {lam}; use ols_fit for lam=0")
    n, m = x.shape

    if center:
        x_mean = x.mean(axis=0)
        y_mean = float(y.mean())
        xc = x - x_mean
        yc = y - y_mean
    else:
        x_mean = np.zeros(m)
        y_mean = 0.0
        xc, yc = x, y

    gram = xc.T @ xc
    beta = numcore.solve_spd(gram + lam * np.eye(m), xc.T @ yc)
    beta0 = y_mean - float(x_mean @ beta) if center else 0.0

    resid = yc - xc @ beta
    dof = max(n - m, 1)
    sigma2 = float(resid @ resid) / dof
    eigs = numcore.sym_eigenvalues(gram)

    t, p = _slope_inference(beta, gram, lam, sigma2, dof)
    support = tuple(int(j) for j in np.nonzero(p < 0.05)[0])
    return RegressionFit(
        beta=beta,
        beta0=beta0,
        penalty=PenaltySpec("ridge", lam),
        sigma2_hat=sigma2,
        gram_eigenvalues=eigs,
        support=support,
        converged=True,
        iterations=1,
        n_obs=n,
        dof=dof,
        gram=gram,
    )


def estimator_mse_diagnostic(fit: RegressionFit) -> float:
    """sigma2_hat * sum(1/eigenvalue) over the Gram spectrum.

    Near-zero eigenvalues make the estimator variance blow up, which is
    the standard motivation for switching to ridge; those raise instead
    of returning a meaningless number.
    """
    eigs = np.asarray(fit.gram_eigenvalues, dtype=np.float64)
    if eigs.size == 0:
        raise ParameterError("fit carries no Gram eigenvalues")
    if np.any(eigs <= 1e-12):
        raise IllConditioningError(
            f"Gram matrix is ill conditioned (min eigenvalue {eigs.min():.3e} <= 1e-12)"
        )
    return float(fit.sigma2_hat * np.sum(1.0 / eigs))


# ---------------------------------------------------------------------------
# cyclic coordinate descent for lasso / scad


def _objective(resid_sq_sum: float, beta: np.ndarray, penalty: PenaltySpec, n: int) -> float:
    if penalty.kind == "lasso":
        pen = penalty.lam * float(np.sum(np.abs(beta)))
    else:
        pen = sum(scad_penalty(abs(float(b)), penalty.lam, penalty.a) for b in beta)
    return resid_sq_sum / (2.0 * n) + pen


def penalized_fit(
    x,
    y,
    penalty: PenaltySpec,
    tol: float = 1e-7,
    max_iter: int = 1000,
    beta_init: np.ndarray | None = None,
) -> RegressionFit:
    """Lasso or SCAD fit by cyclic coordinate descent.

    Each coordinate update solves its univariate subproblem exactly
    (soft_threshold resp. scad_threshold applied to the partial-residual
    estimate), so the objective is non-increasing sweep over sweep.
    Convergence is declared when no standardized coefficient moves more
    than `tol` in a sweep; hitting max_iter returns converged=False
    rather than raising.
    """
    if penalty.kind not in ("lasso", "scad"):
        raise ParameterError(f"penalized_fit handles lasso/scad, got {penalty.kind!r}")
    x, y = _check_xy(x, y)
    n, m = x.shape
    if n < 2:
        raise ParameterError("need at least 2 observations")

    x_mean = x.mean(axis=0)
    x_sd = np.sqrt(np.mean((x - x_mean) ** 2, axis=0))  # population scaling: xs'xs = n
    active = x_sd > 0
    xs = np.zeros_like(x)
    xs[:, active] = (x[:, active] - x_mean[active]) / x_sd[active]
    y_mean = float(y.mean())
    yc = y - y_mean

    beta = np.zeros(m)
    if beta_init is not None:
        beta_init = numcore.as_vector(np.asarray(beta_init, dtype=np.float64), "beta_init")
        if beta_init.shape[0] != m:
            raise ShapeError(f"beta_init has {beta_init.shape[0]} entries, expected {m}")
        beta[active] = beta_init[active] * x_sd[active]

    resid = yc - xs @ beta
    lam, a = penalty.lam, penalty.a
    active_idx = np.nonzero(active)[0]
    cols = [xs[:, j] for j in active_idx]

    history = [_objective(float(resid @ resid), beta, penalty, n)]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        max_delta = 0.0
        for k, j in enumerate(active_idx):
            col = cols[k]
            old = beta[j]
            z = float(col @ resid) / n + old
            if penalty.kind == "lasso":
                new = soft_threshold(z, lam)
            else:
                new = scad_threshold(z, lam, a)
            if new != old:
                resid -= col * (new - old)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        obj = _objective(float(resid @ resid), beta, penalty, n)
        if obj > history[-1] + 1e-10 * max(1.0, abs(history[-1])):
            # exact coordinate minimization should never do this; flags
            # a numerical problem (scad branches are non-convex)
            warnings.warn(
                f"penalized_fit: objective increased on sweep {sweeps} "
                f"({history[-1]:.6e} -> {obj:.6e})",
                RuntimeWarning,
            )
        history.append(obj)
        if max_delta < tol:
            converged = True
            break

    beta_orig = np.zeros(m)
    beta_orig[active] = beta[active] / x_sd[active]
    beta0 = y_mean - float(x_mean @ beta_orig)
    support = tuple(int(j) for j in np.nonzero(beta != 0.0)[0])

    rss = float(resid @ resid)
    dof = max(n - len(support) - 1, 1)
    sigma2 = rss / dof
    gram = xs.T @ xs
    eigs = numcore.sym_eigenvalues(gram)

    return RegressionFit(
        beta=beta_orig,
        beta0=beta0,
        penalty=penalty,
        sigma2_hat=sigma2,
        gram_eigenvalues=eigs,
        support=support,
        converged=converged,
        iterations=sweeps,
        n_obs=n,
        dof=dof,
        gram=gram,
        objective_history=history,
    )


def lambda_max(x, y) -> float:
    """Smallest lambda that zeroes every lasso coefficient (standardized x)."""
    x, y = _check_xy(x, y)
    n = x.shape[0]
    x_mean = x.mean(axis=0)
    x_sd = np.sqrt(np.mean((x - x_mean) ** 2, axis=0))
    active = x_sd > 0
    xs = (x[:, active] - x_mean[active]) / x_sd[active]
    yc = y - y.mean()
    if xs.shape[1] == 0:
        raise ParameterError("all columns are constant")
    return float(np.max(np.abs(xs.T @ yc)) / n)


def lambda_grid(x, y, n_points: int = 20, ratio: float = 1e-3) -> np.ndarray:
    """Descending log grid from lambda_max down to ratio*lambda_max."""
    if n_points < 1:
        raise ParameterError(f"n_points must be >= 1, got {n_points}")
    lmax = lambda_max(x, y)
    if lmax == 0.0:
        return np.zeros(n_points)
    return np.geomspace(lmax, lmax * ratio, n_points)


def tune_penalized(
    x,
    y,
    kind: str,
    a: float = 3.7,
    n_points: int = 20,
    val_fraction: float = 0.1,
    tol: float = 1e-7,
    max_iter: int = 1000,
    parsimony_ratio: float = 1.15,
) -> tuple[RegressionFit, float, np.ndarray, np.ndarray]:
    """Pick lambda on a warm-started path, scored by chronological validation MSE.

    The last `val_fraction` of the rows is held out (the data is assumed
    time ordered), the path runs from lambda_max downward, and SCAD fits
    warm-start from the lasso solution at the same lambda to tame the
    non-convexity. Among grid points whose validation MSE is within
    parsimony_ratio of the minimum, the largest lambda wins (a
    one-standard-error-style rule; 1.0 recovers the pure argmin).
    Returns (refit on all rows at the winning lambda, winning lambda,
    grid, validation MSEs).
    """
    if kind not in ("lasso", "scad"):
        raise ParameterError(f"tune_penalized handles lasso/scad, got {kind!r}")
    if parsimony_ratio < 1.0:
        raise ParameterError(f"parsimony_ratio must be >= 1, got {parsimony_ratio}")
    x, y = _check_xy(x, y)
    n = x.shape[0]
    n_val = max(1, int(round(val_fraction * n)))
    if n - n_val < 2:
        raise ParameterError(f"not enough rows ({n}) to hold out {n_val} for validation")
    x_tr, y_tr = x[: n - n_val], y[: n - n_val]
    x_val, y_val = x[n - n_val :], y[n - n_val :]

    grid = lambda_grid(x_tr, y_tr, n_points)
    val_mse = np.empty(len(grid))
    path_betas = []
    lasso_warm = None
    for i, lam in enumerate(grid):
        lasso = penalized_fit(x_tr, y_tr, PenaltySpec("lasso", float(lam), a), tol, max_iter, beta_init=lasso_warm)
        lasso_warm = lasso.beta
        if kind == "lasso":
            fit = lasso
        else:
            fit = penalized_fit(x_tr, y_tr, PenaltySpec("scad", float(lam), a), tol, max_iter, beta_init=lasso.beta)
        err = y_val - fit.predict(x_val)
        val_mse[i] = float(np.mean(err**2))
        path_betas.append(fit.beta)

    cutoff = float(val_mse.min()) * parsimony_ratio
    best = int(np.argmax(val_mse <= cutoff))  # grid is descending, so first hit = largest lambda
    best_lam = float(grid[best])
    final = penalized_fit(x, y, PenaltySpec(kind, best_lam, a), tol, max_iter, beta_init=path_betas[best])
    return final, best_lam, grid, val_mse


# ---------------------------------------------------------------------------
# selection reports


@dataclass
class SelectionRow:
    name: str
    coef: float
    t: float | None
    p: float | None
    selected: bool


@dataclass
class SelectionReport:
    """Per-feature selection outcome for one penalty, serializable to JSON/CSV."""

    rows: list[SelectionRow]
    penalty: PenaltySpec
    dataset_label: str
    alpha: float | None = None

    @property
    def selected_names(self) -> list[str]:
        return [r.name for r in self.rows if r.selected]

    @property
    def n_selected(self) -> int:
        return sum(1 for r in self.rows if r.selected)

    def to_json_dict(self) -> dict:
        return {
            "dataset_label": self.dataset_label,
            "penalty": self.penalty.to_json_dict(),
            "alpha": self.alpha,
            "n_features": len(self.rows),
            "n_selected": self.n_selected,
            "selected_names": self.selected_names,
            "rows": [
                {"name": r.name, "coef": r.coef, "t": r.t, "p": r.p, "selected": r.selected}
                for r in self.rows
            ],
        }

    def write_json(self, path) -> None:
        from .pipeline import atomic_write_text  # local import to avoid a cycle

        atomic_write_text(path, json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    def write_csv(self, path) -> None:
        from .pipeline import atomic_write_text

        import io

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "coef", "t", "p", "selected"])
        for r in self.rows:
            writer.writerow(
                [
                    r.name,
                    repr(r.coef),
                    "" if r.t is None else repr(r.t),
                    "" if r.p is None else repr(r.p),
                    str(r.selected).lower(),
                ]
            )
        atomic_write_text(path, buf.getvalue())

    @classmethod
    def from_json_dict(cls, d: dict) -> "SelectionReport":
        pen = d["penalty"]
        penalty = PenaltySpec(pen["kind"], pen["lambda"], pen["a"] if pen.get("a") is not None else 3.7)
        rows = [
            SelectionRow(r["name"], r["coef"], r.get("t"), r.get("p"), r["selected"])
            for r in d["rows"]
        ]
        return cls(rows=rows, penalty=penalty, dataset_label=d["dataset_label"], alpha=d.get("alpha"))


def select_features(
    fit: RegressionFit,
    names: list[str],
    alpha: float = 0.05,
    dataset_label: str = "",
    feature_scale: np.ndarray | None = None,
) -> SelectionReport:
    """Turn a fit into a per-feature report.

    Sparse fits select their nonzero support; ridge/OLS fits select by an
    approximate t-test at level alpha (see _slope_inference). If the fit
    was run on standardized features, pass the standard deviations as
    feature_scale so reported coefficients land on the original scale.
    """
    if len(names) != len(fit.beta):
        raise ShapeError(f"{len(names)} names for {len(fit.beta)} coefficients")
    scale = np.ones(len(names)) if feature_scale is None else np.asarray(feature_scale, dtype=np.float64)
    coefs = fit.beta / np.where(scale == 0, 1.0, scale)

    rows = []
    if fit.penalty.kind in ("lasso", "scad"):
        in_support = set(fit.support)
        for j, name in enumerate(names):
            rows.append(SelectionRow(name, float(coefs[j]), None, None, j in in_support))
    else:
        lam = fit.penalty.lam if fit.penalty.kind == "ridge" else 0.0
        t, p = _slope_inference(fit.beta, fit.gram, lam, fit.sigma2_hat, fit.dof)
        for j, name in enumerate(names):
            rows.append(SelectionRow(name, float(coefs[j]), float(t[j]), float(p[j]), bool(p[j] < alpha)))
    return SelectionReport(rows=rows, penalty=fit.penalty, dataset_label=dataset_label, alpha=alpha)
