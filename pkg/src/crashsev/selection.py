"""Unpenalized logistic regression with Wald statistics, and p-value feature selection."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy.special import expit, log_expit
from scipy.stats import norm
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DataError, ModelingError
from .schema import DesignMatrix

logger = logging.getLogger(__name__)

RIDGE = 1e-8
MAX_ABS_COEF = 20.0


def log_likelihood(beta, A, y):
    eta = A @ beta
    return float(np.sum(y * log_expit(eta) + (1 - y) * log_expit(-eta)))


def score_vector(beta, A, y):
    """Gradient of the Bernoulli log-likelihood."""
    return A.T @ (y - expit(A @ beta))


def collinear_columns(A: np.ndarray, names, rtol: float = 1e-10):
    """Names of columns that are linear combinations of earlier ones."""
    dependent, kept = [], []
    scale = max(1.0, np.abs(A).max())
    for j in range(A.shape[1]):
        trial = A[:, kept + [j]]
        s = np.linalg.svd(trial, compute_uv=False)
        if s[-1] <= rtol * scale * s[0] * np.sqrt(A.shape[0]):
            dependent.append(names[j])
        else:
            kept.append(j)
    return dependent


@dataclass
class LogitFit:
    """Coefficients of a fitted logit with Wald standard errors, z, p and intervals.

    ``ci_low``/``ci_high`` are 95% bounds; ``ci90_low``/``ci90_high`` are the 90%
    bounds used for selection.
    """

    column_names: list
    coefficients: np.ndarray
    standard_errors: np.ndarray
    z_scores: np.ndarray
    p_values: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    ci90_low: np.ndarray
    ci90_high: np.ndarray
    intercept: float = 0.0
    intercept_se: float = float("nan")
    converged: bool = True
    iterations: int = 0
    gradient_norm: float = 0.0
    log_likelihood: float = float("nan")
    message: str = ""

    @classmethod
    def from_estimates(cls, column_names, coefficients, standard_errors, **kwargs) -> "LogitFit":
        """Derive z, two-sided p and both intervals from coefficients and standard errors."""
        coef = np.asarray(coefficients, dtype=float)
        se = np.asarray(standard_errors, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = coef / se
        p = 2.0 * norm.sf(np.abs(z))
        q95, q90 = norm.ppf(0.975), norm.ppf(0.95)
        return cls(list(column_names), coef, se, z, p, coef - q95 * se, coef + q95 * se,
                   coef - q90 * se, coef + q90 * se, **kwargs)

    def to_frame(self) -> pd.DataFrame:
        """Coefficient table in the usual ``Coef. Std. Err. z P>|z| [0.025 0.975]`` layout."""
        return pd.DataFrame({
            "Features": self.column_names,
            "Coef.": self.coefficients,
            "Std. Err.": self.standard_errors,
            "z": self.z_scores,
            "P>|z|": self.p_values,
            "[0.025": self.ci_low,
            "0.975]": self.ci_high,
            "[0.05": self.ci90_low,
            "0.95]": self.ci90_high,
        })


def fit_logit_wald(X: DesignMatrix, max_iter: int = 100, tol: float = 1e-8) -> LogitFit:
    """Maximum-likelihood logit by Newton's method, intercept always included.

    Iterates until the infinity norm of the score drops below ``tol`` or
    ``max_iter`` is hit; steps are halved while the log-likelihood would drop.
    Standard errors come from the inverse observed information (plus a 1e-8
    ridge for invertibility).  Fits whose largest coefficient exceeds 20 are
    flagged as unconverged (quasi-separation) rather than raised.
    """
    values, y = X.values, X.labels.astype(float)
    n, p = values.shape
    if n <= p:
        raise DataError(f"need more rows than columns (n={n}, p={p})")
    if len(np.unique(y)) < 2:
        raise DataError("labels contain a single class")
    const = [c for c, col in zip(X.column_names, values.T) if np.all(col == col[0])]
    if const:
        raise DataError(f"constant columns: {const}")
    A = np.column_stack([np.ones(n), values])
    names = ["intercept"] + list(X.column_names)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise ModelingError(f"singular information matrix; collinear columns: {collinear_columns(A, names)}")

    beta = np.zeros(p + 1)
    ll = log_likelihood(beta, A, y)
    ridge = RIDGE * np.eye(p + 1)
    converged, message, it = False, "iteration cap reached", 0
    while it < max_iter:
        grad = score_vector(beta, A, y)
        if np.max(np.abs(grad)) < tol:
            converged, message = True, "gradient below tolerance"
            break
        mu = expit(A @ beta)
        info = (A * (mu * (1 - mu))[:, None]).T @ A + ridge
        step = np.linalg.solve(info, grad)
        t, accepted = 1.0, False
        while t > 1e-10:
            cand = beta + t * step
            cand_ll = log_likelihood(cand, A, y)
            if cand_ll >= ll - 1e-12 * abs(ll):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            message = "line search stalled"
            break
        beta, ll = cand, cand_ll
        it += 1
        if np.max(np.abs(beta)) > 1e3:
            break
    grad_norm = float(np.max(np.abs(score_vector(beta, A, y))))
    if not converged and grad_norm < tol:
        converged, message = True, "gradient below tolerance"
    if np.max(np.abs(beta)) > MAX_ABS_COEF:
        converged, message = False, f"max |coef| {np.max(np.abs(beta)):.3g} > {MAX_ABS_COEF}: possible separation"
    if not converged:
        logger.warning("logit fit did not converge: %s", message)

    mu = expit(A @ beta)
    info = (A * (mu * (1 - mu))[:, None]).T @ A + ridge
    cov = np.linalg.inv(info)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return LogitFit.from_estimates(
        X.column_names, beta[1:], se[1:], intercept=float(beta[0]), intercept_se=float(se[0]),
        converged=converged, iterations=it, gradient_norm=grad_norm, log_likelihood=ll, message=message)


@dataclass
class SelectionReport:
    kept: list
    dropped: dict
    alpha: float
    fit: Optional[LogitFit] = field(default=None, repr=False)

    def to_frame(self) -> pd.DataFrame:
        frame = self.fit.to_frame()
        frame["kept"] = frame["Features"].isin(self.kept)
        return frame

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.10g")


def select_significant(fit: LogitFit, alpha: float = 0.10) -> SelectionReport:
    """Keep the columns whose two-sided Wald p-value is below ``alpha``, in order."""
    if not fit.converged:
        raise ModelingError(f"cannot select from an unconverged fit ({fit.message})")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    kept, dropped = [], {}
    for name, p in zip(fit.column_names, fit.p_values):
        if p < alpha:
            kept.append(name)
        else:
            dropped[name] = float(p)
    return SelectionReport(kept, dropped, alpha, fit)


class LogitSelector(SelectorMixin, BaseEstimator):
    """Feature selector keeping columns significant in an unpenalized logit.

    Parameters
    ----------
    alpha : float, default=0.10
        Two-sided p-value threshold (0.10 means 90% confidence).
    max_iter, tol :
        Newton settings passed to :func:`fit_logit_wald`.
    """

    def __init__(self, alpha=0.10, max_iter=100, tol=1e-8):
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        if isinstance(X, DesignMatrix):
            design = X
        else:
            names = list(X.columns) if hasattr(X, "columns") else [f"x{j}" for j in range(np.shape(X)[1])]
            design = DesignMatrix(names, np.asarray(X, dtype=float), np.asarray(y))
        self.fit_ = fit_logit_wald(design, self.max_iter, self.tol)
        self.report_ = select_significant(self.fit_, self.alpha)
        self.column_names_ = list(design.column_names)
        if isinstance(X, DesignMatrix) or hasattr(X, "columns"):
            self.feature_names_in_ = np.asarray(design.column_names, dtype=object)
        elif hasattr(self, "feature_names_in_"):
            del self.feature_names_in_
        self.n_features_in_ = len(design.column_names)
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "report_")
        kept = set(self.report_.kept)
        return np.array([n in kept for n in self.column_names_])

    def transform(self, X):
        if isinstance(X, DesignMatrix):
            return X.select([n for n, k in zip(self.column_names_, self.get_support()) if k])
        return super().transform(np.asarray(X, dtype=float) if not hasattr(X, "columns") else X)
