"""Soft-margin RBF SVM trained by sequential minimal optimization."""
from collections import OrderedDict

import numpy as np
from scipy.special import expit

from ..exceptions import ConvergenceError
from .base import BinaryClassifier

TAU = 1e-12


def rbf_kernel(A, B, gamma):
    """``exp(-gamma * ||a - b||^2)`` for every pair of rows."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(d2, 0.0))


class _KernelRows:
    """Lazily computed kernel rows with an LRU cache."""

    def __init__(self, X, gamma, cache_bytes=200 * 2 ** 20):
        self.X, self.gamma = X, gamma
        self.sq = (X * X).sum(1)
        self.cache = OrderedDict()
        self.capacity = max(2, int(cache_bytes // (8 * len(X))))

    def __call__(self, i):
        row = self.cache.get(i)
        if row is not None:
            self.cache.move_to_end(i)
            return row
        d2 = self.sq[i] + self.sq - 2.0 * (self.X @ self.X[i])
        d2[i] = 0.0
        row = np.exp(-self.gamma * np.maximum(d2, 0.0))
        self.cache[i] = row
        if len(self.cache) > self.capacity:
            self.cache.popitem(last=False)
        return row


def smo_solve(X, y_sign, C, gamma, tol=1e-3, max_iter=None, track_objective=False):
    """Solve ``min 0.5 a'Qa - e'a`` s.t. ``0 <= a <= C``, ``y'a = 0``.

    Working pairs are chosen by the maximal-violating-pair rule for ``i`` and
    the second-order gain rule for ``j``; stops when the KKT gap
    ``m(a) - M(a)`` drops below ``tol``.  Returns ``(alpha, rho, info)`` with
    the decision function ``sum_i alpha_i y_i K(x_i, x) - rho``.
    """
    n = len(y_sign)
    y = y_sign.astype(float)
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    K = _KernelRows(X, gamma)
    alpha = np.zeros(n)
    G = -np.ones(n)
    objective = []
    gap = np.inf
    it = 0
    while it < max_iter:
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        cand_up = np.where(up, yG, -np.inf)
        i = int(np.argmax(cand_up))
        m_val = cand_up[i]
        M_val = np.min(np.where(low, yG, np.inf))
        gap = m_val - M_val
        if gap < tol:
            break
        Ki = K(i)
        b = m_val - yG
        a = 2.0 - 2.0 * Ki  # K_ii = K_tt = 1 for the RBF kernel
        a = np.where(a > 0, a, TAU)
        score = np.where(low & (yG < m_val), -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        Kj = K(j)
        Qi = y[i] * y * Ki
        Qj = y[j] * y * Kj
        ai_old, aj_old = alpha[i], alpha[j]

        # two-variable subproblem, clipped to the box (LIBSVM update rules)
        if y[i] != y[j]:
            quad = max(2.0 + 2.0 * Qi[j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = max(2.0 - 2.0 * Qi[j], TAU)
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total

        G += Qi * (alpha[i] - ai_old) + Qj * (alpha[j] - aj_old)
        it += 1
        if track_objective:
            objective.append(0.5 * alpha @ (G - 1.0))
    else:
        raise ConvergenceError(f"SMO did not reach KKT gap {tol} in {max_iter} iterations (gap {gap:.3g})")

    yG = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = -float(np.mean(yG[free]))
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        rho = -0.5 * (np.max(yG[up]) + np.min(yG[low]))
    info = {"iterations": it, "kkt_gap": float(gap), "objective": np.asarray(objective)}
    return alpha, rho, info


def platt_fit(dec, labels, max_iter=100, min_step=1e-10, sigma=1e-12, eps=1e-5):
    """Fit ``P(y=1|f) = 1 / (1 + exp(A f + B))`` by Newton's method with backtracking."""
    prior1 = float(np.sum(labels == 1))
    prior0 = float(len(labels) - prior1)
    hi_t, lo_t = (prior1 + 1.0) / (prior1 + 2.0), 1.0 / (prior0 + 2.0)
    t = np.where(labels == 1, hi_t, lo_t)
    A, B = 0.0, np.log((prior0 + 1.0) / (prior1 + 1.0))

    def value(A, B):
        f = dec * A + B
        return float(np.sum(np.where(f >= 0, t * f + np.log1p(np.exp(-f)),
                                     (t - 1.0) * f + np.log1p(np.exp(f)))))

    fval = value(A, B)
    for _ in range(max_iter):
        f = dec * A + B
        p = np.where(f >= 0, np.exp(-f) / (1.0 + np.exp(-f)), 1.0 / (1.0 + np.exp(f)))
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + np.sum(dec * dec * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(dec * d2)
        d1 = t - p
        g1, g2 = np.sum(dec * d1), np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            newA, newB = A + step * dA, B + step * dB
            newf = value(newA, newB)
            if newf < fval + 1e-4 * step * gd:
                A, B, fval = newA, newB, newf
                break
            step /= 2.0
        else:
            break
    return A, B


class SVMModel(BinaryClassifier):
    """RBF support vector machine with Platt-scaled probabilities.

    Parameters
    ----------
    C : float, default=1.0
        Box constraint on the dual variables.
    gamma : float or 'auto', default='auto'
        Kernel width; ``'auto'`` is ``1 / n_features``.
    kernel : {'rbf'}, default='rbf'
    tol : float, default=1e-3
        KKT gap at which SMO stops.
    max_iter : int or None
        SMO iteration cap; ``None`` means ``max(100000, 100 n)``.
    random_state : int, default=0
        Unused; SMO is deterministic.
    """

    kind = "svm"

    def __init__(self, C=1.0, gamma="auto", kernel="rbf", tol=1e-3, max_iter=None, random_state=0):
        self.C = C
        self.gamma = gamma
        self.kernel = kernel
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def _validate_params(self):
        self._require(np.isfinite(self.C) and self.C > 0, "C", "must be > 0")
        self._require(self.kernel == "rbf", "kernel", "only 'rbf' is supported")
        self._require(self.gamma == "auto" or (not isinstance(self.gamma, str) and self.gamma > 0),
                      "gamma", "expected 'auto' or a positive number")

    def _fit(self, X, y):
        self.gamma_ = 1.0 / X.shape[1] if self.gamma == "auto" else float(self.gamma)
        y_sign = np.where(y == 1, 1.0, -1.0)
        alpha, rho, info = smo_solve(X, y_sign, float(self.C), self.gamma_, self.tol, self.max_iter)
        sv = alpha > 0
        self.support_ = np.flatnonzero(sv)
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (alpha * y_sign)[sv]
        self.intercept_ = -rho
        self.n_iter_ = info["iterations"]
        self.kkt_gap_ = info["kkt_gap"]
        self.probA_, self.probB_ = platt_fit(self._decision(X), y)

    def _decision(self, X):
        out = np.empty(len(X))
        for start in range(0, len(X), 1024):
            K = rbf_kernel(X[start:start + 1024], self.support_vectors_, self.gamma_)
            out[start:start + 1024] = K @ self.dual_coef_ + self.intercept_
        return out

    def decision_function(self, X):
        return self._decision(self._check_X(X))

    def _proba(self, X):
        return expit(-(self.probA_ * self._decision(X) + self.probB_))

    def _get_state(self):
        return {"gamma": self.gamma_, "support_vectors": self.support_vectors_.tolist(),
                "dual_coef": self.dual_coef_.tolist(), "intercept": self.intercept_,
                "probA": self.probA_, "probB": self.probB_}

    def _set_state(self, state):
        self.gamma_ = float(state["gamma"])
        self.support_vectors_ = np.asarray(state["support_vectors"], float).reshape(-1, self.n_features_in_)
        self.dual_coef_ = np.asarray(state["dual_coef"], float)
        self.intercept_ = float(state["intercept"])
        self.probA_, self.probB_ = float(state["probA"]), float(state["probB"])
