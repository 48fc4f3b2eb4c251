import numpy as np
from scipy.special import expit, log_expit

from ..exceptions import ConvergenceError
from .base import BinaryClassifier


class LogisticModel(BinaryClassifier):
    """L2-penalized logistic regression fitted by Newton's method.

    Minimizes ``0.5 * ||w||^2 + C * sum(log-loss)``; the intercept is not
    penalized.  Each Newton step is halved until the objective decreases, and
    iteration stops once the gradient's infinity norm is below ``tol``.

    Parameters
    ----------
    C : float, default=1.0
        Inverse regularization strength.
    penalty : {'l2'}, default='l2'
    solver : {'newton-cg', 'newton'}, default='newton-cg'
        Both names select the same exact-Hessian Newton iteration.
    tol : float, default=1e-8
    max_iter : int, default=100
    """

    kind = "logistic"

    def __init__(self, C=1.0, penalty="l2", solver="newton-cg", tol=1e-8, max_iter=100):
        self.C = C
        self.penalty = penalty
        self.solver = solver
        self.tol = tol
        self.max_iter = max_iter

    def _validate_params(self):
        self._require(np.isfinite(self.C) and self.C > 0, "C", "must be > 0")
        self._require(self.penalty == "l2", "penalty", "only 'l2' is supported")
        self._require(self.solver in ("newton-cg", "newton"), "solver", "expected 'newton-cg' or 'newton'")
        self._require(self.max_iter >= 1, "max_iter", "must be >= 1")

    def _objective(self, theta, A, y):
        eta = A @ theta
        loss = -np.sum(y * log_expit(eta) + (1 - y) * log_expit(-eta))
        return 0.5 * theta[1:] @ theta[1:] + self.C * loss

    def _gradient(self, theta, A, y):
        g = self.C * (A.T @ (expit(A @ theta) - y))
        g[1:] += theta[1:]
        return g

    def _fit(self, X, y):
        n, p = X.shape
        A = np.column_stack([np.ones(n), X])
        y = y.astype(float)
        theta = np.zeros(p + 1)
        obj = self._objective(theta, A, y)
        reg = np.eye(p + 1)
        reg[0, 0] = 0.0
        path = [obj]
        self.converged_ = False
        for it in range(self.max_iter):
            grad = self._gradient(theta, A, y)
            if np.max(np.abs(grad)) < self.tol:
                self.converged_ = True
                break
            mu = expit(A @ theta)
            hess = self.C * (A * (mu * (1 - mu))[:, None]).T @ A + reg
            hess[0, 0] += 1e-12
            step = np.linalg.solve(hess, grad)
            t = 1.0
            while t > 1e-12:
                cand = theta - t * step
                cand_obj = self._objective(cand, A, y)
                if cand_obj <= obj:
                    break
                t *= 0.5
            else:
                break
            theta, obj = cand, cand_obj
            path.append(obj)
        grad_norm = float(np.max(np.abs(self._gradient(theta, A, y))))
        self.converged_ = self.converged_ or grad_norm < self.tol
        if not self.converged_ and grad_norm > 1e-6:
            raise ConvergenceError(f"logistic Newton stopped with gradient norm {grad_norm:.3g}")
        self.intercept_ = float(theta[0])
        self.coef_ = theta[1:]
        self.n_iter_ = it
        self.objective_path_ = np.asarray(path)
        self.gradient_norm_ = grad_norm

    def decision_function(self, X):
        X = self._check_X(X)
        return X @ self.coef_ + self.intercept_

    def _proba(self, X):
        return expit(X @ self.coef_ + self.intercept_)

    def _get_state(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_}

    def _set_state(self, state):
        self.coef_ = np.asarray(state["coef"], float)
        self.intercept_ = float(state["intercept"])
