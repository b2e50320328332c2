"""
L2-regularized logistic regression fitted with L-BFGS-B.

Objective (intercept not penalized):

    C * sum_i [log(1 + exp(z_i)) - y_i z_i] + 0.5 * ||w||^2,   z = X w + b
"""

from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from turntaking.config import LogisticConfig
from turntaking.logging_config import get_logger

logger = get_logger(__name__)


def loss_and_grad(
    params: np.ndarray, X: np.ndarray, y: np.ndarray, C: float
) -> Tuple[float, np.ndarray]:
    """Objective and gradient at params = [w..., b]."""
    w, b = params[:-1], params[-1]
    z = X @ w + b
    loss = C * float(np.sum(np.logaddexp(0.0, z) - y * z)) + 0.5 * float(w @ w)
    residual = C * (expit(z) - y)
    grad = np.empty_like(params)
    grad[:-1] = X.T @ residual + w
    grad[-1] = residual.sum()
    return loss, grad


@dataclass
class LogisticModel:
    """Weights and intercept of a fitted logistic regression."""
    coef: np.ndarray
    intercept: float = 0.0
    n_iter: int = 0

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, cfg: LogisticConfig) -> "LogisticModel":
        """Minimize the regularized log-loss."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        result = minimize(
            loss_and_grad,
            np.zeros(X.shape[1] + 1),
            args=(X, y, cfg.C),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": cfg.max_iter, "gtol": cfg.tol},
        )
        if not result.success:
            logger.debug("L-BFGS-B stopped early", message=str(result.message), nit=result.nit)
        return cls(coef=result.x[:-1].copy(), intercept=float(result.x[-1]), n_iter=int(result.nit))

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        """Linear scores."""
        return np.asarray(X, dtype=np.float64) @ self.coef + self.intercept

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Probability of the positive class."""
        return expit(self.decision_function(X))

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready parameters."""
        return {"coef": self.coef.tolist(), "intercept": self.intercept, "n_iter": self.n_iter}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "LogisticModel":
        """Inverse of to_dict."""
        return cls(
            coef=np.array(payload["coef"], dtype=np.float64),
            intercept=float(payload["intercept"]),
            n_iter=int(payload.get("n_iter", 0)),
        )
