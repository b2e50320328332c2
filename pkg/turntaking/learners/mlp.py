"""
One-hidden-layer perceptron with rectified units and a logistic output.

Trained with mini-batch Adam on the mean log-loss plus an L2 penalty
alpha / (2 * batch) * ||W||^2 on both weight matrices. Training stops when
the epoch loss has not improved by tol for n_iter_no_change epochs.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy.special import expit

from turntaking.config import MLPConfig
from turntaking.logging_config import get_logger

logger = get_logger(__name__)


@dataclass
class MLPParams:
    """Network weights."""
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def as_list(self) -> List[np.ndarray]:
        """Parameters in a fixed order."""
        return [self.W1, self.b1, self.W2, self.b2]

    def flatten(self) -> np.ndarray:
        """All parameters as one vector."""
        return np.concatenate([p.ravel() for p in self.as_list()])

    @classmethod
    def unflatten(cls, flat: np.ndarray, n_inputs: int, n_hidden: int) -> "MLPParams":
        """Inverse of flatten."""
        sizes = [n_inputs * n_hidden, n_hidden, n_hidden, 1]
        parts = np.split(np.asarray(flat, dtype=np.float64), np.cumsum(sizes)[:-1])
        return cls(
            W1=parts[0].reshape(n_inputs, n_hidden),
            b1=parts[1].copy(),
            W2=parts[2].reshape(n_hidden, 1),
            b2=parts[3].copy(),
        )


def glorot_init(n_inputs: int, n_hidden: int, rng: np.random.Generator) -> MLPParams:
    """Uniform Glorot initialization (factor 2 for the logistic output layer)."""
    def layer(fan_in: int, fan_out: int, factor: float) -> Tuple[np.ndarray, np.ndarray]:
        bound = np.sqrt(factor / (fan_in + fan_out))
        return (
            rng.uniform(-bound, bound, size=(fan_in, fan_out)),
            rng.uniform(-bound, bound, size=fan_out),
        )

    W1, b1 = layer(n_inputs, n_hidden, 6.0)
    W2, b2 = layer(n_hidden, 1, 2.0)
    return MLPParams(W1=W1, b1=b1, W2=W2, b2=b2)


def forward(params: MLPParams, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Hidden activations and output logits."""
    hidden = np.maximum(X @ params.W1 + params.b1, 0.0)
    logits = (hidden @ params.W2 + params.b2).ravel()
    return hidden, logits


def loss_and_grad(
    params: MLPParams, X: np.ndarray, y: np.ndarray, alpha: float
) -> Tuple[float, MLPParams]:
    """Penalized mean log-loss of a batch and its gradient."""
    n = X.shape[0]
    hidden, logits = forward(params, X)
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))
    loss += alpha / (2.0 * n) * float(np.sum(params.W1 ** 2) + np.sum(params.W2 ** 2))

    delta_out = ((expit(logits) - y) / n)[:, None]
    grad_W2 = hidden.T @ delta_out + alpha / n * params.W2
    grad_b2 = delta_out.sum(axis=0)
    delta_hidden = (delta_out @ params.W2.T) * (hidden > 0)
    grad_W1 = X.T @ delta_hidden + alpha / n * params.W1
    grad_b1 = delta_hidden.sum(axis=0)
    return loss, MLPParams(W1=grad_W1, b1=grad_b1, W2=grad_W2, b2=grad_b2)


@dataclass
class MLPModel:
    """A trained perceptron."""
    params: MLPParams
    n_epochs: int = 0
    final_loss: float = float("nan")

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, cfg: MLPConfig) -> "MLPModel":
        """Mini-batch Adam with early stopping on a training-loss plateau."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        rng = np.random.default_rng(cfg.seed)
        params = glorot_init(X.shape[1], cfg.hidden_units, rng)
        first = [np.zeros_like(p) for p in params.as_list()]
        second = [np.zeros_like(p) for p in params.as_list()]
        batch = min(cfg.batch_size, X.shape[0])

        best_loss = np.inf
        stale = 0
        step = 0
        epoch_loss = np.inf
        epoch = 0
        for epoch in range(1, cfg.max_iter + 1):
            order = rng.permutation(X.shape[0])
            total = 0.0
            for begin in range(0, X.shape[0], batch):
                rows = order[begin:begin + batch]
                loss, grads = loss_and_grad(params, X[rows], y[rows], cfg.alpha)
                total += loss * rows.shape[0]
                step += 1
                correction = np.sqrt(1 - cfg.beta_2 ** step) / (1 - cfg.beta_1 ** step)
                rate = cfg.learning_rate * correction
                for p, g, m, v in zip(params.as_list(), grads.as_list(), first, second):
                    m *= cfg.beta_1
                    m += (1 - cfg.beta_1) * g
                    v *= cfg.beta_2
                    v += (1 - cfg.beta_2) * g ** 2
                    p -= rate * m / (np.sqrt(v) + cfg.epsilon)
            epoch_loss = total / X.shape[0]

            if epoch_loss > best_loss - cfg.tol:
                stale += 1
            else:
                stale = 0
            best_loss = min(best_loss, epoch_loss)
            if stale > cfg.n_iter_no_change:
                break

        logger.debug("MLP training finished", epochs=epoch, loss=round(epoch_loss, 6))
        return cls(params=params, n_epochs=epoch, final_loss=float(epoch_loss))

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Probability of the positive class."""
        _, logits = forward(self.params, np.asarray(X, dtype=np.float64))
        return expit(logits)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready parameters."""
        return {
            "n_inputs": int(self.params.W1.shape[0]),
            "n_hidden": int(self.params.W1.shape[1]),
            "weights": self.params.flatten().tolist(),
            "n_epochs": self.n_epochs,
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "MLPModel":
        """Inverse of to_dict."""
        params = MLPParams.unflatten(
            np.array(payload["weights"], dtype=np.float64),
            int(payload["n_inputs"]),
            int(payload["n_hidden"]),
        )
        return cls(
            params=params,
            n_epochs=int(payload.get("n_epochs", 0)),
            final_loss=float(payload.get("final_loss", float("nan"))),
        )
