"""
Centralized reference implementations used to check the federated runs.

Two objective conventions exist side by side:

* "vfl": loss = sum(d_i^2) + lambda/2 * ||theta||^2 with gradient
  X^T d + lambda * theta, the exact gradient of the half-data-term objective.
* "hfl": loss = mean(d_i^2) + lambda/2 * ||theta||^2 with gradient
  (2/N) X^T d + lambda * theta.

where d = X theta - y.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from errors import InvalidDatasetError, SingularMatrixError

logger = logging.getLogger(__name__)

MODULE = "harness"

GradientFn = Callable[[np.ndarray, np.ndarray, np.ndarray, float], np.ndarray]
LossFn = Callable[[np.ndarray, np.ndarray, np.ndarray, float], float]


def mse(y: np.ndarray, y_hat: np.ndarray) -> float:
    y, y_hat = np.asarray(y, dtype=float), np.asarray(y_hat, dtype=float)
    if y.size == 0:
        return 0.0
    return float(np.mean((y - y_hat) ** 2))


def r2(y: np.ndarray, y_hat: np.ndarray) -> float:
    y, y_hat = np.asarray(y, dtype=float), np.asarray(y_hat, dtype=float)
    total = float(np.sum((y - y.mean()) ** 2)) if y.size else 0.0
    if total == 0.0:
        return 0.0
    return 1.0 - float(np.sum((y - y_hat) ** 2)) / total


def vfl_loss(theta: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> float:
    d = x @ theta - y
    return float(d @ d + lam / 2 * theta @ theta)


def vfl_gradient(theta: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    return x.T @ (x @ theta - y) + lam * theta


def half_data_objective(theta: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> float:
    d = x @ theta - y
    return float(0.5 * d @ d + lam / 2 * theta @ theta)


def hfl_loss(theta: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> float:
    d = x @ theta - y
    return float(np.mean(d ** 2) + lam / 2 * theta @ theta) if len(y) else float(lam / 2 * theta @ theta)


def hfl_gradient(theta: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    if len(y) == 0:
        return lam * theta
    return 2.0 / len(y) * (x.T @ (x @ theta - y)) + lam * theta


def finite_difference_gradient(objective: Callable[[np.ndarray], float], theta: np.ndarray,
                               step: float = 1e-6) -> np.ndarray:
    """Central differences, one coordinate at a time."""
    grad = np.zeros_like(theta, dtype=float)
    for j in range(len(theta)):
        bump = np.zeros_like(theta, dtype=float)
        bump[j] = step
        grad[j] = (objective(theta + bump) - objective(theta - bump)) / (2 * step)
    return grad


def convergence_reached(history: Sequence[float], tolerance: float, max_iters: int) -> bool:
    """Stop once the relative loss change falls under tolerance or the cap is hit."""
    if len(history) >= max_iters:
        return True
    if len(history) < 2:
        return False
    previous, current = history[-2], history[-1]
    return abs(current - previous) < tolerance * max(1.0, abs(previous))


def ridge_closed_form(x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Solve (X^T X + lambda I) theta = X^T y."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape[0] == 0:
        raise InvalidDatasetError(MODULE, "closed-form oracle needs at least one sample")
    normal = x.T @ x + lam * np.eye(x.shape[1])
    if np.linalg.matrix_rank(normal) < x.shape[1]:
        hint = " (use reg_lambda > 0)" if lam == 0 else ""
        raise SingularMatrixError(MODULE, f"normal matrix is singular{hint}")
    return np.linalg.solve(normal, x.T @ y)


@dataclass
class DescentTrace:
    theta: np.ndarray
    loss_history: List[float] = field(default_factory=list)
    gradients: List[np.ndarray] = field(default_factory=list)
    thetas: List[np.ndarray] = field(default_factory=list)


def gradient_descent(
    x: np.ndarray,
    y: np.ndarray,
    learning_rate: float,
    reg_lambda: float,
    max_iters: int,
    loss_tolerance: float,
    gradient_fn: GradientFn = vfl_gradient,
    loss_fn: LossFn = vfl_loss,
    theta0: Optional[np.ndarray] = None,
    rounds: Optional[int] = None,
) -> DescentTrace:
    """Plaintext full-batch gradient descent with the federated stop rule.

    Each round records the loss and gradient at the current parameters and
    then applies the step, exactly as the federated parties do.

    Args:
        rounds: Run exactly this many rounds, ignoring the stop rule
    """
    theta = np.zeros(x.shape[1]) if theta0 is None else np.array(theta0, dtype=float)
    trace = DescentTrace(theta=theta)
    while True:
        trace.loss_history.append(loss_fn(theta, x, y, reg_lambda))
        gradient = gradient_fn(theta, x, y, reg_lambda)
        trace.gradients.append(gradient)
        theta = theta - learning_rate * gradient
        trace.thetas.append(theta)
        if rounds is not None:
            if len(trace.loss_history) >= rounds:
                break
        elif convergence_reached(trace.loss_history, loss_tolerance, max_iters):
            break
    trace.theta = theta
    return trace


@dataclass
class OracleResult:
    closed_form_model: np.ndarray
    gd_model: np.ndarray
    v_sum: float
    r2: float
    trace: DescentTrace


def centralized_oracle(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_test: np.ndarray,
    y_test: np.ndarray,
    learning_rate: float,
    reg_lambda: float,
    max_iters: int,
    loss_tolerance: float,
    convention: str = "vfl",
    rounds: Optional[int] = None,
) -> OracleResult:
    """Train on the pooled data and score on the held-out rows.

    v_sum is the held-out MSE of the gradient-descent model, which uses the
    same hyperparameters as the federated run.
    """
    if len(y_train) == 0:
        raise InvalidDatasetError(MODULE, "pooled training data is empty")
    if convention == "vfl":
        gradient_fn, loss_fn, ridge_lambda = vfl_gradient, vfl_loss, reg_lambda
    elif convention == "hfl":
        gradient_fn, loss_fn, ridge_lambda = hfl_gradient, hfl_loss, reg_lambda * len(y_train) / 2
    else:
        raise ValueError(f"unknown convention {convention!r}")

    trace = gradient_descent(x_train, y_train, learning_rate, reg_lambda, max_iters, loss_tolerance,
                             gradient_fn, loss_fn, rounds=rounds)
    closed = ridge_closed_form(x_train, y_train, ridge_lambda)
    y_hat = x_test @ trace.theta
    return OracleResult(closed, trace.theta, mse(y_test, y_hat), r2(y_test, y_hat), trace)
