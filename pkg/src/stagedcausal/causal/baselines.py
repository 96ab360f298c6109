"""
Classical ATE baselines: outcome regression, IPW and AIPW.

Logistic models use main effects only (intercept, one-hot covariates with
the first level dropped, treatment indicator) and are fitted by Newton /
IRLS steps on the log-likelihood.
"""

from enum import Enum
from typing import Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel
from scipy.special import expit

from ..trees.models import Dataset
from .models import AteEstimate, CausalFrame, EstimateDiagnostics, EstimationError

log = structlog.get_logger()

# |linear predictor| beyond this on a non-converged fit means separation
SEPARATION_ETA = 15.0


class ComponentModel(str, Enum):
    """Outcome or propensity model used by the weighting baselines."""

    LOGISTIC = "logistic"
    CONSTANT = "constant"
    SATURATED = "saturated"


class LogisticFit(BaseModel):
    coef: list[float]
    converged: bool
    iterations: int
    separation: bool = False

    def predict(self, X: np.ndarray) -> np.ndarray:
        return expit(X @ np.asarray(self.coef))


def fit_logistic_irls(
    X: np.ndarray,
    y: np.ndarray,
    max_iter: int = 50,
    tol: float = 1e-8,
    ridge: float = 1e-8,
) -> LogisticFit:
    """Newton-Raphson for logistic regression starting from zero.

    Converged when the largest coefficient change drops below ``tol``. A
    fit that does not converge is flagged as separated when its linear
    predictor diverges, otherwise it is an error.
    """
    beta = np.zeros(X.shape[1])
    jitter = ridge * np.eye(X.shape[1])
    for it in range(1, max_iter + 1):
        mu = expit(X @ beta)
        W = mu * (1 - mu)
        H = X.T @ (W[:, None] * X) + jitter
        grad = X.T @ (y - mu)
        try:
            delta = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(H, grad, rcond=None)[0]
        if not np.all(np.isfinite(delta)):
            break
        beta = beta + delta
        if np.max(np.abs(delta)) < tol:
            return LogisticFit(coef=beta.tolist(), converged=True, iterations=it)
    eta = np.abs(X @ beta)
    if eta.size and float(eta.max()) > SEPARATION_ETA:
        log.warning("irls.separation", iterations=max_iter, max_eta=float(eta.max()))
        return LogisticFit(coef=beta.tolist(), converged=False, iterations=max_iter, separation=True)
    raise EstimationError(f"logistic regression did not converge in {max_iter} iterations")


def covariate_design(data: Dataset, frame: CausalFrame) -> np.ndarray:
    """Intercept plus one-hot covariates (first level dropped)."""
    cols = [np.ones(data.n)]
    for j in frame.covariates:
        for level in range(1, data.variables[j].arity):
            cols.append((data.codes[:, j] == level).astype(float))
    return np.column_stack(cols)


def _arrays(data: Dataset, frame: CausalFrame) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if data.n == 0:
        raise EstimationError("no rows to estimate from")
    Z = covariate_design(data, frame)
    r = (data.codes[:, frame.treatment] == frame.treated_level).astype(float)
    y = (data.codes[:, frame.outcome] == frame.positive_outcome_level).astype(float)
    return Z, r, y


def _cells(data: Dataset, frame: CausalFrame) -> np.ndarray:
    """Cell index of each row's covariate context."""
    if not frame.covariates:
        return np.zeros(data.n, dtype=np.int64)
    _, inverse = np.unique(data.codes[:, : frame.treatment], axis=0, return_inverse=True)
    return inverse.reshape(-1)


class IrlsOptions(BaseModel):
    max_iter: int = 50
    tol: float = 1e-8
    ridge: float = 1e-8


def outcome_predictions(
    data: Dataset,
    frame: CausalFrame,
    kind: ComponentModel,
    diag: EstimateDiagnostics,
    irls: IrlsOptions,
) -> Tuple[np.ndarray, np.ndarray]:
    """Predicted ``P(Y=y+)`` under treatment and under control for every row."""
    Z, r, y = _arrays(data, frame)
    if kind == ComponentModel.CONSTANT:
        m = np.full(data.n, y.mean())
        return m, m.copy()
    if kind == ComponentModel.SATURATED:
        cells = _cells(data, frame)
        m1 = np.empty(data.n)
        m0 = np.empty(data.n)
        for arm, out in ((1.0, m1), (0.0, m0)):
            in_arm = r == arm
            fallback = y[in_arm].mean() if in_arm.any() else y.mean()
            sums = np.bincount(cells[in_arm], weights=y[in_arm], minlength=cells.max() + 1)
            sizes = np.bincount(cells[in_arm], minlength=cells.max() + 1)
            means = np.divide(sums, sizes, out=np.full(sums.shape, fallback), where=sizes > 0)
            if np.any(sizes[np.unique(cells)] == 0):
                diag.messages.append("saturated outcome model: empty cell filled with the arm mean")
            out[:] = means[cells]
        return m1, m0
    if y.min() == y.max():
        diag.degenerate = True
        diag.messages.append("constant outcome: regression is degenerate")
        m = np.full(data.n, y[0])
        return m, m.copy()
    X = np.column_stack([Z, r])
    fit = fit_logistic_irls(X, y, irls.max_iter, irls.tol, irls.ridge)
    diag.separation = diag.separation or fit.separation
    X1 = np.column_stack([Z, np.ones(data.n)])
    X0 = np.column_stack([Z, np.zeros(data.n)])
    return fit.predict(X1), fit.predict(X0)


def propensity_scores(
    data: Dataset,
    frame: CausalFrame,
    kind: ComponentModel,
    diag: EstimateDiagnostics,
    irls: IrlsOptions,
    clip: float = 0.01,
) -> np.ndarray:
    """``P(R=treated | Z)`` per row, clipped to ``[clip, 1 - clip]``."""
    Z, r, _ = _arrays(data, frame)
    if r.min() == r.max():
        raise EstimationError(
            f"every row is {'treated' if r[0] else 'untreated'}: the propensity is degenerate"
        )
    if kind == ComponentModel.CONSTANT:
        e = np.full(data.n, r.mean())
    elif kind == ComponentModel.SATURATED:
        cells = _cells(data, frame)
        e = (np.bincount(cells, weights=r) / np.bincount(cells))[cells]
    else:
        fit = fit_logistic_irls(Z, r, irls.max_iter, irls.tol, irls.ridge)
        diag.separation = diag.separation or fit.separation
        e = fit.predict(Z)
    clipped = np.clip(e, clip, 1 - clip)
    n_clipped = int(np.sum(clipped != e))
    if n_clipped:
        diag.clipped_propensities += n_clipped
        log.warning("ipw.clipped_propensities", count=n_clipped, epsilon=clip)
    return clipped


def _finish(estimator: str, ate: float, diag: EstimateDiagnostics) -> AteEstimate:
    if not np.isfinite(ate):
        raise EstimationError(f"{estimator} produced a non-finite estimate")
    if abs(ate) > 1.0:
        diag.messages.append(f"estimate {ate:.4f} clipped to [-1, 1]")
    return AteEstimate(estimator=estimator, ate=float(np.clip(ate, -1.0, 1.0)), diagnostics=diag)


def baseline_outcome_regression(
    data: Dataset, frame: CausalFrame, irls: Optional[IrlsOptions] = None
) -> AteEstimate:
    """Standardized logistic regression of Y on (R, Z) main effects."""
    diag = EstimateDiagnostics()
    m1, m0 = outcome_predictions(data, frame, ComponentModel.LOGISTIC, diag, irls or IrlsOptions())
    return _finish("q.model", float(np.mean(m1 - m0)), diag)


def baseline_ipw(
    data: Dataset,
    frame: CausalFrame,
    clip: float = 0.01,
    propensity_model: ComponentModel = ComponentModel.LOGISTIC,
    irls: Optional[IrlsOptions] = None,
) -> AteEstimate:
    """Inverse probability weighting with weights normalized within arms."""
    diag = EstimateDiagnostics()
    _, r, y = _arrays(data, frame)
    e = propensity_scores(data, frame, propensity_model, diag, irls or IrlsOptions(), clip)
    w1 = r / e
    w0 = (1 - r) / (1 - e)
    ate = float(np.sum(w1 * y) / np.sum(w1) - np.sum(w0 * y) / np.sum(w0))
    return _finish("ipw", ate, diag)


def baseline_aipw(
    data: Dataset,
    frame: CausalFrame,
    outcome_model: ComponentModel = ComponentModel.LOGISTIC,
    propensity_model: ComponentModel = ComponentModel.LOGISTIC,
    clip: float = 0.01,
    irls: Optional[IrlsOptions] = None,
) -> AteEstimate:
    """Augmented IPW: outcome-model contrast plus weighted residuals."""
    diag = EstimateDiagnostics()
    opts = irls or IrlsOptions()
    _, r, y = _arrays(data, frame)
    e = propensity_scores(data, frame, propensity_model, diag, opts, clip)
    m1, m0 = outcome_predictions(data, frame, outcome_model, diag, opts)
    scores = m1 - m0 + r * (y - m1) / e - (1 - r) * (y - m0) / (1 - e)
    return _finish("aipw", float(np.mean(scores)), diag)
