"""Loss functions, empirical risk, and closed-form least-squares minimization.

Every loss knows how to score a single observation (`loss_value`) and a whole
dataset (`empirical_risk`), and can compile a fast closure over a fixed
dataset for use inside MCMC loops (`prepare_risk`).

Sign convention: sign(0) = -1 everywhere, and classifier indicators use the
strict inequality x'theta > 0.  Score ties across groups in the pairwise
ranking loss count as discordant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, PreconditionError, ShapeError
from .model import (BasisSpec, ClassTriple, Dataset, FunctionParam, PairedScores,
                    RegPair, ScorePair, design_matrix)


def sign_neg(t):
    """sign with sign(0) = -1; vectorized."""
    return np.where(np.asarray(t) > 0, 1, -1)


@dataclass(frozen=True)
class RiskValue:
    """An empirical risk together with the number of loss terms averaged."""

    value: float
    n_used: int


def _as_beta(theta, features: BasisSpec | None) -> np.ndarray:
    """Accept either a coefficient array or a FunctionParam matching `features`."""
    if isinstance(theta, FunctionParam):
        if features is not None and theta.basis != features:
            raise ShapeError("FunctionParam basis differs from the loss's feature basis")
        return theta.beta
    return np.asarray(theta, dtype=float)


def _features_design(features: BasisSpec | None, xs) -> np.ndarray:
    """Design matrix of the feature map; None means the identity map on x."""
    if features is None:
        xs = np.asarray(xs, dtype=float)
        return xs[:, None] if xs.ndim == 1 else xs
    return design_matrix(features, xs)


# ---------------------------------------------------------------------------
# loss families
# ---------------------------------------------------------------------------

class CheckLoss:
    """Check (pinball) loss (y - b'f(x)) * (tau - 1{y < b'f(x)}).

    Its population risk is minimized at the tau-th conditional quantile of y
    given x within the span of the feature map.
    """

    kind = "check"

    def __init__(self, tau: float, features: BasisSpec | None):
        if not 0.0 < tau < 1.0:
            raise PreconditionError("tau must lie in (0,1)")
        self.tau = float(tau)
        self.features = features

    def loss_value(self, theta, u) -> float:
        if not isinstance(u, RegPair):
            raise ShapeError("check loss expects RegPair observations")
        beta = _as_beta(theta, self.features)
        pred = float(beta @ _features_design(self.features, np.asarray([u.x]))[0])
        r = u.y - pred
        return float(r * (self.tau - (r < 0.0)))

    def prepare_risk(self, data: Dataset):
        if data.kind != "reg":
            raise ShapeError("check loss expects a regression dataset")
        F = _features_design(self.features, data.x)
        y = data.y
        tau = self.tau

        def risk(beta: np.ndarray) -> float:
            r = y - F @ beta
            return float(np.mean(r * (tau - (r < 0.0))))

        return risk


class SquaredLoss:
    """Squared-error loss (y - b'f(x))^2."""

    kind = "squared"

    def __init__(self, features: BasisSpec | None):
        self.features = features

    def loss_value(self, theta, u) -> float:
        if not isinstance(u, RegPair):
            raise ShapeError("squared loss expects RegPair observations")
        beta = _as_beta(theta, self.features)
        pred = float(beta @ _features_design(self.features, np.asarray([u.x]))[0])
        return float((u.y - pred) ** 2)

    def prepare_risk(self, data: Dataset):
        if data.kind != "reg":
            raise ShapeError("squared loss expects a regression dataset")
        F = _features_design(self.features, data.x)
        y = data.y

        def risk(beta: np.ndarray) -> float:
            r = y - F @ beta
            return float(np.mean(r * r))

        return risk


class CappedSquaredLoss:
    """Squared-error loss truncated at `cap`: min((y - b'f(x))^2, cap).

    The truncation restores moment-generating-function existence when the
    response has only polynomial tails; it never exceeds the plain squared
    loss and agrees with it whenever the squared residual is at most cap.
    """

    kind = "cappedsquared"

    def __init__(self, features: BasisSpec | None, cap: float):
        if not cap > 0:
            raise PreconditionError("cap must be positive")
        self.features = features
        self.cap = float(cap)

    def loss_value(self, theta, u) -> float:
        base = SquaredLoss(self.features).loss_value(theta, u)
        return float(min(base, self.cap))

    def prepare_risk(self, data: Dataset):
        if data.kind != "reg":
            raise ShapeError("capped squared loss expects a regression dataset")
        F = _features_design(self.features, data.x)
        y, cap = data.y, self.cap

        def risk(beta: np.ndarray) -> float:
            r = y - F @ beta
            return float(np.mean(np.minimum(r * r, cap)))

        return risk


class ZeroOneLinearLoss:
    """Misclassification loss of the linear classifier 1{x'theta > 0}.

    theta is the dense coefficient vector (first coordinate conventionally
    the sign-constrained one); labels are in {0,1}.
    """

    kind = "zeroone"

    def loss_value(self, theta, u) -> float:
        if not isinstance(u, ClassTriple):
            raise ShapeError("zero-one loss expects ClassTriple observations")
        theta = np.asarray(theta, dtype=float)
        pred = 1 if float(np.dot(u.x, theta)) > 0.0 else 0
        return float(pred != u.y)

    def prepare_risk(self, data: Dataset):
        if data.kind != "class":
            raise ShapeError("zero-one loss expects a classification dataset")
        X = np.atleast_2d(data.x)
        y = data.y.astype(int)
        if not set(np.unique(y).tolist()) <= {0, 1}:
            raise ShapeError("zero-one loss expects labels in {0,1}")

        def risk(theta: np.ndarray) -> float:
            pred = (X @ theta > 0.0).astype(int)
            return float(np.mean(pred != y))

        return risk


class MCIDLoss:
    """Threshold-classification loss 0.5*(1 - y * sign(x - theta(z))).

    theta is a function of the covariate z (a FunctionParam over `basis`),
    x the scalar diagnostic measure, y in {-1,+1} the reported outcome.
    """

    kind = "mcid"

    def __init__(self, basis: BasisSpec):
        self.basis = basis

    def loss_value(self, theta, u) -> float:
        if not isinstance(u, ClassTriple):
            raise ShapeError("threshold loss expects ClassTriple observations")
        beta = _as_beta(theta, self.basis)
        thr = float(beta @ self.basis.eval(u.z))
        pred = 1 if float(u.x) - thr > 0.0 else -1
        return 0.5 * (1.0 - u.y * pred)

    def prepare_risk(self, data: Dataset):
        if data.kind != "class" or data.z is None:
            raise ShapeError("threshold loss expects classification data with covariates z")
        F = design_matrix(self.basis, data.z)
        x = data.x.astype(float)
        y = data.y.astype(int)
        if not set(np.unique(y).tolist()) <= {-1, 1}:
            raise ShapeError("threshold loss expects labels in {-1,+1}")

        def risk(beta: np.ndarray) -> float:
            pred = sign_neg(x - F @ beta)
            return float(np.mean(pred != y))

        return risk


class AUCLoss:
    """Pairwise ranking loss (theta - 1{u1 > u0})^2 for scalar theta in [0,1].

    The empirical risk averages over all m*n (group-0, group-1) pairs and is
    minimized at the concordance fraction (normalized rank-sum statistic).
    """

    kind = "auc"

    def loss_value(self, theta, u) -> float:
        if not isinstance(u, ScorePair):
            raise ShapeError("ranking loss expects ScorePair observations")
        ind = 1.0 if u.u1 > u.u0 else 0.0
        return float((float(theta) - ind) ** 2)

    def prepare_risk(self, data: Dataset):
        if data.kind != "twosample":
            raise ShapeError("ranking loss expects a two-sample dataset")
        that = auc_point_estimate(data.scores0, data.scores1)
        const = that * (1.0 - that)

        def risk(theta) -> float:
            t = float(np.asarray(theta).reshape(-1)[0])
            return (t - that) ** 2 + const

        return risk


LossSpec = (CheckLoss | SquaredLoss | CappedSquaredLoss | ZeroOneLinearLoss
            | MCIDLoss | AUCLoss)


# ---------------------------------------------------------------------------
# module operations
# ---------------------------------------------------------------------------

def loss_value(loss: LossSpec, theta, u) -> float:
    """Loss of parameter theta on a single observation."""
    return loss.loss_value(theta, u)


def empirical_risk(loss: LossSpec, theta, data: Dataset) -> RiskValue:
    """Average loss over the dataset.

    For two-sample data the average runs over all m*n score pairs.
    """
    if data.kind != "twosample" and data.n < 1:
        raise PreconditionError("empty dataset")
    risk = loss.prepare_risk(data)
    if isinstance(loss, AUCLoss):
        return RiskValue(risk(theta), data.n_terms)
    beta = _as_beta(theta, getattr(loss, "features", getattr(loss, "basis", None)))
    return RiskValue(risk(beta), data.n_terms)


def auc_point_estimate(scores0, scores1) -> float:
    """Fraction of concordant pairs: #{(i,j): u0_i < u1_j} / (m n).

    Equals the normalized rank-sum statistic; ties across groups are not
    concordant.  Computed by exact integer counting (sort + binary search).
    """
    s0 = np.sort(np.asarray(scores0, dtype=float))
    s1 = np.asarray(scores1, dtype=float)
    if len(s0) < 1 or len(s1) < 1:
        raise PreconditionError("both groups must be nonempty")
    concordant = int(np.searchsorted(s0, s1, side="left").sum())
    return concordant / (len(s0) * len(s1))


def auc_empirical_risk(theta: float, scores0, scores1) -> float:
    """(mn)^-1 sum over pairs of (theta - 1{u1 > u0})^2.

    Uses the exact algebraic identity
    risk(theta) = (theta - that)^2 + that*(1 - that)
    where that is the concordance fraction; the identity follows because the
    pair indicators are 0/1, so their mean equals the mean of their squares.
    """
    that = auc_point_estimate(scores0, scores1)
    t = float(theta)
    return (t - that) ** 2 + that * (1.0 - that)


def pointwise_losses(loss: LossSpec, theta, sample) -> np.ndarray:
    """Vector of per-observation losses, vectorized by loss family.

    `sample` is a Dataset for regression/classification losses and a
    PairedScores batch for the pairwise ranking loss (one loss term per
    matched pair).  The mean of the returned vector is the empirical risk
    of the corresponding dataset (for two-sample data, of the paired subset).
    """
    if isinstance(sample, PairedScores):
        if not isinstance(loss, AUCLoss):
            raise ShapeError("paired scores only carry the ranking loss")
        t = float(np.asarray(theta).reshape(-1)[0])
        return (t - (sample.u1 > sample.u0).astype(float)) ** 2
    if not isinstance(sample, Dataset):
        raise ShapeError(f"unsupported sample type {type(sample).__name__}")
    if isinstance(loss, AUCLoss):
        raise ShapeError("ranking loss needs PairedScores for pointwise values")
    if isinstance(loss, (CheckLoss, SquaredLoss, CappedSquaredLoss)):
        if sample.kind != "reg":
            raise ShapeError("regression loss expects a regression dataset")
        beta = _as_beta(theta, loss.features)
        r = sample.y - _features_design(loss.features, sample.x) @ beta
        if isinstance(loss, CheckLoss):
            return r * (loss.tau - (r < 0.0))
        sq = r * r
        return np.minimum(sq, loss.cap) if isinstance(loss, CappedSquaredLoss) else sq
    if isinstance(loss, ZeroOneLinearLoss):
        if sample.kind != "class":
            raise ShapeError("zero-one loss expects a classification dataset")
        theta = np.asarray(theta, dtype=float)
        pred = (np.atleast_2d(sample.x) @ theta > 0.0).astype(int)
        return (pred != sample.y.astype(int)).astype(float)
    if isinstance(loss, MCIDLoss):
        if sample.kind != "class" or sample.z is None:
            raise ShapeError("threshold loss expects classification data with z")
        beta = _as_beta(theta, loss.basis)
        pred = sign_neg(sample.x - design_matrix(loss.basis, sample.z) @ beta)
        return (pred != sample.y.astype(int)).astype(float)
    raise ShapeError(f"unsupported loss kind {getattr(loss, 'kind', loss)!r}")


def least_squares_coefficients(F: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares solve with an explicit conditioning guard.

    Raises ConditioningError when cond(F'F) = (smax/smin)^2 reaches 1e12.
    """
    svals = np.linalg.svd(F, compute_uv=False)
    if svals[-1] <= 0 or (svals[0] / svals[-1]) ** 2 >= 1e12:
        raise ConditioningError("feature Gram matrix condition number >= 1e12")
    beta, *_ = np.linalg.lstsq(F, y, rcond=None)
    return beta


def erm_least_squares(data: Dataset, basis: BasisSpec | None) -> np.ndarray:
    """Minimizer of the empirical squared-error risk over the feature span."""
    if data.kind != "reg":
        raise ShapeError("least-squares ERM expects a regression dataset")
    return least_squares_coefficients(_features_design(basis, data.x), data.y)
