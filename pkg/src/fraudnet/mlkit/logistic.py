"""Logistic regression by IRLS on z-scored features, plus stepwise selection.

Coefficients are reported on the standardized scale; the stored means and
scales are those of the training rows.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from fraudnet.errors import ConfigError

logger = logging.getLogger(__name__)


class PerfectSeparationWarning(UserWarning):
    pass


class CollinearityWarning(UserWarning):
    pass


class ConstantFeatureWarning(UserWarning):
    pass


def log_likelihood(beta, Z, y) -> float:
    eta = Z @ beta
    # log(1 + exp(eta)) computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def gradient(beta, Z, y) -> np.ndarray:
    return Z.T @ (y - expit(Z @ beta))


def hessian(beta, Z) -> np.ndarray:
    """Negative Hessian (Fisher information) ``Z^T W Z``."""
    p = expit(Z @ beta)
    return (Z.T * (p * (1.0 - p))) @ Z


@dataclass
class ModelFit:
    features: list
    intercept: float
    coefficients: dict
    means: dict
    scales: dict
    log_likelihood: float
    n_obs: int
    iterations: int
    converged: bool
    separated: bool = False
    collinear: bool = False
    std_errors: dict = field(default_factory=dict)
    dropped: list = field(default_factory=list)
    selection_trace: list = field(default_factory=list)

    @property
    def n_params(self) -> int:
        return len(self.features) + 1

    @property
    def aic(self) -> float:
        return -2.0 * self.log_likelihood + 2.0 * self.n_params

    @property
    def beta(self) -> np.ndarray:
        return np.r_[self.intercept, [self.coefficients[f] for f in self.features]]

    def design(self, X) -> np.ndarray:
        """Intercept column plus standardized model features from a frame or dataset."""
        frame = getattr(X, "features", X)
        cols = [np.ones(len(frame))]
        for f in self.features:
            cols.append((frame[f].to_numpy(dtype=np.float64) - self.means[f]) / self.scales[f])
        return np.column_stack(cols)

    def decision_function(self, X) -> np.ndarray:
        return self.design(X) @ self.beta

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def p_values(self) -> dict:
        out = {}
        for name, b in [("(Intercept)", self.intercept)] + [(f, self.coefficients[f]) for f in self.features]:
            se = self.std_errors.get(name, float("nan"))
            out[name] = float(2.0 * norm.sf(abs(b / se))) if se and se > 0 else float("nan")
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["aic"] = self.aic
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelFit":
        d = {k: v for k, v in d.items() if k != "aic"}
        return cls(**d)


def _columns(data, features):
    frame = getattr(data, "features", data)
    y = np.asarray(data.target, dtype=np.float64)
    feats = list(frame.columns) if features is None else list(features)
    return frame, y, feats


def fit_logistic(data, features=None, max_iter: int = 100, tol: float = 1e-10) -> ModelFit:
    """Maximum-likelihood fit by Newton/IRLS.

    Stops when the relative change in log-likelihood drops below ``tol`` or
    after ``max_iter`` steps.  Constant columns are dropped with a warning.
    Under perfect separation the fit stops early and is flagged ``separated``.
    """
    frame, y, feats = _columns(data, features)
    n = y.size
    means, scales, kept, dropped = {}, {}, [], []
    cols = [np.ones(n)]
    for f in feats:
        x = np.asarray(frame[f], dtype=np.float64)
        mu, sd = float(x.mean()), float(x.std())
        if not sd > 0:
            dropped.append(f)
            continue
        means[f], scales[f] = mu, sd
        kept.append(f)
        cols.append((x - mu) / sd)
    if dropped:
        warnings.warn(f"dropping constant features {dropped}", ConstantFeatureWarning, stacklevel=2)
    Z = np.column_stack(cols)
    if n <= Z.shape[1]:
        raise ConfigError(f"{n} rows cannot identify {Z.shape[1]} parameters")

    beta = np.zeros(Z.shape[1])
    ybar = y.mean()
    if 0.0 < ybar < 1.0:
        beta[0] = math.log(ybar / (1.0 - ybar))
    eta = Z @ beta
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    converged = separated = collinear = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(eta)
        g = Z.T @ (y - p)
        H = (Z.T * (p * (1.0 - p))) @ Z
        if np.linalg.cond(H) > 1e12:
            collinear = True
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        else:
            step = np.linalg.solve(H, g)
        t = 1.0
        while True:
            cand = beta + t * step
            eta_new = Z @ cand
            ll_new = float(np.sum(y * eta_new - np.logaddexp(0.0, eta_new)))
            if ll_new >= ll - 1e-12 * abs(ll) or t < 1e-8:
                break
            t *= 0.5
        beta, eta, ll_old, ll = cand, eta_new, ll, ll_new
        if np.all(np.abs(y - expit(eta)) < 1e-6):
            separated = True
            break
        if abs(ll - ll_old) <= tol * max(abs(ll_old), 1e-300):
            converged = True
            break
    if not converged and not separated and np.max(np.abs(beta[1:]), initial=0.0) > 20.0:
        separated = True
    if separated:
        warnings.warn("perfect or quasi-complete separation; coefficients are not finite at the MLE",
                      PerfectSeparationWarning, stacklevel=2)
    if collinear:
        warnings.warn("ill-conditioned information matrix (collinear features)",
                      CollinearityWarning, stacklevel=2)

    H = hessian(beta, Z)
    cov = np.linalg.pinv(H) if collinear else np.linalg.inv(H)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    names = ["(Intercept)"] + kept
    return ModelFit(
        features=kept,
        intercept=float(beta[0]),
        coefficients={f: float(b) for f, b in zip(kept, beta[1:])},
        means=means,
        scales=scales,
        log_likelihood=ll,
        n_obs=n,
        iterations=it,
        converged=converged,
        separated=separated,
        collinear=collinear,
        std_errors={k: float(v) for k, v in zip(names, se)},
        dropped=dropped,
    )


class _ColumnCache:
    """Columns pulled out of a frame once, for the many refits of stepwise selection."""

    def __init__(self, frame, target, names):
        self.features = {c: frame[c].to_numpy(dtype=np.float64) for c in names}
        self.target = target


def _quiet_fit(data, features):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fit_logistic(data, features)


def stepwise_select(data, candidates=None, criterion: str = "aic", direction: str = "both",
                    p_enter: float = 0.05, p_remove: float = 0.10) -> ModelFit:
    """Greedy forward/backward selection.

    With ``criterion="aic"`` each step takes the single addition or removal
    that lowers AIC most, stopping when none does.  With ``criterion="pvalue"``
    features enter when their Wald p-value is below ``p_enter`` and leave when
    it rises above ``p_remove``.  The returned fit carries the step trace.
    """
    if criterion not in ("aic", "pvalue"):
        raise ConfigError(f"unknown criterion {criterion!r}")
    if direction not in ("both", "forward", "backward"):
        raise ConfigError(f"unknown direction {direction!r}")
    frame, _, pool = _columns(data, candidates)
    if not pool:
        raise ConfigError("stepwise selection needs at least one candidate")
    pool = [f for f in pool if frame[f].std(ddof=0) > 0]
    data = _ColumnCache(frame, data.target, pool)
    selected = list(pool) if direction == "backward" else []
    current = _quiet_fit(data, selected)
    trace = [{"step": 0, "action": "start", "feature": None, "value": current.aic}]
    seen = {tuple(sorted(selected))}
    for step in range(1, 4 * len(pool) + 10):
        moves = []
        if direction in ("both", "forward"):
            moves += [("add", f, selected + [f]) for f in pool if f not in selected]
        if direction in ("both", "backward"):
            moves += [("remove", f, [s for s in selected if s != f]) for f in selected]
        best = None
        if criterion == "aic":
            for action, f, feats in moves:
                if tuple(sorted(feats)) in seen:
                    continue
                fit = _quiet_fit(data, feats)
                if fit.aic < current.aic - 1e-9 and (best is None or fit.aic < best[2].aic):
                    best = (action, f, fit)
        else:
            best = _pvalue_move(data, current, selected, pool, direction, p_enter, p_remove)
        if best is None:
            break
        action, f, fit = best
        selected = list(fit.features)
        seen.add(tuple(sorted(selected)))
        current = fit
        value = fit.aic if criterion == "aic" else fit.p_values().get(f, float("nan"))
        trace.append({"step": step, "action": action, "feature": f, "value": value})
    current.selection_trace = trace
    return current


def _pvalue_move(data, current, selected, pool, direction, p_enter, p_remove):
    if direction in ("both", "backward") and selected:
        pv = current.p_values()
        worst = max(selected, key=lambda f: (pv[f], f))
        if pv[worst] > p_remove:
            return "remove", worst, _quiet_fit(data, [s for s in selected if s != worst])
    if direction in ("both", "forward"):
        best = None
        for f in pool:
            if f in selected:
                continue
            fit = _quiet_fit(data, selected + [f])
            if f not in fit.features:
                continue
            p = fit.p_values()[f]
            if p < p_enter and (best is None or p < best[0]):
                best = (p, f, fit)
        if best is not None:
            return "add", best[1], best[2]
    return None
