"""Linear classification rules for two-class data.

Every fitting function returns a :class:`LinearRule` with a unit-length
direction, so projection scores are comparable across methods. Rules are
oriented so that class +1 scores higher on average than class -1 on the
training data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import LabeledDataset, NEGATIVE, POSITIVE, RegionMask, restrict
from .errors import DataError, DegenerateError
from .numerics import centered_parts, svd, gram_pinv_apply
from .optimizers import dwd as _dwd
from .optimizers import svm as _svm
from .optimizers import certificate

METHODS = ("dwd", "svm", "fld", "mdp", "pca", "mean-diff")
DEFAULT_C = {"dwd": _dwd.DEFAULT_C, "svm": _svm.DEFAULT_C}


@dataclass(frozen=True)
class LinearRule:
    """``x -> sign(w.x + b)`` with ``||w|| = 1`` and ``sign(0) = +1``."""

    w: np.ndarray
    b: float
    method: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.w, dtype=float).ravel()
        if not np.all(np.isfinite(w)) or not np.isfinite(self.b):
            raise DataError("rule has non-finite coefficients")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def d(self) -> int:
        return self.w.size

    def score(self, X) -> np.ndarray:
        """Scores of the columns of ``X`` (or of a single vector)."""
        X = np.asarray(X, dtype=float)
        if X.shape[0] != self.d:
            raise DataError(f"samples have dimension {X.shape[0]}, rule expects {self.d}")
        return self.w @ X + self.b

    def predict(self, X) -> np.ndarray:
        s = self.score(X)
        return np.where(s >= 0, POSITIVE, NEGATIVE).astype(np.int8)


def predict(rule: LinearRule, samples) -> np.ndarray:
    if isinstance(samples, LabeledDataset):
        samples = samples.data
    return rule.predict(samples)


def _meta(ds, **extra):
    return {"n": ds.n, "n_pos": ds.n_pos, "n_neg": ds.n_neg, **extra}


def _unit(w, b, what):
    nw = float(np.linalg.norm(w))
    if nw == 0.0 or not np.isfinite(nw):
        raise DegenerateError(f"{what} direction is zero")
    return w / nw, float(b) / nw


def _orient(w, b, ds):
    """Flip ``(w, b)`` if class -1 outscores class +1 on average."""
    s = w @ ds.data
    if s[ds.labels == POSITIVE].mean() < s[ds.labels == NEGATIVE].mean():
        return -w, -b
    return w, b


def _midpoint_rule(ds, w, method, **meta):
    mean_pos, mean_neg = ds.class_data(POSITIVE).mean(axis=1), ds.class_data(NEGATIVE).mean(axis=1)
    w, _ = _unit(w, 0.0, method)
    b = -w @ (0.5 * (mean_pos + mean_neg))
    w, b = _orient(w, b, ds)
    return LinearRule(w, b, method, _meta(ds, **meta))


def fit_fld(ds: LabeledDataset) -> LinearRule:
    """Fisher direction ``W^+ (mean_pos - mean_neg)`` with the pseudo-inverse
    of the pooled within-class covariance."""
    mean_pos, mean_neg, _, Zw, _ = centered_parts(ds)
    divisor = ds.n - 2 if ds.n > 2 else 0
    w = gram_pinv_apply(Zw, mean_pos - mean_neg, divisor)
    return _midpoint_rule(ds, w, "fld")


def fit_mdp(ds: LabeledDataset) -> LinearRule:
    """As :func:`fit_fld` with the overall covariance in place of the pooled one."""
    mean_pos, mean_neg, _, _, Zt = centered_parts(ds)
    divisor = ds.n - 1 if ds.n > 1 else 0
    w = gram_pinv_apply(Zt, mean_pos - mean_neg, divisor)
    return _midpoint_rule(ds, w, "mdp")


def fit_mean_diff(ds: LabeledDataset) -> LinearRule:
    """Baseline: direction of the class-mean difference."""
    ds.require_both_classes()
    w = ds.class_data(POSITIVE).mean(axis=1) - ds.class_data(NEGATIVE).mean(axis=1)
    return _midpoint_rule(ds, w, "mean-diff")


def fit_pca_direction(ds: LabeledDataset) -> LinearRule:
    """First principal component of the pooled, centered data; ``b = -w.mean``."""
    if ds.n < 2:
        raise DataError("PCA needs at least two samples")
    ds.require_both_classes()
    _, _, mean, _, Zt = centered_parts(ds)
    f = svd(Zt)
    if f.rank == 0:
        raise DegenerateError("data have zero variance")
    w = f.U[:, 0]
    w, b = _orient(w, -w @ mean, ds)
    return LinearRule(w, b, "pca", _meta(ds))


def _checked(sol, ds, what):
    rep = certificate(sol, ds)
    if not rep["certified"]:
        # solvers raise on failure themselves; this guards the contract
        raise DegenerateError(f"{what} solution failed its certificate: {rep}")
    return rep


def fit_svm(ds: LabeledDataset, C=_svm.DEFAULT_C) -> LinearRule:
    sol = _svm.solve_svm_dual(ds, C)
    rep = _checked(sol, ds, "SVM")
    w, b = _unit(sol.w, sol.b, "SVM")
    return LinearRule(w, b, "svm", _meta(ds, C=float(C), kkt=rep["kkt"]))


def fit_dwd(ds: LabeledDataset, C=_dwd.DEFAULT_C) -> LinearRule:
    sol = _dwd.solve_dwd(ds, C)
    rep = _checked(sol, ds, "DWD")
    w, b = _unit(sol.w, sol.b, "DWD")
    return LinearRule(w, b, "dwd", _meta(
        ds, C=float(C), gap=rep["relative_gap"], iterations=sol.iterations,
    ))


_FITTERS = {
    "dwd": fit_dwd, "svm": fit_svm, "fld": fit_fld, "mdp": fit_mdp,
    "pca": fit_pca_direction, "mean-diff": fit_mean_diff,
}


def fit(ds: LabeledDataset, method: str, C=None, scale=1.0) -> LinearRule:
    """Fit any supported method.

    ``scale`` divides the data before fitting (the penalty ``C`` is used
    as given on the rescaled data). The returned rule acts on data in the
    original units: the direction is unchanged and the intercept becomes
    ``b * scale``, so predictions agree with the rescaled fit.
    """
    if method not in _FITTERS:
        raise DataError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if scale <= 0 or not np.isfinite(scale):
        raise DataError("scale must be positive")
    work = ds if scale == 1.0 else LabeledDataset(ds.data / scale, ds.labels)
    if method in DEFAULT_C:
        rule = _FITTERS[method](work, DEFAULT_C[method] if C is None else C)
    else:
        rule = _FITTERS[method](work)
    if scale == 1.0:
        return rule
    return LinearRule(rule.w, rule.b * scale, rule.method, {**rule.meta, "scale": float(scale)})


def fit_region(ds: LabeledDataset, mask, method: str, C=None, scale=1.0) -> LinearRule:
    """Fit on the pixels of ``mask`` only and embed back with zeros elsewhere.

    The score of a full vector under the embedded rule equals the score of
    its restriction under the restricted fit.
    """
    sub = restrict(ds, mask)
    rule = fit(sub, method, C=C, scale=scale)
    idx = mask.indices if isinstance(mask, RegionMask) else np.asarray(mask, dtype=int)
    w = np.zeros(ds.d)
    w[idx] = rule.w
    meta = dict(rule.meta)
    if isinstance(mask, RegionMask):
        meta["mask"] = f"{mask.name}={mask.row_min},{mask.row_max},{mask.col_min},{mask.col_max}"
    return LinearRule(w, rule.b, rule.method, meta)
