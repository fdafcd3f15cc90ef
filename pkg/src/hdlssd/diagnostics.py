"""Projection diagnostics for linear rules.

Scores are projected onto a rule, summarized by Gaussian kernel density
curves (overall and per class, with one shared bandwidth), data-piling
fractions and the gap between the classes. Also: images marching along a
direction, loadings heatmaps, angles between directions and confusion
counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifiers import LinearRule
from .data import GrayImage, LabeledDataset, NEGATIVE, POSITIVE, unrasterize
from .errors import DataError

SPAN_FACTOR = 1.25
DEFAULT_GRID = 401
DEFAULT_FRAMES = 101
PILING_REL_TOL = 1e-3
_SQRT_2PI = np.sqrt(2.0 * np.pi)


def plot_span(scores, factor=SPAN_FACTOR) -> tuple[float, float]:
    """Interval of width ``factor * range`` centered on the midrange.

    A zero range gets a unit-width interval so that grids stay well defined.
    """
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise DataError("no scores")
    lo, hi = float(s.min()), float(s.max())
    mid = 0.5 * (lo + hi)
    half = 0.5 * factor * (hi - lo) if hi > lo else 0.5
    return mid - half, mid + half


def silverman_bandwidth(scores) -> float:
    """``0.9 * min(sd, IQR/1.34) * n^(-1/5)``.

    Falls back to ``range/100`` when that is zero (heavily repeated
    scores), and to 1.0 when all scores are equal.
    """
    s = np.asarray(scores, dtype=float)
    n = s.size
    if n == 0:
        raise DataError("no scores")
    sd = float(np.std(s, ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(s, [75, 25])
    h = 0.9 * min(sd, (q75 - q25) / 1.34) * n ** (-0.2)
    if h > 0:
        return float(h)
    rng = float(s.max() - s.min())
    return rng / 100.0 if rng > 0 else 1.0


def kde(scores, grid, bandwidth, weight=1.0) -> np.ndarray:
    """Gaussian kernel density estimate on ``grid`` with total mass ``weight``.

    ``weight`` may also be an array giving each point's mass.
    """
    s = np.asarray(scores, dtype=float).ravel()
    g = np.asarray(grid, dtype=float)
    if s.size == 0:
        raise DataError("no scores")
    if not bandwidth > 0:
        raise DataError("bandwidth must be positive")
    if np.ndim(weight) == 0:
        wts = np.full(s.size, float(weight) / s.size)
    else:
        wts = np.asarray(weight, dtype=float).ravel()
        if wts.size != s.size:
            raise DataError("one weight per score expected")
    u = (g[:, None] - s[None, :]) / bandwidth
    return (np.exp(-0.5 * u * u) / (_SQRT_2PI * bandwidth)) @ wts


@dataclass(frozen=True)
class GapReport:
    interval: tuple | None
    mode_pos: float
    mode_neg: float
    mode_gap: float

    @property
    def width(self) -> float:
        """Width of the separation interval, 0 when the classes overlap."""
        return 0.0 if self.interval is None else self.interval[1] - self.interval[0]


@dataclass(frozen=True)
class ProjectionSummary:
    scores: np.ndarray
    labels: np.ndarray
    span: tuple
    grid: np.ndarray
    bandwidth: float
    density: np.ndarray
    density_pos: np.ndarray
    density_neg: np.ndarray
    heights: np.ndarray
    piling: dict
    gap: GapReport | None


def project(rule: LinearRule, ds: LabeledDataset, grid_size=DEFAULT_GRID, bandwidth=None,
            piling_tol=None) -> ProjectionSummary:
    """Scores of ``ds`` on ``rule`` with density curves and summary statistics.

    Subdensities carry mass ``n_k / n`` and share the bandwidth of the
    overall curve, so they add up to it. Display heights are the sample
    positions in the dataset divided by ``n``.
    """
    if ds.n == 0:
        raise DataError("empty dataset")
    if grid_size < 2:
        raise DataError("grid needs at least two points")
    s = rule.score(ds.data)
    y = ds.labels
    lo, hi = plot_span(s)
    grid = np.linspace(lo, hi, int(grid_size))
    h = silverman_bandwidth(s) if bandwidth is None else float(bandwidth)
    n = s.size
    # per-point mass 1/n in every curve
    sub = {}
    for lab in (POSITIVE, NEGATIVE):
        k = y == lab
        sub[lab] = kde(s[k], grid, h, k.sum() / n) if k.any() else np.zeros_like(grid)
    dens_pos, dens_neg = sub[POSITIVE], sub[NEGATIVE]
    dens = kde(s, grid, h, 1.0)
    heights = np.arange(1, n + 1) / n
    piling = piling_metric(s, y, piling_tol)
    summary = ProjectionSummary(s, y.copy(), (lo, hi), grid, h, dens, dens_pos, dens_neg,
                                heights, piling, None)
    gap = gap_report(summary) if ds.n_pos and ds.n_neg else None
    return ProjectionSummary(**{**summary.__dict__, "gap": gap})


def piling_metric(scores, labels=None, tol=None) -> dict:
    """Largest fraction of each class inside one window of width ``tol``.

    Accepts a :class:`ProjectionSummary` or raw ``(scores, labels)``. The
    default ``tol`` is 1e-3 times the range of all scores; 1.0 means
    complete piling.
    """
    if isinstance(scores, ProjectionSummary):
        scores, labels = scores.scores, scores.labels
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if tol is None:
        tol = PILING_REL_TOL * float(s.max() - s.min())
    if tol < 0:
        raise DataError("tolerance must be non-negative")
    out = {}
    for lab in (POSITIVE, NEGATIVE):
        v = np.sort(s[y == lab])
        if v.size == 0:
            continue
        counts = np.searchsorted(v, v + tol, side="right") - np.arange(v.size)
        out[lab] = float(counts.max() / v.size)
    return out


def gap_report(summary: ProjectionSummary) -> GapReport:
    """Separation interval between the classes and the gap between subdensity modes.

    The interval runs from the largest score of class -1 to the smallest
    score of class +1 and is ``None`` unless that has positive width. Modes
    are grid maximizers, taking the leftmost on ties.
    """
    s, y = summary.scores, summary.labels
    if not (y == POSITIVE).any() or not (y == NEGATIVE).any():
        raise DataError("gap report needs both classes")
    lo_top, hi_bottom = float(s[y == NEGATIVE].max()), float(s[y == POSITIVE].min())
    interval = (lo_top, hi_bottom) if hi_bottom > lo_top else None
    mode_pos = float(summary.grid[np.argmax(summary.density_pos)])
    mode_neg = float(summary.grid[np.argmax(summary.density_neg)])
    return GapReport(interval, mode_pos, mode_neg, mode_pos - mode_neg)


def frame_scores(span, n_frames=DEFAULT_FRAMES) -> np.ndarray:
    if n_frames < 2:
        raise DataError("need at least two frames")
    return np.linspace(span[0], span[1], int(n_frames))


def frame_vectors(rule: LinearRule, ds: LabeledDataset, n_frames=DEFAULT_FRAMES, span=None):
    """Unclamped points ``mean + (s_t - score(mean)) w`` for scores marching over the span.

    Returns ``(scores, vectors)`` with one column per frame; frame ``t``
    has score exactly ``s_t`` up to rounding since ``||w|| = 1``.
    """
    if ds.d != rule.d:
        raise DataError(f"dataset dimension {ds.d} does not match rule dimension {rule.d}")
    if span is None:
        span = plot_span(rule.score(ds.data))
    st = frame_scores(span, n_frames)
    base = ds.data.mean(axis=1)
    s0 = float(rule.w @ base + rule.b)
    return st, base[:, None] + np.outer(rule.w, st - s0)


def reconstruction_frames(rule: LinearRule, ds: LabeledDataset, image_shape,
                          n_frames=DEFAULT_FRAMES, span=None) -> list[GrayImage]:
    """Images along the rule's direction through the training mean, clamped to [0, 255]."""
    rows, cols = image_shape
    if rows * cols != rule.d:
        raise DataError(f"image shape {rows}x{cols} does not match d={rule.d}")
    _, V = frame_vectors(rule, ds, n_frames, span)
    return [unrasterize(V[:, t], rows, cols) for t in range(V.shape[1])]


def loadings_heatmap(rule, rows, cols) -> np.ndarray:
    """RGB image (``rows x cols x 3``, uint8) of the direction's entries.

    Zero is white; positive entries fade to blue ``(a, a, 255)`` and
    negative to red ``(255, a, a)`` with ``a = 255 (1 - |v| / max|w|)``.
    """
    w = rule.w if isinstance(rule, LinearRule) else np.asarray(rule, dtype=float).ravel()
    if w.size != rows * cols:
        raise DataError(f"direction of length {w.size} cannot fill a {rows}x{cols} image")
    vmax = float(np.abs(w).max())
    if vmax == 0:
        raise DataError("direction is identically zero")
    V = w.reshape((rows, cols), order="F")
    a = np.rint(255.0 * (1.0 - np.abs(V) / vmax)).astype(np.uint8)
    full = np.full_like(a, 255)
    pos = V > 0
    r = np.where(pos, a, full)
    g = a
    b = np.where(V < 0, a, full)
    return np.stack([r, g, b], axis=-1)


def pairwise_angles(rules) -> np.ndarray:
    """Angles in degrees between directions, ignoring sign: ``arccos |w_i . w_j|``."""
    W = [r.w if isinstance(r, LinearRule) else np.asarray(r, dtype=float).ravel() for r in rules]
    if len(W) < 2:
        raise DataError("need at least two rules")
    d = W[0].size
    if any(w.size != d for w in W):
        raise DataError("rules have different dimensions")
    W = np.array([w / np.linalg.norm(w) for w in W])
    C = np.clip(np.abs(W @ W.T), 0.0, 1.0)
    A = np.degrees(np.arccos(C))
    np.fill_diagonal(A, 0.0)
    return A


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts laid out as rows m->m, w->w, m->w, w->m (male = +1, female = -1)."""

    m_as_m: int
    w_as_w: int
    m_as_w: int
    w_as_m: int

    @property
    def total(self) -> int:
        return self.m_as_m + self.w_as_w + self.m_as_w + self.w_as_m

    @property
    def errors(self) -> int:
        return self.m_as_w + self.w_as_m

    @property
    def error_rate(self) -> float:
        return self.errors / self.total if self.total else 0.0

    def rows(self) -> list[tuple[str, int]]:
        return [("m->m", self.m_as_m), ("w->w", self.w_as_w),
                ("m->w", self.m_as_w), ("w->m", self.w_as_m)]

    def to_text(self, title="") -> str:
        lines = [title] if title else []
        lines += [f"{name:<6}{count:>8d}" for name, count in self.rows()]
        lines.append(f"{'error':<6}{100 * self.error_rate:>7.1f}%")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {**dict(self.rows()), "total": self.total, "error_rate": self.error_rate}


def confusion(predicted, actual) -> ConfusionMatrix:
    p = np.asarray(predicted).ravel()
    a = np.asarray(actual).ravel()
    if p.size != a.size:
        raise DataError(f"{p.size} predictions for {a.size} labels")
    for v, what in ((p, "predicted"), (a, "actual")):
        if not np.all(np.isin(v, (POSITIVE, NEGATIVE))):
            raise DataError(f"{what} labels must be +1 or -1")
    m, f = a == POSITIVE, a == NEGATIVE
    return ConfusionMatrix(
        m_as_m=int(np.count_nonzero(m & (p == POSITIVE))),
        w_as_w=int(np.count_nonzero(f & (p == NEGATIVE))),
        m_as_w=int(np.count_nonzero(m & (p == NEGATIVE))),
        w_as_m=int(np.count_nonzero(f & (p == POSITIVE))),
    )
