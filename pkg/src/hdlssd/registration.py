"""Landmark registration: rigid Procrustes fits, generalized Procrustes
analysis without scaling, and image warping by inverse bilinear mapping.

Landmarks are ``(x, y) = (col, row)`` pixel coordinates, 1-based. A
:class:`RigidTransform` maps a point ``p`` to ``R(theta) p + t`` with
``R(theta) = [[cos, -sin], [sin, cos]]`` acting on ``(x, y)`` about the
coordinate origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import GrayImage
from .errors import DataError, DegenerateError

GPA_TOL = 1e-10
GPA_MAX_ITER = 100


@dataclass(frozen=True)
class LandmarkSet:
    """``k x 2`` array of landmark coordinates, one ``(x, y)`` row per point."""

    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 2:
            raise DataError(f"landmarks must be a k x 2 array with k >= 2, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DataError("landmark coordinates must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def is_degenerate(self, tol=1e-12) -> bool:
        """True when all points coincide (up to ``tol`` times the coordinate scale)."""
        spread = np.abs(self.points - self.centroid).max()
        return spread <= tol * max(1.0, np.abs(self.points).max())


def rotation_matrix(theta) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class RigidTransform:
    theta: float = 0.0
    t: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "t", tuple(float(v) for v in np.ravel(self.t)))
        if len(self.t) != 2:
            raise DataError("translation must have two components")

    @property
    def R(self) -> np.ndarray:
        return rotation_matrix(self.theta)

    def apply(self, points) -> np.ndarray:
        """Map an ``m x 2`` array (or a single point) of ``(x, y)`` coordinates."""
        p = np.asarray(points, dtype=float)
        return p @ self.R.T + np.asarray(self.t)

    def inverse(self) -> "RigidTransform":
        R = self.R
        return RigidTransform(-self.theta, -(R.T @ np.asarray(self.t)))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform applying ``other`` first, then ``self``."""
        return RigidTransform(self.theta + other.theta, self.R @ np.asarray(other.t) + self.t)


def _as_points(shape) -> np.ndarray:
    return shape.points if isinstance(shape, LandmarkSet) else LandmarkSet(shape).points


def rigid_align(source, target) -> RigidTransform:
    """Least-squares rotation and translation taking ``source`` onto ``target``.

    When the rotation is undefined (all source or all target points
    coincide) the convention is ``theta = 0`` and a centroid-matching
    translation.
    """
    S, T = _as_points(source), _as_points(target)
    if S.shape != T.shape:
        raise DataError(f"landmark sets differ in size: {S.shape[0]} vs {T.shape[0]}")
    cs, ct = S.mean(axis=0), T.mean(axis=0)
    H = (S - cs).T @ (T - ct)
    if not np.any(H):
        theta = 0.0
    else:
        U, _, Vt = np.linalg.svd(H)
        D = np.diag([1.0, np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0])
        R = Vt.T @ D @ U.T
        theta = float(np.arctan2(R[1, 0], R[0, 0]))
    R = rotation_matrix(theta)
    return RigidTransform(theta, ct - R @ cs)


def alignment_residual(source, target, transform: RigidTransform) -> float:
    """Root mean squared landmark distance after applying ``transform``."""
    S, T = _as_points(source), _as_points(target)
    return float(np.sqrt(np.mean(np.sum((transform.apply(S) - T) ** 2, axis=1))))


@dataclass(frozen=True)
class GpaResult:
    """Consensus shape, per-shape transforms onto it, and the fit residuals."""

    mean: LandmarkSet
    transforms: list
    residuals: np.ndarray
    iterations: int
    converged: bool


def gpa(shapes, tol=GPA_TOL, max_iter=GPA_MAX_ITER) -> GpaResult:
    """Generalized Procrustes analysis with translations and rotations only.

    The shapes are centered, the consensus starts as the first shape and is
    refined by aligning every shape to it and averaging, until the mean
    landmark displacement of the consensus drops below ``tol`` or
    ``max_iter`` rounds have run. The consensus is placed at the average
    raw centroid, so a set of identical shapes yields identity transforms.
    """
    pts = [_as_points(s) for s in shapes]
    if len(pts) < 2:
        raise DataError("GPA needs at least two shapes")
    k = pts[0].shape[0]
    for i, p in enumerate(pts):
        if p.shape[0] != k:
            raise DataError(f"shape {i} has {p.shape[0]} landmarks, expected {k}")
        if LandmarkSet(p).is_degenerate():
            raise DegenerateError(f"shape {i} has all landmarks coincident")
    centered = [p - p.mean(axis=0) for p in pts]
    mean = centered[0].copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        aligned = []
        for c in centered:
            R = rotation_matrix(rigid_align(c, mean).theta)
            aligned.append(c @ R.T)
        new_mean = np.mean(aligned, axis=0)
        new_mean -= new_mean.mean(axis=0)
        shift = float(np.mean(np.linalg.norm(new_mean - mean, axis=1)))
        mean = new_mean
        if shift < tol:
            converged = True
            break
    consensus = mean + np.mean([p.mean(axis=0) for p in pts], axis=0)
    transforms = [rigid_align(p, consensus) for p in pts]
    residuals = np.array([alignment_residual(p, consensus, T) for p, T in zip(pts, transforms)])
    return GpaResult(LandmarkSet(consensus), transforms, residuals, it, converged)


def bilinear_sample(pixels, x, y, fill=0.0) -> np.ndarray:
    """Sample ``pixels`` at 1-based ``(x, y) = (col, row)`` positions.

    Positions outside ``[1, J] x [1, I]`` (with a 1e-9 allowance for
    rounding) take ``fill``.
    """
    I, J = pixels.shape
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    eps = 1e-9
    inside = (x >= 1 - eps) & (x <= J + eps) & (y >= 1 - eps) & (y <= I + eps)
    xc = np.clip(x, 1.0, J) - 1.0
    yc = np.clip(y, 1.0, I) - 1.0
    c0 = np.minimum(np.floor(xc).astype(int), J - 1)
    r0 = np.minimum(np.floor(yc).astype(int), I - 1)
    c1 = np.minimum(c0 + 1, J - 1)
    r1 = np.minimum(r0 + 1, I - 1)
    fx = xc - c0
    fy = yc - r0
    top = pixels[r0, c0] * (1 - fx) + pixels[r0, c1] * fx
    bot = pixels[r1, c0] * (1 - fx) + pixels[r1, c1] * fx
    out = top * (1 - fy) + bot * fy
    return np.where(inside, out, fill)


def warp_image(img: GrayImage, T: RigidTransform, fill=0.0) -> GrayImage:
    """Resample ``img`` so that content at ``p`` moves to ``T(p)``.

    Each output pixel reads the input at ``T^-1`` of its own coordinate
    with bilinear interpolation; the result keeps the input size.
    """
    if not 0 <= fill <= 255:
        raise DataError("fill value must lie in [0, 255]")
    I, J = img.shape
    rows, cols = np.meshgrid(np.arange(1, I + 1, dtype=float), np.arange(1, J + 1, dtype=float),
                             indexing="ij")
    src = T.inverse().apply(np.column_stack([cols.ravel(), rows.ravel()]))
    vals = bilinear_sample(img.pixels, src[:, 0], src[:, 1], fill)
    return GrayImage(np.clip(vals.reshape(I, J), 0.0, 255.0))
