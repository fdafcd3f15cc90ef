"""Images, rasterized sample matrices, region masks and a synthetic generator.

Conventions used throughout the package:

* pixel coordinates are 1-based ``(row, col)`` with the origin at the top-left;
* an ``I x J`` image is rasterized by column concatenation, so pixel
  ``(i, j)`` lands at 0-based vector index ``(j - 1) * I + (i - 1)``;
* a sample matrix is ``d x n``: column ``k`` holds sample ``k``;
* labels are ``+1`` (male) and ``-1`` (female).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DataError

POSITIVE = 1
NEGATIVE = -1
LABEL_NAMES = {POSITIVE: "male", NEGATIVE: "female"}


@dataclass(frozen=True)
class GrayImage:
    """Gray-level image held as a float ``I x J`` array with values in [0, 255]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=float)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DataError(f"image must be a non-empty 2-D array, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise DataError("image contains non-finite pixel values")
        if px.min() < 0 or px.max() > 255:
            raise DataError("pixel values must lie in [0, 255]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def cols(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


def rasterize(image: GrayImage) -> np.ndarray:
    """Flatten an image into a length ``I*J`` vector by column concatenation."""
    return image.pixels.ravel(order="F").copy()


def unrasterize(v, rows: int, cols: int) -> GrayImage:
    """Inverse of :func:`rasterize`; values are clamped to [0, 255]."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != rows * cols:
        raise DataError(f"vector of length {v.size} cannot be reshaped to {rows}x{cols}")
    return GrayImage(np.clip(v, 0.0, 255.0).reshape((rows, cols), order="F"))


@dataclass(frozen=True)
class LabeledDataset:
    """Sample matrix (``d x n``, one column per sample) with labels in {+1, -1}."""

    data: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.array(self.data, dtype=float)
        y = np.array(self.labels).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DataError("data must be a 2-D d x n matrix")
        if X.shape[1] != y.size:
            raise DataError(f"{X.shape[1]} samples but {y.size} labels")
        if not np.all(np.isfinite(X)):
            raise DataError("data contains non-finite entries")
        if not np.all(np.isin(y, (POSITIVE, NEGATIVE))):
            raise DataError("labels must be +1 or -1")
        y = y.astype(np.int8)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "data", X)
        object.__setattr__(self, "labels", y)

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def n_pos(self) -> int:
        return int(np.count_nonzero(self.labels == POSITIVE))

    @property
    def n_neg(self) -> int:
        return int(np.count_nonzero(self.labels == NEGATIVE))

    def require_both_classes(self):
        if self.n_pos < 1 or self.n_neg < 1:
            raise DataError(
                f"both classes must be present (n_pos={self.n_pos}, n_neg={self.n_neg})"
            )

    def class_data(self, label: int) -> np.ndarray:
        return self.data[:, self.labels == label]

    @classmethod
    def from_images(cls, images, labels) -> "LabeledDataset":
        images = list(images)
        if not images:
            raise DataError("no images given")
        shape = images[0].shape
        for k, img in enumerate(images):
            if img.shape != shape:
                raise DataError(f"image {k} has shape {img.shape}, expected {shape}")
        return cls(np.column_stack([rasterize(img) for img in images]), labels)


@dataclass(frozen=True)
class RegionMask:
    """Axis-aligned rectangle of pixels, bounds inclusive and 1-based.

    ``image_shape`` is needed to translate the rectangle into rasterized
    vector indices; :attr:`indices` lists them in ascending (column-major)
    order, which is the order :func:`restrict` keeps.
    """

    row_min: int
    row_max: int
    col_min: int
    col_max: int
    image_shape: tuple[int, int]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        rows, cols = self.image_shape
        object.__setattr__(self, "image_shape", (int(rows), int(cols)))
        if not (1 <= self.row_min <= self.row_max <= rows):
            raise DataError(
                f"mask {self.name!r}: need 1 <= row_min <= row_max <= {rows}, "
                f"got {self.row_min}..{self.row_max}"
            )
        if not (1 <= self.col_min <= self.col_max <= cols):
            raise DataError(
                f"mask {self.name!r}: need 1 <= col_min <= col_max <= {cols}, "
                f"got {self.col_min}..{self.col_max}"
            )

    @classmethod
    def full(cls, image_shape, name="full") -> "RegionMask":
        return cls(1, image_shape[0], 1, image_shape[1], image_shape, name)

    @property
    def size(self) -> int:
        return (self.row_max - self.row_min + 1) * (self.col_max - self.col_min + 1)

    @cached_property
    def indices(self) -> np.ndarray:
        rows = self.image_shape[0]
        r = np.arange(self.row_min - 1, self.row_max)
        c = np.arange(self.col_min - 1, self.col_max)
        idx = (c[:, None] * rows + r[None, :]).ravel()
        idx.setflags(write=False)
        return idx


def restrict(dataset: LabeledDataset, mask) -> LabeledDataset:
    """Keep only the rows (pixels) selected by ``mask``.

    ``mask`` is a :class:`RegionMask` or any integer index array; the row
    order of the result follows the mask order.
    """
    idx = mask.indices if isinstance(mask, RegionMask) else np.asarray(mask, dtype=int)
    if idx.ndim != 1 or idx.size < 1:
        raise DataError("mask selects no pixels")
    if idx.min() < 0 or idx.max() >= dataset.d:
        raise DataError(f"mask index out of range for d={dataset.d}")
    return LabeledDataset(dataset.data[idx, :], dataset.labels)


def make_synthetic(d, n_per_class, shift, direction_mode="ones", seed=0, direction=None):
    """Two-class Gaussian data for tests and benchmarks.

    Class ``+1`` is drawn from N(+shift/2 * e, I) and class ``-1`` from
    N(-shift/2 * e, I), where ``e`` is the normalized all-ones vector
    (``direction_mode="ones"``), a unit vector drawn from the same seeded
    generator (``"random"``), or an explicit ``direction``. Samples come from
    numpy's PCG64 generator seeded with ``seed``; the first ``n_per_class``
    columns are class +1.
    """
    d, n_per_class = int(d), int(n_per_class)
    if d < 1 or n_per_class < 1:
        raise DataError(f"invalid sizes d={d}, n_per_class={n_per_class}")
    if shift < 0:
        raise DataError("shift must be non-negative")
    rng = np.random.default_rng(seed)
    if direction is not None:
        e = np.asarray(direction, dtype=float).ravel()
        if e.size != d:
            raise DataError("direction has the wrong length")
        e = e / np.linalg.norm(e)
    elif direction_mode == "ones":
        e = np.full(d, 1.0 / np.sqrt(d))
    elif direction_mode == "random":
        e = rng.standard_normal(d)
        e /= np.linalg.norm(e)
    else:
        raise DataError(f"unknown direction_mode {direction_mode!r}")
    noise = rng.standard_normal((d, 2 * n_per_class))
    offsets = np.concatenate([np.full(n_per_class, 0.5 * shift), np.full(n_per_class, -0.5 * shift)])
    X = noise + np.outer(e, offsets)
    y = np.concatenate([np.full(n_per_class, POSITIVE), np.full(n_per_class, NEGATIVE)])
    return LabeledDataset(X, y)
