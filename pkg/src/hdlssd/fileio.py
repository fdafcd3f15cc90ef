"""File formats: binary PGM/PPM images, CSV dataset manifests and text model files.

Manifest (CSV, LF or CRLF line endings)::

    # image 248 186            optional: declared rows I and cols J
    id,file,label,x1,y1,x2,y2,x3,y3
    f001,img/f001.pgm,male,60.5,80.0,120.25,80.0,90.0,130.0

``file`` is relative to the manifest's directory, ``label`` is ``+1``/``-1``
or ``male``/``female``, and landmark pairs are ``(x=col, y=row)`` 1-based
pixel coordinates. Any number of landmark pairs (including none) may be
declared in the header.

Model file::

    HDLSSD 1
    method: dwd
    d: 4
    image: 2 2                 optional
    intercept: 0.5
    meta: C=100 n=50
    w:
    0.5
    ...

Reals are written with 17 significant digits, which round-trips doubles.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifiers import LinearRule
from .data import GrayImage, LabeledDataset, NEGATIVE, POSITIVE
from .errors import DataError
from .registration import LandmarkSet


class PgmMagicError(DataError):
    """File does not start with the expected magic number."""


class PgmMaxvalError(DataError):
    """Header declares a maxval other than 255."""


class PgmTruncatedError(DataError):
    """Fewer payload bytes than the header declares."""


class PgmHeaderError(DataError):
    """Header fields missing or malformed."""


def _header_tokens(buf: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last one.
    """
    tokens = []
    i, n = 0, len(buf)
    while len(tokens) < count:
        while i < n and buf[i:i + 1].isspace():
            i += 1
        if i < n and buf[i:i + 1] == b"#":
            while i < n and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not buf[i:i + 1].isspace() and buf[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise PgmHeaderError("header ends early")
        tokens.append(buf[start:i])
    if i >= n or not buf[i:i + 1].isspace():
        raise PgmHeaderError("header not terminated by whitespace")
    return tokens, i + 1


def _read_pnm(path, magic: bytes, channels: int) -> np.ndarray:
    buf = Path(path).read_bytes()
    if buf[:2] != magic:
        raise PgmMagicError(f"{path}: expected magic {magic.decode()}, found {buf[:2]!r}")
    try:
        (w, h, maxval), off = _header_tokens(buf[2:], 3)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise PgmHeaderError(f"{path}: malformed header") from exc
    off += 2
    if maxval != 255:
        raise PgmMaxvalError(f"{path}: maxval {maxval} not supported (need 255)")
    if w < 1 or h < 1:
        raise PgmHeaderError(f"{path}: invalid size {w}x{h}")
    need = w * h * channels
    payload = buf[off:off + need]
    if len(payload) < need:
        raise PgmTruncatedError(f"{path}: {len(payload)} of {need} payload bytes present")
    arr = np.frombuffer(payload, dtype=np.uint8)
    return arr.reshape((h, w, channels)) if channels > 1 else arr.reshape((h, w))


def read_pgm(path) -> GrayImage:
    """Read a binary (P5) 8-bit graymap."""
    return GrayImage(_read_pnm(path, b"P5", 1).astype(float))


def to_bytes(pixels) -> np.ndarray:
    """Round to the nearest gray level and clamp to [0, 255]."""
    return np.clip(np.rint(np.asarray(pixels, dtype=float)), 0, 255).astype(np.uint8)


def write_pgm(path, image) -> None:
    """Write ``P5\\n{J} {I}\\n255\\n`` followed by the I*J row-major bytes."""
    px = image.pixels if isinstance(image, GrayImage) else np.asarray(image)
    data = to_bytes(px)
    I, J = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{J} {I}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_ppm(path, rgb) -> None:
    """Write an ``I x J x 3`` uint8 array as binary P6."""
    data = np.asarray(rgb)
    if data.ndim != 3 or data.shape[2] != 3:
        raise DataError("PPM data must be I x J x 3")
    data = to_bytes(data)
    I, J, _ = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{J} {I}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_ppm(path) -> np.ndarray:
    return _read_pnm(path, b"P6", 3).copy()


LABEL_TOKENS = {"+1": POSITIVE, "1": POSITIVE, "male": POSITIVE,
                "-1": NEGATIVE, "female": NEGATIVE}


def parse_label(token: str) -> int:
    key = token.strip().lower()
    if key not in LABEL_TOKENS:
        raise DataError(f"unknown label {token!r} (use +1/-1 or male/female)")
    return LABEL_TOKENS[key]


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    file: str
    label: int
    landmarks: np.ndarray | None = None


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    records: tuple
    image_shape: tuple | None = None
    n_landmarks: int = 0
    path: Path | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int8)

    def file_path(self, rec: ManifestRecord) -> Path:
        return self.root / rec.file


def _parse_manifest_text(text: str, source: str):
    shape = None
    body = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            parts = stripped[1:].split()
            if len(parts) == 3 and parts[0] == "image":
                try:
                    shape = (int(parts[1]), int(parts[2]))
                except ValueError as exc:
                    raise DataError(f"{source}: bad image declaration {line!r}") from exc
            continue
        if stripped:
            body.append(line)
    if not body:
        raise DataError(f"{source}: manifest is empty")
    rows = list(csv.reader(io.StringIO("\n".join(body))))
    header = [h.strip() for h in rows[0]]
    if header[:3] != ["id", "file", "label"]:
        raise DataError(f"{source}: header must start with id,file,label, got {','.join(header)}")
    coords = header[3:]
    k = len(coords) // 2
    expected = [f"{a}{i}" for i in range(1, k + 1) for a in ("x", "y")]
    if coords != expected:
        raise DataError(f"{source}: landmark columns must be x1,y1,x2,y2,...; got {','.join(coords)}")
    return shape, header, rows[1:], k


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    shape, header, rows, k = _parse_manifest_text(text, str(path))
    seen = set()
    records = []
    for lineno, row in enumerate(rows, start=2):
        row = [c.strip() for c in row]
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {lineno} has {len(row)} fields, header has {len(header)}"
            )
        rid, fname, label = row[:3]
        if not rid:
            raise DataError(f"{path}: row {lineno} has an empty id")
        if rid in seen:
            raise DataError(f"{path}: duplicate id {rid!r} (row {lineno})")
        seen.add(rid)
        lab = parse_label(label)
        lm = None
        if k:
            try:
                vals = np.array([float(v) for v in row[3:]])
            except ValueError as exc:
                raise DataError(f"{path}: row {lineno} ({rid}): unparseable coordinate") from exc
            if not np.all(np.isfinite(vals)):
                raise DataError(f"{path}: row {lineno} ({rid}): non-finite coordinate")
            lm = vals.reshape(k, 2)
            lm.setflags(write=False)
        records.append(ManifestRecord(rid, fname, lab, lm))
    if not records:
        raise DataError(f"{path}: manifest has no rows")
    return DatasetManifest(path.parent, tuple(records), shape, k, path)


def write_manifest(path, records, image_shape=None) -> None:
    """Write records (``ManifestRecord``) in manifest form with LF endings."""
    records = list(records)
    k = max((0 if r.landmarks is None else len(r.landmarks)) for r in records) if records else 0
    header = ["id", "file", "label"] + [f"{a}{i}" for i in range(1, k + 1) for a in ("x", "y")]
    with open(path, "w", newline="") as fh:
        if image_shape is not None:
            fh.write(f"# image {image_shape[0]} {image_shape[1]}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            lab = "+1" if r.label == POSITIVE else "-1"
            lm = [] if r.landmarks is None else [repr(float(v)) for v in np.ravel(r.landmarks)]
            w.writerow([r.id, r.file, lab] + lm)


@dataclass(frozen=True)
class LoadedData:
    images: list
    landmarks: list
    labels: np.ndarray
    ids: list

    def dataset(self) -> LabeledDataset:
        return LabeledDataset.from_images(self.images, self.labels)


def load_dataset(manifest: DatasetManifest) -> LoadedData:
    """Read every image of the manifest in row order and check its size."""
    images, landmarks = [], []
    shape = manifest.image_shape
    for rec in manifest.records:
        fp = manifest.file_path(rec)
        if not fp.is_file():
            raise DataError(f"image for id {rec.id!r} not found: {fp}")
        img = read_pgm(fp)
        if shape is None:
            shape = img.shape
        if img.shape != tuple(shape):
            raise DataError(f"image for id {rec.id!r} is {img.shape[0]}x{img.shape[1]}, "
                            f"expected {shape[0]}x{shape[1]}")
        images.append(img)
        landmarks.append(None if rec.landmarks is None else LandmarkSet(rec.landmarks))
    return LoadedData(images, landmarks, manifest.labels, [r.id for r in manifest.records])


MODEL_MAGIC = "HDLSSD"
MODEL_VERSION = 1


def _fmt(x: float) -> str:
    return "%.17g" % x


def _meta_value(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def save_model(path, rule: LinearRule, image_shape=None) -> None:
    """Write ``rule``; ``image_shape`` defaults to ``rule.meta['image_shape']``."""
    if image_shape is None:
        image_shape = rule.meta.get("image_shape")
    lines = [f"{MODEL_MAGIC} {MODEL_VERSION}", f"method: {rule.method}", f"d: {rule.d}"]
    if image_shape is not None:
        lines.append(f"image: {int(image_shape[0])} {int(image_shape[1])}")
    lines.append(f"intercept: {_fmt(rule.b)}")
    items = []
    for key, val in rule.meta.items():
        if key == "image_shape":
            continue
        sval = _fmt(val) if isinstance(val, float) else str(val)
        if any(c.isspace() for c in sval) or "=" in key:
            raise DataError(f"meta entry {key}={sval!r} cannot be stored")
        items.append(f"{key}={sval}")
    lines.append("meta: " + " ".join(items))
    lines.append("w:")
    lines.extend(_fmt(v) for v in rule.w)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> LinearRule:
    try:
        text = Path(path).read_text(encoding="ascii")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0].split()[:1] != [MODEL_MAGIC]:
        raise DataError(f"{path}: not a model file")
    parts = lines[0].split()
    if len(parts) != 2 or parts[1] != str(MODEL_VERSION):
        raise DataError(f"{path}: unsupported model version {' '.join(parts[1:])!r}")
    fields, i = {}, 1
    while i < len(lines) and lines[i].strip() != "w:":
        line = lines[i].strip()
        i += 1
        if not line:
            continue
        key, sep, val = line.partition(":")
        if not sep:
            raise DataError(f"{path}: malformed line {line!r}")
        fields[key.strip()] = val.strip()
    if i >= len(lines):
        raise DataError(f"{path}: missing 'w:' section")
    for key in ("method", "d", "intercept"):
        if key not in fields:
            raise DataError(f"{path}: missing '{key}:'")
    values = [v for v in (ln.strip() for ln in lines[i + 1:]) if v]
    d = int(fields["d"])
    if len(values) != d:
        raise DataError(f"{path}: d is {d} but {len(values)} direction values follow")
    meta = {}
    for item in fields.get("meta", "").split():
        key, sep, val = item.partition("=")
        if not sep:
            raise DataError(f"{path}: malformed meta entry {item!r}")
        meta[key] = _meta_value(val)
    if "image" in fields:
        I, J = (int(v) for v in fields["image"].split())
        if I * J != d:
            raise DataError(f"{path}: image {I}x{J} does not match d={d}")
        meta["image_shape"] = (I, J)
    w = np.array([float(v) for v in values])
    return LinearRule(w, float(fields["intercept"]), fields["method"], meta)


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
