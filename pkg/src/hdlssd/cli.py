"""Command-line front end.

Subcommands::

    synth     write a synthetic two-class image dataset (PGMs + manifest)
    register  align landmarks by Procrustes analysis and warp every image
    train     fit a rule and save it as a model file
    eval      confusion counts and error rate of a model on a manifest
    project   projection scores, density curves and piling/gap summary
    frames    images marching along the model direction
    heatmap   color map of the direction's per-pixel loadings
    regions   one rule per named rectangle, pairwise scores and angles

Labels: +1 = male, -1 = female. Exit status: 0 success, 2 configuration
error, 3 data error, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classifiers, diagnostics, fileio, registration
from .data import RegionMask, make_synthetic, unrasterize
from .errors import ConfigError, ConvergenceError, DataError, HdlssdError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CONVERGENCE = 0, 2, 3, 4
COMMANDS = ("synth", "register", "train", "eval", "project", "frames", "heatmap", "regions")
MODEL_NAME = "model.hdlssd"
SYNTH_GAIN = 10.0
SYNTH_OFFSET = 128.0


@dataclass
class RunConfig:
    command: str = ""
    manifest: str | None = None
    model: str | None = None
    method: str = "dwd"
    C: float | None = None
    scale: float = 1.0
    masks: list = field(default_factory=list)
    out: str = "out"
    frames: int = diagnostics.DEFAULT_FRAMES
    grid: int = diagnostics.DEFAULT_GRID
    seed: int = 0
    fill: float = 0.0
    piling_tol: float = diagnostics.PILING_REL_TOL
    rows: int = 10
    cols: int = 10
    n: int = 20
    mu: float = 3.29
    direction_mode: str = "ones"
    note: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.method not in classifiers.METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.C is not None and not self.C > 0:
            raise ConfigError("C must be positive")
        if not self.scale > 0:
            raise ConfigError("scale must be positive")
        if self.frames < 2:
            raise ConfigError("frames must be at least 2")
        if self.grid < 2:
            raise ConfigError("grid must be at least 2")
        if not 0 <= self.fill <= 255:
            raise ConfigError("fill must lie in [0, 255]")
        if not self.piling_tol > 0:
            raise ConfigError("piling tolerance must be positive")
        if self.rows < 1 or self.cols < 1 or self.n < 2:
            raise ConfigError("invalid synthetic sizes")
        if self.mu < 0:
            raise ConfigError("mu must be non-negative")
        for m in self.masks:
            parse_mask(m)


def parse_mask(text: str):
    """``name=rmin,rmax,cmin,cmax`` -> ``(name, (rmin, rmax, cmin, cmax))``."""
    name, sep, rect = str(text).partition("=")
    try:
        vals = tuple(int(v) for v in rect.split(","))
    except ValueError:
        vals = ()
    if not sep or not name or len(vals) != 4:
        raise ConfigError(f"bad mask {text!r}; expected name=rmin,rmax,cmin,cmax")
    return name, vals


def build_masks(texts, image_shape) -> list[RegionMask]:
    masks = []
    for text in texts:
        name, (r0, r1, c0, c1) = parse_mask(text)
        masks.append(RegionMask(r0, r1, c0, c1, image_shape, name))
    names = [m.name for m in masks]
    if len(set(names)) != len(names):
        raise ConfigError("mask names must be unique")
    return masks


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--dump-config", action="store_true", help="print the parsed config and exit")
    common.add_argument("--manifest", default=S, help="dataset manifest (CSV)")
    common.add_argument("--model", default=S, help=f"model file (default OUT/{MODEL_NAME})")
    common.add_argument("--method", default=S, choices=classifiers.METHODS)
    common.add_argument("--C", type=float, default=S, help="penalty (defaults: dwd 100, svm 1000)")
    common.add_argument("--scale", type=float, default=S,
                        help="divide pixel data by this before fitting (C applies to rescaled data)")
    common.add_argument("--mask", dest="masks", action="append", default=S,
                        metavar="NAME=RMIN,RMAX,CMIN,CMAX", help="named rectangle, repeatable")
    common.add_argument("--out", default=S, help="output directory")
    common.add_argument("--frames", type=int, default=S)
    common.add_argument("--grid", type=int, default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--fill", type=float, default=S, help="gray level outside warped images")
    common.add_argument("--piling-tol", dest="piling_tol", type=float, default=S,
                        help="piling window as a fraction of the score range")
    common.add_argument("--rows", type=int, default=S, help="synth: image rows")
    common.add_argument("--cols", type=int, default=S, help="synth: image columns")
    common.add_argument("--n", type=int, default=S, help="synth: total samples (even)")
    common.add_argument("--mu", type=float, default=S, help="synth: mean shift")
    common.add_argument("--direction-mode", dest="direction_mode", choices=("ones", "random"),
                        default=S)
    p = argparse.ArgumentParser(prog="hdlssd", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def parse_config(argv) -> tuple[RunConfig, bool]:
    args = vars(make_parser().parse_args(argv))
    dump = args.pop("dump_config")
    cfg_path = args.pop("config")
    base = {}
    if cfg_path:
        try:
            base = json.loads(Path(cfg_path).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {cfg_path}: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    merged = {**base, **args}
    return RunConfig.from_dict(merged), dump


def _out(cfg) -> Path:
    return fileio.ensure_dir(cfg.out)


def _need(cfg, key):
    val = getattr(cfg, key)
    if val is None:
        raise ConfigError(f"--{key} is required for {cfg.command}")
    return val


def _load(cfg):
    manifest = fileio.read_manifest(_need(cfg, "manifest"))
    data = fileio.load_dataset(manifest)
    return manifest, data


def _model_path(cfg) -> Path:
    return Path(cfg.model) if cfg.model else Path(cfg.out) / MODEL_NAME


def _load_model_for(cfg, data):
    rule = fileio.load_model(_model_path(cfg))
    ds = data.dataset()
    if rule.d != ds.d:
        raise DataError(f"model has d={rule.d} but the images give d={ds.d}")
    return rule, ds


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _g(x) -> str:
    return "%.17g" % x


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_synth(cfg: RunConfig):
    if cfg.n % 2:
        raise ConfigError("--n must be even (equal class sizes)")
    d = cfg.rows * cfg.cols
    ds = make_synthetic(d, cfg.n // 2, cfg.mu, cfg.direction_mode, cfg.seed)
    out = _out(cfg)
    fileio.ensure_dir(out / "images")
    I, J = cfg.rows, cfg.cols
    marks = np.array([[J / 3, I / 3], [2 * J / 3, I / 3], [J / 2, 2 * I / 3]]) + 1.0
    recs = []
    for k in range(ds.n):
        rid = f"s{k + 1:04d}"
        pix = np.clip(SYNTH_OFFSET + SYNTH_GAIN * ds.data[:, k], 0, 255)
        fileio.write_pgm(out / "images" / f"{rid}.pgm", unrasterize(pix, I, J))
        recs.append(fileio.ManifestRecord(rid, f"images/{rid}.pgm", int(ds.labels[k]), marks))
    fileio.write_manifest(out / "manifest.csv", recs, (I, J))
    print(f"wrote {ds.n} images ({I}x{J}) and {out / 'manifest.csv'}")


def cmd_register(cfg: RunConfig):
    manifest, data = _load(cfg)
    missing = [i for i, lm in zip(data.ids, data.landmarks) if lm is None]
    if missing:
        raise DataError(f"no landmarks for ids: {', '.join(missing)}")
    try:
        res = registration.gpa(data.landmarks)
    except DataError as exc:
        raise DataError(f"{exc} (ids in manifest order: {', '.join(data.ids)})") from exc
    out = _out(cfg)
    fileio.ensure_dir(out / "registered")
    recs, rows = [], []
    for rid, img, lm, T, res_i, rec in zip(data.ids, data.images, data.landmarks,
                                           res.transforms, res.residuals, manifest.records):
        warped = registration.warp_image(img, T, cfg.fill)
        fname = f"registered/{rid}.pgm"
        fileio.write_pgm(out / fname, warped)
        recs.append(fileio.ManifestRecord(rid, fname, rec.label, T.apply(lm.points)))
        rows.append([rid, _g(T.theta), _g(T.t[0]), _g(T.t[1]), _g(res_i)])
    _write_csv(out / "transforms.csv", ["id", "theta", "tx", "ty", "residual"], rows)
    fileio.write_manifest(out / "manifest.csv", recs, data.images[0].shape)
    print(f"registered {len(recs)} images in {res.iterations} GPA iterations; "
          f"max residual {res.residuals.max():.3e}")


def _fit(cfg, ds, mask=None):
    if mask is not None:
        return classifiers.fit_region(ds, mask, cfg.method, C=cfg.C, scale=cfg.scale)
    return classifiers.fit(ds, cfg.method, C=cfg.C, scale=cfg.scale)


def cmd_train(cfg: RunConfig):
    _, data = _load(cfg)
    ds = data.dataset()
    shape = data.images[0].shape
    masks = build_masks(cfg.masks, shape)
    if len(masks) > 1:
        raise ConfigError("train takes at most one --mask (use regions for several)")
    rule = _fit(cfg, ds, masks[0] if masks else None)
    out = _out(cfg)
    path = _model_path(cfg)
    fileio.save_model(path, rule, shape)
    cm = diagnostics.confusion(rule.predict(ds.data), ds.labels)
    print(f"trained {rule.method} on n={ds.n} (d={ds.d}); model: {path}")
    for key in ("C", "scale", "gap", "iterations", "kkt"):
        if key in rule.meta:
            print(f"  {key}: {rule.meta[key]}")
    print(cm.to_text("training set"), end="")
    _write_json(out / "train_summary.json", {
        "method": rule.method, "meta": rule.meta, "training": cm.to_dict(), "model": str(path),
    })


def cmd_eval(cfg: RunConfig):
    _, data = _load(cfg)
    rule, ds = _load_model_for(cfg, data)
    cm = diagnostics.confusion(rule.predict(ds.data), ds.labels)
    text = cm.to_text(f"{rule.method} on {cfg.manifest}")
    print(text, end="")
    out = _out(cfg)
    (out / "confusion.txt").write_text(text)
    _write_json(out / "confusion.json", cm.to_dict())


def _summary_json(S: diagnostics.ProjectionSummary) -> dict:
    gap = S.gap
    return {
        "span": list(S.span),
        "bandwidth": S.bandwidth,
        "piling": {"male": S.piling.get(1), "female": S.piling.get(-1)},
        "separation_interval": None if gap is None or gap.interval is None else list(gap.interval),
        "separation_width": None if gap is None else gap.width,
        "mode_male": None if gap is None else gap.mode_pos,
        "mode_female": None if gap is None else gap.mode_neg,
        "mode_gap": None if gap is None else gap.mode_gap,
    }


def _project(cfg, rule, ds):
    tol = cfg.piling_tol * float(np.ptp(rule.score(ds.data)))
    return diagnostics.project(rule, ds, grid_size=cfg.grid, piling_tol=tol)


def write_projection(out: Path, prefix: str, S, ids):
    _write_csv(out / f"{prefix}scores.csv", ["id", "label", "score", "height"],
               [[i, int(l), _g(s), _g(h)] for i, l, s, h in zip(ids, S.labels, S.scores, S.heights)])
    _write_csv(out / f"{prefix}density.csv", ["grid", "overall", "male", "female"],
               [[_g(g), _g(a), _g(b), _g(c)] for g, a, b, c in
                zip(S.grid, S.density, S.density_pos, S.density_neg)])
    _write_json(out / f"{prefix}summary.json", _summary_json(S))


def cmd_project(cfg: RunConfig):
    _, data = _load(cfg)
    rule, ds = _load_model_for(cfg, data)
    S = _project(cfg, rule, ds)
    out = _out(cfg)
    write_projection(out, "", S, data.ids)
    info = _summary_json(S)
    print(f"span [{S.span[0]:.4g}, {S.span[1]:.4g}]  piling male {info['piling']['male']:.3f} "
          f"female {info['piling']['female']:.3f}  separation width {info['separation_width']:.4g}")


def cmd_frames(cfg: RunConfig):
    _, data = _load(cfg)
    rule, ds = _load_model_for(cfg, data)
    span = diagnostics.plot_span(rule.score(ds.data))
    scores = diagnostics.frame_scores(span, cfg.frames)
    frames = diagnostics.reconstruction_frames(rule, ds, data.images[0].shape, cfg.frames, span)
    out = _out(cfg)
    width = max(3, len(str(len(frames))))
    rows = []
    for t, (img, s) in enumerate(zip(frames, scores), start=1):
        name = f"frame_{t:0{width}d}.pgm"
        fileio.write_pgm(out / name, img)
        rows.append([t, name, _g(s)])
    _write_csv(out / "frames.csv", ["frame", "file", "score"], rows)
    print(f"wrote {len(frames)} frames to {out}")


def cmd_heatmap(cfg: RunConfig):
    rule = fileio.load_model(_model_path(cfg))
    shape = rule.meta.get("image_shape")
    if shape is None:
        if cfg.manifest is None:
            raise ConfigError("model has no image shape; pass --manifest")
        _, data = _load(cfg)
        shape = data.images[0].shape
    rgb = diagnostics.loadings_heatmap(rule, *shape)
    out = _out(cfg)
    fileio.write_ppm(out / "heatmap.ppm", rgb)
    print(f"wrote {out / 'heatmap.ppm'}")


def cmd_regions(cfg: RunConfig):
    _, data = _load(cfg)
    ds = data.dataset()
    shape = data.images[0].shape
    masks = build_masks(cfg.masks, shape)
    if len(masks) < 2:
        raise ConfigError("regions needs at least two --mask rectangles")
    out = _out(cfg)
    rules, scores = [], []
    for m in masks:
        rule = _fit(cfg, ds, m)
        rules.append(rule)
        fileio.save_model(out / f"region_{m.name}.hdlssd", rule, shape)
        S = _project(cfg, rule, ds)
        scores.append(S.scores)
        write_projection(out, f"region_{m.name}_", S, data.ids)
    for (i, a), (j, b) in itertools.combinations(enumerate(masks), 2):
        _write_csv(out / f"pair_{a.name}_{b.name}.csv", ["id", "label", a.name, b.name],
                   [[rid, int(l), _g(u), _g(v)] for rid, l, u, v in
                    zip(data.ids, ds.labels, scores[i], scores[j])])
    A = diagnostics.pairwise_angles(rules)
    names = [m.name for m in masks]
    _write_csv(out / "angles.csv", ["region"] + names,
               [[n] + [_g(v) for v in row] for n, row in zip(names, A)])
    print(f"fitted {len(masks)} regions; angles (degrees):")
    for n, row in zip(names, A):
        print(f"  {n:<10}" + " ".join(f"{v:6.1f}" for v in row))


HANDLERS = {
    "synth": cmd_synth, "register": cmd_register, "train": cmd_train, "eval": cmd_eval,
    "project": cmd_project, "frames": cmd_frames, "heatmap": cmd_heatmap, "regions": cmd_regions,
}


def main(argv=None) -> int:
    try:
        cfg, dump = parse_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    if dump:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return EXIT_OK
    try:
        HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        for k, v in exc.residuals.items():
            print(f"  {k}: {v}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except HdlssdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
