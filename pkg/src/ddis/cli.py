"""Command-line entry point: ``ddis match|simulate|bench|gen``."""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bench, statsim
from .ann import AnnParams
from .errors import InputError
from .features import (PatchSpec, extract_patch_features, load_feature_map, load_image,
                       save_pgm16)
from .matcher import MEASURES, MatcherConfig, match_grids, save_map_csv


def _number(text: str) -> float:
    """Float, also accepting fractions such as ``10/255``."""
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _range(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) == 1:
        return np.array([_number(parts[0])])
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"range must be start:stop:step, got {text!r}")
    try:
        return statsim.inclusive_range(*(_number(p) for p in parts))
    except InputError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _rect(text: str) -> bench.Rect:
    try:
        return bench.Rect(*(int(v) for v in text.split(",")))
    except (TypeError, ValueError) as e:
        raise argparse.ArgumentTypeError(f"rect must be x,y,w,h: {e}") from None


def _measures(text: str) -> list[str]:
    out = [m.strip().lower() for m in text.split(",") if m.strip()]
    bad = [m for m in out if m not in MEASURES]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"unknown measure(s) {bad}; choose from {','.join(MEASURES)}")
    return out


def _add_matcher_flags(p):
    p.add_argument("--exact-nn", action="store_true", help="brute-force NN search instead of the kd-tree")
    p.add_argument("--epsilon", type=float, default=2.0, help="kd-tree approximation slack (default 2)")
    p.add_argument("--reduced-dim", type=int, default=9, help="PCA dimension for the kd-tree (default 9)")
    p.add_argument("--propagation", action="store_true", help="seed each query with its neighbor's match")
    p.add_argument("--no-smoothing", action="store_true", help="localize on the raw map")
    p.add_argument("--patch-size", type=int, default=3, help="odd patch side in pixels (default 3)")
    p.add_argument("--color-space", choices=("rgb", "hsv"), default="rgb")
    p.add_argument("--bbs-guard", type=int, default=128 * 128,
                   help="max target grid cells allowed for windowed BBS (default 16384)")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="worker threads (default: available CPUs)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")


def _config(args, measure) -> MatcherConfig:
    ann = None if args.exact_nn else AnnParams(args.epsilon, args.reduced_dim, args.propagation)
    return MatcherConfig(measure=measure, ann=ann, smoothing=not args.no_smoothing,
                         bbs_guard=args.bbs_guard,
                         patch=PatchSpec(args.patch_size, args.color_space),
                         workers=max(1, args.workers))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddis", description="Template matching with diversity similarity measures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="locate a template in a target image")
    p.add_argument("--template", help="template image (PPM P6)")
    p.add_argument("--target", help="target image (PPM P6)")
    p.add_argument("--template-rect", type=_rect, help="crop x,y,w,h of the template image to use")
    p.add_argument("--features", choices=("patch", "fmap"), default="patch",
                   help="patch: descriptors from the images; fmap: load feature maps")
    p.add_argument("--template-features", help="template FMAP file (with --features fmap)")
    p.add_argument("--target-features", help="target FMAP file (with --features fmap)")
    p.add_argument("--measure", choices=MEASURES, default="ddis")
    p.add_argument("--rect-out", help="write 'x y w h score' here (default stdout)")
    p.add_argument("--map-csv", help="write the raw similarity map as CSV")
    p.add_argument("--map-pgm", help="write the raw similarity map as 16-bit PGM")
    _add_matcher_flags(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("simulate", help="Monte-Carlo expectation grid for 1-D Gaussian sets")
    p.add_argument("--measure", choices=statsim.STAT_MEASURES, default="dis")
    p.add_argument("--mode", choices=[m.value for m in statsim.DeformationMode], default="ignore",
                   help="deformation handling for ddis")
    p.add_argument("--mu", type=_range, default=_range("0:10:1"), help="Q mean values start:stop:step")
    p.add_argument("--sigma", type=_range, default=_range("0:10:1"), help="Q sigma values start:stop:step")
    p.add_argument("--p-mu", type=_number, default=0.0, help="P mean (default 0)")
    p.add_argument("--p-sigma", type=_number, default=1.0, help="P sigma (default 1)")
    p.add_argument("--n", type=int, default=100, help="|P| (default 100)")
    p.add_argument("--m", type=int, default=None, help="|Q| (default: same as --n)")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="run measures over a manifest of pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--measure", type=_measures, default=["ddis"], help="comma-separated measures")
    p.add_argument("--out-dir", default=".", help="where results/success-curve/AUC files go")
    p.add_argument("--timing", action="store_true",
                   help="record wall_ms (makes output run-dependent); left blank otherwise")
    _add_matcher_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="generate synthetic template/target pairs")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=30)
    p.add_argument("--size", type=int, default=96, help="image side in pixels")
    p.add_argument("--template-size", type=int, default=24)
    p.add_argument("--occlusion", type=_number, default=0.0, help="occluded fraction of the template area")
    p.add_argument("--noise", type=_number, default=0.0, help="pixel noise sigma in [0,1] units, e.g. 10/255")
    p.add_argument("--jitter", type=_number, default=0.0, help="max local displacement in pixels")
    p.add_argument("--shift", type=int, default=None, help="max shift per axis (default size/4)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)
    return parser


def cmd_match(args) -> int:
    cfg = _config(args, args.measure)
    if args.features == "fmap":
        if not (args.template_features and args.target_features):
            raise InputError("--features fmap needs --template-features and --target-features")
        tpl = load_feature_map(args.template_features)
        tgt = load_feature_map(args.target_features)
        res, raw, _ = match_grids(tgt, tpl, cfg)
    else:
        if not (args.template and args.target):
            raise InputError("match needs --template and --target")
        tpl_img = load_image(args.template)
        if args.template_rect is not None:
            r = args.template_rect
            if not r.inside(tpl_img.shape[1], tpl_img.shape[0]):
                raise InputError(f"template rect {r} outside the template image")
            tpl_img = tpl_img[r.y:r.y + r.h, r.x:r.x + r.w]
        tgt_img = load_image(args.target)
        tgt = extract_patch_features(tgt_img, cfg.patch)
        tpl = extract_patch_features(tpl_img, cfg.patch)
        res, raw, _ = match_grids(tgt, tpl, cfg, template_size=(tpl_img.shape[1], tpl_img.shape[0]))
    line = "%d %d %d %d %r\n" % (*res.rect, res.raw_score)
    if args.rect_out:
        Path(args.rect_out).write_text(line)
    else:
        sys.stdout.write(line)
    if args.map_csv:
        save_map_csv(args.map_csv, raw)
    if args.map_pgm:
        save_pgm16(args.map_pgm, raw)
    return 0


def cmd_simulate(args) -> int:
    m = args.n if args.m is None else args.m
    if args.n < 1 or m < 1 or args.trials < 1:
        raise InputError("--n, --m and --trials must be >= 1")
    grid = statsim.expectation_grid(
        args.measure, args.mode, args.mu, args.sigma, None, args.n, m, args.trials, args.seed,
        statsim.GaussianSpec(args.p_mu, args.p_sigma), workers=max(1, args.workers))
    if args.out:
        grid.to_csv(args.out)
    else:
        sys.stdout.write(grid.csv_text())
    return 0


def cmd_bench(args) -> int:
    records = bench.read_manifest(args.manifest)
    if not records:
        raise InputError(f"{args.manifest}: no records")
    cfg = _config(args, args.measure[0])
    base = os.path.dirname(os.path.abspath(args.manifest))
    rows = bench.run_bench(records, args.measure, cfg, base, workers=max(1, args.workers),
                           timing=args.timing)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bench.write_results(out / "results.csv", rows)

    curves = {}
    for m in args.measure:
        accs = [r["accuracy"] for r in rows if r["measure"] == m]
        curves[m] = bench.success_curve(accs)
    thresholds = next(iter(curves.values())).thresholds
    with open(out / "success_curve.csv", "w") as f:
        f.write("threshold," + ",".join(args.measure) + "\n")
        for k, t in enumerate(thresholds):
            f.write(repr(float(t)) + "," + ",".join(repr(float(curves[m].fractions[k])) for m in args.measure) + "\n")
    lines = "".join(f"AUC {m} {bench.auc(curves[m]):.6f}\n" for m in args.measure)
    (out / "auc.txt").write_text(lines)
    sys.stdout.write(lines)
    return 0


def cmd_gen(args) -> int:
    if args.count < 1:
        raise InputError("--count must be >= 1")
    params = bench.SyntheticParams(size=args.size, template_size=args.template_size,
                                   occlusion_fraction=args.occlusion, noise_sigma=args.noise,
                                   shift=args.shift, local_jitter=args.jitter, seed=args.seed)
    bench.gen_dataset(params, args.out_dir, args.count)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, OSError) as e:
        msg = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"ddis {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
