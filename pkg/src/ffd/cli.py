"""Command-line entry point.

Exit status: 0 on success, 1 on usage errors, 2 on data or format errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import _backend
from .detector import DetectorParams, detect
from .evaluation import (Homography, dog_profiles_csv, kernel_analysis_csv, median_by,
                         repeatability, robustness_sweep, rows_to_csv, timing_scaling,
                         warp_image)
from .io import FormatError, read_image, write_keypoints, write_pgm
from .pyramid import build_scale_space

log = logging.getLogger("ffd")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _workers() -> int:
    raw = os.environ.get("FFD_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"FFD_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError("FFD_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _sizes(text: str) -> list[tuple[int, int]]:
    out = []
    for part in text.split(","):
        part = part.strip().lower()
        try:
            w, _, h = part.partition("x")
            out.append((int(w), int(h or w)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad size {part!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ffd", description="FFD multiscale blob detector.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("detect", help="detect keypoints in a PGM/PNG image")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.add_argument("--scales", type=int, default=3)
    d.add_argument("--sigma0", type=float, default=0.6)
    d.add_argument("--contrast", type=float, default=0.05)
    d.add_argument("--tau-plus", type=float, default=0.7)
    d.add_argument("--tau-minus", type=float, default=1.5)
    d.add_argument("--max-keypoints", type=int, default=10000)
    d.add_argument("--format", choices=("json", "csv"), default="json")

    py = sub.add_parser("pyramid", help="dump coarse/fine levels as 8-bit PGM")
    py.add_argument("--input", required=True)
    py.add_argument("--outdir", required=True)
    py.add_argument("--scales", type=int, default=3)

    k = sub.add_parser("analyze-kernel", help="superimposition margin table (CSV)")
    k.add_argument("--out", required=True)
    k.add_argument("--profiles", help="also write sampled DoG profiles here")

    e = sub.add_parser("eval", help="evaluation protocols")
    esub = e.add_subparsers(dest="protocol", required=True, parser_class=_Parser)
    r = esub.add_parser("repeatability")
    r.add_argument("--image", required=True)
    r.add_argument("--homography", required=True)
    r.add_argument("--epsilon", type=float, default=2.0)
    for name in ("noise", "blur"):
        s = esub.add_parser(name)
        s.add_argument("--image", required=True)
        s.add_argument("--out", required=True)
        s.add_argument("--seed", type=int, default=7)
        s.add_argument("--epsilon", type=float, default=2.0)

    b = sub.add_parser("bench", help="pyramid build time vs image size")
    b.add_argument("--sizes", type=_sizes, default=_sizes("128,256,512"))
    b.add_argument("--repeats", type=int, default=5)
    return p


def _params(args) -> DetectorParams:
    return DetectorParams(n=args.scales, sigma0=args.sigma0, tau_lc=args.contrast,
                          tau_plus=args.tau_plus, tau_minus=args.tau_minus,
                          max_keypoints=args.max_keypoints)


def _to_byte_range(level: np.ndarray) -> np.ndarray:
    lo, hi = float(level.min()), float(level.max())
    if hi <= lo:
        return np.zeros_like(level)
    return (level - lo) / (hi - lo)


def cmd_detect(args):
    params = _params(args)
    kps = detect(read_image(args.input), params)
    write_keypoints(kps, args.format, args.output)
    log.info("%d keypoints -> %s", len(kps), args.output)


def cmd_pyramid(args):
    space = build_scale_space(read_image(args.input), args.scales)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for j, level in enumerate(space.coarse):
        write_pgm(level, out / f"coarse_{j}.pgm")
    for j, level in enumerate(space.fine):
        write_pgm(_to_byte_range(level), out / f"fine_{j}.pgm")


def cmd_analyze_kernel(args):
    mus = np.round(np.arange(1.1, 3.0001, 0.1), 6)
    lams = np.round(np.arange(0.05, 0.6001, 0.025), 6)
    Path(args.out).write_text(kernel_analysis_csv(mus, lams))
    if args.profiles:
        Path(args.profiles).write_text(dog_profiles_csv([1.26, 1.6, 2.0, 3.0]))


def cmd_eval(args):
    img = read_image(args.image)
    if args.protocol == "repeatability":
        h = Homography.load(args.homography)
        warped, mask = warp_image(img, h)
        rep = repeatability(detect(img), detect(warped), h, args.epsilon,
                            valid_b=mask, valid_a=img.shape)
        print(json.dumps({"score": rep.score, "matched": rep.matched, "total_a": rep.total_a,
                          "total_b": rep.total_b, "epsilon": rep.epsilon,
                          "convention": rep.convention}))
        return
    seeds = range(args.seed, args.seed + 5)
    rows = robustness_sweep(img, args.protocol, seeds=seeds, epsilon=args.epsilon,
                            workers=_workers())
    Path(args.out).write_text(rows_to_csv(rows))
    key = "std" if args.protocol == "noise" else "ksize"
    for value, score in median_by(rows, key).items():
        print(f"{key}={value} median_repeatability={score:.4f}")


def cmd_bench(args):
    print(f"# backend={_backend.BACKEND}")
    print("pixels,build_ms")
    for pixels, ms in timing_scaling(args.sizes, repeats=args.repeats):
        print(f"{pixels},{ms:.3f}")


COMMANDS = {"detect": cmd_detect, "pyramid": cmd_pyramid,
            "analyze-kernel": cmd_analyze_kernel, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ffd: error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, ValueError, OSError) as exc:
        print(f"ffd: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
