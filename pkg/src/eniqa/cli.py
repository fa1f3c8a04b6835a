"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 data/parse error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .dataset import ManifestError, make_synthetic_corpus, read_manifest
from .evaluate import (ConfigError, EvalConfig, cross_database, cross_validate,
                       grid_search, window_sweep)
from .features import MODEL_KINDS, FeatureConfig, FeatureError, feature_names
from .featurestore import FeatureCache, compute_features, image_features
from .imgio import ImageDecodeError, load_image
from .modelio import ModelFormatError, load_model, save_model
from .pipeline import predict_score, train_eniqa
from .spectral import LogGaborParams
from .svm import SvmParams

log = logging.getLogger("eniqa")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _window(text: str) -> tuple:
    try:
        k, l = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("window must look like KxL, e.g. 8x8") from None
    if k < 2 or l < 2:
        raise argparse.ArgumentTypeError("window sides must be >= 2")
    return k, l


def _windows(text: str) -> list:
    return [_window(t) for t in text.split(",") if t.strip()]


def _feature_config(args) -> FeatureConfig:
    lg = LogGaborParams(tuple(args.wavelengths), sigma_ratio=args.sigma_ratio,
                        sigma_theta=args.sigma_theta)
    return FeatureConfig(args.window, args.keep_fraction, lg)


def _svm_params(args) -> SvmParams:
    return SvmParams(args.C, args.gamma, args.epsilon, seed=args.seed)


def _add_feature_opts(p):
    g = p.add_argument_group("features")
    g.add_argument("--window", type=_window, default="8x8", metavar="KxL",
                   help="patch window for local entropy")
    g.add_argument("--keep-fraction", type=float, default=0.8,
                   help="fraction of most salient patches kept")
    g.add_argument("--wavelengths", type=float, nargs=2, default=(3.0, 6.0),
                   metavar=("W1", "W2"), help="log-Gabor center wavelengths in pixels")
    g.add_argument("--sigma-ratio", type=float, default=0.55, help="log-Gabor sigma_r/f0")
    g.add_argument("--sigma-theta", type=float, default=np.pi / 6,
                   help="log-Gabor angular spread (rad)")
    g.add_argument("--cache-dir", default=None, help="feature cache directory")
    g.add_argument("--jobs", type=int, default=1, help="parallel worker processes")


def _add_svm_opts(p):
    g = p.add_argument_group("model")
    g.add_argument("--C", type=float, default=1e-4, help="SVM cost")
    g.add_argument("--gamma", type=float, default=1e-4, help="RBF kernel gamma")
    g.add_argument("--epsilon", type=float, default=0.1, help="SVR tube width")
    g.add_argument("--seed", type=int, default=0, help="root random seed")
    g.add_argument("--model-kind", default="full", choices=[k.lower() for k in MODEL_KINDS],
                   help="feature subset")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="eniqa", description=__doc__.splitlines()[0],
                                     formatter_class=fmt)
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("extract", help="write 56-feature CSV rows", formatter_class=fmt)
    p.add_argument("images", nargs="*", help="image files")
    p.add_argument("--manifest", help="manifest CSV instead of image paths")
    p.add_argument("-o", "--output", default="-", help="output CSV ('-' for stdout)")
    p.add_argument("--with-path", action="store_true", help="prepend a path column")
    p.add_argument("--keep-going", action="store_true", help="continue past unreadable images")
    _add_feature_opts(p)

    p = sub.add_parser("train", help="train a model from a manifest", formatter_class=fmt)
    p.add_argument("--manifest", required=True, help="training manifest CSV")
    p.add_argument("-o", "--output", required=True, help="model file")
    _add_feature_opts(p)
    _add_svm_opts(p)

    p = sub.add_parser("predict", help="score images with a trained model", formatter_class=fmt)
    p.add_argument("model", help="model file written by train")
    p.add_argument("images", nargs="+", help="image files")
    p.add_argument("-o", "--output", default="-", help="output CSV ('-' for stdout)")
    p.add_argument("--keep-going", action="store_true", help="continue past unreadable images")

    p = sub.add_parser("evaluate", help="cross-validation or cross-database evaluation",
                       formatter_class=fmt)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", help="manifest for repeated 80/20 content-separated trials")
    src.add_argument("--cross-db", nargs=2, metavar=("TRAIN", "TEST"),
                     help="train on all of TRAIN, test on TEST's shared labels")
    p.add_argument("--trials", type=int, default=1000, help="number of random splits")
    p.add_argument("--train-fraction", type=float, default=0.8,
                   help="fraction of reference contents used for training")
    p.add_argument("--common-labels", default="JP2K,JPEG,WN,GBLUR",
                   help="comma separated labels shared by both databases (--cross-db)")
    p.add_argument("--out-dir", default=None, help="write report.txt/report.csv/... here")
    p.add_argument("--dump-trials", action="store_true", help="also write trials.csv")
    _add_feature_opts(p)
    _add_svm_opts(p)

    p = sub.add_parser("sweep", help="window-size sweep", formatter_class=fmt)
    p.add_argument("--manifest", required=True, help="manifest CSV")
    p.add_argument("--sizes", type=_windows, default="6x6,8x8,12x12,16x16,32x32",
                   help="comma separated KxL windows")
    p.add_argument("--trials", type=int, default=1000, help="number of random splits")
    p.add_argument("--timing-repeats", type=int, default=3,
                   help="uncached extractions of the first image per window for timing")
    p.add_argument("-o", "--output", default="-", help="output CSV ('-' for stdout)")
    _add_feature_opts(p)
    _add_svm_opts(p)

    p = sub.add_parser("grid", help="(C, gamma) grid of median SROCC", formatter_class=fmt)
    p.add_argument("--manifest", required=True, help="manifest CSV")
    p.add_argument("--C-values", type=float, nargs="+", default=[1e-4, 1e-2, 1, 10, 100],
                   help="costs to try")
    p.add_argument("--gamma-values", type=float, nargs="+", default=[1e-4, 1e-2, 0.05, 0.5],
                   help="RBF gammas to try")
    p.add_argument("--trials", type=int, default=50, help="random splits per grid point")
    p.add_argument("-o", "--output", default="-", help="output CSV ('-' for stdout)")
    _add_feature_opts(p)
    _add_svm_opts(p)

    p = sub.add_parser("synth", help="write a synthetic WN/GBLUR corpus", formatter_class=fmt)
    p.add_argument("out_dir", help="directory for images and manifest.csv")
    p.add_argument("--refs", type=int, default=12, help="number of pristine textures")
    p.add_argument("--size", type=int, default=128, help="texture side in pixels")
    p.add_argument("--seed", type=int, default=0, help="root random seed")

    sub.add_parser("selftest", help="run built-in invariant checks", formatter_class=fmt)
    return parser


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        if self.path == "-":
            self.fh = sys.stdout
        else:
            self.fh = open(self.path, "w", encoding="utf-8", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()


def cmd_extract(args) -> int:
    if args.manifest:
        paths = read_manifest(args.manifest).paths
    else:
        paths = list(args.images)
    if not paths:
        raise UsageError("no input images given")
    config = _feature_config(args)
    cache = FeatureCache(args.cache_dir) if args.cache_dir else None
    failed = 0
    with _Output(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((["path"] if args.with_path else []) + feature_names())
        for path in paths:
            try:
                v, _ = image_features(path, config, cache)
            except (OSError, ValueError, FeatureError) as exc:
                print("error: %s: %s" % (path, exc), file=sys.stderr)
                failed += 1
                if not args.keep_going:
                    return EXIT_RUNTIME
                continue
            w.writerow(([path] if args.with_path else []) + [repr(float(x)) for x in v])
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_train(args) -> int:
    manifest = read_manifest(args.manifest)
    config = _feature_config(args)
    F = compute_features(manifest.paths, config, args.cache_dir, jobs=args.jobs)
    model = train_eniqa(F, manifest.label_list, manifest.scores, _svm_params(args),
                        args.model_kind.upper(), config)
    save_model(args.output, model)
    log.info("trained on %d images, classes %s", len(manifest), model.classes)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    failed = 0
    with _Output(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "score"] + ["p_" + c for c in model.classes]
                   + ["q_" + c for c in model.classes])
        for path in args.images:
            try:
                pred = predict_score(model, load_image(path))
            except (OSError, ValueError, FeatureError) as exc:
                print("error: %s: %s" % (path, exc), file=sys.stderr)
                failed += 1
                if not args.keep_going:
                    return EXIT_RUNTIME
                continue
            w.writerow([path, repr(pred.score)]
                       + [repr(pred.probs[c]) for c in model.classes]
                       + [repr(pred.per_class_scores[c]) for c in model.classes])
    return EXIT_RUNTIME if failed else EXIT_OK


def _write_report(report, args):
    text = report.to_text()
    print(text)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        files = {"report.txt": text, "report.csv": report.to_csv(),
                 "confusion.csv": report.confusion_csv()}
        if args.dump_trials:
            files["trials.csv"] = report.trials_csv()
        for name, body in files.items():
            with open(os.path.join(args.out_dir, name), "w", encoding="utf-8",
                      newline="") as fh:
                fh.write(body)


def cmd_evaluate(args) -> int:
    config = _feature_config(args)
    params = _svm_params(args)
    kind = args.model_kind.upper()
    if args.cross_db:
        train_m, test_m = (read_manifest(p) for p in args.cross_db)
        common = [c.strip() for c in args.common_labels.split(",") if c.strip()]
        Ftr = compute_features(train_m.paths, config, args.cache_dir, jobs=args.jobs)
        keep = [r.path for r in test_m.records if r.label in common]
        Fk = compute_features(keep, config, args.cache_dir, jobs=args.jobs)
        Fte = np.zeros((len(test_m), Fk.shape[1]))
        pos = {p: i for i, p in enumerate(keep)}
        for i, r in enumerate(test_m.records):
            if r.path in pos:
                Fte[i] = Fk[pos[r.path]]
        report = cross_database(train_m, Ftr, test_m, Fte, common, params, kind)
    else:
        manifest = read_manifest(args.manifest)
        ecfg = EvalConfig(args.trials, args.train_fraction, args.seed, params, kind, args.jobs)
        F = compute_features(manifest.paths, config, args.cache_dir, jobs=args.jobs)
        report = cross_validate(manifest, F, ecfg)
    report.config["window"] = "%dx%d" % config.window
    _write_report(report, args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    manifest = read_manifest(args.manifest)
    ecfg = EvalConfig(args.trials, 0.8, args.seed, _svm_params(args), args.model_kind.upper(),
                      args.jobs)
    rows = window_sweep(manifest, args.sizes, ecfg, _feature_config(args), args.cache_dir,
                        args.timing_repeats, jobs=args.jobs)
    with _Output(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        labels = list(manifest.labels)
        w.writerow(["window"] + ["srocc_" + c for c in labels] + ["srocc_ALL",
                                                                 "seconds_per_image"])
        for r in rows:
            w.writerow(["%dx%d" % r.window] + [repr(r.per_label.get(c, np.nan)) for c in labels]
                       + [repr(r.srocc), repr(r.seconds_per_image)])
    return EXIT_OK


def cmd_grid(args) -> int:
    manifest = read_manifest(args.manifest)
    F = compute_features(manifest.paths, _feature_config(args), args.cache_dir, jobs=args.jobs)
    ecfg = EvalConfig(args.trials, 0.8, args.seed, _svm_params(args), args.model_kind.upper(),
                      args.jobs)
    with _Output(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["C", "gamma", "srocc_ALL", "median_accuracy"])
        for row in grid_search(manifest, F, args.C_values, args.gamma_values, ecfg):
            w.writerow([repr(v) for v in row])
    return EXIT_OK


def cmd_synth(args) -> int:
    m = make_synthetic_corpus(args.out_dir, n_refs=args.refs, size=args.size, seed=args.seed)
    print("wrote %d distorted images and %s" % (len(m), os.path.join(args.out_dir,
                                                                    "manifest.csv")))
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    t0 = time.perf_counter()
    ok = run_selftest(sys.stdout)
    print("selftest %s in %.1f s" % ("passed" if ok else "FAILED", time.perf_counter() - t0))
    return EXIT_OK if ok else EXIT_RUNTIME


COMMANDS = {
    "extract": cmd_extract,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "grid": cmd_grid,
    "synth": cmd_synth,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except (ManifestError, ModelFormatError, ImageDecodeError) as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled error", exc_info=True)
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
