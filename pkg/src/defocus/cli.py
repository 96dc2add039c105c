"""Command-line interface.

Subcommands cover the full pipeline: dataset generation, training,
evaluation, map estimation (learned and classical), refinement,
thresholding, and the three applications, plus the lens and runtime
calculators. Every run prints one machine-readable JSON summary line
(parameters, inputs, output digests, wall time) to stdout; files are
written atomically; identical arguments and seed reproduce identical
bytes regardless of --threads.

Option defaults can also be supplied through a flat TOML file via
--config; explicit flags win over the file, the file wins over built-in
defaults.
"""

import argparse
import glob
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import apps, blurmap, classifier, corpus, dataset, imgcore, kernels, refine

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib


class CLIError(Exception):
    """Bad parameter value; maps to exit code 2 and names the flag."""

    def __init__(self, flag, message):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _describe_outputs(paths):
    out = {}
    for path in paths:
        out[path] = {"sha256": _sha256(path), "bytes": os.path.getsize(path)}
    return out


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise CLIError("--config", f"no such file: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise CLIError("--config", f"invalid TOML: {exc}")


def _resolve(args, config, defaults):
    """Effective parameters: explicit flag > config file entry > default."""
    resolved = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None:
            value = config.get(key, default)
        resolved[key] = value
    return resolved


def _positive(value, flag, kind=float):
    value = kind(value)
    if value <= 0:
        raise CLIError(flag, f"must be > 0, got {value}")
    return value


def _check_step(step):
    step = int(step)
    if not 1 <= step <= 32:
        raise CLIError("--step", f"must be in [1, 32], got {step}")
    return step


def _read_gray(path):
    return imgcore.to_grayscale(imgcore.read_image(path))


def _load_backend(model_path):
    model = classifier.load_model(model_path)
    return model


def _sidecar(path):
    return os.path.splitext(path)[0] + ".json"


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    imgcore._write_atomic(path, text.encode("utf-8"))


def _estimate_refined(img, model, step, gf_params, lambda_w, debug_dir=None, tag=""):
    raw = blurmap.estimate_map(img, model, step=step)
    refined = refine.refine_map(raw.values, img, gf_params, lambda_w)
    if debug_dir:
        os.makedirs(debug_dir, exist_ok=True)
        imgcore.write_blurmap(os.path.join(debug_dir, f"raw_map{tag}.pgm"), raw.values)
        imgcore.write_blurmap(os.path.join(debug_dir, f"refined_map{tag}.pgm"),
                              refined.values)
    return refined


# ---------------------------------------------------------------------------
# command handlers: each returns (params, inputs, outputs, extras)
# ---------------------------------------------------------------------------

DATASET_DEFAULTS = {"threshold": 1000.0, "seed": 0, "noise_std": 0.0,
                    "train_ratio": 0.72, "val_ratio": 0.18, "test_ratio": 0.10}


def _cmd_dataset_generate(args, config):
    p = _resolve(args, config, DATASET_DEFAULTS)
    p["threshold"] = float(p["threshold"])
    p["seed"] = int(p["seed"])
    p["noise_std"] = float(p["noise_std"])
    if p["noise_std"] < 0:
        raise CLIError("--noise-std", "must be >= 0")
    ratios = (float(p["train_ratio"]), float(p["val_ratio"]), float(p["test_ratio"]))
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CLIError("--train-ratio/--val-ratio/--test-ratio",
                       f"must sum to 1, got {sum(ratios)}")
    if args.bundled:
        sources = corpus.bundled_corpus()
        inputs = ["<bundled corpus>"]
    else:
        if args.input is None:
            raise CLIError("--input", "required unless --bundled is given")
        paths = sorted(glob.glob(os.path.join(args.input, "*.png"))
                       + glob.glob(os.path.join(args.input, "*.pgm")))
        if not paths:
            raise CLIError("--input", f"no .png/.pgm images in {args.input}")
        sources = [(os.path.splitext(os.path.basename(path))[0],
                    imgcore.read_image(path)) for path in paths]
        inputs = paths
    records = []
    for name, img in sources:
        records.extend(dataset.build_records(img, name, p["threshold"],
                                             p["noise_std"], p["seed"]))
    if not records:
        raise CLIError("--threshold", "no patches passed the sharpness threshold")
    split = dataset.split_dataset(records, ratios, p["seed"])
    dataset.save_dataset(split, args.output, ratios=ratios,
                         threshold=p["threshold"], noise_std=p["noise_std"])
    outputs = [os.path.join(args.output, name)
               for name in ("manifest.json", "train.bin", "validation.bin", "test.bin")]
    extras = {"records": len(records),
              "split_sizes": {k: len(v) for k, v in split.splits().items()}}
    return p, inputs, outputs, extras


TRAIN_DEFAULTS = {"epochs": 50, "seed": 0, "batch": 128, "lr": 0.001}


def _cmd_train(args, config):
    p = _resolve(args, config, TRAIN_DEFAULTS)
    epochs = int(p["epochs"])
    if epochs < 1:
        raise CLIError("--epochs", "must be >= 1")
    batch = int(p["batch"])
    if batch < 1:
        raise CLIError("--batch", "must be >= 1")
    lr = _positive(p["lr"], "--lr")
    split = dataset.load_dataset(args.dataset)
    cfg = classifier.TrainConfig(batch=batch, lr=lr, epochs=epochs, seed=int(p["seed"]))
    model, history = classifier.train(split, cfg)
    classifier.save_model(model, args.out)
    extras = {"final_train_acc": history["train_acc"][-1],
              "final_val_acc": history["val_acc"][-1] if history["val_acc"] else None,
              "train_records": len(split.train)}
    return p, [args.dataset], [args.out], extras


def _cmd_evaluate(args, config):
    p = _resolve(args, config, {"split": "test"})
    if p["split"] not in ("train", "validation", "test"):
        raise CLIError("--split", f"unknown split {p['split']!r}")
    split = dataset.load_dataset(args.dataset)
    records = split.splits()[p["split"]]
    if not records:
        raise CLIError("--split", f"split {p['split']!r} is empty")
    model = _load_backend(args.model)
    report = classifier.evaluate(model, records)
    payload = report.as_dict()
    payload["within_2"] = classifier.within_k_accuracy(model, records, 2)
    payload["split"] = p["split"]
    _write_json(args.report, payload)
    extras = {"accuracy": report.accuracy, "within_2": payload["within_2"]}
    return p, [args.dataset, args.model], [args.report], extras


MAP_DEFAULTS = {"step": 16}


def _cmd_map(args, config):
    p = _resolve(args, config, MAP_DEFAULTS)
    step = _check_step(p["step"])
    img = imgcore.read_image(args.input)
    model = _load_backend(args.model)
    result = blurmap.estimate_map(img, model, step=step)
    imgcore.write_blurmap(args.out, result.values)
    _write_json(_sidecar(args.out), {
        "step": step, "backend": result.backend_id,
        "min": float(result.values.min()), "max": float(result.values.max()),
    })
    return ({"step": step}, [args.input, args.model],
            [args.out, _sidecar(args.out)], {})


CLASSICAL_DEFAULTS = {"method": "var_laplacian", "window": 16}


def _cmd_classical_map(args, config):
    p = _resolve(args, config, CLASSICAL_DEFAULTS)
    method = p["method"].replace("-", "_")
    if method not in blurmap.CLASSICAL_METHODS:
        raise CLIError("--method", f"expected one of {blurmap.CLASSICAL_METHODS}, "
                                   f"got {p['method']!r}")
    window = int(p["window"])
    if window < 1:
        raise CLIError("--window", "must be >= 1")
    gray = _read_gray(args.input)
    stats = blurmap.classical_map(gray, method, window)
    lo, hi = float(stats.min()), float(stats.max())
    scaled = (stats - lo) / (hi - lo) if hi > lo else np.zeros_like(stats)
    imgcore._write_atomic(args.out, imgcore.encode_pgm(scaled, maxval=65535))
    _write_json(_sidecar(args.out), {"method": method, "window": window,
                                     "min": lo, "max": hi,
                                     "note": "values scaled to [0,1] from [min,max]"})
    return ({"method": method, "window": window}, [args.input],
            [args.out, _sidecar(args.out)], {})


REFINE_DEFAULTS = {"r": 16, "eps": 0.005, "iters": 7, "lambda_w": 1e-6}
REFINE_CMD_DEFAULTS = {**REFINE_DEFAULTS, "map_passes": 1}


def _refine_params(p):
    radius = int(p["r"])
    if radius < 1:
        raise CLIError("--r", "must be >= 1")
    eps = _positive(p["eps"], "--eps")
    iters = int(p["iters"])
    if iters < 1:
        raise CLIError("--iters", "must be >= 1")
    lambda_w = _positive(p["lambda_w"], "--lambda-w")
    return refine.GuidedFilterParams(radius, eps, iters), lambda_w


def _cmd_refine(args, config):
    p = _resolve(args, config, REFINE_CMD_DEFAULTS)
    gf_params, lambda_w = _refine_params(p)
    map_passes = int(p["map_passes"])
    if map_passes < 1:
        raise CLIError("--map-passes", "must be >= 1")
    map_values = imgcore.read_blurmap(args.map)
    img = imgcore.read_image(args.image)
    refined = refine.refine_map(map_values, img, gf_params, lambda_w, map_passes)
    imgcore.write_blurmap(args.out, refined.values)
    _write_json(_sidecar(args.out), {
        "radius": gf_params.radius, "epsilon": gf_params.epsilon,
        "iterations": gf_params.iterations, "lambda_w": lambda_w,
        "map_passes": map_passes,
        "guidance_sha256": refined.guidance_hash,
    })
    return (p, [args.map, args.image], [args.out, _sidecar(args.out)], {})


def _cmd_binary(args, config):
    p = _resolve(args, config, {"threshold": 4.0})
    threshold = float(p["threshold"])
    map_values = imgcore.read_blurmap(args.map)
    mask = refine.binary_map(map_values, threshold)
    imgcore.write_image(args.out, mask)
    share = float((mask == 0.0).mean())
    return ({"threshold": threshold}, [args.map], [args.out],
            {"in_focus_share": share})


ENHANCE_DEFAULTS = {"a1": 46.0, "b1": 0.1, "a2": 183.0, "b2": 0.27, "lmax": 2.0,
                    "sigma_um": 2.0, "step": 16, **REFINE_DEFAULTS}


def _cmd_enhance(args, config):
    p = _resolve(args, config, ENHANCE_DEFAULTS)
    step = _check_step(p["step"])
    gf_params, lambda_w = _refine_params(p)
    try:
        gain_params = apps.GainParams(float(p["a1"]), float(p["b1"]),
                                      float(p["a2"]), float(p["b2"]), float(p["lmax"]))
    except ValueError as exc:
        raise CLIError("--a1/--b1/--a2/--b2/--lmax", str(exc))
    img = imgcore.read_image(args.input)
    model = _load_backend(args.model)
    refined = _estimate_refined(img, model, step, gf_params, lambda_w, args.debug_dir)
    out = apps.adaptive_enhance(img, refined.values, gain_params, float(p["sigma_um"]))
    if args.debug_dir:
        gain = apps.gain_map(refined.values, gain_params)
        imgcore.write_image(os.path.join(args.debug_dir, "gain_map.png"),
                            gain / gain_params.lambda_max)
    imgcore.write_image(args.out, out)
    return (p, [args.input, args.model], [args.out], {})


SDOF_DEFAULTS = {"c0": 1.0, "c1": 7.0, "w0": 0.999, "w1": 0.001,
                 "smooth_r": 33, "smooth_eps": 128.0 / 255.0 ** 2, "smooth_iters": 5,
                 "sharpen": 0.25, "step": 16, **REFINE_DEFAULTS}


def _cmd_sdof(args, config):
    p = _resolve(args, config, SDOF_DEFAULTS)
    step = _check_step(p["step"])
    gf_params, lambda_w = _refine_params(p)
    try:
        smooth = refine.GuidedFilterParams(int(p["smooth_r"]), float(p["smooth_eps"]),
                                           int(p["smooth_iters"]))
        sdof_params = apps.SDoFParams(float(p["c0"]), float(p["c1"]),
                                      float(p["w0"]), float(p["w1"]),
                                      smooth, float(p["sharpen"]))
        apps.solve_sdof_weights(sdof_params)
    except ValueError as exc:
        raise CLIError("--c0/--c1/--w0/--w1", str(exc))
    img = imgcore.read_image(args.input)
    model = _load_backend(args.model)
    refined = _estimate_refined(img, model, step, gf_params, lambda_w, args.debug_dir)
    out = apps.sdof(img, refined.values, sdof_params)
    if args.debug_dir:
        scale, shape = apps.solve_sdof_weights(sdof_params)
        weights = apps.sdof_weight_curve(refined.values, scale, shape)
        imgcore.write_image(os.path.join(args.debug_dir, "weight_map.png"), weights)
    imgcore.write_image(args.out, out)
    return (p, [args.input, args.model], [args.out], {})


FUSE_DEFAULTS = {"step": 4, "r": 7, "eps": 1e-3, "delta": 1e-6,
                 "refine_r": 16, "refine_eps": 0.005, "iters": 7, "lambda_w": 1e-6}


def _cmd_fuse(args, config):
    p = _resolve(args, config, FUSE_DEFAULTS)
    step = _check_step(p["step"])
    gf_params, lambda_w = _refine_params({"r": p["refine_r"], "eps": p["refine_eps"],
                                          "iters": p["iters"],
                                          "lambda_w": p["lambda_w"]})
    radius = int(p["r"])
    if radius < 1:
        raise CLIError("--r", "must be >= 1")
    try:
        fusion_params = apps.FusionParams(radius, _positive(p["eps"], "--eps"),
                                          _positive(p["delta"], "--delta"), step)
    except ValueError as exc:
        raise CLIError("--delta", str(exc))
    if len(args.inputs) < 2:
        raise CLIError("--inputs", "need at least two images")
    imgs = [imgcore.read_image(path) for path in args.inputs]
    model = _load_backend(args.model)
    maps = []
    for i, img in enumerate(imgs):
        refined = _estimate_refined(img, model, step, gf_params, lambda_w,
                                    args.debug_dir, tag=f"_{i}")
        maps.append(refined.values)
    out = apps.fuse(imgs, maps, fusion_params)
    imgcore.write_image(args.out, out)
    return (p, list(args.inputs) + [args.model], [args.out], {})


COC_DEFAULTS = {}


def _cmd_coc(args, config):
    try:
        cfg = imgcore.LensConfig(_positive(args.focal_length, "--focal-length"),
                                 _positive(args.aperture, "--aperture"),
                                 _positive(args.s1, "--s1"),
                                 _positive(args.s2, "--s2"))
    except ValueError as exc:
        raise CLIError("--focal-length/--s1", str(exc))
    d = imgcore.coc_diameter(cfg)
    params = {"focal_length": cfg.focal_length, "aperture": cfg.aperture_diameter,
              "s1": cfg.focus_distance, "s2": cfg.object_distance}
    return params, [], [], {"coc_diameter_mm": d}


def _cmd_predict_runtime(args, config):
    t = _positive(args.t_per_patch, "--t-per-patch")
    pixels = _positive(args.pixels, "--pixels", int)
    step = _check_step(args.step if args.step is not None else 16)
    seconds = blurmap.predict_runtime(t, pixels, step)
    return ({"t_per_patch": t, "pixels": pixels, "step": step}, [], [],
            {"seconds": seconds})


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="defocus",
        description="Per-pixel defocus blur map estimation and map-driven "
                    "sharpening, depth-of-field synthesis, and multi-focus fusion.")
    parser.add_argument("--config", help="flat TOML file with option defaults "
                                         "(explicit flags win)")
    parser.add_argument("--threads", type=int,
                        help="cap internal parallelism (default: all cores; "
                             "results do not depend on it)")
    parser.add_argument("--verbose", action="store_true",
                        help="progress notes on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("dataset", help="dataset tools").add_subparsers(
        dest="dataset_command", required=True)
    gen = ds.add_parser("generate",
                        help="mine sharp patches and synthesize the 20 blur levels")
    gen.add_argument("--input", help="directory of source images (.png/.pgm)")
    gen.add_argument("--bundled", action="store_true",
                     help="use the bundled 20-texture corpus instead of --input")
    gen.add_argument("--output", required=True, help="dataset output directory")
    gen.add_argument("--threshold", type=float,
                     help="sharpness threshold on the 0-255 scale (default 1000)")
    gen.add_argument("--seed", type=int, help="split shuffle seed (default 0)")
    gen.add_argument("--noise-std", type=float, dest="noise_std",
                     help="additive sensor-noise std in [0,1] units (default 0)")
    gen.add_argument("--train-ratio", type=float, dest="train_ratio",
                     help="training share of source patches (default 0.72)")
    gen.add_argument("--val-ratio", type=float, dest="val_ratio",
                     help="validation share (default 0.18)")
    gen.add_argument("--test-ratio", type=float, dest="test_ratio",
                     help="test share (default 0.10)")

    tr = sub.add_parser("train", help="train the blur-level classifier")
    tr.add_argument("--dataset", required=True)
    tr.add_argument("--epochs", type=int, help="training epochs (default 50)")
    tr.add_argument("--seed", type=int, help="shuffle seed (default 0)")
    tr.add_argument("--batch", type=int, help="minibatch size (default 128)")
    tr.add_argument("--lr", type=float, help="Adam learning rate (default 0.001)")
    tr.add_argument("--out", required=True, help="model JSON path")

    ev = sub.add_parser("evaluate", help="score a model on a dataset split")
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--model", required=True)
    ev.add_argument("--report", required=True, help="report JSON path")
    ev.add_argument("--split", help="train|validation|test (default test)")

    mp = sub.add_parser("map", help="estimate a per-pixel blur map")
    mp.add_argument("--input", required=True)
    mp.add_argument("--model", required=True)
    mp.add_argument("--step", type=int, help="window step in pixels (default 16)")
    mp.add_argument("--out", required=True, help="16-bit PGM map path")

    cm = sub.add_parser("classical-map",
                        help="windowed sharpness statistic baseline map")
    cm.add_argument("--input", required=True)
    cm.add_argument("--method", help="entropy|stddev|var-laplacian "
                                     "(default var-laplacian)")
    cm.add_argument("--window", type=int, help="window size in pixels (default 16)")
    cm.add_argument("--out", required=True)

    rf = sub.add_parser("refine", help="refine a blur map against its image")
    rf.add_argument("--map", required=True, help="16-bit PGM blur map")
    rf.add_argument("--image", required=True)
    rf.add_argument("--r", type=int, help="filter window radius (default 16)")
    rf.add_argument("--eps", type=float, help="regularization (default 0.005)")
    rf.add_argument("--iters", type=int,
                    help="guidance smoothing iterations (default 7)")
    rf.add_argument("--map-passes", type=int, dest="map_passes",
                    help="filter passes over the map itself (default 1)")
    rf.add_argument("--lambda-w", type=float, dest="lambda_w",
                    help="edge-weight variance floor (default 1e-6)")
    rf.add_argument("--out", required=True)

    bi = sub.add_parser("binary", help="threshold a map into an in-focus mask")
    bi.add_argument("--map", required=True)
    bi.add_argument("--lambda", type=float, dest="threshold",
                    help="blur-level threshold (default 4)")
    bi.add_argument("--out", required=True)

    en = sub.add_parser("enhance", help="adaptive unsharp masking")
    en.add_argument("--input", required=True)
    en.add_argument("--model", required=True)
    en.add_argument("--a1", type=float, help="rising sigmoid steepness (default 46)")
    en.add_argument("--b1", type=float, help="rising sigmoid midpoint (default 0.1)")
    en.add_argument("--a2", type=float, help="falling sigmoid steepness (default 183)")
    en.add_argument("--b2", type=float, help="falling sigmoid midpoint (default 0.27)")
    en.add_argument("--lmax", type=float, help="maximum gain (default 2)")
    en.add_argument("--sigma-um", type=float, dest="sigma_um",
                    help="unsharp-mask blur width (default 2)")
    en.add_argument("--step", type=int, help="map window step (default 16)")
    en.add_argument("--r", type=int, help="refinement radius (default 16)")
    en.add_argument("--eps", type=float, help="refinement epsilon (default 0.005)")
    en.add_argument("--iters", type=int, help="guidance iterations (default 7)")
    en.add_argument("--lambda-w", type=float, dest="lambda_w")
    en.add_argument("--debug-dir", help="write intermediate maps here")
    en.add_argument("--out", required=True)

    sd = sub.add_parser("sdof", help="shallow depth-of-field synthesis")
    sd.add_argument("--input", required=True)
    sd.add_argument("--model", required=True)
    sd.add_argument("--c0", type=float, help="in-focus anchor level (default 1)")
    sd.add_argument("--c1", type=float, help="out-of-focus anchor level (default 7)")
    sd.add_argument("--w0", type=float, help="weight at the sharp anchor "
                                             "(default 0.999)")
    sd.add_argument("--w1", type=float, help="weight at the blurred anchor "
                                             "(default 0.001)")
    sd.add_argument("--smooth-r", type=int, dest="smooth_r",
                    help="smoothing radius (default 33)")
    sd.add_argument("--smooth-eps", type=float, dest="smooth_eps",
                    help="smoothing epsilon (default 128/255^2)")
    sd.add_argument("--smooth-iters", type=int, dest="smooth_iters",
                    help="self-guided smoothing passes (default 5)")
    sd.add_argument("--sharpen", type=float,
                    help="unsharp gain of the sharp layer (default 0.25)")
    sd.add_argument("--step", type=int, help="map window step (default 16)")
    sd.add_argument("--r", type=int)
    sd.add_argument("--eps", type=float)
    sd.add_argument("--iters", type=int)
    sd.add_argument("--lambda-w", type=float, dest="lambda_w")
    sd.add_argument("--debug-dir")
    sd.add_argument("--out", required=True)

    fu = sub.add_parser("fuse", help="multi-focus fusion")
    fu.add_argument("--inputs", nargs="+", required=True,
                    help="two or more registered images")
    fu.add_argument("--model", required=True)
    fu.add_argument("--step", type=int, help="map window step (default 4)")
    fu.add_argument("--r", type=int, help="decision-map filter radius (default 7)")
    fu.add_argument("--eps", type=float,
                    help="decision-map filter epsilon (default 1e-3)")
    fu.add_argument("--delta", type=float,
                    help="weight normalization floor (default 1e-6)")
    fu.add_argument("--refine-r", type=int, dest="refine_r",
                    help="map refinement radius (default 16)")
    fu.add_argument("--refine-eps", type=float, dest="refine_eps",
                    help="map refinement epsilon (default 0.005)")
    fu.add_argument("--iters", type=int)
    fu.add_argument("--lambda-w", type=float, dest="lambda_w")
    fu.add_argument("--debug-dir")
    fu.add_argument("--out", required=True)

    co = sub.add_parser("coc", help="blur-circle diameter from lens geometry")
    co.add_argument("--focal-length", type=float, required=True, dest="focal_length",
                    help="focal length in mm")
    co.add_argument("--aperture", type=float, required=True,
                    help="aperture diameter in mm")
    co.add_argument("--s1", type=float, required=True,
                    help="focus distance in mm")
    co.add_argument("--s2", type=float, required=True,
                    help="object distance in mm")

    pr = sub.add_parser("predict-runtime",
                        help="wall-time estimate for sliding-window inference")
    pr.add_argument("--t-per-patch", type=float, required=True, dest="t_per_patch",
                    help="seconds per classified window")
    pr.add_argument("--pixels", type=int, required=True, help="image pixel count")
    pr.add_argument("--step", type=int, help="window step (default 16)")

    return parser


_HANDLERS = {
    "dataset/generate": _cmd_dataset_generate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "map": _cmd_map,
    "classical-map": _cmd_classical_map,
    "refine": _cmd_refine,
    "binary": _cmd_binary,
    "enhance": _cmd_enhance,
    "sdof": _cmd_sdof,
    "fuse": _cmd_fuse,
    "coc": _cmd_coc,
    "predict-runtime": _cmd_predict_runtime,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    if command == "dataset":
        command = f"dataset/{args.dataset_command}"
    try:
        config = _load_config(args.config)
        if args.threads is not None:
            if args.threads < 1:
                raise CLIError("--threads", "must be >= 1")
            kernels.set_threads(args.threads)
        started = time.perf_counter()
        if args.verbose:
            print(f"defocus {command} starting", file=sys.stderr)
        params, inputs, outputs, extras = _HANDLERS[command](args, config)
        summary = {
            "command": command,
            "params": params,
            "inputs": inputs,
            "outputs": _describe_outputs(outputs),
            "wall_time_s": round(time.perf_counter() - started, 6),
        }
        summary.update(extras)
        print(json.dumps(summary, sort_keys=True))
        return 0
    except CLIError as exc:
        print(f"defocus {command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - boundary of the CLI
        print(f"defocus {command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
