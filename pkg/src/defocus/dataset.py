"""Training-data pipeline: mine sharp 32x32 patches, synthesize the
20-level blurred variants, split by source patch, and persist.

Blur level k means the patch was smoothed with a Gaussian of sigma = k
(level 0 is the untouched sharp patch). Blurring happens on a context
window around the patch and the 32x32 centre is cropped afterwards, so
high-sigma classes are free of border-replication artifacts whenever the
source image provides enough margin.
"""

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import imgcore, kernels

PATCH = 32
NUM_LEVELS = 20
CONTEXT_MARGIN = 57  # 3 * sigma_max, rounded up
SHARPNESS_THRESHOLD = 1000.0

_GAUSS3 = np.array([0.25, 0.5, 0.25])


@dataclass
class PatchRecord:
    """One dataset atom: a 32x32 grayscale patch and its blur level.

    `padded` marks records whose blur context ran past the source image
    and used replicated borders; it is metadata only and not persisted.
    """

    pixels: np.ndarray
    label: int
    source_id: str
    origin: tuple
    padded: bool = False

    def __post_init__(self):
        if self.pixels.shape != (PATCH, PATCH):
            raise ValueError(f"patch must be {PATCH}x{PATCH}")
        if not 0 <= self.label < NUM_LEVELS:
            raise ValueError(f"label must be in [0, {NUM_LEVELS})")


@dataclass
class DatasetSplit:
    train: list
    validation: list
    test: list
    seed: int = 0

    def splits(self):
        return {"train": self.train, "validation": self.validation, "test": self.test}


# ---------------------------------------------------------------------------
# sharpness scoring and mining
# ---------------------------------------------------------------------------

def gaussian_3x3(gray: np.ndarray) -> np.ndarray:
    """Binomial 3x3 Gaussian pre-smoothing (separable [1, 2, 1] / 4)."""
    return kernels.convolve_axis1(kernels.convolve_axis0(gray, _GAUSS3), _GAUSS3)


def sharpness_score(patch: np.ndarray) -> float:
    """Variance of the Laplacian of the noise-smoothed patch.

    Computed on the 0-255 intensity scale so the standard threshold of
    1000 applies to [0, 1] inputs unchanged.
    """
    patch = imgcore.ensure_gray(patch)
    if patch.shape != (PATCH, PATCH):
        raise ValueError(f"patch must be {PATCH}x{PATCH}")
    smoothed = gaussian_3x3(patch * 255.0)
    lap = kernels.laplacian4(smoothed)
    return float(lap.var())


def mine_sharp_patches(img: np.ndarray, threshold: float = SHARPNESS_THRESHOLD) -> list:
    """Non-overlapping 32x32 tiles whose sharpness exceeds `threshold`.

    Returns (patch, (x, y)) pairs in row-major tile order; images smaller
    than one tile yield an empty list.
    """
    gray = imgcore.to_grayscale(imgcore.ensure_image(img))
    h, w = gray.shape
    found = []
    for y in range(0, h - PATCH + 1, PATCH):
        for x in range(0, w - PATCH + 1, PATCH):
            tile = gray[y : y + PATCH, x : x + PATCH]
            if sharpness_score(tile) > threshold:
                found.append((tile.copy(), (x, y)))
    return found


# ---------------------------------------------------------------------------
# class synthesis
# ---------------------------------------------------------------------------

def extract_context(gray: np.ndarray, origin: tuple, margin: int = CONTEXT_MARGIN):
    """Patch plus `margin` pixels on every side, replicate-padded at the
    image boundary. Returns (context, padded_flag)."""
    gray = imgcore.ensure_gray(gray)
    x, y = origin
    h, w = gray.shape
    if not (0 <= x <= w - PATCH and 0 <= y <= h - PATCH):
        raise ValueError("origin out of bounds")
    padded_img = np.pad(gray, margin, mode="edge")
    context = padded_img[y : y + PATCH + 2 * margin, x : x + PATCH + 2 * margin]
    used_padding = x < margin or y < margin or x > w - PATCH - margin or y > h - PATCH - margin
    return context.copy(), used_padding


def synthesize_classes(context: np.ndarray, noise_std: float = 0.0, *,
                       source_id: str = "", origin: tuple = (0, 0),
                       padded: bool = False, noise_seed: int = 0) -> list:
    """All 20 blur levels of one sharp patch.

    `context` is the (32 + 2 * margin)^2 window around the patch; level k
    blurs it with sigma = k and crops the centre, so no replication from
    the context border reaches the patch. Level 0 reproduces the sharp
    patch bit-exactly when noise_std is 0.
    """
    context = imgcore.ensure_gray(context)
    margin = (context.shape[0] - PATCH) // 2
    if context.shape != (PATCH + 2 * margin, PATCH + 2 * margin):
        raise ValueError("context must be square with a whole-pixel margin")
    records = []
    for level in range(NUM_LEVELS):
        need = int(np.ceil(3.0 * level))
        if need > margin:
            raise ValueError(f"context margin {margin} too small for level {level}")
        trim = margin - need
        ctx = context[trim : context.shape[0] - trim, trim : context.shape[1] - trim]
        blurred = imgcore.blur_image(ctx, float(level), noise_std,
                                     seed=_noise_seed(noise_seed, source_id, origin, level))
        pixels = blurred[need : need + PATCH, need : need + PATCH]
        records.append(PatchRecord(pixels.astype(np.float32), level, source_id,
                                   tuple(origin), padded))
    return records


def _noise_seed(base: int, source_id: str, origin: tuple, level: int) -> int:
    # stable per-record stream so regeneration is reproducible
    h = 2166136261
    for b in f"{source_id}|{origin[0]},{origin[1]}|{level}|{base}".encode():
        h = ((h ^ b) * 16777619) & 0xFFFFFFFF
    return h


def build_records(img: np.ndarray, source_id: str,
                  threshold: float = SHARPNESS_THRESHOLD,
                  noise_std: float = 0.0, noise_seed: int = 0) -> list:
    """Mine one image and synthesize all blur levels for every hit."""
    gray = imgcore.to_grayscale(imgcore.ensure_image(img))
    records = []
    for _, origin in mine_sharp_patches(gray, threshold):
        context, padded = extract_context(gray, origin)
        records.extend(synthesize_classes(context, noise_std, source_id=source_id,
                                          origin=origin, padded=padded,
                                          noise_seed=noise_seed))
    return records


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def split_dataset(records: list, ratios: tuple = (0.72, 0.18, 0.10),
                  seed: int = 0) -> DatasetSplit:
    """Split by source patch so all 20 variants stay on one side.

    Groups are shuffled deterministically from `seed`; split sizes come
    from rounding the cumulative ratios over the group count.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("need three positive ratios")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    groups = {}
    for rec in records:
        groups.setdefault((rec.source_id, rec.origin), []).append(rec)
    keys = list(groups)
    order = np.random.default_rng(seed).permutation(len(keys))
    n = len(keys)
    c1 = round(ratios[0] * n)
    c2 = round((ratios[0] + ratios[1]) * n)
    buckets = ([], [], [])
    for rank, idx in enumerate(order):
        bucket = 0 if rank < c1 else (1 if rank < c2 else 2)
        buckets[bucket].extend(groups[keys[idx]])
    return DatasetSplit(train=buckets[0], validation=buckets[1], test=buckets[2], seed=seed)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------
# record layout, little endian:
#   u16 width | u16 height | u8 label | 32*32 f32 pixels
#   | u32 source_id byte length | source_id utf-8 | u32 x | u32 y

SCHEMA_VERSION = 1
_SPLIT_FILES = {"train": "train.bin", "validation": "validation.bin", "test": "test.bin"}


def encode_record(rec: PatchRecord) -> bytes:
    sid = rec.source_id.encode("utf-8")
    return (struct.pack("<HHB", PATCH, PATCH, rec.label)
            + rec.pixels.astype("<f4").tobytes()
            + struct.pack("<I", len(sid)) + sid
            + struct.pack("<II", rec.origin[0], rec.origin[1]))


def decode_records(data: bytes) -> list:
    records = []
    pos = 0
    pixel_bytes = PATCH * PATCH * 4
    while pos < len(data):
        w, h, label = struct.unpack_from("<HHB", data, pos)
        pos += 5
        if (w, h) != (PATCH, PATCH):
            raise ValueError(f"unexpected patch size {w}x{h}")
        pixels = np.frombuffer(data, dtype="<f4", count=PATCH * PATCH, offset=pos)
        pixels = pixels.reshape(PATCH, PATCH).copy()
        pos += pixel_bytes
        (sid_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        sid = data[pos : pos + sid_len].decode("utf-8")
        pos += sid_len
        x, y = struct.unpack_from("<II", data, pos)
        pos += 8
        records.append(PatchRecord(pixels, int(label), sid, (x, y)))
    return records


def save_dataset(split: DatasetSplit, outdir: str, *, ratios=(0.72, 0.18, 0.10),
                 threshold: float = SHARPNESS_THRESHOLD, noise_std: float = 0.0) -> None:
    os.makedirs(outdir, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "seed": split.seed,
        "ratios": list(ratios),
        "threshold": threshold,
        "noise_std": noise_std,
        "splits": {},
    }
    for name, records in split.splits().items():
        payload = b"".join(encode_record(r) for r in records)
        path = os.path.join(outdir, _SPLIT_FILES[name])
        imgcore._write_atomic(path, payload)
        per_label = {str(k): 0 for k in range(NUM_LEVELS)}
        for r in records:
            per_label[str(r.label)] += 1
        manifest["splits"][name] = {
            "file": _SPLIT_FILES[name],
            "count": len(records),
            "per_label": per_label,
        }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    imgcore._write_atomic(os.path.join(outdir, "manifest.json"), text.encode("utf-8"))


def load_dataset(directory: str) -> DatasetSplit:
    with open(os.path.join(directory, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported dataset schema: {manifest.get('schema_version')}")
    loaded = {}
    for name, meta in manifest["splits"].items():
        with open(os.path.join(directory, meta["file"]), "rb") as fh:
            loaded[name] = decode_records(fh.read())
        if len(loaded[name]) != meta["count"]:
            raise ValueError(f"{name} split: expected {meta['count']} records, "
                             f"found {len(loaded[name])}")
    return DatasetSplit(train=loaded.get("train", []),
                        validation=loaded.get("validation", []),
                        test=loaded.get("test", []),
                        seed=manifest.get("seed", 0))
