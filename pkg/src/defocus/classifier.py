"""Patch blur-level classification.

The reference backend is a multinomial softmax model over handcrafted
blur-sensitive features, trained with Adam. The features probe how much
band energy a patch loses when it is blurred a little more: Gaussian
attenuation multiplies, so the decay profile across probe widths tracks
the blur already present while the patch's own content largely cancels
out of the ratios. Two narrowband energies at the bundled corpus'
carrier periods extend the usable range to the heaviest blur levels,
where broadband statistics bottom out.

Any object with ``predict(patch) -> int`` in [0, 19] works as a backend
for map estimation; backends that need the window position (the CSV
import backend, truth oracles in tests) expose
``predict_window(patch, x, y)`` instead.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import imgcore
from .dataset import NUM_LEVELS, PATCH

NUM_FEATURES = 18
ENERGY_FLOOR = 1e-13  # float32 pixel quantization noise level for energies

# re-blur probe widths; each contributes a Laplacian- and a
# gradient-energy decay ratio (14 features)
PROBE_SIGMAS = (1.0, 2.0, 3.0, 4.5, 6.5, 9.0, 13.0)

# complex exponentials for the window-aligned carrier bands (periods 32, 16)
_CARRIER_32 = np.exp(-2j * np.pi * np.arange(PATCH) / 32.0)
_CARRIER_16 = np.exp(-2j * np.pi * np.arange(PATCH) / 16.0)


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def _batch_blur(patches: np.ndarray, sigma: float) -> np.ndarray:
    taps = imgcore.gaussian_kernel(sigma)
    r = taps.size // 2
    p = np.pad(patches, ((0, 0), (r, r), (0, 0)), mode="edge")
    out = sliding_window_view(p, taps.size, axis=1) @ taps
    p = np.pad(out, ((0, 0), (0, 0), (r, r)), mode="edge")
    return sliding_window_view(p, taps.size, axis=2) @ taps


def _batch_lap_energy(patches: np.ndarray) -> np.ndarray:
    p = np.pad(patches, ((0, 0), (1, 1), (1, 1)), mode="edge")
    lap = ((p[:, :-2, 1:-1] + p[:, 2:, 1:-1]) + p[:, 1:-1, :-2]) + p[:, 1:-1, 2:] \
        - 4.0 * patches
    return lap.var(axis=(1, 2))


def _batch_grad_energy(patches: np.ndarray) -> np.ndarray:
    gy = np.diff(patches, axis=1)
    gx = np.diff(patches, axis=2)
    return (gy * gy).mean(axis=(1, 2)) + (gx * gx).mean(axis=(1, 2))


def _carrier_energy(patches: np.ndarray, basis: np.ndarray) -> np.ndarray:
    # power of one frequency along each axis after averaging out the other;
    # the probed periods divide the window, so this is phase-invariant
    rows = patches.mean(axis=1)
    cols = patches.mean(axis=2)
    ex = np.abs(rows @ basis / PATCH) ** 2
    ey = np.abs(cols @ basis / PATCH) ** 2
    return ex + ey


def extract_features_batch(patches: np.ndarray) -> np.ndarray:
    """Feature matrix for an (N, 32, 32) stack.

    Layout: 14 re-blur energy-decay ratios (7 probe widths x Laplacian/
    gradient energy), 2 carrier-band energies (periods 32 and 16), then
    log Laplacian energy and log intensity variance. A constant patch
    maps to the zero vector.
    """
    patches = np.asarray(patches, dtype=np.float64)
    lap0 = _batch_lap_energy(patches)
    grad0 = _batch_grad_energy(patches)
    cols = []
    for sigma in PROBE_SIGMAS:
        blurred = _batch_blur(patches, sigma)
        cols.append(np.log((_batch_lap_energy(blurred) + ENERGY_FLOOR)
                           / (lap0 + ENERGY_FLOOR)))
        cols.append(np.log((_batch_grad_energy(blurred) + ENERGY_FLOOR)
                           / (grad0 + ENERGY_FLOOR)))
    cols.append(np.log1p(_carrier_energy(patches, _CARRIER_32) / ENERGY_FLOOR))
    cols.append(np.log1p(_carrier_energy(patches, _CARRIER_16) / ENERGY_FLOOR))
    cols.append(np.log1p(lap0 / ENERGY_FLOOR))
    cols.append(np.log1p(patches.reshape(len(patches), -1).var(axis=1) / ENERGY_FLOOR))
    return np.stack(cols, axis=1)


def extract_features(patch: np.ndarray) -> np.ndarray:
    """18 blur-sensitive features of one 32x32 grayscale patch."""
    patch = imgcore.ensure_gray(patch)
    if patch.shape != (PATCH, PATCH):
        raise ValueError(f"patch must be {PATCH}x{PATCH}")
    return extract_features_batch(patch[None])[0]


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

@dataclass
class ClassifierModel:
    """Feature standardization statistics plus a linear softmax head."""

    feature_mean: np.ndarray
    feature_std: np.ndarray
    weights: np.ndarray  # (20, 18)
    bias: np.ndarray  # (20,)
    epochs_trained: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.feature_mean.shape != (NUM_FEATURES,):
            raise ValueError("feature_mean must have 18 entries")
        if self.feature_std.shape != (NUM_FEATURES,) or np.any(self.feature_std <= 0):
            raise ValueError("feature_std must be 18 positive entries")
        if self.weights.shape != (NUM_LEVELS, NUM_FEATURES):
            raise ValueError("weights must be 20x18")
        if self.bias.shape != (NUM_LEVELS,):
            raise ValueError("bias must have 20 entries")

    def standardize(self, features: np.ndarray) -> np.ndarray:
        return (features - self.feature_mean) / self.feature_std

    def predict(self, patch: np.ndarray) -> int:
        """Blur level of one patch; ties broken toward the sharper class."""
        return int(np.argmax(softmax_forward(self, extract_features(patch))))


def zero_model() -> ClassifierModel:
    return ClassifierModel(np.zeros(NUM_FEATURES), np.ones(NUM_FEATURES),
                           np.zeros((NUM_LEVELS, NUM_FEATURES)), np.zeros(NUM_LEVELS))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_forward(model: ClassifierModel, features: np.ndarray) -> np.ndarray:
    """Class probabilities for one feature vector (numerically stable)."""
    z = model.standardize(np.asarray(features, dtype=np.float64))
    return _softmax(model.weights @ z + model.bias)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    batch: int = 128
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    seed: int = 0
    init_ridge: float = 1e-4  # regularizer of the warm-start covariance


def loss_and_grads(weights, bias, z, labels):
    """Mean cross-entropy -log p[label] over a standardized batch, with
    analytic gradients for the softmax head."""
    logits = z @ weights.T + bias
    probs = _softmax(logits)
    n = len(labels)
    loss = -np.log(probs[np.arange(n), labels]).mean()
    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    return loss, delta.T @ z, delta.sum(axis=0)


class AdamState:
    """First/second moment accumulators for one parameter array."""

    def __init__(self, shape):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, param, grad, cfg: TrainConfig):
        self.t += 1
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * grad * grad
        m_hat = self.m / (1.0 - cfg.beta1 ** self.t)
        v_hat = self.v / (1.0 - cfg.beta2 ** self.t)
        return param - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def _features_and_labels(records):
    patches = np.stack([r.pixels.astype(np.float64) for r in records])
    labels = np.array([r.label for r in records], dtype=np.int64)
    return extract_features_batch(patches), labels


def _gaussian_warm_start(z, labels, ridge):
    """Closed-form class-conditional Gaussian (shared covariance) weights.

    Softmax regression and this generative solution coincide when the
    class conditionals are Gaussian with a common covariance, which the
    standardized features approximate; starting Adam here lets 50 epochs
    refine the boundaries instead of growing weights from zero.
    """
    d = z.shape[1]
    mus = np.stack([z[labels == c].mean(axis=0) for c in range(NUM_LEVELS)])
    cov = np.zeros((d, d))
    for c in range(NUM_LEVELS):
        r = z[labels == c] - mus[c]
        cov += r.T @ r
    cov /= len(z)
    cov += ridge * np.eye(d)
    prec = np.linalg.inv(cov)
    weights = mus @ prec
    bias = -0.5 * np.einsum("cd,dk,ck->c", mus, prec, mus)
    return weights, bias


def train(split, cfg: TrainConfig = TrainConfig()):
    """Fit the softmax head with Adam; deterministic for a fixed seed.

    Returns (model, history) where history holds per-epoch train/val
    loss and accuracy.
    """
    if not split.train:
        raise ValueError("training split is empty")
    if set(r.label for r in split.train) != set(range(NUM_LEVELS)):
        raise ValueError("training split must contain all 20 blur levels")

    feats, labels = _features_and_labels(split.train)
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std == 0.0] = 1.0
    z = (feats - mean) / std

    has_val = bool(split.validation)
    if has_val:
        vfeats, vlabels = _features_and_labels(split.validation)
        vz = (vfeats - mean) / std

    weights, bias = _gaussian_warm_start(z, labels, cfg.init_ridge)
    st_w, st_b = AdamState(weights.shape), AdamState(bias.shape)
    rng = np.random.default_rng(cfg.seed)
    history = {"train_loss": [], "train_acc": [], "val_loss": [], "val_acc": []}

    for _ in range(cfg.epochs):
        order = rng.permutation(len(labels))
        epoch_loss = 0.0
        epoch_hits = 0
        for start in range(0, len(order), cfg.batch):
            idx = order[start : start + cfg.batch]
            zb, yb = z[idx], labels[idx]
            loss, gw, gb = loss_and_grads(weights, bias, zb, yb)
            if not math.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at step {st_w.t + 1}")
            epoch_loss += loss * len(idx)
            pred = np.argmax(zb @ weights.T + bias, axis=1)
            epoch_hits += int((pred == yb).sum())
            weights = st_w.step(weights, gw, cfg)
            bias = st_b.step(bias, gb, cfg)
        history["train_loss"].append(epoch_loss / len(labels))
        history["train_acc"].append(epoch_hits / len(labels))
        if has_val:
            vloss, _, _ = loss_and_grads(weights, bias, vz, vlabels)
            vpred = np.argmax(vz @ weights.T + bias, axis=1)
            history["val_loss"].append(float(vloss))
            history["val_acc"].append(float((vpred == vlabels).mean()))

    model = ClassifierModel(mean, std, weights, bias, epochs_trained=cfg.epochs,
                            metadata={"batch": cfg.batch, "lr": cfg.lr,
                                      "beta1": cfg.beta1, "beta2": cfg.beta2,
                                      "eps": cfg.eps, "seed": cfg.seed,
                                      "init_ridge": cfg.init_ridge,
                                      "train_records": len(labels)})
    return model, history


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    accuracy: float
    per_class: list  # 20 dicts: precision, recall, f1, support
    confusion: np.ndarray  # (20, 20) int, rows = true label

    def as_dict(self):
        return {"accuracy": self.accuracy, "per_class": self.per_class,
                "confusion": self.confusion.tolist()}


def _predict_records(model: ClassifierModel, records):
    feats, labels = _features_and_labels(records)
    z = (feats - model.feature_mean) / model.feature_std
    return np.argmax(z @ model.weights.T + model.bias, axis=1), labels


def evaluate(model: ClassifierModel, records) -> EvalReport:
    """Accuracy, per-class precision/recall/F1/support, confusion matrix.

    Classes with zero support or zero predictions score 0 on the
    undefined ratios.
    """
    if not records:
        raise ValueError("no records to evaluate")
    preds, labels = _predict_records(model, records)
    confusion = np.zeros((NUM_LEVELS, NUM_LEVELS), dtype=np.int64)
    np.add.at(confusion, (labels, preds), 1)
    per_class = []
    for c in range(NUM_LEVELS):
        tp = int(confusion[c, c])
        support = int(confusion[c].sum())
        predicted = int(confusion[:, c].sum())
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append({"precision": precision, "recall": recall,
                          "f1": f1, "support": support})
    accuracy = float(np.trace(confusion) / confusion.sum())
    return EvalReport(accuracy, per_class, confusion)


def within_k_accuracy(model: ClassifierModel, records, k: int = 2) -> float:
    """Share of records predicted within +-k blur levels of the truth."""
    preds, labels = _predict_records(model, records)
    return float((np.abs(preds - labels) <= k).mean())


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_model(model: ClassifierModel, path: str) -> None:
    """Write the model as JSON; float repr round-trips exactly."""
    payload = {
        "format": "defocus-classifier",
        "version": 1,
        "feature_mean": model.feature_mean.tolist(),
        "feature_std": model.feature_std.tolist(),
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "epochs_trained": model.epochs_trained,
        "metadata": model.metadata,
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    imgcore._write_atomic(path, text.encode("utf-8"))


def load_model(path: str) -> ClassifierModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "defocus-classifier":
        raise ValueError(f"{path} is not a classifier model file")
    return ClassifierModel(
        np.array(payload["feature_mean"], dtype=np.float64),
        np.array(payload["feature_std"], dtype=np.float64),
        np.array(payload["weights"], dtype=np.float64),
        np.array(payload["bias"], dtype=np.float64),
        epochs_trained=int(payload.get("epochs_trained", 0)),
        metadata=payload.get("metadata", {}),
    )


# ---------------------------------------------------------------------------
# alternative backends
# ---------------------------------------------------------------------------

class FilePredictor:
    """Predictions imported from a CSV of ``source_id,x,y,label`` rows.

    Serves the labels recorded for one source image, keyed by window
    origin; used to plug an external classifier's output into the map
    estimator.
    """

    def __init__(self, csv_path: str, source_id: str):
        self.source_id = source_id
        self._table = {}
        with open(csv_path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split(",")
                if parts[0] == "source_id":
                    continue  # header
                if len(parts) != 4:
                    raise ValueError(f"{csv_path}:{line_no}: expected 4 fields")
                sid, x, y, label = parts[0], int(parts[1]), int(parts[2]), int(parts[3])
                if not 0 <= label < NUM_LEVELS:
                    raise ValueError(f"{csv_path}:{line_no}: label out of range")
                if sid == source_id:
                    self._table[(x, y)] = label
        if not self._table:
            raise ValueError(f"no predictions for {source_id!r} in {csv_path}")

    def predict_window(self, patch, x, y) -> int:
        try:
            return self._table[(x, y)]
        except KeyError:
            raise ValueError(f"no imported prediction for window at ({x}, {y})") from None


class OraclePredictor:
    """Truth-reading backend for synthetic fixtures.

    Holds the per-pixel ground-truth level raster and answers with the
    majority level inside the queried window (ties to the sharper level).
    """

    def __init__(self, level_map: np.ndarray):
        self.level_map = np.asarray(level_map)

    def predict_window(self, patch, x, y) -> int:
        window = self.level_map[y : y + PATCH, x : x + PATCH]
        counts = np.bincount(window.ravel().astype(int), minlength=NUM_LEVELS)
        return int(np.argmax(counts))
