"""Built-in keyword classifier: ReLU MLP over flattened MFCCs.

flatten(frames x coeffs) -> 128 ReLU -> 64 ReLU -> softmax, double precision
throughout so analytic gradients can be checked tightly against finite
differences. Clips are padded/truncated to exactly one second before
feature extraction.
"""

import math
from dataclasses import dataclass

import numpy as np

from noisegate.audio import AudioClip
from noisegate.features import FeatureConfig, mfcc_batch, mfcc_from_array

CLIP_SECONDS = 1.0
HIDDEN_DIMS = (128, 64)

# Training targets are smoothed one-hots: the true class gets 1 - s + s/K and
# the rest s/K. Accuracy is unaffected on separable data, but softmax outputs
# keep a usable dynamic range instead of collapsing to {1, 1e-9, ...}, which
# keeps score-based search and detection dynamics informative.
LABEL_SMOOTHING = 0.15

MODEL_FORMAT_VERSION = "MODELv1"


class ModelFormatError(ValueError):
    """Model file is corrupt or structurally inconsistent."""


class ModelVersionError(ModelFormatError):
    """Model file carries an unknown format version."""


@dataclass
class Model:
    layer_dims: list
    weights: list  # per layer, shape (out, in)
    biases: list  # per layer, shape (out,)
    class_labels: list
    feature_config: FeatureConfig

    def __post_init__(self):
        dims = [int(d) for d in self.layer_dims]
        if len(dims) < 2:
            raise ValueError("layer_dims needs at least input and output dims")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("one weight matrix and bias vector per layer required")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i + 1], dims[i]):
                raise ValueError(f"layer {i} weights {w.shape} != ({dims[i + 1]}, {dims[i]})")
            if b.shape != (dims[i + 1],):
                raise ValueError(f"layer {i} bias {b.shape} != ({dims[i + 1]},)")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i} has non-finite parameters")
        if not self.class_labels:
            raise ValueError("class_labels must be non-empty")
        if len(set(self.class_labels)) != len(self.class_labels):
            raise ValueError("class_labels must be distinct")
        if dims[-1] != len(self.class_labels):
            raise ValueError("output dim must match the number of class labels")
        self.layer_dims = dims

    def label_index(self, label: str) -> int:
        try:
            return self.class_labels.index(label)
        except ValueError:
            raise ValueError(f"unknown label {label!r}; known: {self.class_labels}") from None


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-5
    momentum: float = 0.9
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    train_accuracy: float
    validation_accuracy: float | None


def new_model(class_labels, feature_config: FeatureConfig = FeatureConfig(),
              sample_rate_hz: int = 16000, hidden_dims=HIDDEN_DIMS, seed: int = 0) -> Model:
    """Fresh model with uniform(-r, r) weights, r = sqrt(6/(fan_in+fan_out))."""
    labels = list(class_labels)
    n_target = int(round(CLIP_SECONDS * sample_rate_hz))
    frames = feature_config.frame_count(n_target, sample_rate_hz)
    dims = [frames * feature_config.num_coeffs, *hidden_dims, len(labels)]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        r = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-r, r, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Model(layer_dims=dims, weights=weights, biases=biases,
                 class_labels=labels, feature_config=feature_config)


def pad_or_trim(samples: np.ndarray, sample_rate_hz: int) -> np.ndarray:
    """Zero-pad at the end or truncate so the signal is exactly one second."""
    n_target = int(round(CLIP_SECONDS * sample_rate_hz))
    if samples.shape[-1] >= n_target:
        return samples[..., :n_target]
    pad_widths = [(0, 0)] * (samples.ndim - 1) + [(0, n_target - samples.shape[-1])]
    return np.pad(samples, pad_widths)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_batch(model: Model, x: np.ndarray):
    """Batch forward pass; returns (probs, per-layer activations incl. input)."""
    activations = [x]
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w.T + b
        h = z if i == last else np.maximum(z, 0.0)
        activations.append(h)
    return _softmax(activations[-1]), activations


def forward_batch(model: Model, flat_features: np.ndarray) -> np.ndarray:
    """Class probabilities for a (count, input_dim) batch of flattened features."""
    x = np.asarray(flat_features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.layer_dims[0]:
        raise ValueError(f"expected (n, {model.layer_dims[0]}) features, got {x.shape}")
    return _forward_batch(model, x)[0]


def forward(model: Model, features: np.ndarray) -> np.ndarray:
    """Class probabilities for one feature matrix; sums to 1 within 1e-9."""
    x = np.asarray(features, dtype=np.float64).reshape(-1)
    if x.size != model.layer_dims[0]:
        raise ValueError(
            f"feature matrix flattens to {x.size} values, model expects {model.layer_dims[0]}"
        )
    return _forward_batch(model, x[None, :])[0][0]


def loss_and_gradient(model: Model, features: np.ndarray, label: str):
    """Cross-entropy loss plus exact gradients.

    Returns (loss, [(dW, db) per layer], gradient w.r.t. the input features,
    shaped like `features`).
    """
    target = model.label_index(label)
    feats = np.asarray(features, dtype=np.float64)
    x = feats.reshape(-1)
    if x.size != model.layer_dims[0]:
        raise ValueError(
            f"feature matrix flattens to {x.size} values, model expects {model.layer_dims[0]}"
        )
    probs, activations = _forward_batch(model, x[None, :])
    loss = -math.log(max(probs[0, target], 1e-300))

    delta = probs.copy()
    delta[0, target] -= 1.0
    param_grads = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        h_prev = activations[i]
        param_grads[i] = (delta.T @ h_prev, delta[0].copy())
        if i > 0:
            delta = (delta @ model.weights[i]) * (activations[i] > 0.0)
    input_grad = (delta @ model.weights[0])[0].reshape(feats.shape)
    return loss, param_grads, input_grad


def _features_for_clip(clip: AudioClip, cfg: FeatureConfig) -> np.ndarray:
    samples = pad_or_trim(clip.samples.astype(np.float64), clip.sample_rate_hz)
    return mfcc_from_array(samples, clip.sample_rate_hz, cfg)


def predict(model: Model, clip: AudioClip):
    """(label, probability) for a clip; ties break to the lowest class index."""
    probs = forward(model, _features_for_clip(clip, model.feature_config))
    idx = int(np.argmax(probs))
    return model.class_labels[idx], float(probs[idx])


def predict_samples_batch(model: Model, batch: np.ndarray, sample_rate_hz: int,
                          dtype=np.float64) -> np.ndarray:
    """Class probabilities for a (count, n_samples) batch of raw sample rows."""
    padded = pad_or_trim(np.asarray(batch, dtype=dtype), sample_rate_hz)
    feats = mfcc_batch(padded, sample_rate_hz, model.feature_config, dtype=dtype)
    return forward_batch(model, feats.reshape(feats.shape[0], -1))


def _accuracy(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    probs = _forward_batch(model, x)[0]
    return float(np.mean(np.argmax(probs, axis=1) == y))


def train(dataset, cfg: TrainConfig = TrainConfig(), progress=None) -> Model:
    """Minibatch SGD with momentum on cross-entropy.

    `dataset` is a sequence of (AudioClip, label) pairs. Deterministic for a
    fixed cfg.seed: initialization, the validation split, and every epoch's
    shuffle come from one seeded generator. `progress`, when given, is called
    with an EpochStats after each epoch.
    """
    pairs = list(dataset)
    if not pairs:
        raise ValueError("dataset is empty")
    labels = sorted({label for _, label in pairs})
    if len(labels) < 2:
        raise ValueError(f"need at least 2 classes, got {labels}")

    rate = pairs[0][0].sample_rate_hz
    for clip, _ in pairs:
        if clip.sample_rate_hz != rate:
            raise ValueError("all training clips must share one sample rate")

    feature_config = FeatureConfig()
    model = new_model(labels, feature_config, sample_rate_hz=rate, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    x = np.stack([_features_for_clip(clip, feature_config).reshape(-1) for clip, _ in pairs])
    y = np.array([labels.index(label) for _, label in pairs])

    order = rng.permutation(len(pairs))
    n_val = int(round(cfg.validation_fraction * len(pairs)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if train_idx.size == 0:
        raise ValueError("validation split leaves no training data")

    velocity = [(np.zeros_like(w), np.zeros_like(b))
                for w, b in zip(model.weights, model.biases)]

    n_classes = len(labels)
    smooth_off = LABEL_SMOOTHING / n_classes
    smooth_on = 1.0 - LABEL_SMOOTHING + smooth_off

    for epoch in range(cfg.epochs):
        perm = train_idx[rng.permutation(train_idx.size)]
        epoch_loss = 0.0
        for start in range(0, perm.size, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            xb, yb = x[batch], y[batch]
            probs, activations = _forward_batch(model, xb)
            targets = np.full_like(probs, smooth_off)
            targets[np.arange(batch.size), yb] = smooth_on
            logp = np.log(np.clip(probs, 1e-300, None))
            epoch_loss += float(-(targets * logp).sum())

            delta = probs
            delta -= targets
            delta /= batch.size
            for i in range(len(model.weights) - 1, -1, -1):
                grad_w = delta.T @ activations[i]
                grad_b = delta.sum(axis=0)
                if i > 0:
                    delta = (delta @ model.weights[i]) * (activations[i] > 0.0)
                vw, vb = velocity[i]
                vw *= cfg.momentum
                vw -= cfg.learning_rate * grad_w
                vb *= cfg.momentum
                vb -= cfg.learning_rate * grad_b
                model.weights[i] += vw
                model.biases[i] += vb

        if progress is not None:
            stats = EpochStats(
                epoch=epoch,
                train_loss=epoch_loss / perm.size,
                train_accuracy=_accuracy(model, x[train_idx], y[train_idx]),
                validation_accuracy=(
                    _accuracy(model, x[val_idx], y[val_idx]) if val_idx.size else None
                ),
            )
            progress(stats)

    return model


def save(model: Model, path) -> None:
    """Self-describing text serialization; load() inverts it exactly."""
    for label in model.class_labels:
        if not label or any(ch.isspace() for ch in label):
            raise ValueError(f"label {label!r} is empty or contains whitespace")
    cfg = model.feature_config
    lines = [
        MODEL_FORMAT_VERSION,
        "dims " + " ".join(str(d) for d in model.layer_dims),
        "labels " + " ".join(model.class_labels),
        f"feature {cfg.frame_ms} {cfg.hop_ms} {cfg.fft_size} {cfg.mel_filters} "
        f"{cfg.num_coeffs} {cfg.log_floor!r}",
    ]
    chunks = []
    for w, b in zip(model.weights, model.biases):
        chunks.append(" ".join(f"{v:.17g}" for v in w.reshape(-1)))
        chunks.append(" ".join(f"{v:.17g}" for v in b))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
        fh.write("\n".join(chunks) + "\n")


def load(path) -> Model:
    """Load a model saved by save(); predictions reproduce exactly."""
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines:
        raise ModelFormatError(f"{path}: empty model file")
    if lines[0].strip() != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"{path}: expected version {MODEL_FORMAT_VERSION}, got {lines[0].strip()!r}"
        )
    try:
        header = {line.split(None, 1)[0]: line.split(None, 1)[1] for line in lines[1:4]}
        dims = [int(tok) for tok in header["dims"].split()]
        labels = header["labels"].split()
        f = header["feature"].split()
        feature_config = FeatureConfig(
            frame_ms=int(f[0]), hop_ms=int(f[1]), fft_size=int(f[2]),
            mel_filters=int(f[3]), num_coeffs=int(f[4]), log_floor=float(f[5]),
        )
        values = np.array([float(tok) for tok in " ".join(lines[4:]).split()])
    except (IndexError, KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed header or parameters ({exc})") from exc

    expected = sum(dims[i + 1] * dims[i] + dims[i + 1] for i in range(len(dims) - 1))
    if values.size != expected:
        raise ModelFormatError(f"{path}: expected {expected} parameters, found {values.size}")

    weights, biases, pos = [], [], 0
    for i in range(len(dims) - 1):
        count = dims[i + 1] * dims[i]
        weights.append(values[pos : pos + count].reshape(dims[i + 1], dims[i]).copy())
        pos += count
        biases.append(values[pos : pos + dims[i + 1]].copy())
        pos += dims[i + 1]
    try:
        return Model(layer_dims=dims, weights=weights, biases=biases,
                     class_labels=labels, feature_config=feature_config)
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
