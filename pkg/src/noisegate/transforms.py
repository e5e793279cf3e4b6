"""Input transformations: random-noise injection and the classic defenses.

Every transform is a pure function of (spec, clip); randomness comes only
from the explicit seed, so batch runs stay reproducible.
"""

from dataclasses import dataclass, replace

import numpy as np

from noisegate import _kernels
from noisegate.audio import I16_MAX, I16_MIN, AudioClip

NOISE_KINDS = ("uniform", "gaussian")

SILENCE_FRAME_MS = 20
DEFAULT_SILENCE_THRESHOLD = 328  # ~1% of full scale
DEFAULT_LOWPASS_CUTOFF_HZ = 4000
DEFAULT_LOWPASS_TAPS = 101


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean random noise: uniform on [-I, I] or gaussian with sigma = I."""

    kind: str
    intensity: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}, expected one of {NOISE_KINDS}")
        if not 0 <= int(self.intensity) <= I16_MAX:
            raise ValueError(f"intensity must be in [0, {I16_MAX}], got {self.intensity}")


def add_noise(clip: AudioClip, spec: NoiseSpec) -> AudioClip:
    """Add i.i.d. integer noise to every sample, saturating to 16-bit."""
    if spec.intensity == 0:
        return clip
    rng = np.random.default_rng(spec.seed)
    n = len(clip)
    if spec.kind == "uniform":
        deltas = rng.integers(-spec.intensity, spec.intensity + 1, size=n, dtype=np.int32)
    else:
        deltas = np.round(rng.normal(0.0, float(spec.intensity), size=n)).astype(np.int32)
    out = np.clip(clip.samples.astype(np.int32) + deltas, I16_MIN, I16_MAX).astype(np.int16)
    return AudioClip(samples=out, sample_rate_hz=clip.sample_rate_hz)


def requantize_8bit(clip: AudioClip) -> AudioClip:
    """Zero the low 8 bits of each sample (drop the low byte, two's complement)."""
    out = np.left_shift(np.right_shift(clip.samples, 8), 8).astype(np.int16)
    return AudioClip(samples=out, sample_rate_hz=clip.sample_rate_hz)


def _design_lowpass(cutoff_hz: float, taps: int, sample_rate_hz: int) -> np.ndarray:
    # windowed-sinc FIR, Hamming window, unit DC gain
    if taps % 2 != 1 or taps < 3:
        raise ValueError(f"taps must be odd and >= 3, got {taps}")
    if not 0 < cutoff_hz < sample_rate_hz / 2:
        raise ValueError(
            f"cutoff must be in (0, {sample_rate_hz / 2}) Hz, got {cutoff_hz}"
        )
    half = taps // 2
    n = np.arange(taps) - half
    ratio = 2.0 * cutoff_hz / sample_rate_hz
    h = ratio * np.sinc(ratio * n) * np.hamming(taps)
    return h / h.sum()


def _fir_apply(samples: np.ndarray, taps: np.ndarray, pad_mode: str) -> np.ndarray:
    half = taps.size // 2
    padded = np.pad(samples.astype(np.float64), half, mode=pad_mode)
    return np.convolve(padded, taps, mode="valid")


def _to_i16(values: np.ndarray) -> np.ndarray:
    return np.clip(np.round(values), I16_MIN, I16_MAX).astype(np.int16)


def low_pass(clip: AudioClip, cutoff_hz: float, taps: int) -> AudioClip:
    """Windowed-sinc FIR low-pass with zero-padded edges; length preserved."""
    h = _design_lowpass(cutoff_hz, taps, clip.sample_rate_hz)
    out = _fir_apply(clip.samples, h, pad_mode="constant")
    return AudioClip(samples=_to_i16(out), sample_rate_hz=clip.sample_rate_hz)


def silence_removal(clip: AudioClip, threshold: float) -> AudioClip:
    """Delete 20 ms frames whose mean |amplitude| is below the threshold.

    Never returns an empty clip: if every frame is silent, the single
    loudest frame is kept.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    frame_len = max(1, clip.sample_rate_hz * SILENCE_FRAME_MS // 1000)
    n = len(clip)
    bounds = [(s, min(s + frame_len, n)) for s in range(0, n, frame_len)]
    means = [np.abs(clip.samples[a:b].astype(np.int32)).mean() for a, b in bounds]
    kept = [clip.samples[a:b] for (a, b), m in zip(bounds, means) if m >= threshold]
    if not kept:
        a, b = bounds[int(np.argmax(means))]
        kept = [clip.samples[a:b]]
    return AudioClip(samples=np.concatenate(kept), sample_rate_hz=clip.sample_rate_hz)


def down_up_sample(clip: AudioClip, factor: int) -> AudioClip:
    """Decimate by `factor` (after anti-alias filtering) and linearly interpolate back."""
    if factor < 2:
        raise ValueError(f"factor must be >= 2, got {factor}")
    # edge-replicated padding here so constant signals survive intact
    h = _design_lowpass(clip.sample_rate_hz / (2.0 * factor), DEFAULT_LOWPASS_TAPS,
                        clip.sample_rate_hz)
    smoothed = _fir_apply(clip.samples, h, pad_mode="edge")
    n = len(clip)
    kept_idx = np.arange(0, n, factor)
    rebuilt = np.interp(np.arange(n), kept_idx, smoothed[kept_idx])
    return AudioClip(samples=_to_i16(rebuilt), sample_rate_hz=clip.sample_rate_hz)


def median_smooth(clip: AudioClip, window: int) -> AudioClip:
    """Replace each sample with the median of its window (edges shrink symmetrically)."""
    if window % 2 != 1 or window < 3:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    out = _kernels.sliding_median(clip.samples, window)
    return AudioClip(samples=out, sample_rate_hz=clip.sample_rate_hz)


def quantize(clip: AudioClip, step: int) -> AudioClip:
    """Round each sample to the nearest multiple of `step`, ties away from zero."""
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    x = clip.samples.astype(np.int64)
    magnitude = (np.abs(x) * 2 + step) // (2 * step) * step
    out = np.clip(np.sign(x) * magnitude, I16_MIN, I16_MAX).astype(np.int16)
    return AudioClip(samples=out, sample_rate_hz=clip.sample_rate_hz)


@dataclass(frozen=True)
class TransformSpec:
    """A parameterized transform; `seed` only matters for the noise kinds.

    Text syntax: uniform:50, gaussian:200, requant8, lowpass:4000:101,
    silence:328, downup:2, median:3, quant:256.
    """

    kind: str
    params: tuple = ()
    seed: int = 0

    def __post_init__(self):
        _validate_spec(self)

    @property
    def label(self) -> str:
        if self.params:
            return self.kind + ":" + ":".join(str(p) for p in self.params)
        return self.kind

    def with_seed(self, seed: int) -> "TransformSpec":
        return replace(self, seed=seed)


_ARITY = {
    "uniform": (1, 1),
    "gaussian": (1, 1),
    "requant8": (0, 0),
    "lowpass": (1, 2),
    "silence": (0, 1),
    "downup": (0, 1),
    "median": (0, 1),
    "quant": (1, 1),
}


def _validate_spec(spec: TransformSpec) -> None:
    if spec.kind not in _ARITY:
        raise ValueError(f"unknown transform kind {spec.kind!r}")
    lo, hi = _ARITY[spec.kind]
    if not lo <= len(spec.params) <= hi:
        raise ValueError(f"{spec.kind} takes {lo}..{hi} parameters, got {spec.params!r}")
    if spec.kind in NOISE_KINDS:
        NoiseSpec(kind=spec.kind, intensity=spec.params[0], seed=spec.seed)
    elif spec.kind == "lowpass":
        taps = spec.params[1] if len(spec.params) > 1 else DEFAULT_LOWPASS_TAPS
        if spec.params[0] <= 0:
            raise ValueError(f"lowpass cutoff must be positive, got {spec.params[0]}")
        if taps % 2 != 1 or taps < 3:
            raise ValueError(f"lowpass taps must be odd and >= 3, got {taps}")
    elif spec.kind == "silence":
        if spec.params and spec.params[0] < 0:
            raise ValueError(f"silence threshold must be >= 0, got {spec.params[0]}")
    elif spec.kind == "downup":
        if spec.params and spec.params[0] < 2:
            raise ValueError(f"downup factor must be >= 2, got {spec.params[0]}")
    elif spec.kind == "median":
        if spec.params and (spec.params[0] % 2 != 1 or spec.params[0] < 3):
            raise ValueError(f"median window must be odd and >= 3, got {spec.params[0]}")
    elif spec.kind == "quant":
        if spec.params[0] < 1:
            raise ValueError(f"quant step must be >= 1, got {spec.params[0]}")


def parse_transform(text: str, seed: int = 0) -> TransformSpec:
    """Parse the CLI syntax, e.g. 'gaussian:200' or 'lowpass:4000:101'."""
    pieces = text.strip().split(":")
    kind = pieces[0]
    try:
        params = tuple(int(p) for p in pieces[1:])
    except ValueError as exc:
        raise ValueError(f"bad transform parameters in {text!r}") from exc
    return TransformSpec(kind=kind, params=params, seed=seed)


def apply_transform(spec: TransformSpec, clip: AudioClip) -> AudioClip:
    """Dispatch to the variant operation; deterministic given (spec, clip)."""
    if spec.kind in NOISE_KINDS:
        return add_noise(clip, NoiseSpec(spec.kind, spec.params[0], seed=spec.seed))
    if spec.kind == "requant8":
        return requantize_8bit(clip)
    if spec.kind == "lowpass":
        taps = spec.params[1] if len(spec.params) > 1 else DEFAULT_LOWPASS_TAPS
        return low_pass(clip, spec.params[0], taps)
    if spec.kind == "silence":
        threshold = spec.params[0] if spec.params else DEFAULT_SILENCE_THRESHOLD
        return silence_removal(clip, threshold)
    if spec.kind == "downup":
        factor = spec.params[0] if spec.params else 2
        return down_up_sample(clip, factor)
    if spec.kind == "median":
        window = spec.params[0] if spec.params else 3
        return median_smooth(clip, window)
    if spec.kind == "quant":
        return quantize(clip, spec.params[0])
    raise ValueError(f"unknown transform kind {spec.kind!r}")
