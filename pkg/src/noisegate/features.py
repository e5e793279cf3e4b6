"""MFCC features for the classifier and spectrogram images for inspection.

Pipeline: pre-emphasis (0.97) -> 25 ms frames every 10 ms -> Hamming window
-> power spectrum -> 40 triangular mel filters (HTK scale) -> floored log
-> DCT-II, first 13 coefficients.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

try:  # scipy's pocketfft is much faster on float32 batches
    from scipy.fft import irfft as _irfft, rfft as _rfft
except ImportError:
    from numpy.fft import irfft as _irfft, rfft as _rfft

from noisegate.audio import AudioClip

PREEMPHASIS = 0.97


@dataclass(frozen=True)
class FeatureConfig:
    frame_ms: int = 25
    hop_ms: int = 10
    fft_size: int = 512
    mel_filters: int = 40
    num_coeffs: int = 13
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.num_coeffs > self.mel_filters:
            raise ValueError("num_coeffs must not exceed mel_filters")
        if min(self.frame_ms, self.hop_ms, self.fft_size, self.mel_filters,
               self.num_coeffs) <= 0 or self.log_floor <= 0:
            raise ValueError("feature config values must be positive")

    def frame_len(self, sample_rate_hz: int) -> int:
        return sample_rate_hz * self.frame_ms // 1000

    def hop_len(self, sample_rate_hz: int) -> int:
        return sample_rate_hz * self.hop_ms // 1000

    def frame_count(self, n_samples: int, sample_rate_hz: int) -> int:
        flen = self.frame_len(sample_rate_hz)
        if n_samples < flen:
            raise ValueError(f"clip of {n_samples} samples is shorter than one frame ({flen})")
        return (n_samples - flen) // self.hop_len(sample_rate_hz) + 1


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (np.power(10.0, np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def _plan(cfg: FeatureConfig, sample_rate_hz: int):
    """Precomputed window, mel filterbank, filter centers, and DCT matrix."""
    flen = cfg.frame_len(sample_rate_hz)
    if cfg.fft_size < flen:
        raise ValueError(f"fft_size {cfg.fft_size} smaller than frame length {flen}")
    window = np.hamming(flen)

    n_bins = cfg.fft_size // 2 + 1
    bin_hz = np.arange(n_bins) * sample_rate_hz / cfg.fft_size
    mel_pts = np.linspace(0.0, float(hz_to_mel(sample_rate_hz / 2.0)), cfg.mel_filters + 2)
    hz_pts = mel_to_hz(mel_pts)
    fbank = np.zeros((cfg.mel_filters, n_bins))
    for j in range(cfg.mel_filters):
        left, center, right = hz_pts[j], hz_pts[j + 1], hz_pts[j + 2]
        rising = (bin_hz - left) / (center - left)
        falling = (right - bin_hz) / (right - center)
        fbank[j] = np.maximum(0.0, np.minimum(rising, falling))

    m = cfg.mel_filters
    k = np.arange(cfg.num_coeffs)[:, None]
    n = np.arange(m)[None, :]
    dct = math.sqrt(2.0 / m) * np.cos(np.pi * k * (2 * n + 1) / (2.0 * m))
    dct[0] /= math.sqrt(2.0)

    return window, fbank, hz_pts[1:-1], dct


def mel_filter_centers(cfg: FeatureConfig, sample_rate_hz: int) -> np.ndarray:
    """Center frequency (Hz) of each triangular mel filter."""
    return _plan(cfg, sample_rate_hz)[2].copy()


def _preemphasize(x: np.ndarray) -> np.ndarray:
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - PREEMPHASIS * x[:-1]
    return y


def _frame(y: np.ndarray, flen: int, hop: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(y, flen)[::hop]


def mfcc_from_array(samples, sample_rate_hz: int, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """MFCC matrix (frames x num_coeffs) from a raw sample array."""
    x = np.asarray(samples, dtype=np.float64)
    window, fbank, _, dct = _plan(cfg, sample_rate_hz)
    flen = cfg.frame_len(sample_rate_hz)
    if x.size < flen:
        raise ValueError(f"clip of {x.size} samples is shorter than one frame ({flen})")
    frames = _frame(_preemphasize(x), flen, cfg.hop_len(sample_rate_hz)) * window
    spectrum = _rfft(frames, cfg.fft_size)
    power = spectrum.real**2 + spectrum.imag**2
    energies = np.maximum(power @ fbank.T, cfg.log_floor)
    return np.log(energies) @ dct.T


def mfcc(clip: AudioClip, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """MFCC matrix for a clip; every value finite, shape fixed by length alone."""
    return mfcc_from_array(clip.samples, clip.sample_rate_hz, cfg)


def mfcc_batch(batch: np.ndarray, sample_rate_hz: int,
               cfg: FeatureConfig = FeatureConfig(), dtype=np.float64) -> np.ndarray:
    """MFCCs for a (count, n_samples) batch in one vectorized pass.

    dtype=float32 roughly halves the cost; attack inner loops use it, and
    the coefficients agree with the float64 path to single precision.
    """
    x = np.ascontiguousarray(batch, dtype=dtype)
    window, fbank, _, dct = _plan(cfg, sample_rate_hz)
    flen = cfg.frame_len(sample_rate_hz)
    hop = cfg.hop_len(sample_rate_hz)
    # pre-emphasis folded into framing: frame the signal and its one-sample
    # delay (zero before the first sample) instead of materializing y
    shifted = np.zeros((x.shape[0], x.shape[1]), dtype=dtype)
    shifted[:, 1:] = x[:, :-1]
    cur = np.lib.stride_tricks.sliding_window_view(x, flen, axis=1)[:, ::hop]
    prev = np.lib.stride_tricks.sliding_window_view(shifted, flen, axis=1)[:, ::hop]
    w = window.astype(dtype)
    frames = cur * w
    frames -= prev * (dtype(PREEMPHASIS) * w)
    spectrum = _rfft(frames, cfg.fft_size)
    power = spectrum.real**2 + spectrum.imag**2
    energies = np.maximum(power @ fbank.T.astype(dtype), dtype(cfg.log_floor))
    return np.log(energies) @ dct.T.astype(dtype)


def mfcc_with_gradient_cache(samples, sample_rate_hz: int, cfg: FeatureConfig = FeatureConfig()):
    """Forward MFCC plus the intermediates needed to backpropagate to the samples."""
    x = np.asarray(samples, dtype=np.float64)
    window, fbank, _, dct = _plan(cfg, sample_rate_hz)
    flen = cfg.frame_len(sample_rate_hz)
    hop = cfg.hop_len(sample_rate_hz)
    if x.size < flen:
        raise ValueError(f"clip of {x.size} samples is shorter than one frame ({flen})")
    frames = _frame(_preemphasize(x), flen, cfg.hop_len(sample_rate_hz)) * window
    spectrum = _rfft(frames, cfg.fft_size)
    power = spectrum.real**2 + spectrum.imag**2
    raw_energies = power @ fbank.T
    energies = np.maximum(raw_energies, cfg.log_floor)
    coeffs = np.log(energies) @ dct.T
    cache = (x.size, sample_rate_hz, cfg, spectrum, raw_energies, energies)
    return coeffs, cache


def mfcc_backprop(grad_coeffs: np.ndarray, cache) -> np.ndarray:
    """Gradient of a scalar loss w.r.t. the raw samples, given d(loss)/d(coeffs)."""
    n_samples, sample_rate_hz, cfg, spectrum, raw_energies, energies = cache
    window, fbank, _, dct = _plan(cfg, sample_rate_hz)
    flen = cfg.frame_len(sample_rate_hz)
    hop = cfg.hop_len(sample_rate_hz)
    m = cfg.fft_size

    grad_log = grad_coeffs @ dct
    grad_energy = np.where(raw_energies > cfg.log_floor, grad_log / energies, 0.0)
    grad_power = grad_energy @ fbank
    # adjoint of the one-sided power spectrum: double the DC/Nyquist bins so
    # m * irfft reproduces 2*Re(conj(X_k) e^{-2pi i kn/m}) for every k
    c = grad_power * spectrum
    c[:, 0] *= 2.0
    c[:, -1] *= 2.0
    grad_frames = m * _irfft(c, m)[:, :flen]
    grad_frames = grad_frames * window

    grad_pre = np.zeros(n_samples)
    for t in range(grad_frames.shape[0]):
        grad_pre[t * hop : t * hop + flen] += grad_frames[t]

    grad_x = np.empty(n_samples)
    grad_x[-1] = grad_pre[-1]
    grad_x[:-1] = grad_pre[:-1] - PREEMPHASIS * grad_pre[1:]
    return grad_x


def spectrogram_image(clip: AudioClip, fft_size: int, hop: int) -> np.ndarray:
    """Log-magnitude STFT as an 8-bit image: rows are frequency bins, cols frames.

    Normalized to [0, 255] per image; a degenerate (constant) image maps to 0.
    """
    if fft_size <= 0 or hop <= 0:
        raise ValueError("fft_size and hop must be positive")
    x = clip.samples.astype(np.float64)
    if x.size < fft_size:
        raise ValueError(f"clip of {x.size} samples is shorter than fft_size {fft_size}")
    frames = _frame(x, fft_size, hop) * np.hamming(fft_size)
    magnitude = np.abs(_rfft(frames, fft_size))
    log_mag = np.log(magnitude + 1e-10).T  # rows = bins, cols = frames
    lo, hi = log_mag.min(), log_mag.max()
    if hi == lo:
        return np.zeros(log_mag.shape, dtype=np.uint8)
    scaled = (log_mag - lo) / (hi - lo) * 255.0
    return np.round(scaled).astype(np.uint8)


def write_pgm(image: np.ndarray, path) -> None:
    """Write an 8-bit grayscale image as binary PGM (P5)."""
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValueError("image must be a 2-D uint8 array")
    height, width = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(image.tobytes())
