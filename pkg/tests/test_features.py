import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisegate.audio import AudioClip
from noisegate.features import (
    FeatureConfig,
    hz_to_mel,
    mel_filter_centers,
    mel_to_hz,
    mfcc,
    mfcc_backprop,
    mfcc_batch,
    mfcc_from_array,
    mfcc_with_gradient_cache,
    spectrogram_image,
    write_pgm,
    _plan,
)

RATE = 16000


def tone(freq, seconds=1.0, amplitude=10000):
    t = np.arange(int(seconds * RATE)) / RATE
    return AudioClip(
        samples=np.round(amplitude * np.sin(2 * np.pi * freq * t)).astype(np.int16),
        sample_rate_hz=RATE,
    )


class TestMfcc:
    def test_one_second_shape(self):
        m = mfcc(tone(440))
        assert m.shape == (98, 13)  # (16000 - 400) // 160 + 1 frames

    def test_all_zero_clip_finite_and_uniform(self):
        clip = AudioClip(samples=np.zeros(RATE, dtype=np.int16), sample_rate_hz=RATE)
        m = mfcc(clip)
        assert np.isfinite(m).all()
        assert np.allclose(m, m[0])  # every frame identical

    def test_tone_hits_nearest_mel_filter(self):
        cfg = FeatureConfig()
        window, fbank, _, _ = _plan(cfg, RATE)
        clip = tone(1000)
        x = clip.samples.astype(np.float64)
        y = np.empty_like(x)
        y[0] = x[0]
        y[1:] = x[1:] - 0.97 * x[:-1]
        frames = np.lib.stride_tricks.sliding_window_view(y, 400)[::160] * window
        spectrum = np.fft.rfft(frames, cfg.fft_size)
        energies = ((spectrum.real**2 + spectrum.imag**2) @ fbank.T).mean(axis=0)
        centers = mel_filter_centers(cfg, RATE)
        expected = int(np.argmin(np.abs(centers - 1000.0)))
        assert int(np.argmax(energies)) == expected

    def test_mel_scale_formula(self):
        assert hz_to_mel(700.0) == pytest.approx(2595.0 * np.log10(2.0))
        assert mel_to_hz(hz_to_mel(1234.5)) == pytest.approx(1234.5)

    def test_shape_depends_only_on_length(self):
        a = mfcc(tone(250, 0.5))
        b = mfcc(tone(3750, 0.5, amplitude=31000))
        assert a.shape == b.shape

    def test_doubling_amplitude_moves_only_c0(self):
        clip = tone(800, 0.3, amplitude=9000)
        doubled = AudioClip(samples=(clip.samples * 2).astype(np.int16),
                            sample_rate_hz=RATE)
        a, b = mfcc(clip), mfcc(doubled)
        assert not np.allclose(a[:, 0], b[:, 0])
        rel = np.abs(b[:, 1:] - a[:, 1:]) / np.maximum(np.abs(a[:, 1:]), 1e-12)
        assert rel.max() < 1e-6

    def test_too_short_clip_rejected(self):
        clip = AudioClip(samples=np.ones(399, dtype=np.int16), sample_rate_hz=RATE)
        with pytest.raises(ValueError):
            mfcc(clip)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15, deadline=None)
    def test_no_nan_inf_on_random_input(self, seed):
        rng = np.random.default_rng(seed)
        clip = AudioClip(samples=rng.integers(-32768, 32768, 500, dtype=np.int16),
                         sample_rate_hz=RATE)
        assert np.isfinite(mfcc(clip)).all()

    def test_batch_matches_single(self):
        rng = np.random.default_rng(0)
        batch = rng.integers(-20000, 20000, (3, 4000), dtype=np.int16)
        singles = np.stack([
            mfcc(AudioClip(samples=row, sample_rate_hz=RATE)) for row in batch
        ])
        assert np.allclose(mfcc_batch(batch, RATE), singles, rtol=1e-10, atol=1e-9)
        approx32 = mfcc_batch(batch, RATE, dtype=np.float32)
        assert np.allclose(approx32, singles, rtol=1e-3, atol=1e-2)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FeatureConfig(num_coeffs=50)
        with pytest.raises(ValueError):
            FeatureConfig(fft_size=128)  # smaller than the 400-sample frame
            mfcc(tone(100, 0.1), FeatureConfig(fft_size=128))


class TestFeatureGradient:
    def test_backprop_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        x = rng.normal(0.0, 400.0, 900)
        feats, cache = mfcc_with_gradient_cache(x, RATE)
        upstream = rng.normal(size=feats.shape)
        grad = mfcc_backprop(upstream, cache)
        eps = 1e-3
        for i in rng.integers(0, x.size, 10):
            xp, xm = x.copy(), x.copy()
            xp[i] += eps
            xm[i] -= eps
            fd = ((mfcc_from_array(xp, RATE) * upstream).sum()
                  - (mfcc_from_array(xm, RATE) * upstream).sum()) / (2 * eps)
            assert grad[i] == pytest.approx(fd, rel=1e-4, abs=1e-7)


class TestSpectrogram:
    def test_silence_is_all_zero(self):
        clip = AudioClip(samples=np.zeros(4096, dtype=np.int16), sample_rate_hz=RATE)
        image = spectrogram_image(clip, 512, 160)
        assert image.dtype == np.uint8
        assert image.max() == 0

    def test_tone_dominant_row(self):
        clip = tone(2000)
        image = spectrogram_image(clip, 512, 160)
        expected_row = round(2000 * 512 / RATE)
        assert abs(int(np.argmax(image.mean(axis=1))) - expected_row) <= 1

    def test_width_is_frame_count(self):
        clip = tone(300, 0.5)
        image = spectrogram_image(clip, 512, 160)
        assert image.shape == (257, (len(clip) - 512) // 160 + 1)

    def test_short_clip_rejected(self):
        clip = AudioClip(samples=np.ones(100, dtype=np.int16), sample_rate_hz=RATE)
        with pytest.raises(ValueError):
            spectrogram_image(clip, 512, 160)

    def test_pgm_output(self, tmp_path):
        image = spectrogram_image(tone(1000, 0.2), 256, 128)
        path = tmp_path / "spec.pgm"
        write_pgm(image, path)
        raw = path.read_bytes()
        header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode()
        assert raw.startswith(header)
        assert len(raw) == len(header) + image.size
