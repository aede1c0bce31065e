"""Testes do pré-processamento de sinais."""

import math

import numpy as np
import pytest

from bearing_pga.core.config import CLEAN_SNR, DEFAULT_PRESETS, SAMPLE_RATE_HZ, SEGMENT_LENGTH, SPECTRUM_LENGTH
from bearing_pga.core.exceptions import SignalError
from bearing_pga.processing.signals import (
    RawRecord,
    Segment,
    add_noise,
    gen_synthetic,
    magnitude_spectrum,
    preprocess,
    radix2_fft,
    rfft_mag,
    sample_windows,
    window_starts,
    zscore,
)


class TestRadix2Fft:

    @pytest.mark.parametrize("n", [1, 2, 8, 64, 2048])
    def test_matches_numpy(self, rng, n):
        x = rng.normal(size=n)
        assert np.allclose(radix2_fft(x), np.fft.fft(x), atol=1e-9)

    @pytest.mark.parametrize("n", [2, 256, 2048])
    def test_parseval(self, rng, n):
        x = rng.normal(size=n)
        spectrum = radix2_fft(x)
        assert np.sum(np.abs(spectrum) ** 2) == pytest.approx(n * np.sum(x ** 2), rel=1e-9)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(SignalError):
            radix2_fft(np.zeros(1000))

    def test_pure_tone_peak(self):
        n = SEGMENT_LENGTH
        t = np.arange(n)
        magnitudes = magnitude_spectrum(np.sin(2 * np.pi * 37 * t / n))
        assert magnitudes.shape == (SPECTRUM_LENGTH,)
        assert int(np.argmax(magnitudes)) == 37
        assert magnitudes[37] == pytest.approx(n / 2)

    def test_rfft_mag_keeps_label(self, rng):
        x = rng.normal(size=SEGMENT_LENGTH)
        spectrum = rfft_mag(Segment(x, 4))
        assert np.allclose(spectrum.x, np.abs(np.fft.fft(x))[:SPECTRUM_LENGTH])
        assert spectrum.label == 4
        assert spectrum.x.shape == (SPECTRUM_LENGTH,)


class TestZscore:

    def test_zero_mean_unit_std(self, rng):
        z = zscore(rng.normal(5.0, 3.0, 4096))
        assert z.mean() == pytest.approx(0.0, abs=1e-12)
        assert z.std() == pytest.approx(1.0)

    def test_constant_input_gives_zeros(self):
        assert np.array_equal(zscore(np.full(16, 3.0)), np.zeros(16))

    def test_empty(self):
        with pytest.raises(SignalError):
            zscore([])


class TestWindows:

    def test_hop_between_starts(self, rng):
        starts = window_starts(10_000, 5, 28, rng)
        assert np.all(np.diff(starts) == 28)

    def test_wraps_to_start(self, rng):
        starts = window_starts(SEGMENT_LENGTH + 10, 4, 7, rng)
        assert np.all((starts >= 0) & (starts <= 10))

    def test_short_record(self, rng):
        record = RawRecord(np.zeros(SEGMENT_LENGTH - 1), 0)
        with pytest.raises(SignalError):
            sample_windows(record, 1, 28, rng)

    def test_segments_are_slices(self, rng):
        record = RawRecord(np.arange(SEGMENT_LENGTH + 200, dtype=float), 2)
        segments = sample_windows(record, 3, 28, rng)
        for segment in segments:
            start = int(segment.x[0])
            assert np.array_equal(segment.x, np.arange(start, start + SEGMENT_LENGTH))
            assert segment.label == 2


class TestNoise:

    def test_clean_is_identity(self, rng):
        segment = Segment(rng.normal(size=SEGMENT_LENGTH), 0)
        assert add_noise(segment, CLEAN_SNR, rng) is segment

    @pytest.mark.parametrize("snr_db", [-4.0, 0.0, 8.0])
    def test_measured_snr(self, snr_db):
        rng = np.random.default_rng(3)
        segment = Segment(zscore(np.random.default_rng(4).normal(size=SEGMENT_LENGTH)), 0)
        measured = []
        for _ in range(50):
            noise = add_noise(segment, snr_db, rng).x - segment.x
            measured.append(10 * math.log10(np.mean(segment.x ** 2) / np.mean(noise ** 2)))
        assert np.mean(measured) == pytest.approx(snr_db, abs=0.25)

    def test_zero_power_segment(self, rng):
        with pytest.raises(SignalError):
            add_noise(Segment(np.zeros(SEGMENT_LENGTH), 0), 0.0, rng)

    @pytest.mark.parametrize("snr_db", [math.nan, -math.inf])
    def test_non_finite_snr_rejected(self, rng, snr_db):
        with pytest.raises(SignalError):
            add_noise(Segment(rng.normal(size=SEGMENT_LENGTH), 0), snr_db, rng)


class TestPipeline:

    def test_preprocess_output(self):
        record = gen_synthetic(3, 0.5, np.random.default_rng(0))
        spectra = preprocess(record, 4, 28, 0.0, np.random.default_rng(1))
        assert len(spectra) == 4
        for spectrum in spectra:
            assert spectrum.x.shape == (SPECTRUM_LENGTH,)
            assert spectrum.label == 3
            assert spectrum.x.mean() == pytest.approx(0.0, abs=1e-9)
            assert spectrum.x.std() == pytest.approx(1.0)

    def test_preprocess_is_deterministic(self):
        record = gen_synthetic(1, 0.5, np.random.default_rng(0))
        first = preprocess(record, 3, 28, 4.0, np.random.default_rng(9))
        second = preprocess(record, 3, 28, 4.0, np.random.default_rng(9))
        assert all(np.array_equal(a.x, b.x) for a, b in zip(first, second))


class TestSynthetic:

    def test_length_and_label(self):
        record = gen_synthetic(7, 0.25, np.random.default_rng(0))
        assert len(record) == int(0.25 * SAMPLE_RATE_HZ)
        assert record.label == 7

    def test_fault_classes_have_more_energy_near_resonance(self):
        healthy = gen_synthetic(0, 1.0, np.random.default_rng(0))
        faulty = gen_synthetic(1, 1.0, np.random.default_rng(0))
        freqs = np.fft.rfftfreq(len(healthy), 1 / SAMPLE_RATE_HZ)
        band = (freqs > DEFAULT_PRESETS[1].resonance_hz - 300) & (freqs < DEFAULT_PRESETS[1].resonance_hz + 300)
        energy = [np.sum(np.abs(np.fft.rfft(r.samples))[band] ** 2) for r in (healthy, faulty)]
        assert energy[1] > 10 * energy[0]

    def test_unknown_class(self, rng):
        with pytest.raises(SignalError):
            gen_synthetic(len(DEFAULT_PRESETS), 0.1, rng)
