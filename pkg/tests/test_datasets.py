"""Testes de divisão estratificada, formatos de arquivo e montagem de datasets."""

import math

import numpy as np
import pytest

from bearing_pga.core.config import SEGMENT_LENGTH, SPECTRUM_LENGTH
from bearing_pga.core.exceptions import ArtifactMissingError, DatasetFormatError
from bearing_pga.processing.datasets import (
    SPECTRA_FILE,
    build_dataset,
    load_csv,
    load_dataset,
    make_splits,
    read_spectra,
    save_dataset,
    split_counts,
    synthetic_records,
    write_csv,
    write_spectra,
)
from bearing_pga.processing.profiling import create_dataset_report, create_spectrum_report
from bearing_pga.processing.signals import RawRecord, Spectrum


def _spectra(per_class, num_classes=3, seed=0):
    rng = np.random.default_rng(seed)
    return [Spectrum(rng.normal(size=SPECTRUM_LENGTH), label) for label in range(num_classes) for _ in range(per_class)]


class TestSplits:

    @pytest.mark.parametrize("n, expected", [(4, (2, 1, 1)), (1000, (500, 250, 250)), (7, (3, 2, 2)), (10, (5, 3, 2)), (11, (5, 3, 3))])
    def test_split_counts(self, n, expected):
        assert split_counts(n) == expected

    def test_split_counts_within_one_of_ideal(self):
        for n in range(4, 400):
            counts = split_counts(n)
            assert sum(counts) == n
            assert min(counts) >= 1
            for count, share in zip(counts, (2, 1, 1)):
                assert abs(count - n * share / 4) < 1

    def test_stratified_ratio(self):
        sample_set = make_splits(_spectra(20), np.random.default_rng(0))
        for label in range(3):
            tags = sample_set.split[sample_set.labels == label]
            assert [int(np.sum(tags == name)) for name in ('train', 'val', 'test')] == [10, 5, 5]

    def test_deterministic_under_seed(self):
        samples = _spectra(12)
        first = make_splits(samples, np.random.default_rng(5))
        second = make_splits(samples, np.random.default_rng(5))
        assert np.array_equal(first.x, second.x)
        assert np.array_equal(first.split, second.split)

    def test_class_too_small(self):
        with pytest.raises(DatasetFormatError):
            make_splits(_spectra(3), np.random.default_rng(0))

    def test_subset_and_unknown_split(self, sample_set):
        x, y = sample_set.subset('train')
        assert len(x) == len(y) == 12
        with pytest.raises(DatasetFormatError):
            sample_set.subset('holdout')


# ==============================================================================
# CSV DE REGISTROS
# ==============================================================================
class TestCsv:

    def test_round_trip(self, tmp_path, rng):
        records = [RawRecord(rng.normal(size=50), 0), RawRecord(rng.normal(size=30), 9, 48000)]
        loaded = load_csv(write_csv(records, tmp_path / 'records.csv'))
        assert [r.label for r in loaded] == [0, 9]
        assert loaded[1].sample_rate == 48000
        for original, restored in zip(records, loaded):
            assert np.array_equal(original.samples, restored.samples)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactMissingError):
            load_csv(tmp_path / 'absent.csv')

    @pytest.mark.parametrize("content", [
        "",
        "wrong,header\n0,12000\n1.0\n",
        "label,sample_rate\n0,12000\nabc\n",
        "label,sample_rate\n12,12000\n1.0\n",
        "label,sample_rate\n0,12000\n",
        "label,sample_rate\n0,12000\nnan\n",
        "label,sample_rate\n0\n1.0\n",
    ])
    def test_malformed(self, tmp_path, content):
        path = tmp_path / 'bad.csv'
        path.write_text(content, encoding='utf-8')
        with pytest.raises(DatasetFormatError):
            load_csv(path)


# ==============================================================================
# ARQUIVO BPGS
# ==============================================================================
class TestSpectraFile:

    def test_layout(self, tmp_path, rng):
        x = rng.normal(size=(3, SPECTRUM_LENGTH))
        path = write_spectra(tmp_path / SPECTRA_FILE, x, 10)
        payload = path.read_bytes()
        assert payload[:4] == b'BPGS'
        assert len(payload) == 16 + 3 * SPECTRUM_LENGTH * 4
        loaded, num_classes = read_spectra(path)
        assert num_classes == 10
        assert np.array_equal(loaded, x.astype(np.float32).astype(np.float64))

    def test_corrupted(self, tmp_path, rng):
        path = write_spectra(tmp_path / SPECTRA_FILE, rng.normal(size=(2, SPECTRUM_LENGTH)), 10)
        payload = path.read_bytes()
        path.write_bytes(b'XXXX' + payload[4:])
        with pytest.raises(DatasetFormatError):
            read_spectra(path)
        path.write_bytes(payload[:-4])
        with pytest.raises(DatasetFormatError):
            read_spectra(path)

    def test_dataset_round_trip(self, tmp_path, sample_set):
        save_dataset(sample_set, tmp_path)
        loaded = load_dataset(tmp_path)
        assert np.array_equal(loaded.labels, sample_set.labels)
        assert np.array_equal(loaded.split, sample_set.split)
        assert np.allclose(loaded.x, sample_set.x, atol=1e-5)
        assert loaded.num_classes == sample_set.num_classes


# ==============================================================================
# MONTAGEM
# ==============================================================================
class TestBuildDataset:

    def test_synthetic_records_are_long_enough(self):
        records = synthetic_records(10, 8, 28, seed=0)
        assert [r.label for r in records] == list(range(10))
        assert all(len(r) == SEGMENT_LENGTH + 7 * 28 for r in records)

    def test_counts_and_determinism(self):
        records = synthetic_records(4, 8, 28, seed=1)
        first = build_dataset(records, 8, 28, 0.0, seed=3, num_classes=4)
        second = build_dataset(records, 8, 28, 0.0, seed=3, num_classes=4)
        assert len(first) == 32
        assert np.array_equal(first.x, second.x)
        assert np.sum(first.split == 'train') == 16

    def test_clean_differs_from_noisy(self):
        records = synthetic_records(4, 4, 28, seed=1)
        clean = build_dataset(records, 4, 28, math.inf, seed=3, num_classes=4)
        noisy = build_dataset(records, 4, 28, -4.0, seed=3, num_classes=4)
        assert not np.allclose(clean.x, noisy.x)

    def test_reports(self, sample_set):
        report = create_dataset_report(sample_set)
        assert list(report['QT_TRAIN']) == [4, 4, 4]
        assert list(report['QT_TOTAL']) == [8, 8, 8]
        assert list(report['%_TRAIN']) == [50.0, 50.0, 50.0]
        spectrum_report = create_spectrum_report(sample_set)
        assert list(spectrum_report['SPLIT']) == ['train', 'val', 'test']
        assert list(spectrum_report['QT_AMOSTRAS']) == [12, 6, 6]
