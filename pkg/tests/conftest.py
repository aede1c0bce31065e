"""Fixtures compartilhadas da suíte de testes."""

import numpy as np
import pytest

from bearing_pga.core.config import SPECTRUM_LENGTH
from bearing_pga.hardware.quantize import calibrate, quantize_model
from bearing_pga.models.networks import StudentNet
from bearing_pga.processing.datasets import SampleSet


def make_sample_set(num_classes: int = 3, per_class: int = 8, seed: int = 0) -> SampleSet:
    """Dataset pequeno e separável: cada classe tem um pico em um bin próprio."""
    rng = np.random.default_rng(seed)
    xs, labels, tags = [], [], []
    for label in range(num_classes):
        for index in range(per_class):
            row = rng.normal(0.0, 0.3, SPECTRUM_LENGTH)
            row[100 + 150 * label:110 + 150 * label] += 4.0
            xs.append(row)
            labels.append(label)
            tags.append('train' if index < per_class // 2 else ('val' if index < 3 * per_class // 4 else 'test'))
    return SampleSet(np.stack(xs), np.asarray(labels, dtype=np.int64), np.asarray(tags), num_classes)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def sample_set():
    return make_sample_set()


@pytest.fixture
def spectra(rng):
    """Lote de espectros z-normalizados típicos da entrada da rede."""
    x = np.abs(rng.normal(0.0, 1.0, (6, SPECTRUM_LENGTH)))
    return (x - x.mean(axis=1, keepdims=True)) / x.std(axis=1, keepdims=True)


@pytest.fixture
def student():
    return StudentNet(rng=np.random.default_rng(7))


@pytest.fixture
def calibrated(student, spectra):
    """(estudante, formatos, modelo quantizado) calibrados sobre `spectra`."""
    formats, _ = calibrate(student, spectra)
    return student, formats, quantize_model(student, formats)
