"""Módulo de datasets: divisão estratificada, formatos de arquivo e montagem.

Principais Funções:
-------------------
make_splits:
    Divisão estratificada 2:1:1 (treino/validação/teste), determinística sob
    semente fixa.

load_csv / write_csv:
    Formato CSV de registros brutos: cabeçalho `label,sample_rate`, linha
    `<rótulo>,<taxa>` por registro, uma amostra por linha e registros
    separados por linha em branco.

write_spectra / read_spectra:
    Arquivo binário BPGS de espectros (float32 little-endian, 1024 por amostra,
    cabeçalho de 16 bytes).

build_dataset / save_dataset / load_dataset:
    Montagem do `SampleSet` a partir de registros e sua persistência em disco
    (BPGS + `samples.csv`).
"""

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from bearing_pga.core.config import SAMPLE_RATE_HZ, SEGMENT_LENGTH, SPECTRUM_LENGTH
from bearing_pga.core.exceptions import ArtifactMissingError, DatasetFormatError
from bearing_pga.core.log_configurator import IndentedLogger
from bearing_pga.processing.signals import RawRecord, Spectrum, gen_synthetic, preprocess

logger = IndentedLogger(__name__)

PathLike = Union[str, Path]

SPLITS = ('train', 'val', 'test')
SPLIT_RATIO = (2, 1, 1)

CSV_HEADER = 'label,sample_rate'

SPECTRA_MAGIC = b'BPGS'
SPECTRA_VERSION = 1
_SPECTRA_HEADER = struct.Struct('<4sHHII')  # magic, versão, reservado, contagem, classes

SPECTRA_FILE = 'spectra.bpgs'
SAMPLES_FILE = 'samples.csv'


@dataclass(frozen=True)
class SampleSet:
    """Amostras rotuladas no domínio da frequência com a marcação de divisão."""
    x: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.x.ndim != 2 or self.x.shape[1] != SPECTRUM_LENGTH:
            raise DatasetFormatError(f"SampleSet.x deve ter shape (N, {SPECTRUM_LENGTH}), recebido {self.x.shape}.")
        if not (len(self.labels) == len(self.split) == len(self.x)):
            raise DatasetFormatError("SampleSet: tamanhos de x, labels e split diferentes.")
        unknown = set(np.unique(self.split)) - set(SPLITS)
        if unknown:
            raise DatasetFormatError(f"SampleSet: marcações de divisão desconhecidas {sorted(unknown)}.")

    def __len__(self) -> int:
        return len(self.x)

    def subset(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        """(X, y) da divisão `name`."""
        if name not in SPLITS:
            raise DatasetFormatError(f"Divisão desconhecida '{name}'.")
        mask = self.split == name
        return self.x[mask], self.labels[mask]

    def spectra(self, name: str) -> List[Spectrum]:
        x, y = self.subset(name)
        return [Spectrum(row, int(label)) for row, label in zip(x, y)]


# ==============================================================================
# DIVISÃO ESTRATIFICADA
# ==============================================================================
def split_counts(n: int) -> Tuple[int, int, int]:
    """Contagens 2:1:1 pelo maior resto: cada divisão fica a menos de 1 do ideal.

    As sobras do arredondamento para baixo vão para as divisões de maior parte
    fracionária; empates favorecem a ordem treino, validação, teste.
    """
    total = sum(SPLIT_RATIO)
    counts = [n * share // total for share in SPLIT_RATIO]
    remainders = [n * share % total for share in SPLIT_RATIO]
    leftover = n - sum(counts)
    for index in sorted(range(len(SPLIT_RATIO)), key=lambda i: -remainders[i])[:leftover]:
        counts[index] += 1
    return tuple(counts)


def make_splits(samples: Sequence[Spectrum], rng: np.random.Generator, num_classes: Optional[int] = None) -> SampleSet:
    """Divide as amostras de cada classe em treino/validação/teste na razão 2:1:1.

    Args:
        samples (Sequence[Spectrum]): Espectros de todas as classes.
        rng (np.random.Generator): Gerador semeado para as permutações.
        num_classes (int, optional): Número de classes; padrão max(rótulo)+1.

    Returns:
        SampleSet: Amostras ordenadas por classe e, dentro dela, por divisão.

    Raises:
        DatasetFormatError: alguma classe com menos de 4 amostras.
    """
    if not samples:
        raise DatasetFormatError("make_splits: nenhuma amostra.")
    by_class: Dict[int, List[Spectrum]] = {}
    for spectrum in samples:
        by_class.setdefault(spectrum.label, []).append(spectrum)

    xs, labels, tags = [], [], []
    for label in sorted(by_class):
        members = by_class[label]
        if len(members) < sum(SPLIT_RATIO):
            raise DatasetFormatError(f"Classe {label} com {len(members)} amostras; mínimo {sum(SPLIT_RATIO)}.")
        order = rng.permutation(len(members))
        for tag, count, start in _split_slices(len(members)):
            for index in order[start:start + count]:
                xs.append(members[index].x)
                labels.append(label)
                tags.append(tag)

    classes = num_classes if num_classes is not None else max(by_class) + 1
    return SampleSet(np.stack(xs), np.asarray(labels, dtype=np.int64), np.asarray(tags), classes)


def _split_slices(n: int):
    start = 0
    for tag, count in zip(SPLITS, split_counts(n)):
        yield tag, count, start
        start += count


# ==============================================================================
# CSV DE REGISTROS BRUTOS
# ==============================================================================
def write_csv(records: Sequence[RawRecord], path: PathLike) -> Path:
    """Grava registros no formato CSV de blocos (inverso de `load_csv`)."""
    csv_path = Path(path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(CSV_HEADER + '\n')
        for position, record in enumerate(records):
            if position:
                f.write('\n')
            f.write(f"{record.label},{record.sample_rate}\n")
            f.writelines(f"{value!r}\n" for value in record.samples.tolist())
    return csv_path


def load_csv(path: PathLike, num_classes: int = 10) -> List[RawRecord]:
    """Lê registros do formato CSV de blocos.

    Raises:
        ArtifactMissingError: arquivo inexistente.
        DatasetFormatError: arquivo vazio, cabeçalho ausente, linhas malformadas
            ou rótulo fora de 0..num_classes-1.
    """
    csv_path = Path(path)
    if not csv_path.is_file():
        raise ArtifactMissingError(f"CSV de registros não encontrado em '{path}'.")
    with open(csv_path, 'r', encoding='utf-8') as f:
        lines = [line.strip() for line in f]

    if not any(lines):
        raise DatasetFormatError(f"'{path}': arquivo vazio.")
    if lines[0] != CSV_HEADER:
        raise DatasetFormatError(f"'{path}': cabeçalho esperado '{CSV_HEADER}', recebido '{lines[0]}'.")

    blocks: List[List[Tuple[int, str]]] = [[]]
    for number, line in enumerate(lines[1:], start=2):
        if line:
            blocks[-1].append((number, line))
        elif blocks[-1]:
            blocks.append([])
    blocks = [block for block in blocks if block]
    if not blocks:
        raise DatasetFormatError(f"'{path}': nenhum registro.")

    records = []
    for block in blocks:
        number, meta = block[0]
        label_text, separator, rate_text = meta.partition(',')
        try:
            if not separator:
                raise ValueError("esperado '<rótulo>,<taxa>'")
            label, sample_rate = int(label_text), int(rate_text)
            values = np.array([float(text) for _, text in block[1:]], dtype=np.float64)
        except ValueError as e:
            raise DatasetFormatError(f"'{path}':{number}: registro malformado ({e}).") from e
        if not 0 <= label < num_classes:
            raise DatasetFormatError(f"'{path}':{number}: rótulo desconhecido {label}.")
        if values.size == 0:
            raise DatasetFormatError(f"'{path}':{number}: registro sem amostras.")
        if not np.all(np.isfinite(values)):
            raise DatasetFormatError(f"'{path}':{number}: amostras não finitas.")
        records.append(RawRecord(values, label, sample_rate))

    logger.info(f"{len(records)} registros lidos de '{csv_path.name}'.")
    return records


# ==============================================================================
# ARQUIVO BINÁRIO DE ESPECTROS (BPGS)
# ==============================================================================
def write_spectra(path: PathLike, x: np.ndarray, num_classes: int) -> Path:
    values = np.asarray(x, dtype='<f4')
    if values.ndim != 2 or values.shape[1] != SPECTRUM_LENGTH:
        raise DatasetFormatError(f"write_spectra: shape esperado (N, {SPECTRUM_LENGTH}), recebido {values.shape}.")
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, 'wb') as f:
        f.write(_SPECTRA_HEADER.pack(SPECTRA_MAGIC, SPECTRA_VERSION, 0, values.shape[0], num_classes))
        f.write(values.tobytes(order='C'))
    return out


def read_spectra(path: PathLike) -> Tuple[np.ndarray, int]:
    """Lê um arquivo BPGS; devolve (X float64 de shape (N, 1024), número de classes)."""
    in_path = Path(path)
    if not in_path.is_file():
        raise ArtifactMissingError(f"Arquivo de espectros não encontrado em '{path}'.")
    payload = in_path.read_bytes()
    if len(payload) < _SPECTRA_HEADER.size:
        raise DatasetFormatError(f"'{path}': cabeçalho truncado.")
    magic, version, _, count, num_classes = _SPECTRA_HEADER.unpack_from(payload)
    if magic != SPECTRA_MAGIC:
        raise DatasetFormatError(f"'{path}': magic inválido {magic!r}.")
    if version != SPECTRA_VERSION:
        raise DatasetFormatError(f"'{path}': versão {version} não suportada.")
    expected = _SPECTRA_HEADER.size + count * SPECTRUM_LENGTH * 4
    if len(payload) != expected:
        raise DatasetFormatError(f"'{path}': tamanho {len(payload)} != esperado {expected}.")
    values = np.frombuffer(payload, dtype='<f4', offset=_SPECTRA_HEADER.size)
    return values.reshape(count, SPECTRUM_LENGTH).astype(np.float64), num_classes


# ==============================================================================
# MONTAGEM E PERSISTÊNCIA
# ==============================================================================
def build_dataset(
    records: Sequence[RawRecord],
    count: int,
    hop: int,
    snr_db: float,
    seed: int,
    num_classes: int,
) -> SampleSet:
    """Pré-processa cada registro com um gerador filho próprio e divide 2:1:1.

    Os geradores são derivados por `SeedSequence.spawn`, então o resultado
    depende apenas de (registros, semente) e não da ordem de execução.
    """
    sequence = np.random.SeedSequence(seed)
    children = sequence.spawn(len(records) + 1)
    spectra: List[Spectrum] = []
    snr_text = 'limpo' if math.isinf(snr_db) else f"{snr_db:+g} dB"
    with logger.stage(f"Pré-processando {len(records)} registros (SNR {snr_text})."):
        for record, child in zip(records, children[:-1]):
            spectra.extend(preprocess(record, count, hop, snr_db, np.random.default_rng(child)))
        logger.info(f"{len(spectra)} espectros gerados.")
    return make_splits(spectra, np.random.default_rng(children[-1]), num_classes)


def save_dataset(sample_set: SampleSet, directory: PathLike) -> Tuple[Path, Path]:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    spectra_path = write_spectra(root / SPECTRA_FILE, sample_set.x, sample_set.num_classes)
    samples_path = root / SAMPLES_FILE
    pd.DataFrame({
        'INDEX': np.arange(len(sample_set)),
        'LABEL': sample_set.labels,
        'SPLIT': sample_set.split,
    }).to_csv(samples_path, index=False, lineterminator='\n')
    return spectra_path, samples_path


def load_dataset(directory: PathLike) -> SampleSet:
    """Recarrega um dataset salvo por `save_dataset` (valores em precisão float32)."""
    root = Path(directory)
    x, num_classes = read_spectra(root / SPECTRA_FILE)
    samples_path = root / SAMPLES_FILE
    if not samples_path.is_file():
        raise ArtifactMissingError(f"Metadados de amostras não encontrados em '{samples_path}'.")
    meta = pd.read_csv(samples_path)
    if list(meta.columns) != ['INDEX', 'LABEL', 'SPLIT'] or len(meta) != len(x):
        raise DatasetFormatError(f"'{samples_path}': colunas ou contagem inconsistentes com '{SPECTRA_FILE}'.")
    return SampleSet(
        x,
        meta['LABEL'].to_numpy(dtype=np.int64),
        meta['SPLIT'].to_numpy(dtype=str),
        num_classes,
    )


def synthetic_records(
    num_classes: int,
    samples_per_class: int,
    hop: int,
    seed: int,
    presets=None,
    sample_rate: int = SAMPLE_RATE_HZ,
) -> List[RawRecord]:
    """Um registro sintético por classe, longo o bastante para todas as janelas."""
    length = SEGMENT_LENGTH + (samples_per_class - 1) * hop
    duration = length / sample_rate
    children = np.random.SeedSequence([seed, 0x5EED]).spawn(num_classes)
    return [
        gen_synthetic(class_id, duration, np.random.default_rng(child), presets, sample_rate)
        for class_id, child in enumerate(children)
    ]
