"""Quantização pós-treino do estudante para o artefato de 16 bits.

Principais Funções:
-------------------
calibrate:
    Forward em float sobre o conjunto de calibração, registrando o mínimo e o
    máximo de cada estágio, e escolha do formato Q(X,Y) de cada estágio com
    `fit_format`. Devolve também o relatório da calibração.

quantize_model:
    Quantiza pesos e vieses nos formatos escolhidos (`QuantizedModel`).

quantized_forward / quantized_forward_batch:
    Forward de referência em inteiros, bit a bit idêntico ao simulador do
    acelerador: acumuladores largos, ReLU/max-pool fundidos, conversão de
    formato entre conv e FC e argmax (menor índice vence empates).

export_model / import_model:
    Formato binário `.bpgq` (magic, versão, tabela de formatos, 2830 palavras
    i16 na ordem da ROM e CRC32).

export_rom / load_rom:
    Arquivos hex de inicialização de memória: `conv_weights.hex` (256),
    `fc_weights.hex` (2560) e `bias.hex` (14), uma palavra por linha.
"""

import struct
import zlib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from bearing_pga.core.exceptions import (
    ArtifactMissingError,
    FixedPointError,
    RomFormatError,
    ShapeMismatchError,
)
from bearing_pga.core.log_configurator import IndentedLogger
from bearing_pga.hardware.fixedpoint import (
    FixedFormat,
    check_accumulator,
    dequantize_array,
    fit_format,
    from_hex,
    quantize_array,
    requantize_array,
    shift_round_array,
    to_hex,
)
from bearing_pga.models.networks import STUDENT_CONV, StudentNet
from bearing_pga.processing.signals import Spectrum

logger = IndentedLogger(__name__)

PathLike = Union[str, Path]

MODEL_MAGIC = b'BPGQ'
MODEL_VERSION = 1

CONV_CHANNELS = STUDENT_CONV['out_channels']
CONV_KERNEL = STUDENT_CONV['kernel']
CONV_STRIDE = STUDENT_CONV['stride']
CONV_PADDING = STUDENT_CONV['padding']
CONV_WINDOWS = 128
POOLED_LENGTH = CONV_WINDOWS // 2
FC_INPUTS = CONV_CHANNELS * POOLED_LENGTH
NUM_LOGITS = 10

CONV_ROM_WORDS = CONV_CHANNELS * CONV_KERNEL
FC_ROM_WORDS = FC_INPUTS * NUM_LOGITS
BIAS_WORDS = CONV_CHANNELS + NUM_LOGITS
TOTAL_WORDS = CONV_ROM_WORDS + FC_ROM_WORDS + BIAS_WORDS

CONV_ROM_FILE = 'conv_weights.hex'
FC_ROM_FILE = 'fc_weights.hex'
BIAS_FILE = 'bias.hex'


# ==============================================================================
# TIPOS
# ==============================================================================
@dataclass(frozen=True)
class StageFormats:
    """Formato de cada estágio do datapath; a ordem dos campos define o id do estágio (0..7)."""
    input: FixedFormat
    conv_weight: FixedFormat
    conv_bias: FixedFormat
    conv_out: FixedFormat
    fc_in: FixedFormat
    fc_weight: FixedFormat
    fc_bias: FixedFormat
    fc_out: FixedFormat

    @property
    def conv_acc_frac(self) -> int:
        return self.input.frac_bits + self.conv_weight.frac_bits

    @property
    def fc_acc_frac(self) -> int:
        return self.fc_in.frac_bits + self.fc_weight.frac_bits

    def as_table(self) -> List[Tuple[int, str, FixedFormat]]:
        return [(stage_id, f.name, getattr(self, f.name)) for stage_id, f in enumerate(fields(self))]

    @classmethod
    def from_table(cls, entries: Sequence[Tuple[int, int, int]]) -> 'StageFormats':
        names = [f.name for f in fields(cls)]
        if [entry[0] for entry in entries] != list(range(len(names))):
            raise RomFormatError(f"Tabela de formatos com ids inesperados: {[e[0] for e in entries]}.")
        try:
            return cls(**{names[stage]: FixedFormat(int_bits, frac_bits) for stage, int_bits, frac_bits in entries})
        except FixedPointError as e:
            raise RomFormatError(f"Formato inválido na tabela: {e}") from e


@dataclass(frozen=True)
class CalibrationOptions:
    margin_bits: int = 0
    shared_fc_format: bool = True


def _frozen_words(values: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    words = np.asarray(values, dtype=np.int16).reshape(shape).copy()
    words.flags.writeable = False
    return words


@dataclass(frozen=True, eq=False)
class QuantizedModel:
    """Estudante quantizado; imutável. A proveniência não participa da igualdade."""
    formats: StageFormats
    conv_weight: np.ndarray  # (4, 64)
    conv_bias: np.ndarray    # (4,)
    fc_weight: np.ndarray    # (256, 10), layout [entrada × saída]
    fc_bias: np.ndarray      # (10,)
    provenance: Dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'conv_weight', _frozen_words(self.conv_weight, (CONV_CHANNELS, CONV_KERNEL)))
        object.__setattr__(self, 'conv_bias', _frozen_words(self.conv_bias, (CONV_CHANNELS,)))
        object.__setattr__(self, 'fc_weight', _frozen_words(self.fc_weight, (FC_INPUTS, NUM_LOGITS)))
        object.__setattr__(self, 'fc_bias', _frozen_words(self.fc_bias, (NUM_LOGITS,)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantizedModel):
            return NotImplemented
        return self.formats == other.formats and all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ('conv_weight', 'conv_bias', 'fc_weight', 'fc_bias')
        )

    @property
    def word_count(self) -> int:
        return TOTAL_WORDS

    @property
    def parameter_bytes(self) -> int:
        return 2 * TOTAL_WORDS

    def rom_words(self) -> np.ndarray:
        """As 2830 palavras na ordem da ROM: conv, FC, vieses conv, vieses FC."""
        return np.concatenate([
            self.conv_weight.reshape(-1),
            self.fc_weight.reshape(-1),
            self.conv_bias,
            self.fc_bias,
        ]).astype(np.int16)


@dataclass(frozen=True, eq=False)
class RomImage:
    """Conteúdo das memórias do acelerador na ordem de leitura do hardware."""
    conv: np.ndarray  # 256 palavras, kernel a kernel
    fc: np.ndarray    # 2560 palavras, 256 grupos de 10 (por entrada)
    bias: np.ndarray  # 4 conv + 10 FC

    def __post_init__(self):
        for name, expected in (('conv', CONV_ROM_WORDS), ('fc', FC_ROM_WORDS), ('bias', BIAS_WORDS)):
            words = np.asarray(getattr(self, name))
            if words.shape != (expected,):
                raise RomFormatError(f"ROM '{name}' com {words.size} palavras; esperado {expected}.")
            object.__setattr__(self, name, _frozen_words(words, (expected,)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, RomImage):
            return NotImplemented
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in ('conv', 'fc', 'bias'))

    @classmethod
    def from_model(cls, qm: QuantizedModel) -> 'RomImage':
        return cls(qm.conv_weight.reshape(-1), qm.fc_weight.reshape(-1), np.concatenate([qm.conv_bias, qm.fc_bias]))

    def conv_kernel(self, k: int) -> np.ndarray:
        return self.conv[k * CONV_KERNEL:(k + 1) * CONV_KERNEL]

    def fc_group(self, i: int) -> np.ndarray:
        return self.fc[i * NUM_LOGITS:(i + 1) * NUM_LOGITS]

    @property
    def conv_bias(self) -> np.ndarray:
        return self.bias[:CONV_CHANNELS]

    @property
    def fc_bias(self) -> np.ndarray:
        return self.bias[CONV_CHANNELS:]


# ==============================================================================
# CALIBRAÇÃO E QUANTIZAÇÃO
# ==============================================================================
def _calibration_array(calibration) -> np.ndarray:
    if isinstance(calibration, np.ndarray):
        x = np.asarray(calibration, dtype=np.float64)
    else:
        rows = [s.x if isinstance(s, Spectrum) else np.asarray(s, dtype=np.float64) for s in calibration]
        x = np.stack(rows) if rows else np.zeros((0, 0))
    if x.ndim != 2 or len(x) == 0:
        raise FixedPointError("calibrate: conjunto de calibração vazio.")
    return x


def calibrate(
    model: StudentNet,
    calibration,
    options: Optional[CalibrationOptions] = None,
) -> Tuple[StageFormats, pd.DataFrame]:
    """
    Escolhe o formato de ponto fixo de cada estágio.

    Args:
        model (StudentNet): Estudante treinado (float).
        calibration: Lista de `Spectrum` ou array (N, 1024).
        options (CalibrationOptions, optional): Margem de bits e compartilhamento
            do formato FC (entrada = saída), compartilhado por padrão.

    Returns:
        (StageFormats, pd.DataFrame): formatos e relatório com as colunas
        ESTAGIO, ID, VALOR_MINIMO, VALOR_MAXIMO, FORMATO.

    Raises:
        FixedPointError: conjunto vazio.
        UnrepresentableRangeError: algum estágio com max|v| >= 2^15.
    """
    options = options or CalibrationOptions()
    x = _calibration_array(calibration)
    stages = model.forward_stages(x)
    observed = {
        'input': x,
        'conv_weight': model.conv.params['weight'],
        'conv_bias': model.conv.params['bias'],
        'conv_out': stages['conv_out'],
        'fc_in': stages['pooled'],
        'fc_weight': model.fc.params['weight'],
        'fc_bias': model.fc.params['bias'],
        'fc_out': stages['logits'],
    }

    margin = options.margin_bits
    chosen = {name: fit_format(values.reshape(-1), margin) for name, values in observed.items()}
    if options.shared_fc_format:
        shared = fit_format(np.concatenate([observed['fc_in'].reshape(-1), observed['fc_out'].reshape(-1)]), margin)
        chosen['fc_in'] = chosen['fc_out'] = shared
    formats = StageFormats(**chosen)

    report = pd.DataFrame([
        {
            'ESTAGIO': name,
            'ID': stage_id,
            'VALOR_MINIMO': float(observed[name].min()),
            'VALOR_MAXIMO': float(observed[name].max()),
            'FORMATO': str(fmt),
        }
        for stage_id, name, fmt in formats.as_table()
    ])
    logger.info(f"Calibração sobre {len(x)} amostras: conv_out {formats.conv_out} -> fc_in {formats.fc_in}.")
    return formats, report


def quantize_model(model: StudentNet, formats: StageFormats, provenance: Optional[Dict[str, str]] = None) -> QuantizedModel:
    conv_weight = model.conv.params['weight'].reshape(CONV_CHANNELS, CONV_KERNEL)
    return QuantizedModel(
        formats=formats,
        conv_weight=quantize_array(conv_weight, formats.conv_weight),
        conv_bias=quantize_array(model.conv.params['bias'], formats.conv_bias),
        fc_weight=quantize_array(model.fc.params['weight'], formats.fc_weight),
        fc_bias=quantize_array(model.fc.params['bias'], formats.fc_bias),
        provenance=dict(provenance or {}),
    )


def quantization_error_report(model: StudentNet, qm: QuantizedModel) -> pd.DataFrame:
    """Erro absoluto de dequantização por tensor, comparado ao limite de meio ULP."""
    f = qm.formats
    pairs = [
        ('conv.weight', model.conv.params['weight'].reshape(CONV_CHANNELS, CONV_KERNEL), qm.conv_weight, f.conv_weight),
        ('conv.bias', model.conv.params['bias'], qm.conv_bias, f.conv_bias),
        ('fc.weight', model.fc.params['weight'], qm.fc_weight, f.fc_weight),
        ('fc.bias', model.fc.params['bias'], qm.fc_bias, f.fc_bias),
    ]
    rows = []
    for name, original, words, fmt in pairs:
        error = np.abs(original - dequantize_array(words, fmt))
        rows.append({
            'TENSOR': name,
            'FORMATO': str(fmt),
            'QT_VALORES': int(original.size),
            'ERRO_MAXIMO': float(error.max()),
            'ERRO_MEDIO': float(error.mean()),
            'MEIO_ULP': fmt.resolution / 2,
            'QT_SATURADOS': int(np.count_nonzero((original > fmt.max_value) | (original < fmt.min_value))),
        })
    return pd.DataFrame(rows)


# ==============================================================================
# FORWARD QUANTIZADO DE REFERÊNCIA
# ==============================================================================
def _input_array(inputs) -> np.ndarray:
    if isinstance(inputs, Spectrum):
        return inputs.x[None, :]
    x = np.asarray(inputs, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


def quantized_forward_batch(qm: QuantizedModel, inputs) -> Tuple[np.ndarray, np.ndarray]:
    """
    Forward inteiro vetorizado.

    Args:
        qm (QuantizedModel): Modelo quantizado.
        inputs: Array (N, 1024) em float (quantizado no formato de entrada).

    Returns:
        (np.ndarray, np.ndarray): palavras int16 dos logits (N, 10) no formato
        `fc_out` e as classes (N,).
    """
    f = qm.formats
    x = _input_array(inputs)
    if x.ndim != 2 or x.shape[1] != CONV_STRIDE * CONV_WINDOWS:
        raise ShapeMismatchError(f"Entrada quantizada deve ter {CONV_STRIDE * CONV_WINDOWS} pontos; recebido {x.shape}.")
    words = quantize_array(x, f.input).astype(np.int64)

    padded = np.pad(words, ((0, 0), (CONV_PADDING, CONV_PADDING)))
    taps = np.arange(CONV_WINDOWS)[:, None] * CONV_STRIDE + np.arange(CONV_KERNEL)[None, :]
    windows = padded[:, taps]  # (N, 128, 64)
    conv_acc = np.einsum('nlk,ck->ncl', windows, qm.conv_weight.astype(np.int64))
    conv_acc += shift_round_array(qm.conv_bias, f.conv_bias.frac_bits - f.conv_acc_frac)[None, :, None]
    check_accumulator(conv_acc)
    conv_out = requantize_array(conv_acc, f.conv_acc_frac, f.conv_out).astype(np.int64)

    pooled = np.maximum(np.maximum(conv_out[:, :, 0::2], conv_out[:, :, 1::2]), 0)
    flat = pooled.reshape(len(x), FC_INPUTS)
    fc_in = requantize_array(flat, f.conv_out.frac_bits, f.fc_in).astype(np.int64)

    fc_acc = fc_in @ qm.fc_weight.astype(np.int64)
    fc_acc += shift_round_array(qm.fc_bias, f.fc_bias.frac_bits - f.fc_acc_frac)[None, :]
    check_accumulator(fc_acc)
    logits = requantize_array(fc_acc, f.fc_acc_frac, f.fc_out)
    return logits, np.argmax(logits, axis=1)


def quantized_forward(qm: QuantizedModel, spectrum) -> Tuple[np.ndarray, int]:
    """Versão de amostra única: (palavras int16 dos 10 logits, classe)."""
    logits, classes = quantized_forward_batch(qm, spectrum)
    return logits[0], int(classes[0])


# ==============================================================================
# FORMATO .bpgq
# ==============================================================================
_HEADER = struct.Struct('<4sH')
_FORMAT_ENTRY = struct.Struct('<BBB')
_CRC = struct.Struct('<I')


def encode_model(qm: QuantizedModel) -> bytes:
    payload = bytearray(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION))
    for stage_id, _, fmt in qm.formats.as_table():
        payload += _FORMAT_ENTRY.pack(stage_id, fmt.int_bits, fmt.frac_bits)
    payload += qm.rom_words().astype('<i2').tobytes()
    payload += _CRC.pack(zlib.crc32(bytes(payload)) & 0xFFFFFFFF)
    return bytes(payload)


def decode_model(payload: bytes) -> QuantizedModel:
    stages = len(fields(StageFormats))
    expected = _HEADER.size + stages * _FORMAT_ENTRY.size + 2 * TOTAL_WORDS + _CRC.size
    if len(payload) != expected:
        raise RomFormatError(f"Arquivo .bpgq com {len(payload)} bytes; esperado {expected}.")
    magic, version = _HEADER.unpack_from(payload, 0)
    if magic != MODEL_MAGIC:
        raise RomFormatError(f"Magic inválido {magic!r}; esperado {MODEL_MAGIC!r}.")
    if version != MODEL_VERSION:
        raise RomFormatError(f"Versão .bpgq não suportada: {version}.")
    (crc,) = _CRC.unpack_from(payload, len(payload) - _CRC.size)
    if crc != zlib.crc32(payload[:-_CRC.size]) & 0xFFFFFFFF:
        raise RomFormatError("CRC32 do arquivo .bpgq não confere.")

    offset = _HEADER.size
    entries = []
    for _ in range(stages):
        entries.append(_FORMAT_ENTRY.unpack_from(payload, offset))
        offset += _FORMAT_ENTRY.size
    formats = StageFormats.from_table(entries)
    words = np.frombuffer(payload, dtype='<i2', count=TOTAL_WORDS, offset=offset).astype(np.int16)
    rom = RomImage(words[:CONV_ROM_WORDS], words[CONV_ROM_WORDS:CONV_ROM_WORDS + FC_ROM_WORDS],
                   words[CONV_ROM_WORDS + FC_ROM_WORDS:])
    return model_from_rom(rom, formats)


def model_from_rom(rom: RomImage, formats: StageFormats) -> QuantizedModel:
    return QuantizedModel(
        formats=formats,
        conv_weight=rom.conv.reshape(CONV_CHANNELS, CONV_KERNEL),
        conv_bias=rom.conv_bias,
        fc_weight=rom.fc.reshape(FC_INPUTS, NUM_LOGITS),
        fc_bias=rom.fc_bias,
    )


def export_model(qm: QuantizedModel, path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(encode_model(qm))
    return target


def import_model(path: PathLike) -> QuantizedModel:
    source = Path(path)
    if not source.is_file():
        raise ArtifactMissingError(f"Modelo quantizado não encontrado em '{source}'.")
    return decode_model(source.read_bytes())


# ==============================================================================
# ARQUIVOS HEX DA ROM
# ==============================================================================
def _write_hex(path: Path, words: np.ndarray) -> None:
    with open(path, 'w', encoding='ascii', newline='\n') as f:
        for word in words:
            f.write(f"{to_hex(int(word))}\n")


def _read_hex(path: Path, expected: int) -> np.ndarray:
    if not path.is_file():
        raise ArtifactMissingError(f"Arquivo de ROM não encontrado em '{path}'.")
    words = []
    with open(path, 'r', encoding='ascii') as f:
        for number, line in enumerate(f, start=1):
            text = line.strip()
            if not text:
                continue
            if len(text) != 4:
                raise RomFormatError(f"{path}:{number}: palavra '{text}' não tem 4 dígitos hexadecimais.")
            try:
                words.append(from_hex(text))
            except (ValueError, FixedPointError) as e:
                raise RomFormatError(f"{path}:{number}: palavra inválida '{text}'.") from e
    if len(words) != expected:
        raise RomFormatError(f"'{path}' com {len(words)} palavras; esperado {expected}.")
    return np.asarray(words, dtype=np.int16)


def export_rom(qm: QuantizedModel, directory: PathLike) -> RomImage:
    """Grava as três memórias hex e devolve a imagem correspondente."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    rom = RomImage.from_model(qm)
    _write_hex(root / CONV_ROM_FILE, rom.conv)
    _write_hex(root / FC_ROM_FILE, rom.fc)
    _write_hex(root / BIAS_FILE, rom.bias)
    logger.info(f"ROM exportada em '{root}' ({CONV_ROM_WORDS}/{FC_ROM_WORDS}/{BIAS_WORDS} palavras).")
    return rom


def load_rom(directory: PathLike) -> RomImage:
    root = Path(directory)
    return RomImage(
        _read_hex(root / CONV_ROM_FILE, CONV_ROM_WORDS),
        _read_hex(root / FC_ROM_FILE, FC_ROM_WORDS),
        _read_hex(root / BIAS_FILE, BIAS_WORDS),
    )
