"""Simulador bit a bit e com contagem de ciclos do acelerador do estudante.

Estágios, na ordem do datapath:

    rf_select  -> 128 janelas de 64 taps (stride 8, 28 zeros de cada lado)
    conv_stage -> 128 unidades MAC em paralelo, 4 passadas de 64 ciclos
    pool_stage -> comparador ReLU/max-pool fundido por bit de sinal
    shift      -> conversão de formato conv -> FC
    fc_stage   -> 10 unidades MAC reutilizadas por 256 ciclos
    classify   -> argmax sobre as palavras brutas (menor índice em empates)

As unidades MAC são simuladas ciclo a ciclo; o host pode avançar várias
unidades em um único passo vetorizado, mas a contagem de ciclos é a do
hardware. As conversões de saída usam as operações escalares de
`fixedpoint`, de forma independente do forward de referência em `quantize`.
"""

import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from bearing_pga.core.config import AcceleratorConfig
from bearing_pga.core.exceptions import FixedPointError, RomFormatError, ShapeMismatchError
from bearing_pga.core.log_configurator import IndentedLogger
from bearing_pga.hardware.fixedpoint import (
    Fixed16,
    FixedFormat,
    WideAcc,
    acc_add,
    acc_to_fixed,
    check_accumulator,
    convert,
    fxp_mul,
    quantize_array,
    widen,
)
from bearing_pga.hardware.quantize import (
    CONV_CHANNELS,
    CONV_KERNEL,
    CONV_PADDING,
    CONV_STRIDE,
    CONV_WINDOWS,
    FC_INPUTS,
    NUM_LOGITS,
    RomImage,
    StageFormats,
)
from bearing_pga.processing.signals import Spectrum

logger = IndentedLogger(__name__)

INPUT_LENGTH = CONV_STRIDE * CONV_WINDOWS
SIGN_BIT = 0x8000
MAGNITUDE_MASK = 0x7FFF


# ==============================================================================
# UNIDADES MAC
# ==============================================================================
@dataclass
class MacUnit:
    """Multiplicador + somador de ponto fixo com registrador de resultado."""
    acc: WideAcc = field(default_factory=lambda: WideAcc(0, 0))
    cycles: int = 0

    def reset(self, frac_bits: int) -> None:
        self.acc = WideAcc(0, frac_bits)

    def feed(self, a: Fixed16, b: Fixed16) -> None:
        self.acc = acc_add(self.acc, fxp_mul(a, b))
        self.cycles += 1


def mac_run(unit: MacUnit, taps: Sequence[Fixed16], weights: Sequence[Fixed16]) -> WideAcc:
    """Alimenta a unidade com um par (tap, peso) por ciclo e devolve o acumulador."""
    if len(taps) != len(weights):
        raise ShapeMismatchError(f"mac_run: {len(taps)} taps para {len(weights)} pesos.")
    if not taps:
        raise ShapeMismatchError("mac_run: nenhum termo.")
    unit.reset(taps[0].fmt.frac_bits + weights[0].fmt.frac_bits)
    for a, b in zip(taps, weights):
        unit.feed(a, b)
    return unit.acc


class MacArray:
    """Banco de unidades MAC em lockstep: um produto por unidade a cada ciclo."""

    def __init__(self, lanes: int, frac_bits: int):
        self.lanes = lanes
        self.frac_bits = frac_bits
        self.acc = np.zeros(lanes, dtype=np.int64)
        self.cycles = 0

    def reset(self) -> None:
        self.acc[:] = 0

    def feed(self, a_words: Union[np.ndarray, int], b_words: Union[np.ndarray, int]) -> None:
        a = np.broadcast_to(np.asarray(a_words, dtype=np.int64), (self.lanes,))
        b = np.broadcast_to(np.asarray(b_words, dtype=np.int64), (self.lanes,))
        self.acc += a * b
        check_accumulator(self.acc)
        self.cycles += 1

    def results(self) -> List[WideAcc]:
        return [WideAcc(int(raw), self.frac_bits) for raw in self.acc]


# ==============================================================================
# ESTÁGIOS
# ==============================================================================
@dataclass(frozen=True)
class Window:
    index: int
    taps: np.ndarray  # 64 palavras int16
    fmt: FixedFormat

    def values(self) -> List[Fixed16]:
        return [Fixed16(int(word), self.fmt) for word in self.taps]


def rf_select(words: Union[np.ndarray, Sequence[Fixed16]], fmt: Optional[FixedFormat] = None) -> List[Window]:
    """
    Divide a entrada de 1024 palavras em 128 janelas de 64 taps com stride 8.

    A janela i cobre os índices [8i, 8i+64) da entrada com 28 zeros de cada lado.

    Raises:
        ShapeMismatchError: entrada com comprimento diferente de 1024.
    """
    if fmt is None:
        if isinstance(words, np.ndarray) or len(words) == 0 or not isinstance(words[0], Fixed16):
            raise FixedPointError("rf_select: formato ausente para palavras brutas.")
        fmt = words[0].fmt
        raw = np.array([v.raw for v in words], dtype=np.int16)
    else:
        raw = np.asarray(words, dtype=np.int16)
    if raw.shape != (INPUT_LENGTH,):
        raise ShapeMismatchError(f"rf_select: entrada com {raw.size} palavras; esperado {INPUT_LENGTH}.")
    padded = np.concatenate([np.zeros(CONV_PADDING, np.int16), raw, np.zeros(CONV_PADDING, np.int16)])
    return [
        Window(i, padded[i * CONV_STRIDE:i * CONV_STRIDE + CONV_KERNEL].copy(), fmt)
        for i in range(CONV_WINDOWS)
    ]


def conv_stage(rom: RomImage, windows: Sequence[Window], formats: StageFormats) -> Tuple[np.ndarray, int]:
    """
    Convolução nas 128 unidades MAC: 4 passadas (um kernel por passada) de 64 ciclos.

    Returns:
        (np.ndarray, int): palavras (4, 128) no formato `conv_out` e os ciclos gastos.
    """
    if rom.conv.size != CONV_CHANNELS * CONV_KERNEL:
        raise RomFormatError("conv_stage: ROM de convolução com tamanho inválido.")
    if len(windows) != CONV_WINDOWS:
        raise ShapeMismatchError(f"conv_stage: {len(windows)} janelas; esperado {CONV_WINDOWS}.")
    taps = np.stack([w.taps for w in windows])  # (128, 64)
    acc_frac = formats.conv_acc_frac
    array = MacArray(CONV_WINDOWS, acc_frac)
    out = np.zeros((CONV_CHANNELS, CONV_WINDOWS), dtype=np.int16)
    for k in range(CONV_CHANNELS):
        array.reset()
        kernel = rom.conv_kernel(k)
        for j in range(CONV_KERNEL):
            array.feed(taps[:, j], kernel[j])
        bias = widen(Fixed16(int(rom.conv_bias[k]), formats.conv_bias), acc_frac)
        out[k] = [acc_to_fixed(acc_add(acc, bias), formats.conv_out).raw for acc in array.results()]
    return out, array.cycles


def fused_relu_maxpool(x1: Fixed16, x2: Fixed16) -> Fixed16:
    """
    max(0, x1, x2) pelo bit de sinal: ambos negativos -> zero; sinais
    diferentes -> o operando não negativo; ambos não negativos -> o de maior
    magnitude (comparação dos 15 bits baixos).
    """
    if x1.fmt != x2.fmt:
        raise FixedPointError(f"fused_relu_maxpool: formatos diferentes {x1.fmt} e {x2.fmt}.")
    w1, w2 = x1.raw & 0xFFFF, x2.raw & 0xFFFF
    negative1, negative2 = bool(w1 & SIGN_BIT), bool(w2 & SIGN_BIT)
    if negative1 and negative2:
        return Fixed16(0, x1.fmt)
    if negative1:
        return x2
    if negative2:
        return x1
    return x1 if (w1 & MAGNITUDE_MASK) >= (w2 & MAGNITUDE_MASK) else x2


def fused_relu_maxpool_words(w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """O mesmo comparador sobre arrays de palavras int16."""
    a = np.asarray(w1, dtype=np.int16).astype(np.int64) & 0xFFFF
    b = np.asarray(w2, dtype=np.int16).astype(np.int64) & 0xFFFF
    negative_a = (a & SIGN_BIT) != 0
    negative_b = (b & SIGN_BIT) != 0
    larger = np.where((a & MAGNITUDE_MASK) >= (b & MAGNITUDE_MASK), a, b)
    out = np.where(negative_a & negative_b, 0,
                   np.where(negative_a, b, np.where(negative_b, a, larger)))
    return out.astype(np.uint16).view(np.int16)


def pool_stage(conv_out: np.ndarray, fmt: FixedFormat) -> np.ndarray:
    """ReLU + max-pool 2/2 por canal, achatado canal a canal em 256 palavras."""
    words = np.asarray(conv_out, dtype=np.int16)
    if words.shape != (CONV_CHANNELS, CONV_WINDOWS):
        raise ShapeMismatchError(f"pool_stage: esperado {(CONV_CHANNELS, CONV_WINDOWS)}, recebido {words.shape}.")
    pooled = [
        fused_relu_maxpool(Fixed16(int(words[c, 2 * i]), fmt), Fixed16(int(words[c, 2 * i + 1]), fmt)).raw
        for c in range(CONV_CHANNELS)
        for i in range(CONV_WINDOWS // 2)
    ]
    return np.asarray(pooled, dtype=np.int16)


def shift_stage(x: Fixed16, out_fmt: FixedFormat) -> Fixed16:
    """Conversão pura de formato, ex.: (2,13) -> (7,8)."""
    return convert(x, out_fmt)


def fc_stage(rom: RomImage, activations: np.ndarray, formats: StageFormats) -> Tuple[np.ndarray, int]:
    """
    Camada FC em 10 unidades MAC: a cada ciclo uma ativação é difundida e 10
    pesos são lidos da ROM (256 ciclos).
    """
    words = np.asarray(activations, dtype=np.int16)
    if words.shape != (FC_INPUTS,):
        raise ShapeMismatchError(f"fc_stage: {words.size} ativações; esperado {FC_INPUTS}.")
    acc_frac = formats.fc_acc_frac
    array = MacArray(NUM_LOGITS, acc_frac)
    for i in range(FC_INPUTS):
        array.feed(int(words[i]), rom.fc_group(i))
    out = np.zeros(NUM_LOGITS, dtype=np.int16)
    for j, acc in enumerate(array.results()):
        bias = widen(Fixed16(int(rom.fc_bias[j]), formats.fc_bias), acc_frac)
        out[j] = acc_to_fixed(acc_add(acc, bias), formats.fc_out).raw
    return out, array.cycles


def classify(logits: Sequence[int]) -> int:
    """Argmax em complemento de dois; empates ficam com o menor índice."""
    best_index, best_word = 0, int(logits[0])
    for index in range(1, len(logits)):
        if int(logits[index]) > best_word:
            best_index, best_word = index, int(logits[index])
    return best_index


# ==============================================================================
# RELATÓRIO DE CICLOS
# ==============================================================================
@dataclass(frozen=True)
class CycleReport:
    rf_select: int
    conv: int
    pool: int
    shift: int
    fc: int
    classify: int
    control: int
    clock_hz: float = 100e6

    @property
    def total(self) -> int:
        return self.rf_select + self.conv + self.pool + self.shift + self.fc + self.classify + self.control

    @property
    def latency_us(self) -> float:
        return self.total / self.clock_hz * 1e6

    def stages(self) -> dict:
        values = asdict(self)
        values.pop('clock_hz')
        return values

    def to_text(self) -> str:
        """Bloco plano `chave=valor`, um por linha."""
        lines = [f"{name}={value}" for name, value in self.stages().items()]
        lines += [f"total={self.total}", f"clock_hz={self.clock_hz:g}", f"latency_us={self.latency_us:.4f}"]
        return '\n'.join(lines) + '\n'

    def to_frame(self) -> pd.DataFrame:
        rows = [{'ESTAGIO': name, 'CICLOS': value} for name, value in self.stages().items()]
        rows.append({'ESTAGIO': 'total', 'CICLOS': self.total})
        frame = pd.DataFrame(rows)
        frame['TEMPO_US'] = frame['CICLOS'] / self.clock_hz * 1e6
        return frame


# ==============================================================================
# ACELERADOR
# ==============================================================================
class Accelerator:
    """Instância do simulador (dono único) com contador de ciclos acumulado."""

    def __init__(self, rom: RomImage, formats: StageFormats, config: Optional[AcceleratorConfig] = None):
        self.rom = rom
        self.formats = formats
        self.config = config or AcceleratorConfig()
        self.cycles = 0
        self.inferences = 0

    def run_inference(self, spectrum: Union[Spectrum, np.ndarray]) -> Tuple[int, np.ndarray, CycleReport]:
        """
        Executa o datapath completo para uma amostra.

        Returns:
            (int, np.ndarray, CycleReport): classe, palavras int16 dos 10 logits
            no formato `fc_out` e o relatório de ciclos.
        """
        f = self.formats
        x = spectrum.x if isinstance(spectrum, Spectrum) else np.asarray(spectrum, dtype=np.float64)
        if x.shape != (INPUT_LENGTH,):
            raise ShapeMismatchError(f"Entrada do acelerador com shape {x.shape}; esperado ({INPUT_LENGTH},).")
        words = quantize_array(x, f.input)

        windows = rf_select(words, f.input)
        conv_out, conv_cycles = conv_stage(self.rom, windows, f)
        pooled = pool_stage(conv_out, f.conv_out)
        shifted = np.asarray([shift_stage(Fixed16(int(w), f.conv_out), f.fc_in).raw for w in pooled], dtype=np.int16)
        logits, fc_cycles = fc_stage(self.rom, shifted, f)
        label = classify(logits)

        cfg = self.config
        report = CycleReport(
            rf_select=cfg.rf_select_cycles,
            conv=conv_cycles,
            pool=cfg.pool_cycles,
            shift=cfg.shift_cycles,
            fc=fc_cycles,
            classify=cfg.classify_cycles,
            control=cfg.control_cycles,
            clock_hz=cfg.clock_hz,
        )
        self.cycles += report.total
        self.inferences += 1
        return label, logits, report

    def run_batch(self, inputs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, List[CycleReport]]:
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim != 2:
            raise ShapeMismatchError(f"run_batch: esperado (N, {INPUT_LENGTH}), recebido {x.shape}.")
        labels = np.zeros(len(x), dtype=np.int64)
        logits = np.zeros((len(x), NUM_LOGITS), dtype=np.int16)
        reports = []
        start = time.perf_counter()
        for i, row in enumerate(x):
            labels[i], logits[i], report = self.run_inference(row)
            reports.append(report)
        logger.debug(f"{len(x)} inferências simuladas em {time.perf_counter() - start:.2f} s de host.")
        return labels, logits, reports


def run_inference(
    rom: RomImage,
    formats: StageFormats,
    spectrum: Union[Spectrum, np.ndarray],
    config: Optional[AcceleratorConfig] = None,
) -> Tuple[int, np.ndarray, CycleReport]:
    return Accelerator(rom, formats, config).run_inference(spectrum)
