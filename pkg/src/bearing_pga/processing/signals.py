"""Módulo de processamento de sinais de vibração.

Transforma registros brutos de vibração (12 kHz) nas entradas de 1024 pontos
no domínio da frequência consumidas pela rede.

Principais Funções:
-------------------
sample_windows:
    Amostra janelas de 2048 pontos a partir de uma âncora aleatória, avançando
    por um passo fixo (28 por padrão) e voltando ao início se o fim for atingido.

add_noise:
    Injeta ruído gaussiano de média zero com SNR controlada
    (SNR = 10·log10(Ps/Pn), potências médias).

zscore:
    Padronização (x - μ)/σ com piso de σ em 1e-12.

radix2_fft / rfft_mag:
    FFT radix-2 iterativa (DIT) e o espectro de magnitudes dos bins 0..N/2-1.

preprocess:
    Pipeline completo por segmento:
    z-score -> ruído -> z-score -> |FFT| -> z-score.

gen_synthetic:
    Gerador de sinais de rolamento (trem de impactos amortecidos + harmônicos),
    substituto de bancada para dados reais.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from bearing_pga.core.config import (
    DEFAULT_PRESETS,
    SAMPLE_RATE_HZ,
    SEGMENT_LENGTH,
    SPECTRUM_LENGTH,
    SyntheticPreset,
)
from bearing_pga.core.decorators import validate_array
from bearing_pga.core.exceptions import SignalError
from bearing_pga.core.log_configurator import IndentedLogger

logger = IndentedLogger(__name__)

ZSCORE_SIGMA_FLOOR = 1e-12


# ==============================================================================
# TIPOS
# ==============================================================================
@dataclass(frozen=True)
class RawRecord:
    samples: np.ndarray
    label: int
    sample_rate: int = SAMPLE_RATE_HZ

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise SignalError("RawRecord.samples deve ser unidimensional.")
        if self.label < 0:
            raise SignalError(f"Rótulo inválido: {self.label}.")
        object.__setattr__(self, 'samples', samples)

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class Segment:
    x: np.ndarray
    label: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.shape != (SEGMENT_LENGTH,):
            raise SignalError(f"Segmento deve ter {SEGMENT_LENGTH} pontos, recebido {x.shape}.")
        object.__setattr__(self, 'x', x)


@dataclass(frozen=True)
class Spectrum:
    x: np.ndarray
    label: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.shape != (SPECTRUM_LENGTH,):
            raise SignalError(f"Espectro deve ter {SPECTRUM_LENGTH} pontos, recebido {x.shape}.")
        if not np.all(np.isfinite(x)):
            raise SignalError("Espectro com valores não finitos.")
        object.__setattr__(self, 'x', x)


# ==============================================================================
# JANELAMENTO
# ==============================================================================
def window_starts(record_length: int, count: int, hop: int, rng: np.random.Generator) -> np.ndarray:
    """Índices de início das janelas: âncora uniforme e avanço por `hop`, com volta ao início."""
    if record_length < SEGMENT_LENGTH:
        raise SignalError(f"Registro com {record_length} pontos é menor que uma janela ({SEGMENT_LENGTH}).")
    if hop < 1:
        raise SignalError("hop deve ser >= 1.")
    if count < 1:
        raise SignalError("count deve ser >= 1.")

    feasible = record_length - SEGMENT_LENGTH + 1
    anchor = int(rng.integers(0, feasible))
    offsets = anchor + hop * np.arange(count, dtype=np.int64)
    if offsets[-1] >= feasible:
        logger.warning(
            f"Janelas ultrapassam o fim do registro ({record_length} pontos); voltando ao início."
        )
    return offsets % feasible


def sample_windows(record: RawRecord, count: int, hop: int, rng: np.random.Generator) -> List[Segment]:
    """Amostra `count` segmentos de 2048 pontos do registro.

    Args:
        record (RawRecord): Registro bruto.
        count (int): Número de janelas.
        hop (int): Avanço entre janelas consecutivas.
        rng (np.random.Generator): Gerador semeado (a âncora é sorteada uma vez por registro).

    Returns:
        List[Segment]: Segmentos com o rótulo do registro.

    Raises:
        SignalError: Registro menor que uma janela ou parâmetros inválidos.
    """
    starts = window_starts(len(record), count, hop, rng)
    return [Segment(record.samples[s:s + SEGMENT_LENGTH], record.label) for s in starts]


# ==============================================================================
# RUÍDO E PADRONIZAÇÃO
# ==============================================================================
def add_noise(seg: Segment, snr_db: float, rng: np.random.Generator) -> Segment:
    """Adiciona ruído gaussiano para atingir `snr_db` (em expectativa).

    `snr_db = +inf` (modo limpo) devolve o segmento inalterado.

    Raises:
        SignalError: segmento de potência nula, SNR NaN ou -inf.
    """
    if snr_db == math.inf:
        return seg
    if not math.isfinite(snr_db):
        raise SignalError(f"SNR deve ser finita ou +inf (limpo), recebido {snr_db}.")
    signal_power = float(np.mean(seg.x ** 2))
    if signal_power == 0.0:
        raise SignalError("Segmento com potência nula: SNR indefinida.")
    noise_power = signal_power / (10.0 ** (snr_db / 10.0))
    noise = rng.normal(0.0, math.sqrt(noise_power), size=seg.x.shape)
    return Segment(seg.x + noise, seg.label)


def zscore(x: Sequence[float]) -> np.ndarray:
    """(x - μ)/σ com desvio padrão populacional; σ < 1e-12 produz zeros."""
    values = np.asarray(x, dtype=np.float64)
    if values.size == 0:
        raise SignalError("zscore: sequência vazia.")
    mu = values.mean()
    sigma = values.std()
    if sigma < ZSCORE_SIGMA_FLOOR:
        return np.zeros_like(values)
    return (values - mu) / sigma


# ==============================================================================
# FFT RADIX-2
# ==============================================================================
def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    index = np.arange(n, dtype=np.int64)
    reversed_index = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        reversed_index |= ((index >> b) & 1) << (bits - 1 - b)
    return reversed_index


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@validate_array(ndim=1)
def radix2_fft(x: np.ndarray) -> np.ndarray:
    """FFT radix-2 iterativa Cooley-Tukey (DIT). O tamanho deve ser potência de dois."""
    n = x.size
    if not _is_power_of_two(n):
        raise SignalError(f"FFT radix-2 exige tamanho potência de dois, recebido {n}.")

    data = np.asarray(x, dtype=np.complex128)[_bit_reverse_indices(n)]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = data.reshape(-1, size)
        even = blocks[:, :half].copy()
        odd = blocks[:, half:] * twiddle
        blocks[:, :half] = even + odd
        blocks[:, half:] = even - odd
        size *= 2
    return data


def magnitude_spectrum(x: np.ndarray) -> np.ndarray:
    """Magnitudes dos bins 0..N/2-1 (DC incluído, Nyquist excluído)."""
    values = np.asarray(x, dtype=np.float64)
    spectrum = radix2_fft(values)
    return np.abs(spectrum[: values.size // 2])


def rfft_mag(seg: Segment) -> Spectrum:
    return Spectrum(magnitude_spectrum(seg.x), seg.label)


# ==============================================================================
# PIPELINE
# ==============================================================================
def preprocess_segment(seg: Segment, snr_db: float, rng: np.random.Generator) -> Spectrum:
    standardized = Segment(zscore(seg.x), seg.label)
    noisy = add_noise(standardized, snr_db, rng)
    restandardized = Segment(zscore(noisy.x), seg.label)
    magnitudes = rfft_mag(restandardized)
    return Spectrum(zscore(magnitudes.x), seg.label)


def preprocess(
    record: RawRecord,
    count: int,
    hop: int,
    snr_db: float,
    rng: np.random.Generator,
) -> List[Spectrum]:
    """Janela, injeta ruído e leva cada segmento ao domínio da frequência.

    A ordem é fixa: z-score -> ruído -> z-score -> |FFT| -> z-score. O ruído é
    injetado no tempo para que a definição de SNR mantenha seu sentido físico.
    """
    segments = sample_windows(record, count, hop, rng)
    return [preprocess_segment(seg, snr_db, rng) for seg in segments]


# ==============================================================================
# GERADOR SINTÉTICO
# ==============================================================================
def _impulse_response(preset: SyntheticPreset, sample_rate: int) -> np.ndarray:
    # ressonância amortecida truncada em ~e^-7 da amplitude inicial
    length = max(int(math.ceil(7.0 * sample_rate / preset.decay_per_s)), 1)
    t = np.arange(length) / sample_rate
    return np.exp(-preset.decay_per_s * t) * np.sin(2 * np.pi * preset.resonance_hz * t)


def gen_synthetic(
    class_id: int,
    duration: float,
    rng: np.random.Generator,
    presets: Optional[Sequence[SyntheticPreset]] = None,
    sample_rate: int = SAMPLE_RATE_HZ,
) -> RawRecord:
    """Gera um registro sintético de rolamento para a classe `class_id`.

    O sinal soma: harmônicos do eixo com fase aleatória; trem periódico de
    impactos exponencialmente amortecidos (taxa e ressonância próprias da
    classe, com jitter de 1% no período e modulação de amplitude opcional);
    ruído de base gaussiano. A classe saudável não tem trem de impactos.

    Args:
        class_id (int): Índice da classe em `presets`.
        duration (float): Duração em segundos.
        rng (np.random.Generator): Gerador semeado.
        presets (Sequence[SyntheticPreset], optional): Padrão `DEFAULT_PRESETS`.
        sample_rate (int): Taxa de amostragem em Hz.

    Returns:
        RawRecord: O registro gerado.

    Raises:
        SignalError: classe fora dos presets ou duração não positiva.
    """
    presets = DEFAULT_PRESETS if presets is None else presets
    if not 0 <= class_id < len(presets):
        raise SignalError(f"Classe {class_id} fora dos {len(presets)} presets.")
    if not duration > 0:
        raise SignalError("duration deve ser > 0.")

    preset = presets[class_id]
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate

    signal = np.zeros(n)
    for freq, amp in preset.harmonics:
        signal += amp * np.sin(2 * np.pi * freq * t + rng.uniform(0.0, 2 * np.pi))

    if preset.impact_rate_hz > 0 and preset.impact_amplitude > 0:
        period = sample_rate / preset.impact_rate_hz
        impact_count = int(n / period) + 1
        jitter = rng.normal(0.0, 0.01 * period, size=impact_count)
        positions = np.round(np.arange(impact_count) * period + jitter + rng.uniform(0.0, period)).astype(np.int64)
        positions = positions[(positions >= 0) & (positions < n)]
        impulses = np.zeros(n)
        amplitudes = np.full(positions.size, preset.impact_amplitude)
        if preset.modulation_hz > 0:
            phase = rng.uniform(0.0, 2 * np.pi)
            amplitudes *= 1.0 + 0.5 * np.cos(2 * np.pi * preset.modulation_hz * positions / sample_rate + phase)
        np.add.at(impulses, positions, amplitudes)
        signal += np.convolve(impulses, _impulse_response(preset, sample_rate))[:n]

    if preset.noise_std > 0:
        signal += rng.normal(0.0, preset.noise_std, size=n)

    return RawRecord(signal, class_id, sample_rate)
