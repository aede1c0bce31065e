"""Sistema numérico de ponto fixo de 16 bits com sinal.

Um valor `Fixed16` guarda uma palavra de 16 bits em complemento de dois e um
`FixedFormat` (X bits inteiros, Y bits fracionários, 1 bit de sinal implícito).
Produtos são exatos e vão para um acumulador largo (`WideAcc`) de 48 bits, como
nos slices DSP do datapath. A conversão de volta para 16 bits usa
arredondamento half-even e saturação.

Convenções:
    - quantize / acc_to_fixed saturam, nunca dão a volta (wraparound);
    - dentro do acumulador, estouro é erro (`AccumulatorOverflowError`);
    - todas as operações são puras e os tipos são imutáveis.

Além das operações escalares, o módulo expõe equivalentes vetorizados sobre
arrays de palavras (`quantize_array`, `shift_round_array`, `requantize_array`),
usados pelo forward quantizado de referência.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

import numpy as np

from bearing_pga.core.exceptions import (
    AccumulatorOverflowError,
    FixedPointError,
    UnrepresentableRangeError,
)

WORD_BITS = 16
RAW_MIN = -(1 << (WORD_BITS - 1))
RAW_MAX = (1 << (WORD_BITS - 1)) - 1

ACC_BITS = 48
ACC_MIN = -(1 << (ACC_BITS - 1))
ACC_MAX = (1 << (ACC_BITS - 1)) - 1

Real = Union[int, float, Fraction]


@dataclass(frozen=True)
class FixedFormat:
    """Alocação Q(X,Y): `int_bits` inteiros + `frac_bits` fracionários + sinal = 16."""
    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits < 0 or self.frac_bits < 0:
            raise FixedPointError(f"Formato inválido {self}: bits negativos.")
        if 1 + self.int_bits + self.frac_bits != WORD_BITS:
            raise FixedPointError(f"Formato inválido {self}: 1 + X + Y deve ser {WORD_BITS}.")

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def max_value(self) -> float:
        return RAW_MAX * self.resolution

    @property
    def min_value(self) -> float:
        return RAW_MIN * self.resolution

    def __str__(self) -> str:
        return f"({self.int_bits},{self.frac_bits})"


@dataclass(frozen=True)
class Fixed16:
    raw: int
    fmt: FixedFormat

    def __post_init__(self):
        if not RAW_MIN <= self.raw <= RAW_MAX:
            raise FixedPointError(f"Palavra {self.raw} fora da faixa de 16 bits.")

    @property
    def value(self) -> float:
        return dequantize(self)


@dataclass(frozen=True)
class WideAcc:
    raw: int
    frac_bits: int

    def __post_init__(self):
        if not ACC_MIN <= self.raw <= ACC_MAX:
            raise AccumulatorOverflowError(
                f"Acumulador de {ACC_BITS} bits estourou (raw={self.raw}); alocação de formato mal dimensionada."
            )
        if self.frac_bits < 0:
            raise FixedPointError("frac_bits do acumulador não pode ser negativo.")


# ==============================================================================
# PRIMITIVAS INTEIRAS
# ==============================================================================
def _clamp(raw: int) -> int:
    return max(RAW_MIN, min(RAW_MAX, raw))


def shift_round(raw: int, shift: int) -> int:
    """Desloca `raw` à direita por `shift` bits com arredondamento half-even.

    Deslocamento negativo é um deslocamento exato à esquerda.
    """
    if shift <= 0:
        return raw << -shift
    quotient = raw >> shift  # piso, também para negativos
    remainder = raw - (quotient << shift)
    half = 1 << (shift - 1)
    if remainder > half or (remainder == half and quotient & 1):
        quotient += 1
    return quotient


def _round_half_even(value: Real) -> int:
    # round() de float e de Fraction já é half-even
    return round(value)


# ==============================================================================
# OPERAÇÕES ESCALARES
# ==============================================================================
def quantize(value: Real, fmt: FixedFormat) -> Fixed16:
    """Real -> Fixed16 com arredondamento half-even e saturação.

    Raises:
        FixedPointError: se `value` for NaN.
    """
    if isinstance(value, (int, Fraction)):
        scaled = Fraction(value) * (1 << fmt.frac_bits)
    else:
        value = float(value)
        if math.isnan(value):
            raise FixedPointError("quantize: NaN não é representável.")
        if math.isinf(value):
            return Fixed16(RAW_MAX if value > 0 else RAW_MIN, fmt)
        scaled = value * (1 << fmt.frac_bits)
        if math.isinf(scaled):
            return Fixed16(RAW_MAX if value > 0 else RAW_MIN, fmt)
    return Fixed16(_clamp(_round_half_even(scaled)), fmt)


def dequantize(v: Fixed16) -> float:
    # exato: |raw| < 2^15 e a escala é potência de dois
    return math.ldexp(v.raw, -v.fmt.frac_bits)


def dequantize_exact(acc: WideAcc) -> Fraction:
    return Fraction(acc.raw, 1 << acc.frac_bits)


def fxp_mul(a: Fixed16, b: Fixed16) -> WideAcc:
    """Produto inteiro exato; frac_bits = a.frac + b.frac, sem arredondar nem saturar."""
    return WideAcc(a.raw * b.raw, a.fmt.frac_bits + b.fmt.frac_bits)


def acc_add(acc: WideAcc, p: WideAcc) -> WideAcc:
    """Soma exata de 48 bits; estouro é erro."""
    if acc.frac_bits != p.frac_bits:
        raise FixedPointError(f"acc_add: frac_bits diferentes ({acc.frac_bits} != {p.frac_bits}).")
    return WideAcc(acc.raw + p.raw, acc.frac_bits)


def acc_align(acc: WideAcc, frac_bits: int) -> WideAcc:
    """Reposiciona o ponto decimal do acumulador (exato ao ganhar bits, half-even ao perder)."""
    return WideAcc(shift_round(acc.raw, acc.frac_bits - frac_bits), frac_bits)


def widen(v: Fixed16, frac_bits: int) -> WideAcc:
    """Leva uma palavra de 16 bits ao domínio largo com `frac_bits` fracionários."""
    return acc_align(WideAcc(v.raw, v.fmt.frac_bits), frac_bits)


def acc_to_fixed(acc: WideAcc, out_fmt: FixedFormat) -> Fixed16:
    """Desloca, arredonda (half-even) e satura o acumulador para `out_fmt`."""
    raw = shift_round(acc.raw, acc.frac_bits - out_fmt.frac_bits)
    return Fixed16(_clamp(raw), out_fmt)


def convert(v: Fixed16, out_fmt: FixedFormat) -> Fixed16:
    """Conversão pura de formato (o módulo de deslocamento do datapath)."""
    return acc_to_fixed(WideAcc(v.raw, v.fmt.frac_bits), out_fmt)


def fit_format(values: Iterable[float], margin_bits: int = 0) -> FixedFormat:
    """Menor X >= 0 com max|v| < 2^X; Y = 15 - X.

    Args:
        values: Valores observados (parâmetros ou ativações) da camada.
        margin_bits: Bits inteiros extras de segurança (padrão 0).

    Raises:
        FixedPointError: sequência vazia ou com valores não finitos.
        UnrepresentableRangeError: max|v| >= 2^15.
    """
    array = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=np.float64)
    if array.size == 0:
        raise FixedPointError("fit_format: sequência vazia.")
    if not np.all(np.isfinite(array)):
        raise FixedPointError("fit_format: valores não finitos.")
    peak = float(np.max(np.abs(array)))
    if peak >= 2.0 ** (WORD_BITS - 1):
        raise UnrepresentableRangeError(f"fit_format: max|v|={peak} não cabe em 16 bits.")
    # frexp: peak = m * 2^e com m em [0.5, 1) => peak < 2^e e peak >= 2^(e-1)
    _, exponent = math.frexp(peak)
    int_bits = min(max(exponent, 0) + margin_bits, WORD_BITS - 1)
    return FixedFormat(int_bits, WORD_BITS - 1 - int_bits)


def to_hex(raw: int) -> str:
    """Palavra de 16 bits em 4 dígitos hexadecimais maiúsculos, sem prefixo."""
    return f"{raw & 0xFFFF:04X}"


def from_hex(text: str) -> int:
    word = int(text, 16)
    if not 0 <= word <= 0xFFFF:
        raise FixedPointError(f"Palavra hexadecimal fora de 16 bits: '{text}'.")
    return word - (1 << WORD_BITS) if word & 0x8000 else word


# ==============================================================================
# EQUIVALENTES VETORIZADOS
# ==============================================================================
def quantize_array(values: np.ndarray, fmt: FixedFormat) -> np.ndarray:
    """Versão vetorizada de `quantize`; devolve palavras int16."""
    array = np.asarray(values, dtype=np.float64)
    if np.isnan(array).any():
        raise FixedPointError("quantize_array: NaN não é representável.")
    scaled = np.rint(np.ldexp(array, fmt.frac_bits))  # rint = half-even
    return np.clip(scaled, RAW_MIN, RAW_MAX).astype(np.int16)


def dequantize_array(raw: np.ndarray, fmt: FixedFormat) -> np.ndarray:
    return np.ldexp(np.asarray(raw, dtype=np.float64), -fmt.frac_bits)


def shift_round_array(raw: np.ndarray, shift: int) -> np.ndarray:
    """Versão vetorizada de `shift_round` sobre inteiros de 64 bits."""
    values = np.asarray(raw, dtype=np.int64)
    if shift <= 0:
        return values << -shift
    quotient = values >> shift
    remainder = values - (quotient << shift)
    half = np.int64(1) << (shift - 1)
    round_up = (remainder > half) | ((remainder == half) & ((quotient & 1) == 1))
    return quotient + round_up.astype(np.int64)


def check_accumulator(raw: np.ndarray) -> None:
    values = np.asarray(raw, dtype=np.int64)
    if values.size and (values.max() > ACC_MAX or values.min() < ACC_MIN):
        raise AccumulatorOverflowError(f"Acumulador de {ACC_BITS} bits estourou; alocação de formato mal dimensionada.")


def requantize_array(raw: np.ndarray, from_frac: int, out_fmt: FixedFormat) -> np.ndarray:
    """Versão vetorizada de `acc_to_fixed`: desloca, arredonda e satura para int16."""
    shifted = shift_round_array(raw, from_frac - out_fmt.frac_bits)
    return np.clip(shifted, RAW_MIN, RAW_MAX).astype(np.int16)
