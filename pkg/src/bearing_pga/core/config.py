"""Módulo de configuração do toolkit.

Reúne as dataclasses imutáveis que descrevem uma execução completa (dados,
treino do professor, destilação, calibração, acelerador e varredura de
hiperparâmetros), o parser do formato plano `chave = valor` e os presets das
dez classes do gerador sintético.

Principais Funções:
-------------------
load_config_file:
    Lê um arquivo `chave = valor` e devolve o dicionário de strings.

run_config_from_flat:
    Constrói um `RunConfig` validado a partir de chaves planas com prefixo
    de seção (`distill.T`, `accel.clock_hz`, ...).

render_config / config_hash:
    Renderização canônica (ordenada) e seu SHA-256, usados nos manifestos.

load_presets:
    Substitui os presets sintéticos padrão por um arquivo JSON.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union, get_args, get_origin, get_type_hints

from bearing_pga.core.exceptions import ConfigError


SAMPLE_RATE_HZ = 12000
SEGMENT_LENGTH = 2048
SPECTRUM_LENGTH = 1024
NUM_CLASSES = 10
CLEAN_SNR = math.inf
SNR_KEYS = frozenset({'dataset.snr_list'})

DISTILL_METHODS = ('dkd', 'kd', 'ce')


# ==============================================================================
# PRESETS DO GERADOR SINTÉTICO
# ==============================================================================
@dataclass(frozen=True)
class SyntheticPreset:
    """Parâmetros de uma classe do gerador de sinais de rolamento."""
    name: str
    impact_rate_hz: float
    resonance_hz: float
    decay_per_s: float
    impact_amplitude: float
    modulation_hz: float
    harmonics: Tuple[Tuple[float, float], ...]
    noise_std: float

    def __post_init__(self):
        if self.impact_rate_hz < 0 or self.resonance_hz < 0 or self.decay_per_s <= 0:
            raise ConfigError(f"Preset '{self.name}': taxas e frequências devem ser não negativas e decaimento positivo.")
        if self.noise_std < 0:
            raise ConfigError(f"Preset '{self.name}': noise_std negativo.")
        if self.resonance_hz >= SAMPLE_RATE_HZ / 2:
            raise ConfigError(f"Preset '{self.name}': ressonância acima de Nyquist.")


_SHAFT_HZ = 30.0
_BASE_HARMONICS = ((_SHAFT_HZ, 1.0), (2 * _SHAFT_HZ, 0.3), (3 * _SHAFT_HZ, 0.1))

# Saudável + (pista interna, esfera, pista externa) x três severidades.
DEFAULT_PRESETS: Tuple[SyntheticPreset, ...] = (
    SyntheticPreset('healthy', 0.0, 0.0, 1.0, 0.0, 0.0, _BASE_HARMONICS, 0.05),
    SyntheticPreset('inner_007', 162.0, 3000.0, 800.0, 0.6, _SHAFT_HZ, _BASE_HARMONICS, 0.05),
    SyntheticPreset('ball_007', 141.0, 2200.0, 700.0, 0.5, 0.0, _BASE_HARMONICS, 0.05),
    SyntheticPreset('outer_007', 107.0, 3600.0, 900.0, 0.6, 0.0, _BASE_HARMONICS, 0.05),
    SyntheticPreset('inner_014', 162.0, 2600.0, 800.0, 1.0, _SHAFT_HZ, ((_SHAFT_HZ, 1.0), (2 * _SHAFT_HZ, 0.45)), 0.05),
    SyntheticPreset('ball_014', 141.0, 1800.0, 700.0, 0.9, 0.0, ((_SHAFT_HZ, 1.0), (3 * _SHAFT_HZ, 0.35)), 0.05),
    SyntheticPreset('outer_014', 107.0, 3200.0, 900.0, 1.0, 0.0, ((_SHAFT_HZ, 1.0), (4 * _SHAFT_HZ, 0.3)), 0.05),
    SyntheticPreset('inner_021', 162.0, 4200.0, 800.0, 1.6, _SHAFT_HZ, ((_SHAFT_HZ, 1.2), (2 * _SHAFT_HZ, 0.6)), 0.05),
    SyntheticPreset('ball_021', 141.0, 2800.0, 700.0, 1.4, 0.0, ((_SHAFT_HZ, 1.2), (3 * _SHAFT_HZ, 0.5)), 0.05),
    SyntheticPreset('outer_021', 107.0, 4600.0, 900.0, 1.6, 0.0, ((_SHAFT_HZ, 1.2), (4 * _SHAFT_HZ, 0.5)), 0.05),
)


def load_presets(path: Union[str, Path]) -> Tuple[SyntheticPreset, ...]:
    """Lê presets de um JSON no formato `[{"name": ..., "harmonics": [[f, a], ...], ...}, ...]`."""
    preset_file = Path(path)
    if not preset_file.is_file():
        raise ConfigError(f"Arquivo de presets não encontrado em '{path}'.")
    with open(preset_file, 'r', encoding='utf-8') as f:
        try:
            entries = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Presets inválidos em '{path}': {e}") from e

    presets = []
    for entry in entries:
        try:
            harmonics = tuple((float(freq), float(amp)) for freq, amp in entry.get('harmonics', []))
            presets.append(SyntheticPreset(
                name=str(entry['name']),
                impact_rate_hz=float(entry['impact_rate_hz']),
                resonance_hz=float(entry['resonance_hz']),
                decay_per_s=float(entry['decay_per_s']),
                impact_amplitude=float(entry['impact_amplitude']),
                modulation_hz=float(entry.get('modulation_hz', 0.0)),
                harmonics=harmonics,
                noise_std=float(entry['noise_std']),
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Preset malformado em '{path}': {e}") from e
    if not presets:
        raise ConfigError(f"Nenhum preset definido em '{path}'.")
    return tuple(presets)


# ==============================================================================
# DATACLASSES DE CONFIGURAÇÃO
# ==============================================================================
@dataclass(frozen=True)
class DatasetConfig:
    source: str = 'synthetic'
    presets: Optional[str] = None
    num_classes: int = NUM_CLASSES
    samples_per_class: int = 1000
    hop: int = 28
    snr_list: Tuple[float, ...] = (CLEAN_SNR, 8.0, 4.0, 0.0)
    sample_rate: int = SAMPLE_RATE_HZ

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError("dataset.num_classes deve ser >= 2.")
        if self.samples_per_class < 4:
            raise ConfigError("dataset.samples_per_class deve ser >= 4 (divisão 2:1:1).")
        if self.hop < 1:
            raise ConfigError("dataset.hop deve ser >= 1.")
        if not self.snr_list:
            raise ConfigError("dataset.snr_list não pode ser vazio.")
        if any(math.isnan(snr) or snr == -math.inf for snr in self.snr_list):
            raise ConfigError("dataset.snr_list contém NaN ou -inf.")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 75
    batch_size: int = 64
    lr: float = 0.1
    momentum: float = 0.9

    def __post_init__(self):
        _check_training_fields(self)


@dataclass(frozen=True)
class DistillConfig:
    method: str = 'dkd'
    T: float = 2.5
    alpha: float = 0.2
    beta: float = 4.0
    gamma: float = 1.0
    epochs: int = 75
    batch_size: int = 64
    lr: float = 0.1
    momentum: float = 0.9

    def __post_init__(self):
        if self.method not in DISTILL_METHODS:
            raise ConfigError(f"distill.method deve ser um de {DISTILL_METHODS}, recebido '{self.method}'.")
        if not self.T > 0:
            raise ConfigError("distill.T deve ser > 0.")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("distill.alpha deve estar em [0, 1].")
        if self.beta < 0 or self.gamma < 0:
            raise ConfigError("distill.beta e distill.gamma devem ser >= 0.")
        _check_training_fields(self)


def _check_training_fields(cfg) -> None:
    if cfg.epochs < 1:
        raise ConfigError("epochs deve ser >= 1.")
    if cfg.batch_size < 1:
        raise ConfigError("batch_size deve ser >= 1.")
    if not cfg.lr > 0:
        raise ConfigError("lr deve ser > 0.")
    if not 0.0 <= cfg.momentum < 1.0:
        raise ConfigError("momentum deve estar em [0, 1).")


@dataclass(frozen=True)
class CalibrationConfig:
    size: int = 256
    margin_bits: int = 0
    shared_fc_format: bool = True

    def __post_init__(self):
        if self.size < 1:
            raise ConfigError("calibration.size deve ser >= 1.")
        if not 0 <= self.margin_bits <= 15:
            raise ConfigError("calibration.margin_bits deve estar em [0, 15].")


@dataclass(frozen=True)
class AcceleratorConfig:
    clock_hz: float = 100e6
    rf_select_cycles: int = 1
    pool_cycles: int = 2
    shift_cycles: int = 1
    classify_cycles: int = 10
    control_overhead_cycles: int = 65

    def __post_init__(self):
        if not self.clock_hz > 0:
            raise ConfigError("accel.clock_hz deve ser > 0.")
        small_stages = (self.rf_select_cycles, self.pool_cycles, self.shift_cycles, self.classify_cycles)
        if min(small_stages) < 0:
            raise ConfigError("Latências de estágio não podem ser negativas.")
        if sum(small_stages) > self.control_overhead_cycles:
            raise ConfigError(
                f"accel.control_overhead_cycles ({self.control_overhead_cycles}) menor que a soma "
                f"das latências dos estágios auxiliares ({sum(small_stages)})."
            )

    @property
    def control_cycles(self) -> int:
        """Ciclos de controle restantes (handoff de FIFO, travamento de estágios)."""
        return self.control_overhead_cycles - (
            self.rf_select_cycles + self.pool_cycles + self.shift_cycles + self.classify_cycles
        )


@dataclass(frozen=True)
class SweepConfig:
    T: Tuple[float, ...] = (2.5,)
    alpha: Tuple[float, ...] = (0.2,)
    beta: Tuple[float, ...] = (4.0,)
    gamma: Tuple[float, ...] = (1.0,)
    lr: Tuple[float, ...] = (0.1,)
    batch_size: Tuple[int, ...] = (64,)

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name):
                raise ConfigError(f"sweep.{f.name} não pode ser vazio.")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    output_dir: str = 'runs/default'
    log_level: str = 'INFO'
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    teacher: TrainConfig = field(default_factory=TrainConfig)
    distill: DistillConfig = field(default_factory=DistillConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    accel: AcceleratorConfig = field(default_factory=AcceleratorConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError("seed deve ser >= 0.")


_SECTIONS = {
    'dataset': DatasetConfig,
    'teacher': TrainConfig,
    'distill': DistillConfig,
    'calibration': CalibrationConfig,
    'accel': AcceleratorConfig,
    'sweep': SweepConfig,
}


# ==============================================================================
# PARSER DO FORMATO PLANO chave = valor
# ==============================================================================
def load_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """Lê um arquivo `chave = valor` (comentários com '#', linhas vazias ignoradas)."""
    config_file = Path(path)
    if not config_file.is_file():
        raise ConfigError(f"Arquivo de configuração não encontrado em '{path}'.")

    values: Dict[str, str] = {}
    with open(config_file, 'r', encoding='utf-8') as f:
        for number, line in enumerate(f, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            key, separator, value = line.partition('=')
            if not separator or not key.strip():
                raise ConfigError(f"{path}:{number}: linha sem 'chave = valor'.")
            values[key.strip()] = value.strip()
    return values


def parse_snr(text: str) -> float:
    """SNR em dB; 'clean' (ou +inf) é o modo sem ruído. NaN e -inf são recusados."""
    lowered = text.strip().lower()
    if lowered in ('clean', 'inf', '+inf'):
        return math.inf
    value = float(lowered)
    if not math.isfinite(value):
        raise ValueError(f"SNR inválida '{text}'")
    return value


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"número não finito '{text}'")
    return value


def _convert(tp, text: str, key: str):
    origin = get_origin(tp)
    try:
        if tp is bool:
            lowered = text.strip().lower()
            if lowered in ('1', 'true', 'yes', 'on'):
                return True
            if lowered in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError(f"booleano inválido '{text}'")
        if tp is int:
            return int(text)
        if tp is float:
            return parse_snr(text) if key in SNR_KEYS else _parse_float(text)
        if tp is str:
            return text
        if origin is Union:
            inner = [arg for arg in get_args(tp) if arg is not type(None)][0]
            if text.strip().lower() in ('', 'none'):
                return None
            return _convert(inner, text, key)
        if origin is tuple:
            inner = get_args(tp)[0]
            return tuple(_convert(inner, item.strip(), key) for item in text.split(',') if item.strip())
    except ValueError as e:
        raise ConfigError(f"Valor inválido para '{key}': {e}") from e
    raise ConfigError(f"Tipo não suportado para '{key}': {tp}")


def _build_section(cls, raw: Mapping[str, str], prefix: str):
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"Chaves desconhecidas em '{prefix}': {unknown}")
    return cls(**{name: _convert(hints[name], text, f"{prefix}.{name}") for name, text in raw.items()})


def run_config_from_flat(values: Mapping[str, str], base: Optional[RunConfig] = None) -> RunConfig:
    """
    Aplica chaves planas sobre `base` (ou sobre os padrões) e devolve um
    `RunConfig` validado.

    Raises:
        ConfigError: chave desconhecida, valor não conversível ou inválido.
    """
    base = base or RunConfig()
    grouped: Dict[str, Dict[str, str]] = {name: {} for name in _SECTIONS}
    top: Dict[str, str] = {}
    for key, text in values.items():
        section, _, name = key.partition('.')
        if name:
            if section not in _SECTIONS:
                raise ConfigError(f"Seção de configuração desconhecida: '{section}'.")
            grouped[section][name] = text
        else:
            top[key] = text

    updates = {}
    for section, cls in _SECTIONS.items():
        if grouped[section]:
            current = flatten_section(getattr(base, section))
            current.update(grouped[section])
            updates[section] = _build_section(cls, current, section)

    top_hints = get_type_hints(RunConfig)
    for key, text in top.items():
        if key not in top_hints or key in _SECTIONS:
            raise ConfigError(f"Chave de configuração desconhecida: '{key}'.")
        updates[key] = _convert(top_hints[key], text, key)

    return replace(base, **updates)


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ','.join(_format_value(item) for item in value)
    if value is None:
        return 'none'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return 'inf' if math.isinf(value) and value > 0 else repr(value)
    return str(value)


def flatten_section(section) -> Dict[str, str]:
    return {f.name: _format_value(getattr(section, f.name)) for f in fields(section)}


def render_config(cfg: RunConfig) -> str:
    """Renderização canônica (chaves ordenadas), relida sem perdas por `run_config_from_flat`."""
    flat = {'seed': str(cfg.seed), 'output_dir': cfg.output_dir, 'log_level': cfg.log_level}
    for section in _SECTIONS:
        for name, text in flatten_section(getattr(cfg, section)).items():
            flat[f"{section}.{name}"] = text
    return ''.join(f"{key} = {flat[key]}\n" for key in sorted(flat))


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(render_config(cfg).encode('utf-8')).hexdigest()
