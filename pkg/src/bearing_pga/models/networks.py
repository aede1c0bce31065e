"""Redes do toolkit: o estudante compacto (alvo do FPGA) e o professor WDCNN.

Principais Funções:
-------------------
StudentNet:
    conv 1→4 (k=64, s=8, p=28) -> ReLU -> max-pool 2/2 -> linear 256→10.
    Exatamente 2830 parâmetros.

TeacherNet:
    Seis blocos conv + batch-norm + ReLU + max-pool (primeiro kernel largo 64,
    stride 16) e uma cabeça FC oculta de 48 unidades + FC de saída, totalizando
    50.090 parâmetros.

forward / predict:
    Logits e classe prevista para um espectro ou um lote de espectros.

model_summary:
    Tabela por camada (tipo, shape de saída, parâmetros, MACs) com totais, usada
    na contabilidade de compressão professor/estudante.
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from bearing_pga.core.config import NUM_CLASSES, SPECTRUM_LENGTH
from bearing_pga.core.exceptions import ModelFormatError, ShapeMismatchError
from bearing_pga.models.layers import (
    BatchNorm1d,
    Conv1d,
    Flatten,
    Layer,
    Linear,
    MaxPool1d,
    ReLU,
)

STUDENT_CONV = {'in_channels': 1, 'out_channels': 4, 'kernel': 64, 'stride': 8, 'padding': 28}
STUDENT_POOL = 2

TEACHER_CHANNELS = (16, 32, 64, 64, 64, 64)
# Largura da FC oculta; com o plano acima o professor fica com 50.090 parâmetros.
TEACHER_FC_HIDDEN = 48


def _as_input(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Aceita (L,), (B, L) ou (B, 1, L) e devolve (B, 1, L) + flag de entrada não agrupada."""
    array = np.asarray(x, dtype=np.float64)
    if array.ndim == 1:
        return array[None, None, :], True
    if array.ndim == 2:
        return array[:, None, :], False
    if array.ndim == 3:
        return array, False
    raise ShapeMismatchError(f"Entrada da rede com shape inválido {array.shape}.")


class Network(ABC):
    """Sequência nomeada de camadas com parâmetros endereçáveis por `camada.parametro`."""

    def __init__(self, layers: Sequence[Tuple[str, Layer]], input_length: int = SPECTRUM_LENGTH):
        self.layers: List[Tuple[str, Layer]] = list(layers)
        self.input_length = input_length

    # --- passes ----------------------------------------------------------------
    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        batch, single = _as_input(x)
        if batch.shape[-1] != self.input_length:
            raise ShapeMismatchError(f"Entrada com {batch.shape[-1]} pontos; a rede espera {self.input_length}.")
        out = batch
        for _, layer in self.layers:
            out = layer.forward(out, training=training)
        return out[0] if single else out

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        grad = np.atleast_2d(grad_logits)
        for _, layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    # --- parâmetros ------------------------------------------------------------
    def parameters(self) -> Dict[str, np.ndarray]:
        return {f"{name}.{key}": value for name, layer in self.layers for key, value in layer.params.items()}

    def gradients(self) -> Dict[str, np.ndarray]:
        grads = {}
        for name, layer in self.layers:
            for key in layer.params:
                if key not in layer.grads:
                    raise RuntimeError(f"Gradiente ausente para {name}.{key}; execute backward antes.")
                grads[f"{name}.{key}"] = layer.grads[key]
        return grads

    def buffers(self) -> Dict[str, np.ndarray]:
        return {f"{name}.{key}": value for name, layer in self.layers for key, value in layer.buffers.items()}

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Cópia de parâmetros e buffers, na ordem das camadas."""
        state = {}
        for name, layer in self.layers:
            for key, value in layer.params.items():
                state[f"{name}.{key}"] = value.copy()
            for key, value in layer.buffers.items():
                state[f"{name}.{key}"] = value.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        expected = self.state_dict()
        missing = sorted(set(expected) - set(state))
        unexpected = sorted(set(state) - set(expected))
        if missing or unexpected:
            raise ModelFormatError(f"Estado incompatível: faltando {missing}, inesperados {unexpected}.")
        for name, layer in self.layers:
            for store in (layer.params, layer.buffers):
                for key in store:
                    value = np.asarray(state[f"{name}.{key}"], dtype=np.float64)
                    if value.shape != store[key].shape:
                        raise ModelFormatError(
                            f"{name}.{key}: shape {value.shape} difere do esperado {store[key].shape}."
                        )
                    store[key][...] = value

    def param_count(self) -> int:
        return int(sum(layer.param_count() for _, layer in self.layers))

    @abstractmethod
    def architecture(self) -> dict:
        """Descritor JSON gravado no checkpoint e lido por `build_model`."""

    def layer(self, name: str) -> Layer:
        for layer_name, layer in self.layers:
            if layer_name == name:
                return layer
        raise KeyError(name)


class StudentNet(Network):
    """Estudante compacto implantado no acelerador."""

    def __init__(self, rng: Optional[np.random.Generator] = None, num_classes: int = NUM_CLASSES):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.num_classes = num_classes
        conv = Conv1d(rng=rng, **STUDENT_CONV)
        conv_length = conv.output_shape((1, SPECTRUM_LENGTH))[-1]
        flat = STUDENT_CONV['out_channels'] * (conv_length // STUDENT_POOL)
        super().__init__([
            ('conv', conv),
            ('relu', ReLU()),
            ('pool', MaxPool1d(STUDENT_POOL, STUDENT_POOL)),
            ('flatten', Flatten()),
            ('fc', Linear(flat, num_classes, rng=rng)),
        ])

    @property
    def conv(self) -> Conv1d:
        return self.layer('conv')

    @property
    def fc(self) -> Linear:
        return self.layer('fc')

    def forward_stages(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        """Ativações intermediárias em inferência (usadas pela calibração)."""
        batch, _ = _as_input(x)
        conv_out = self.conv.forward(batch)
        pooled = self.layer('pool').forward(self.layer('relu').forward(conv_out))
        flat = pooled.reshape(pooled.shape[0], -1)
        return {'conv_out': conv_out, 'pooled': pooled, 'logits': self.fc.forward(flat)}

    def architecture(self) -> dict:
        return {'kind': 'student', 'num_classes': self.num_classes}


class TeacherNet(Network):
    """Professor WDCNN: kernel largo na primeira camada, blocos de kernel 3 depois.

    A cabeça é uma FC oculta (`fc_hidden` unidades + ReLU) seguida da FC de
    saída; `fc_hidden` é o ajuste de tamanho do modelo. Com `fc_hidden=0` a
    saída liga direto no vetor achatado.
    """

    def __init__(
        self,
        rng: Optional[np.random.Generator] = None,
        channels: Sequence[int] = TEACHER_CHANNELS,
        first_kernel: int = 64,
        first_stride: int = 16,
        first_padding: int = 24,
        kernel: int = 3,
        fc_hidden: int = TEACHER_FC_HIDDEN,
        num_classes: int = NUM_CLASSES,
        input_length: int = SPECTRUM_LENGTH,
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.channels = tuple(int(c) for c in channels)
        self.first_kernel, self.first_stride, self.first_padding = first_kernel, first_stride, first_padding
        self.kernel = kernel
        self.fc_hidden = int(fc_hidden)
        self.num_classes = num_classes

        layers: List[Tuple[str, Layer]] = []
        shape = (1, input_length)
        in_channels = 1
        for index, out_channels in enumerate(self.channels, start=1):
            if index == 1:
                conv = Conv1d(in_channels, out_channels, first_kernel, first_stride, first_padding, rng=rng)
            else:
                conv = Conv1d(in_channels, out_channels, kernel, 1, kernel // 2, rng=rng)
            block = [('conv', conv), ('bn', BatchNorm1d(out_channels)), ('relu', ReLU()), ('pool', MaxPool1d(2, 2))]
            for suffix, layer in block:
                shape = layer.output_shape(shape)
                layers.append((f"block{index}.{suffix}", layer))
            if shape[-1] < 1:
                raise ShapeMismatchError(f"Plano de canais esgota o comprimento no bloco {index}.")
            in_channels = out_channels
        layers.append(('flatten', Flatten()))
        features = shape[0] * shape[1]
        if self.fc_hidden > 0:
            layers.append(('fc_hidden', Linear(features, self.fc_hidden, rng=rng)))
            layers.append(('fc_relu', ReLU()))
            features = self.fc_hidden
        layers.append(('fc', Linear(features, num_classes, rng=rng)))
        super().__init__(layers, input_length)

    def architecture(self) -> dict:
        return {
            'kind': 'teacher',
            'channels': list(self.channels),
            'first_kernel': self.first_kernel,
            'first_stride': self.first_stride,
            'first_padding': self.first_padding,
            'kernel': self.kernel,
            'fc_hidden': self.fc_hidden,
            'num_classes': self.num_classes,
            'input_length': self.input_length,
        }


def build_model(architecture: dict) -> Network:
    """Reconstrói uma rede a partir do descritor gravado no checkpoint."""
    descriptor = dict(architecture)
    kind = descriptor.pop('kind', None)
    try:
        if kind == 'student':
            return StudentNet(num_classes=int(descriptor.get('num_classes', NUM_CLASSES)))
        if kind == 'teacher':
            return TeacherNet(**descriptor)
    except TypeError as e:
        raise ModelFormatError(f"Descritor de arquitetura inválido: {e}") from e
    raise ModelFormatError(f"Tipo de rede desconhecido: '{kind}'.")


# ==============================================================================
# FUNÇÕES DE CONVENIÊNCIA
# ==============================================================================
def forward(model: Network, batch: np.ndarray) -> np.ndarray:
    """Logits em modo de inferência."""
    return model.forward(batch, training=False)


def predict(model: Network, batch: np.ndarray) -> np.ndarray:
    return np.argmax(forward(model, batch), axis=-1)


def predict_batched(model: Network, x: np.ndarray, chunk: int = 512) -> Tuple[np.ndarray, np.ndarray]:
    """(logits, predições) para muitos espectros, processando em blocos."""
    if len(x) == 0:
        return np.zeros((0, NUM_CLASSES)), np.zeros(0, dtype=np.int64)
    logits = np.concatenate([forward(model, x[start:start + chunk]) for start in range(0, len(x), chunk)])
    return logits, np.argmax(logits, axis=-1)


def model_summary(model: Network) -> pd.DataFrame:
    """
    Resumo por camada.

    Returns:
        pd.DataFrame: colunas CAMADA, TIPO, SAIDA, QT_PARAMETROS, QT_MACS, com
        uma linha final 'TOTAL'.
    """
    rows = []
    shape: Tuple[int, ...] = (1, model.input_length)
    for name, layer in model.layers:
        macs = layer.macs(shape)
        shape = layer.output_shape(shape)
        rows.append({
            'CAMADA': name,
            'TIPO': layer.kind,
            'SAIDA': 'x'.join(str(d) for d in shape),
            'QT_PARAMETROS': layer.param_count(),
            'QT_MACS': int(macs),
        })
    summary = pd.DataFrame(rows)
    total = pd.DataFrame([{
        'CAMADA': 'TOTAL',
        'TIPO': '',
        'SAIDA': '',
        'QT_PARAMETROS': int(summary['QT_PARAMETROS'].sum()),
        'QT_MACS': int(summary['QT_MACS'].sum()),
    }])
    return pd.concat([summary, total], ignore_index=True)


def compression_report(teacher: Network, student: Network) -> pd.DataFrame:
    """Parâmetros e FLOPs (2·MACs) de professor e estudante, com as razões de compressão."""
    rows = []
    for role, model in (('professor', teacher), ('estudante', student)):
        total = model_summary(model).iloc[-1]
        rows.append({
            'MODELO': role,
            'QT_PARAMETROS': int(total['QT_PARAMETROS']),
            'FLOPS': 2 * int(total['QT_MACS']),
        })
    report = pd.DataFrame(rows)
    report['RAZAO_PARAMETROS'] = (report['QT_PARAMETROS'].iloc[0] / report['QT_PARAMETROS']).round(2)
    report['RAZAO_FLOPS'] = (report['FLOPS'].iloc[0] / report['FLOPS']).round(2)
    return report
