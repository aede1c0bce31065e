"""Camadas e operações da rede neural com retropropagação derivada à mão.

Todas as operações trabalham em float64 sobre arrays numpy em layout
(lote, canais, comprimento). Os forwards são determinísticos e rejeitam
valores não finitos (`NonFiniteError`).

Operações funcionais:
    conv1d_forward / conv1d_backward    correlação cruzada 1-D com padding de zeros
    relu_fwd / relu_bwd
    maxpool_fwd / maxpool_bwd           empate -> primeiro índice recebe o gradiente
    batchnorm_fwd / batchnorm_bwd       ε = 1e-5, momento das médias móveis 0.1
    linear_fwd / linear_bwd             pesos no layout [entrada × saída]
    softmax_T                           softmax com temperatura (subtração do máximo)

As classes `Layer` encapsulam parâmetros, gradientes e o cache do forward.
"""

from abc import ABC, abstractmethod
from typing import Dict, Optional, Tuple

import numpy as np

from bearing_pga.core.decorators import ensure_finite, validate_array
from bearing_pga.core.exceptions import ShapeMismatchError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def _as_batch(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    if x.ndim == 2:
        return x[None, ...], True
    if x.ndim == 3:
        return x, False
    raise ShapeMismatchError(f"Esperado (C, L) ou (B, C, L), recebido {x.shape}.")


def conv_output_length(length: int, kernel: int, stride: int, padding: int) -> int:
    return (length + 2 * padding - kernel) // stride + 1


def _window_indices(length: int, kernel: int, stride: int) -> np.ndarray:
    out_len = (length - kernel) // stride + 1
    return np.arange(out_len)[:, None] * stride + np.arange(kernel)[None, :]


# ==============================================================================
# CONVOLUÇÃO 1-D
# ==============================================================================
@ensure_finite
@validate_array(min_ndim=2)
def conv1d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Correlação cruzada 1-D: out[b,o,l] = Σ_c Σ_j xpad[b,c,l·s+j]·w[o,c,j] + bias[o].

    Args:
        x: Entrada (C_in, L) ou (B, C_in, L).
        weight: Pesos (C_out, C_in, K).
        bias: Vieses (C_out,).
        stride: Passo da janela.
        padding: Zeros simétricos em cada extremidade.

    Returns:
        np.ndarray: (C_out, L_out) ou (B, C_out, L_out).
    """
    xb, squeeze = _as_batch(x)
    out_ch, in_ch, kernel = weight.shape
    if xb.shape[1] != in_ch:
        raise ShapeMismatchError(f"conv1d: entrada com {xb.shape[1]} canais, pesos esperam {in_ch}.")
    if bias.shape != (out_ch,):
        raise ShapeMismatchError(f"conv1d: bias com shape {bias.shape}, esperado ({out_ch},).")
    padded_length = xb.shape[2] + 2 * padding
    if padded_length < kernel:
        raise ShapeMismatchError(f"conv1d: comprimento {padded_length} menor que o kernel {kernel}.")

    xp = np.pad(xb, ((0, 0), (0, 0), (padding, padding)))
    cols = xp[:, :, _window_indices(padded_length, kernel, stride)]  # (B, C, L_out, K)
    out = np.tensordot(cols, weight, axes=([1, 3], [1, 2])).transpose(0, 2, 1) + bias[None, :, None]
    out = np.ascontiguousarray(out)
    return out[0] if squeeze else out


@ensure_finite
@validate_array(min_ndim=2)
def conv1d_backward(
    x: np.ndarray,
    weight: np.ndarray,
    grad_out: np.ndarray,
    stride: int = 1,
    padding: int = 0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradientes da convolução: (grad_input, grad_weights, grad_bias)."""
    xb, squeeze = _as_batch(x)
    gb, _ = _as_batch(grad_out)
    out_ch, in_ch, kernel = weight.shape
    padded_length = xb.shape[2] + 2 * padding
    indices = _window_indices(padded_length, kernel, stride)
    out_len = indices.shape[0]
    if gb.shape != (xb.shape[0], out_ch, out_len):
        raise ShapeMismatchError(f"conv1d_backward: grad_out {gb.shape} != {(xb.shape[0], out_ch, out_len)}.")

    xp = np.pad(xb, ((0, 0), (0, 0), (padding, padding)))
    cols = xp[:, :, indices]
    grad_weight = np.tensordot(gb, cols, axes=([0, 2], [0, 2]))  # (O, C, K)
    grad_bias = gb.sum(axis=(0, 2))

    grad_cols = np.tensordot(gb, weight, axes=([1], [0])).transpose(0, 2, 1, 3)  # (B, C, L_out, K)
    grad_xp = np.zeros_like(xp)
    last = stride * (out_len - 1) + 1
    for j in range(kernel):
        grad_xp[:, :, j:j + last:stride] += grad_cols[:, :, :, j]
    grad_x = grad_xp[:, :, padding:padding + xb.shape[2]]
    grad_x = np.ascontiguousarray(grad_x)
    return (grad_x[0] if squeeze else grad_x), grad_weight, grad_bias


# ==============================================================================
# ReLU E MAX-POOLING
# ==============================================================================
@ensure_finite
def relu_fwd(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


@ensure_finite
def relu_bwd(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0)


@ensure_finite
@validate_array(min_ndim=2)
def maxpool_fwd(x: np.ndarray, kernel: int = 2, stride: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """Max-pooling 1-D com a regra do piso (última janela inteiramente contida).

    Returns:
        (saída, posições absolutas dos máximos); em empate vale a primeira posição.
    """
    xb, squeeze = _as_batch(x)
    if xb.shape[2] < kernel:
        raise ShapeMismatchError(f"maxpool: comprimento {xb.shape[2]} menor que a janela {kernel}.")
    indices = _window_indices(xb.shape[2], kernel, stride)
    windows = xb[:, :, indices]  # (B, C, L_out, K)
    arg = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
    positions = indices[np.arange(indices.shape[0])[None, None, :], arg]
    if squeeze:
        return out[0], positions[0]
    return out, positions


@ensure_finite
def maxpool_bwd(grad_out: np.ndarray, positions: np.ndarray, input_length: int) -> np.ndarray:
    gb, squeeze = _as_batch(grad_out)
    pb, _ = _as_batch(positions)
    batch, channels, out_len = gb.shape
    grad_x = np.zeros((batch * channels, input_length))
    rows = np.repeat(np.arange(batch * channels), out_len)
    np.add.at(grad_x, (rows, pb.reshape(-1)), gb.reshape(-1))
    grad_x = grad_x.reshape(batch, channels, input_length)
    return grad_x[0] if squeeze else grad_x


# ==============================================================================
# BATCH NORMALIZATION (somente o professor)
# ==============================================================================
@ensure_finite
@validate_array(ndim=3)
def batchnorm_fwd(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> Tuple[np.ndarray, Optional[dict]]:
    """Normalização por canal sobre (lote, comprimento).

    Em treino usa as estatísticas do lote e atualiza as médias móveis in-place
    (variância não enviesada); em inferência usa as médias móveis.
    """
    if training:
        count = x.shape[0] * x.shape[2]
        mean = x.mean(axis=(0, 2))
        var = x.var(axis=(0, 2))
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = (x - mean[None, :, None]) * inv_std[None, :, None]
        unbiased = var * count / max(count - 1, 1)
        running_mean *= (1.0 - momentum)
        running_mean += momentum * mean
        running_var *= (1.0 - momentum)
        running_var += momentum * unbiased
        cache = {'x_hat': x_hat, 'inv_std': inv_std}
    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        x_hat = (x - running_mean[None, :, None]) * inv_std[None, :, None]
        cache = {'x_hat': x_hat, 'inv_std': inv_std, 'frozen': True}
    return gamma[None, :, None] * x_hat + beta[None, :, None], cache


@ensure_finite
def batchnorm_bwd(grad_out: np.ndarray, gamma: np.ndarray, cache: dict) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradientes (grad_input, grad_gamma, grad_beta)."""
    x_hat, inv_std = cache['x_hat'], cache['inv_std']
    grad_gamma = (grad_out * x_hat).sum(axis=(0, 2))
    grad_beta = grad_out.sum(axis=(0, 2))
    grad_x_hat = grad_out * gamma[None, :, None]
    if cache.get('frozen'):
        return grad_x_hat * inv_std[None, :, None], grad_gamma, grad_beta
    count = grad_out.shape[0] * grad_out.shape[2]
    grad_x = (inv_std[None, :, None] / count) * (
        count * grad_x_hat
        - grad_x_hat.sum(axis=(0, 2))[None, :, None]
        - x_hat * (grad_x_hat * x_hat).sum(axis=(0, 2))[None, :, None]
    )
    return grad_x, grad_gamma, grad_beta


# ==============================================================================
# LINEAR E SOFTMAX
# ==============================================================================
@ensure_finite
def linear_fwd(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if x.shape[-1] != weight.shape[0]:
        raise ShapeMismatchError(f"linear: entrada {x.shape} incompatível com pesos {weight.shape}.")
    return x @ weight + bias


@ensure_finite
def linear_bwd(x: np.ndarray, weight: np.ndarray, grad_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    xb = np.atleast_2d(x)
    gb = np.atleast_2d(grad_out)
    grad_x = gb @ weight.T
    return grad_x.reshape(x.shape), xb.T @ gb, gb.sum(axis=0)


@ensure_finite
def softmax_T(logits: np.ndarray, T: float = 1.0) -> np.ndarray:
    """p_i = exp(z_i/T) / Σ_j exp(z_j/T) sobre o último eixo.

    Raises:
        ValueError: T <= 0.
    """
    if not T > 0:
        raise ValueError(f"softmax_T: temperatura deve ser > 0, recebido {T}.")
    z = np.asarray(logits, dtype=np.float64) / T
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_T(logits: np.ndarray, T: float = 1.0) -> np.ndarray:
    if not T > 0:
        raise ValueError(f"log_softmax_T: temperatura deve ser > 0, recebido {T}.")
    z = np.asarray(logits, dtype=np.float64) / T
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


# ==============================================================================
# CLASSES DE CAMADA
# ==============================================================================
class Layer(ABC):
    """Camada com parâmetros, gradientes acumulados no último backward e buffers."""

    kind = 'layer'

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.buffers: Dict[str, np.ndarray] = {}
        self._cache = None

    @abstractmethod
    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        ...

    @abstractmethod
    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def output_shape(self, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
        """Shape de saída (sem o eixo do lote)."""

    def macs(self, input_shape: Tuple[int, ...]) -> int:
        return 0

    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def _cached(self):
        if self._cache is None:
            raise RuntimeError(f"{type(self).__name__}.backward chamado antes de forward.")
        return self._cache


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv1d(Layer):
    kind = 'conv1d'

    def __init__(self, in_channels: int, out_channels: int, kernel: int, stride: int = 1, padding: int = 0,
                 rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel
        self.stride, self.padding = stride, padding
        self.params['weight'] = _uniform(rng, fan_in, (out_channels, in_channels, kernel))
        self.params['bias'] = _uniform(rng, fan_in, (out_channels,))

    def forward(self, x, training=False):
        self._cache = x
        return conv1d_forward(x, self.params['weight'], self.params['bias'], self.stride, self.padding)

    def backward(self, grad_out):
        grad_x, self.grads['weight'], self.grads['bias'] = conv1d_backward(
            self._cached(), self.params['weight'], grad_out, self.stride, self.padding
        )
        return grad_x

    def output_shape(self, input_shape):
        out_ch, _, kernel = self.params['weight'].shape
        return out_ch, conv_output_length(input_shape[-1], kernel, self.stride, self.padding)

    def macs(self, input_shape):
        out_ch, in_ch, kernel = self.params['weight'].shape
        return out_ch * in_ch * kernel * self.output_shape(input_shape)[-1]


class ReLU(Layer):
    kind = 'relu'

    def forward(self, x, training=False):
        self._cache = x
        return relu_fwd(x)

    def backward(self, grad_out):
        return relu_bwd(self._cached(), grad_out)

    def output_shape(self, input_shape):
        return tuple(input_shape)


class MaxPool1d(Layer):
    kind = 'maxpool1d'

    def __init__(self, kernel: int = 2, stride: int = 2):
        super().__init__()
        self.kernel, self.stride = kernel, stride

    def forward(self, x, training=False):
        out, positions = maxpool_fwd(x, self.kernel, self.stride)
        self._cache = (positions, x.shape[-1])
        return out

    def backward(self, grad_out):
        positions, length = self._cached()
        return maxpool_bwd(grad_out, positions, length)

    def output_shape(self, input_shape):
        return input_shape[0], (input_shape[-1] - self.kernel) // self.stride + 1


class BatchNorm1d(Layer):
    kind = 'batchnorm1d'

    def __init__(self, channels: int):
        super().__init__()
        self.params['gamma'] = np.ones(channels)
        self.params['beta'] = np.zeros(channels)
        self.buffers['running_mean'] = np.zeros(channels)
        self.buffers['running_var'] = np.ones(channels)

    def forward(self, x, training=False):
        out, self._cache = batchnorm_fwd(
            x, self.params['gamma'], self.params['beta'],
            self.buffers['running_mean'], self.buffers['running_var'], training,
        )
        return out

    def backward(self, grad_out):
        grad_x, self.grads['gamma'], self.grads['beta'] = batchnorm_bwd(grad_out, self.params['gamma'], self._cached())
        return grad_x

    def output_shape(self, input_shape):
        return tuple(input_shape)

    def macs(self, input_shape):
        return int(np.prod(input_shape))


class Flatten(Layer):
    kind = 'flatten'

    def forward(self, x, training=False):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._cached())

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)


class Linear(Layer):
    kind = 'linear'

    def __init__(self, in_features: int, out_features: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.params['weight'] = _uniform(rng, in_features, (in_features, out_features))
        self.params['bias'] = _uniform(rng, in_features, (out_features,))

    def forward(self, x, training=False):
        self._cache = x
        return linear_fwd(x, self.params['weight'], self.params['bias'])

    def backward(self, grad_out):
        grad_x, self.grads['weight'], self.grads['bias'] = linear_bwd(self._cached(), self.params['weight'], grad_out)
        return grad_x

    def output_shape(self, input_shape):
        return (self.params['weight'].shape[1],)

    def macs(self, input_shape):
        return int(self.params['weight'].size)
