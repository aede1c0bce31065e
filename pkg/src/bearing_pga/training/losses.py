"""Funções de perda de classificação e destilação com gradientes analíticos.

Convenções:
    - `teacher_logits` / `student_logits`: (C,) ou (B, C); `labels`: int ou (B,);
    - perdas por lote são a média sobre as amostras;
    - TCKD e NCKD são KLs não negativas, de modo que
      KL(pT‖pS) = TCKD + pT_{/t}·NCKD vale exatamente;
    - o termo de CE usa probabilidades a T = 1.

Principais Funções:
-------------------
ce_loss / kl_loss:
    Entropia cruzada e KL(pT‖pS) sobre distribuições já normalizadas.

kd_loss / kd_grad:
    KD clássica: (1-α)·CE + α·T²·KL(pT(T)‖pS(T)).

split_target / tckd_loss / nckd_loss:
    Decomposição das probabilidades em classe-alvo e não-alvo.

dkd_loss / dkd_grad:
    (1-α)·CE + α·T²·(β·TCKD + γ·NCKD); β e γ aceitam valores por amostra.

distillation_objective:
    Perda e gradiente em relação aos logits do estudante para o método
    configurado (dkd, kd ou ce).
"""

from typing import Optional, Tuple, Union

import numpy as np

from bearing_pga.core.config import DistillConfig
from bearing_pga.core.exceptions import ShapeMismatchError
from bearing_pga.models.layers import log_softmax_T, softmax_T

ArrayLike = Union[float, np.ndarray]


def _as_batch(logits: np.ndarray, labels) -> Tuple[np.ndarray, np.ndarray, bool]:
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    z2 = z[None, :] if single else z
    t = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if z2.ndim != 2 or t.shape != (z2.shape[0],):
        raise ShapeMismatchError(f"Logits {z.shape} incompatíveis com rótulos {t.shape}.")
    if t.size and (t.min() < 0 or t.max() >= z2.shape[1]):
        raise ShapeMismatchError(f"Rótulo fora de [0, {z2.shape[1]}).")
    return z2, t, single


def _one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    onehot = np.zeros((labels.size, num_classes))
    onehot[np.arange(labels.size), labels] = 1.0
    return onehot


def _non_target(values: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Remove a coluna da classe-alvo: (B, C) -> (B, C-1)."""
    mask = np.ones(values.shape, dtype=bool)
    mask[np.arange(values.shape[0]), labels] = False
    return values[mask].reshape(values.shape[0], values.shape[1] - 1)


def _logsumexp(values: np.ndarray) -> np.ndarray:
    peak = values.max(axis=-1, keepdims=True)
    return (peak + np.log(np.exp(values - peak).sum(axis=-1, keepdims=True)))[..., 0]


# ==============================================================================
# PERDAS BÁSICAS
# ==============================================================================
def ce_loss(target_onehot: np.ndarray, probs: np.ndarray) -> float:
    """-Σ y_i·log p_i (média sobre o lote)."""
    y = np.atleast_2d(np.asarray(target_onehot, dtype=np.float64))
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    terms = np.where(y > 0, -y * np.log(np.where(y > 0, p, 1.0)), 0.0)
    return float(terms.sum(axis=1).mean())


def kl_loss(p_teacher: np.ndarray, p_student: np.ndarray) -> float:
    """KL(pT‖pS) = -Σ pT·log(pS/pT) (média sobre o lote); termos com pT = 0 contribuem 0."""
    pt = np.atleast_2d(np.asarray(p_teacher, dtype=np.float64))
    ps = np.atleast_2d(np.asarray(p_student, dtype=np.float64))
    safe_pt = np.where(pt > 0, pt, 1.0)
    terms = np.where(pt > 0, pt * (np.log(safe_pt) - np.log(np.where(pt > 0, ps, 1.0))), 0.0)
    return float(terms.sum(axis=1).mean())


def _ce_terms(student_logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    log_p = log_softmax_T(student_logits, 1.0)
    return -log_p[np.arange(labels.size), labels]


def _kl_terms(teacher_logits: np.ndarray, student_logits: np.ndarray, T: float) -> np.ndarray:
    log_pt = log_softmax_T(teacher_logits, T)
    log_ps = log_softmax_T(student_logits, T)
    return (np.exp(log_pt) * (log_pt - log_ps)).sum(axis=1)


def kd_loss(teacher_logits: np.ndarray, student_logits: np.ndarray, labels, T: float, alpha: float) -> float:
    """(1-α)·CE(y, pS) + α·T²·KL(pT(T)‖pS(T))."""
    zs, t, _ = _as_batch(student_logits, labels)
    zt, _, _ = _as_batch(teacher_logits, labels)
    terms = (1.0 - alpha) * _ce_terms(zs, t) + alpha * T * T * _kl_terms(zt, zs, T)
    return float(terms.mean())


def kd_grad(teacher_logits: np.ndarray, student_logits: np.ndarray, labels, T: float, alpha: float) -> np.ndarray:
    """Gradiente de `kd_loss` em relação aos logits do estudante."""
    zs, t, single = _as_batch(student_logits, labels)
    zt, _, _ = _as_batch(teacher_logits, labels)
    grad = (1.0 - alpha) * (softmax_T(zs, 1.0) - _one_hot(t, zs.shape[1]))
    grad = grad + alpha * T * (softmax_T(zs, T) - softmax_T(zt, T))
    grad /= zs.shape[0]
    return grad[0] if single else grad


# ==============================================================================
# DECOMPOSIÇÃO ALVO / NÃO-ALVO
# ==============================================================================
def split_target(probs: np.ndarray, t) -> Tuple[ArrayLike, ArrayLike, np.ndarray]:
    """
    Separa as probabilidades em (p_t, p_{/t}, p̂), com p̂_i = p_i / p_{/t} para i ≠ t.

    Args:
        probs: (C,) ou (B, C).
        t: índice da classe-alvo (int ou (B,)).

    Returns:
        p_t e p_{/t} (escalares ou (B,)) e p̂ com C-1 entradas por amostra.
    """
    p, labels, single = _as_batch(probs, t)
    p_t = p[np.arange(labels.size), labels]
    others = _non_target(p, labels)
    p_not_t = others.sum(axis=1)
    p_hat = others / p_not_t[:, None]
    if single:
        return float(p_t[0]), float(p_not_t[0]), p_hat[0]
    return p_t, p_not_t, p_hat


def _target_log_probs(logits: np.ndarray, labels: np.ndarray, T: float):
    """log p_t, log p_{/t} e log p̂ calculados diretamente dos logits (estável)."""
    z = logits / T
    total = _logsumexp(z)
    rest = _non_target(z, labels)
    rest_total = _logsumexp(rest)
    log_pt = z[np.arange(labels.size), labels] - total
    log_pnt = rest_total - total
    log_hat = rest - rest_total[:, None]
    return log_pt, log_pnt, log_hat


def _tckd_terms(teacher_logits, student_logits, labels, T) -> np.ndarray:
    t_pt, t_pnt, _ = _target_log_probs(teacher_logits, labels, T)
    s_pt, s_pnt, _ = _target_log_probs(student_logits, labels, T)
    return np.exp(t_pt) * (t_pt - s_pt) + np.exp(t_pnt) * (t_pnt - s_pnt)


def _nckd_terms(teacher_logits, student_logits, labels, T) -> np.ndarray:
    _, _, t_hat = _target_log_probs(teacher_logits, labels, T)
    _, _, s_hat = _target_log_probs(student_logits, labels, T)
    return (np.exp(t_hat) * (t_hat - s_hat)).sum(axis=1)


def tckd_loss(teacher_logits: np.ndarray, student_logits: np.ndarray, labels, T: float) -> float:
    """KL binária entre (p_t, p_{/t}) do professor e do estudante."""
    zs, t, _ = _as_batch(student_logits, labels)
    zt, _, _ = _as_batch(teacher_logits, labels)
    return float(_tckd_terms(zt, zs, t, T).mean())


def nckd_loss(teacher_logits: np.ndarray, student_logits: np.ndarray, labels, T: float) -> float:
    """KL entre as distribuições renormalizadas das classes não-alvo."""
    zs, t, _ = _as_batch(student_logits, labels)
    zt, _, _ = _as_batch(teacher_logits, labels)
    return float(_nckd_terms(zt, zs, t, T).mean())


def dkd_terms(teacher_logits: np.ndarray, student_logits: np.ndarray, labels, T: float) -> dict:
    """Termos por amostra: CE (T=1), TCKD, NCKD e a massa não-alvo do professor."""
    zs, t, _ = _as_batch(student_logits, labels)
    zt, _, _ = _as_batch(teacher_logits, labels)
    _, t_pnt, _ = _target_log_probs(zt, t, T)
    return {
        'ce': _ce_terms(zs, t),
        'tckd': _tckd_terms(zt, zs, t, T),
        'nckd': _nckd_terms(zt, zs, t, T),
        'teacher_not_target': np.exp(t_pnt),
    }


def _weights(config: DistillConfig, beta: Optional[ArrayLike], gamma: Optional[ArrayLike]):
    b = config.beta if beta is None else np.asarray(beta, dtype=np.float64)
    g = config.gamma if gamma is None else np.asarray(gamma, dtype=np.float64)
    return b, g


def dkd_loss(
    teacher_logits: np.ndarray,
    student_logits: np.ndarray,
    labels,
    config: DistillConfig,
    beta: Optional[ArrayLike] = None,
    gamma: Optional[ArrayLike] = None,
) -> float:
    """
    (1-α)·CE + α·T²·(β·TCKD + γ·NCKD), média sobre o lote.

    `beta` / `gamma` substituem os valores do config e podem ser arrays por
    amostra (ex.: γ_i = pT_{/t} com β = 1 recupera o termo KL da KD clássica).
    """
    terms = dkd_terms(teacher_logits, student_logits, labels, config.T)
    b, g = _weights(config, beta, gamma)
    T, alpha = config.T, config.alpha
    per_sample = (1.0 - alpha) * terms['ce'] + alpha * T * T * (b * terms['tckd'] + g * terms['nckd'])
    return float(np.mean(per_sample))


def dkd_grad(
    teacher_logits: np.ndarray,
    student_logits: np.ndarray,
    labels,
    config: DistillConfig,
    beta: Optional[ArrayLike] = None,
    gamma: Optional[ArrayLike] = None,
) -> np.ndarray:
    """Gradiente analítico de `dkd_loss` em relação aos logits do estudante.

    Com q = softmax(zS/T), r = softmax(zT/T) e q̂, r̂ as distribuições não-alvo:
        ∂TCKD/∂(z/T): q_t - r_t no alvo; q̂_j·(r_t - q_t) fora dele;
        ∂NCKD/∂(z/T): q̂_j - r̂_j fora do alvo; 0 no alvo.
    """
    zs, t, single = _as_batch(student_logits, labels)
    zt, _, _ = _as_batch(teacher_logits, labels)
    T, alpha = config.T, config.alpha
    b, g = _weights(config, beta, gamma)
    b = np.broadcast_to(b, (zs.shape[0],))[:, None]
    g = np.broadcast_to(g, (zs.shape[0],))[:, None]
    rows = np.arange(t.size)
    num_classes = zs.shape[1]

    grad_ce = softmax_T(zs, 1.0) - _one_hot(t, num_classes)

    q = softmax_T(zs, T)
    r = softmax_T(zt, T)
    q_t, r_t = q[rows, t], r[rows, t]
    _, _, s_hat = _target_log_probs(zs, t, T)
    _, _, t_hat = _target_log_probs(zt, t, T)
    q_hat = np.exp(s_hat)
    r_hat = np.exp(t_hat)

    mask = np.ones((t.size, num_classes), dtype=bool)
    mask[rows, t] = False

    grad_tckd = np.zeros_like(zs)
    grad_tckd[rows, t] = q_t - r_t
    grad_tckd[mask] = (q_hat * (r_t - q_t)[:, None]).reshape(-1)

    grad_nckd = np.zeros_like(zs)
    grad_nckd[mask] = (q_hat - r_hat).reshape(-1)

    grad = (1.0 - alpha) * grad_ce + alpha * T * (b * grad_tckd + g * grad_nckd)
    grad /= zs.shape[0]
    return grad[0] if single else grad


# ==============================================================================
# OBJETIVO DE TREINO
# ==============================================================================
def ce_objective(student_logits: np.ndarray, labels) -> Tuple[float, np.ndarray]:
    zs, t, single = _as_batch(student_logits, labels)
    loss = float(_ce_terms(zs, t).mean())
    grad = (softmax_T(zs, 1.0) - _one_hot(t, zs.shape[1])) / zs.shape[0]
    return loss, (grad[0] if single else grad)


def distillation_objective(
    student_logits: np.ndarray,
    labels,
    config: DistillConfig,
    teacher_logits: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """
    Perda e gradiente do lote para o método configurado.

    Sem professor, com α = 0 ou com `method='ce'`, cai no caminho de entropia
    cruzada pura, idêntico ao de um treino sem destilação.
    """
    if teacher_logits is None or config.method == 'ce' or config.alpha == 0.0:
        return ce_objective(student_logits, labels)
    if config.method == 'kd':
        return (
            kd_loss(teacher_logits, student_logits, labels, config.T, config.alpha),
            kd_grad(teacher_logits, student_logits, labels, config.T, config.alpha),
        )
    return (
        dkd_loss(teacher_logits, student_logits, labels, config),
        dkd_grad(teacher_logits, student_logits, labels, config),
    )
