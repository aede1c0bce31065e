"""Laço de treino por mini-lotes: professor supervisionado e estudante destilado.

Principais Funções:
-------------------
fit:
    SGD com momento e LR em cosseno; ao fim de cada época mede o F1 macro de
    validação e guarda o melhor estado. Devolve o histórico como DataFrame
    (EPOCH, LR, TRAIN_LOSS, VAL_F1).

train_teacher:
    Treino supervisionado do professor WDCNN.

train_student:
    Treino do estudante contra o objetivo de destilação configurado, com o
    professor congelado avaliado em modo de inferência.
"""

from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from bearing_pga.core.config import DistillConfig, TrainConfig
from bearing_pga.core.exceptions import DatasetFormatError
from bearing_pga.core.log_configurator import IndentedLogger
from bearing_pga.evaluation.metrics import macro_f1_score
from bearing_pga.models.networks import Network, StudentNet, TeacherNet, predict_batched
from bearing_pga.models.optim import SgdState, sgd_step
from bearing_pga.processing.datasets import SampleSet
from bearing_pga.training.losses import ce_objective, distillation_objective

HISTORY_COLUMNS = ['EPOCH', 'LR', 'TRAIN_LOSS', 'VAL_F1']

logger = IndentedLogger(__name__)


def _require_split(data: SampleSet, name: str) -> Tuple[np.ndarray, np.ndarray]:
    x, y = data.subset(name)
    if len(x) == 0:
        raise DatasetFormatError(f"Divisão '{name}' vazia; impossível treinar.")
    return x, y


def fit(
    model: Network,
    data: SampleSet,
    config: Union[TrainConfig, DistillConfig],
    seed: int = 0,
    teacher_logits: Optional[np.ndarray] = None,
) -> Tuple[Network, pd.DataFrame]:
    """
    Treina `model` in-place e restaura o estado de melhor F1 de validação.

    Args:
        model (Network): Rede a treinar.
        data (SampleSet): Dataset com divisões 'train' e 'val' não vazias.
        config: Hiperparâmetros de otimização (e de destilação, se `DistillConfig`).
        seed (int): Semente do embaralhamento dos lotes.
        teacher_logits (np.ndarray, optional): Logits do professor alinhados às
            amostras de treino; ausentes => entropia cruzada pura.

    Returns:
        (Network, pd.DataFrame): o modelo no melhor estado e o histórico por época.

    Raises:
        DatasetFormatError: divisão de treino ou validação vazia.
    """
    x_train, y_train = _require_split(data, 'train')
    x_val, y_val = _require_split(data, 'val')
    distill = config if isinstance(config, DistillConfig) else None
    if teacher_logits is not None and len(teacher_logits) != len(x_train):
        raise DatasetFormatError("Logits do professor desalinhados com o conjunto de treino.")

    rng = np.random.default_rng(seed)
    state = SgdState(base_lr=config.lr, total_epochs=config.epochs, momentum=config.momentum)
    best_f1, best_state = -1.0, model.state_dict()
    history = []

    for epoch in range(config.epochs):
        lr = state.lr
        order = rng.permutation(len(x_train))
        loss_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            index = order[start:start + config.batch_size]
            logits = model.forward(x_train[index], training=True)
            if distill is None:
                loss, grad = ce_objective(logits, y_train[index])
            else:
                batch_teacher = None if teacher_logits is None else teacher_logits[index]
                loss, grad = distillation_objective(logits, y_train[index], distill, batch_teacher)
            model.backward(grad)
            sgd_step(model.parameters(), model.gradients(), state)
            loss_sum += loss * len(index)

        _, predictions = predict_batched(model, x_val)
        val_f1 = macro_f1_score(y_val, predictions, data.num_classes)
        train_loss = loss_sum / len(x_train)
        history.append({'EPOCH': epoch + 1, 'LR': lr, 'TRAIN_LOSS': train_loss, 'VAL_F1': val_f1})
        logger.debug(f"Época {epoch + 1}/{config.epochs}: lr={lr:.5f} perda={train_loss:.5f} F1 val={val_f1:.4f}")
        if val_f1 > best_f1:
            best_f1, best_state = val_f1, model.state_dict()
        state.next_epoch()

    model.load_state_dict(best_state)
    logger.info(f"Melhor F1 de validação: {best_f1:.4f}.")
    return model, pd.DataFrame(history, columns=HISTORY_COLUMNS)


def train_teacher(
    teacher: TeacherNet,
    data: SampleSet,
    config: TrainConfig,
    seed: int = 0,
) -> Tuple[TeacherNet, pd.DataFrame]:
    with logger.stage(f"Treinando professor ({teacher.param_count()} parâmetros, {config.epochs} épocas)."):
        return fit(teacher, data, config, seed)


def train_student(
    teacher: Optional[Network],
    student: StudentNet,
    data: SampleSet,
    config: DistillConfig,
    seed: int = 0,
) -> Tuple[StudentNet, pd.DataFrame]:
    """
    Destila o professor congelado no estudante.

    Os logits do professor são calculados uma única vez, em modo de inferência,
    para todas as amostras de treino. Com `teacher=None`, `method='ce'` ou
    α = 0 o treino é supervisionado puro.
    """
    x_train, _ = _require_split(data, 'train')
    uses_teacher = teacher is not None and config.method != 'ce' and config.alpha > 0
    method = config.method if uses_teacher else 'ce'
    with logger.stage(f"Treinando estudante (método={method}, T={config.T}, α={config.alpha}, "
                      f"β={config.beta}, γ={config.gamma})."):
        teacher_logits = predict_batched(teacher, x_train)[0] if uses_teacher else None
        return fit(student, data, config, seed, teacher_logits)
