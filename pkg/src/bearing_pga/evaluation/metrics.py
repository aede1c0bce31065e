"""Métricas de classificação macro (F1, precisão, revocação) e relatórios de avaliação.

F1 por classe = 2·TP / (2·TP + FP + FN); a média é simples sobre as C classes.
Classes sem suporte e sem predições (TP = FP = FN = 0) contribuem com 0.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from bearing_pga.core.exceptions import ShapeMismatchError


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> np.ndarray:
    """Matriz C×C de contagens: linhas = classe verdadeira, colunas = classe prevista."""
    truth = np.asarray(y_true, dtype=np.int64)
    predicted = np.asarray(y_pred, dtype=np.int64)
    if truth.shape != predicted.shape:
        raise ShapeMismatchError(f"Rótulos {truth.shape} e predições {predicted.shape} com tamanhos diferentes.")
    if truth.size and (min(truth.min(), predicted.min()) < 0 or max(truth.max(), predicted.max()) >= num_classes):
        raise ShapeMismatchError(f"Classes fora de [0, {num_classes}).")
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (truth, predicted), 1)
    return matrix


def _counts(confusion: np.ndarray):
    matrix = np.asarray(confusion, dtype=np.int64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeMismatchError(f"Matriz de confusão deve ser quadrada, recebido {matrix.shape}.")
    tp = np.diag(matrix)
    fp = matrix.sum(axis=0) - tp
    fn = matrix.sum(axis=1) - tp
    return tp, fp, fn


def _safe_ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    return np.divide(numerator, denominator, out=np.zeros(numerator.shape, dtype=np.float64), where=denominator > 0)


def per_class_f1(confusion: np.ndarray) -> np.ndarray:
    tp, fp, fn = _counts(confusion)
    return _safe_ratio(2.0 * tp, 2 * tp + fp + fn)


def per_class_precision(confusion: np.ndarray) -> np.ndarray:
    tp, fp, _ = _counts(confusion)
    return _safe_ratio(tp.astype(np.float64), tp + fp)


def per_class_recall(confusion: np.ndarray) -> np.ndarray:
    tp, _, fn = _counts(confusion)
    return _safe_ratio(tp.astype(np.float64), tp + fn)


def f1_macro(confusion: np.ndarray) -> float:
    return float(per_class_f1(confusion).mean())


def precision_macro(confusion: np.ndarray) -> float:
    return float(per_class_precision(confusion).mean())


def recall_macro(confusion: np.ndarray) -> float:
    return float(per_class_recall(confusion).mean())


def macro_f1_score(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> float:
    return f1_macro(confusion_matrix(y_true, y_pred, num_classes))


@dataclass(frozen=True)
class EvalReport:
    f1: float
    precision: float
    recall: float
    confusion: np.ndarray
    count: int

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> 'EvalReport':
        confusion = confusion_matrix(y_true, y_pred, num_classes)
        return cls(
            f1=f1_macro(confusion),
            precision=precision_macro(confusion),
            recall=recall_macro(confusion),
            confusion=confusion,
            count=int(confusion.sum()),
        )

    def to_frame(self, label: Optional[str] = None) -> pd.DataFrame:
        """Uma linha com F1, PRECISAO, REVOCACAO (em pontos percentuais) e QT_AMOSTRAS."""
        row = {
            'F1': round(100.0 * self.f1, 4),
            'PRECISAO': round(100.0 * self.precision, 4),
            'REVOCACAO': round(100.0 * self.recall, 4),
            'QT_AMOSTRAS': self.count,
        }
        if label is not None:
            row = {'MODELO': label, **row}
        return pd.DataFrame([row])

    def confusion_frame(self) -> pd.DataFrame:
        size = self.confusion.shape[0]
        frame = pd.DataFrame(self.confusion, columns=[f"PRED_{j}" for j in range(size)])
        frame.insert(0, 'CLASSE', range(size))
        return frame

    def per_class_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'CLASSE': range(self.confusion.shape[0]),
            'F1': per_class_f1(self.confusion).round(4),
            'PRECISAO': per_class_precision(self.confusion).round(4),
            'REVOCACAO': per_class_recall(self.confusion).round(4),
            'SUPORTE': self.confusion.sum(axis=1),
        })


def quantization_drop_report(float_report: EvalReport, quantized_report: EvalReport) -> pd.DataFrame:
    """Comparação float × quantizado, com a queda em pontos percentuais por métrica."""
    rows = []
    for metric, attribute in (('F1', 'f1'), ('PRECISAO', 'precision'), ('REVOCACAO', 'recall')):
        before = 100.0 * getattr(float_report, attribute)
        after = 100.0 * getattr(quantized_report, attribute)
        rows.append({
            'METRICA': metric,
            'FLOAT': round(before, 4),
            'QUANTIZADO': round(after, 4),
            'QUEDA': round(before - after, 4),
        })
    return pd.DataFrame(rows)
