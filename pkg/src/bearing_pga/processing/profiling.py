"""Módulo de profiling para diagnóstico de datasets de espectros.

Gera relatórios 'tidy' sobre a composição e a qualidade de um `SampleSet`,
servindo de verificação rápida antes do treino (balanceamento de classes,
proporção 2:1:1, faixa dos valores que a calibração de ponto fixo verá).

Principais Funções:
-------------------
create_dataset_report:
    Contagem de amostras por classe e por divisão, com a proporção de cada
    divisão dentro da classe.

create_spectrum_report:
    Estatísticas globais dos espectros por divisão (mínimo, máximo, média,
    desvio e max|v|), úteis para antecipar o formato de entrada.
"""

import numpy as np
import pandas as pd

from bearing_pga.processing.datasets import SPLITS, SampleSet


def create_dataset_report(sample_set: SampleSet) -> pd.DataFrame:
    """Gera a tabela de contagens por classe e divisão.

    Args:
        sample_set (SampleSet): O dataset a ser analisado.

    Returns:
        pd.DataFrame: Uma linha por classe com as colunas:
            - CLASSE: índice da classe;
            - QT_TRAIN, QT_VAL, QT_TEST: contagem por divisão;
            - QT_TOTAL: soma das divisões;
            - %_TRAIN: percentual de treino dentro da classe.
    """
    frame = pd.DataFrame({'CLASSE': sample_set.labels, 'SPLIT': sample_set.split})
    counts = (
        frame.groupby(['CLASSE', 'SPLIT']).size()
        .unstack(fill_value=0)
        .reindex(index=range(sample_set.num_classes), columns=list(SPLITS), fill_value=0)
    )
    report = pd.DataFrame({
        'CLASSE': counts.index,
        'QT_TRAIN': counts['train'].to_numpy(),
        'QT_VAL': counts['val'].to_numpy(),
        'QT_TEST': counts['test'].to_numpy(),
    })
    report['QT_TOTAL'] = report[['QT_TRAIN', 'QT_VAL', 'QT_TEST']].sum(axis=1)
    report['%_TRAIN'] = np.where(
        report['QT_TOTAL'] > 0, report['QT_TRAIN'] / report['QT_TOTAL'].clip(lower=1) * 100, 0.0
    ).round(1)
    return report.reset_index(drop=True)


def create_spectrum_report(sample_set: SampleSet) -> pd.DataFrame:
    """Estatísticas dos valores de entrada por divisão."""
    report_data = []
    for name in SPLITS:
        x, _ = sample_set.subset(name)
        if x.size == 0:
            continue
        report_data.append({
            'SPLIT': name,
            'QT_AMOSTRAS': len(x),
            'VALOR_MINIMO': float(x.min()),
            'VALOR_MAXIMO': float(x.max()),
            'MEDIA': float(x.mean()),
            'DESVIO_PADRAO': float(x.std()),
            'MAX_ABS': float(np.abs(x).max()),
        })
    return pd.DataFrame(report_data).round(4)
