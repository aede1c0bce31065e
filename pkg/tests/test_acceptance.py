"""Execuções de bancada ponta a ponta (marcadas como `slow`; rode com `pytest -m slow`)."""

import numpy as np
import pandas as pd
import pytest

from bearing_pga.cli import Workspace, main

pytestmark = pytest.mark.slow

SEEDS = [0, 1, 2, 3, 4]


def desk_args(root, seed, snr):
    return [
        '--output-dir', str(root), '--seed', str(seed), '--samples-per-class', '120', '--snr-list', snr,
        '--teacher-epochs', '15', '--epochs', '40', '--batch-size', '32', '--lr', '0.05',
        '--set', 'teacher.lr=0.05', '--set', 'teacher.batch_size=32', '--log-level', 'WARNING',
    ]


@pytest.fixture(scope='module', params=SEEDS, ids=lambda seed: f"seed{seed}")
def desk_run(request, tmp_path_factory):
    root = tmp_path_factory.mktemp(f"desk{request.param}")
    args = desk_args(root, request.param, 'clean')
    for command in ('gen-data', 'train-teacher', 'distill', 'quantize', 'export-rom', 'eval'):
        assert main([command, *args]) == 0, command
    assert main(['simulate', *args, '--limit', '50']) == 0
    return Workspace(root, 'clean')


@pytest.fixture(scope='module')
def noisy_comparison(tmp_path_factory):
    """F1 (%) do estudante DKD e do estudante sem KD a 0 dB, uma linha por semente."""
    rows = []
    for seed in SEEDS:
        root = tmp_path_factory.mktemp(f"noisy{seed}")
        args = desk_args(root, seed, '0')
        for command in ('gen-data', 'train-teacher', 'distill', 'quantize'):
            assert main([command, *args]) == 0, command
        assert main(['eval', *args, '--compare-no-kd']) == 0
        comparison = pd.read_csv(Workspace(root, 'snr_+0db').reports / 'kd_comparison.csv').set_index('MODELO')
        rows.append({'SEED': seed, 'DKD': comparison.loc['estudante_dkd', 'F1'],
                     'SEM_KD': comparison.loc['estudante_sem_kd', 'F1']})
    return pd.DataFrame(rows)


class TestDeskScale:

    def test_distilled_student_f1_on_clean_data(self, desk_run):
        evaluation = pd.read_csv(desk_run.reports / 'eval_float.csv')
        assert evaluation['F1'].iloc[0] >= 95.0

    def test_quantization_drop_within_one_point(self, desk_run):
        drop = pd.read_csv(desk_run.reports / 'quantization_drop.csv').set_index('METRICA')
        assert drop.loc['F1', 'QUEDA'] <= 1.0

    def test_simulator_agrees_with_reference(self, desk_run):
        summary = pd.read_csv(desk_run.reports / 'simulate_summary.csv')
        assert summary['DIVERGENCIAS'].iloc[0] == 0


class TestDistillationUnderNoise:

    def test_dkd_beats_plain_student_at_0db(self, noisy_comparison):
        assert len(noisy_comparison) == len(SEEDS)
        assert np.mean(noisy_comparison['DKD']) >= np.mean(noisy_comparison['SEM_KD']) + 1.0
