"""Testes da CLI: pipeline completo em escala mínima, erros e precedência de configuração."""

import math

import pandas as pd
import pytest

from bearing_pga.cli import Workspace, build_parser, dataset_tag, main, resolve_config
from bearing_pga.core.utils import read_manifest

PIPELINE = ['gen-data', 'train-teacher', 'distill', 'quantize', 'export-rom', 'simulate', 'eval', 'bench']


def small_args(root):
    return [
        '--output-dir', str(root), '--samples-per-class', '4', '--snr-list', 'clean',
        '--teacher-epochs', '1', '--epochs', '2', '--batch-size', '16', '--log-level', 'WARNING',
    ]


@pytest.fixture(scope='module')
def pipeline_root(tmp_path_factory):
    root = tmp_path_factory.mktemp('run')
    for command in PIPELINE:
        extra = ['--limit', '3'] if command in ('simulate', 'bench') else []
        assert main([command, *small_args(root), *extra]) == 0, command
    return root


class TestDatasetTag:

    @pytest.mark.parametrize("snr, tag", [(math.inf, 'clean'), (8.0, 'snr_+8db'), (0.0, 'snr_+0db'), (-4.0, 'snr_-4db'), (2.5, 'snr_+2.5db')])
    def test_tags(self, snr, tag):
        assert dataset_tag(snr) == tag


# ==============================================================================
# PIPELINE PONTA A PONTA
# ==============================================================================
class TestPipeline:

    def test_artifacts_exist(self, pipeline_root):
        ws = Workspace(pipeline_root, 'clean')
        expected = [
            ws.data / 'spectra.bpgs', ws.data / 'samples.csv', ws.data / 'dataset_report.csv',
            ws.teacher_checkpoint, ws.models / 'teacher_history.csv',
            ws.student_checkpoint, ws.models / 'student_history.csv', ws.models / 'compression.csv',
            ws.quantized_model, ws.quant / 'calibration.csv', ws.quant / 'quantization_error.csv',
            ws.rom / 'conv_weights.hex', ws.rom / 'fc_weights.hex', ws.rom / 'bias.hex',
            ws.reports / 'simulate_predictions.csv', ws.reports / 'cycles.txt',
            ws.reports / 'eval_float.csv', ws.reports / 'quantization_drop.csv', ws.reports / 'bench.csv',
        ]
        missing = [str(path) for path in expected if not path.is_file()]
        assert not missing
        assert not (pipeline_root / '.lock').exists()

    def test_reports_content(self, pipeline_root):
        ws = Workspace(pipeline_root, 'clean')
        assert 'total=577' in (ws.reports / 'cycles.txt').read_text(encoding='utf-8')
        history = pd.read_csv(ws.models / 'student_history.csv')
        assert len(history) == 2
        predictions = pd.read_csv(ws.reports / 'simulate_predictions.csv')
        assert len(predictions) == 3
        summary = pd.read_csv(ws.reports / 'simulate_summary.csv')
        assert summary['DIVERGENCIAS'].iloc[0] == 0
        bench = pd.read_csv(ws.reports / 'bench.csv')
        assert bench['CICLOS_POR_AMOSTRA'].iloc[0] == 577
        evaluation = pd.read_csv(ws.reports / 'eval_float.csv')
        assert evaluation['QT_AMOSTRAS'].iloc[0] == 10

    def test_manifests(self, pipeline_root):
        ws = Workspace(pipeline_root, 'clean')
        quantize = read_manifest(ws.quant / 'manifest_quantize.json')
        assert quantize['extra']['quantized_parameter_bytes'] * 2 == quantize['extra']['float_parameter_bytes']
        assert 'student.bpgq' in quantize['outputs']
        distill = read_manifest(ws.models / 'manifest_distill.json')
        assert distill['extra']['student_parameters'] == 2830
        assert distill['config_sha256'] == quantize['config_sha256']

    def test_rerun_is_reproducible(self, pipeline_root, tmp_path):
        for command in ('gen-data', 'train-teacher', 'distill'):
            assert main([command, *small_args(tmp_path)]) == 0
        for name in ('teacher_history.csv', 'student_history.csv'):
            first = (Workspace(pipeline_root, 'clean').models / name).read_bytes()
            second = (Workspace(tmp_path, 'clean').models / name).read_bytes()
            assert first == second

    def test_compare_without_distillation(self, pipeline_root):
        assert main(['eval', *small_args(pipeline_root), '--compare-no-kd']) == 0
        comparison = pd.read_csv(Workspace(pipeline_root, 'clean').reports / 'kd_comparison.csv')
        assert list(comparison['MODELO']) == ['estudante_dkd', 'estudante_sem_kd']


# ==============================================================================
# ERROS E CONFIGURAÇÃO
# ==============================================================================
class TestErrors:

    def test_missing_artifact_returns_one(self, tmp_path):
        assert main(['gen-data', *small_args(tmp_path)]) == 0
        assert main(['quantize', *small_args(tmp_path)]) == 1
        assert main(['simulate', *small_args(tmp_path), '--snr', '0']) == 1

    def test_invalid_values_return_one(self, tmp_path):
        assert main(['gen-data', *small_args(tmp_path), '--alpha', '2']) == 1
        assert main(['gen-data', *small_args(tmp_path), '--set', 'distill.T']) == 1
        assert main(['gen-data', *small_args(tmp_path), '--set', 'nope.key=1']) == 1

    def test_locked_directory(self, tmp_path):
        (tmp_path / '.lock').write_text('123')
        assert main(['gen-data', *small_args(tmp_path)]) == 1


class TestResolveConfig:

    def test_precedence(self, tmp_path):
        config_file = tmp_path / 'run.cfg'
        config_file.write_text("distill.alpha = 0.1\ndistill.T = 3\nseed = 4\n", encoding='utf-8')
        args = build_parser().parse_args([
            'distill', '--config', str(config_file), '--set', 'distill.alpha=0.5', '--set', 'distill.T=5', '--T', '6',
        ])
        cfg = resolve_config(args)
        assert cfg.seed == 4
        assert cfg.distill.alpha == 0.5
        assert cfg.distill.T == 6.0

    def test_defaults_without_overrides(self):
        cfg = resolve_config(build_parser().parse_args(['eval']))
        assert cfg.dataset.snr_list[0] == math.inf
        assert cfg.distill.method == 'dkd'
