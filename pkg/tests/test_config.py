"""Testes da configuração plana, dos presets e dos utilitários de artefatos."""

import json
import math
from pathlib import Path

import pytest

from bearing_pga.core.config import (
    DEFAULT_PRESETS,
    AcceleratorConfig,
    CalibrationConfig,
    DatasetConfig,
    DistillConfig,
    RunConfig,
    SyntheticPreset,
    TrainConfig,
    config_hash,
    load_config_file,
    load_presets,
    parse_snr,
    render_config,
    run_config_from_flat,
)
from bearing_pga.core.exceptions import ArtifactMissingError, ConfigError
from bearing_pga.core.log_configurator import IndentedLogger, setup_custom_logging
from bearing_pga.core.utils import (
    describe_environment,
    directory_lock,
    read_manifest,
    sha256_bytes,
    sha256_file,
    write_manifest,
)

ARTIFACTS = Path(__file__).resolve().parents[1] / 'artifacts'


class TestConfigFile:

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text("# cabeçalho\n\nseed = 3   # semente\ndistill.T=4\n", encoding='utf-8')
        assert load_config_file(path) == {'seed': '3', 'distill.T': '4'}

    def test_line_without_separator(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text("seed = 1\nsomente texto\n", encoding='utf-8')
        with pytest.raises(ConfigError, match=':2:'):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / 'absent.cfg')

    def test_shipped_default_run(self):
        cfg = run_config_from_flat(load_config_file(ARTIFACTS / 'default_run.cfg'))
        assert cfg.dataset.snr_list == (math.inf, 8.0, 4.0, 0.0)
        assert cfg.accel.clock_hz == 100e6
        assert cfg.sweep.batch_size == (32, 64, 128, 256)
        assert cfg.distill == DistillConfig()


# ==============================================================================
# CONVERSÃO E VALIDAÇÃO
# ==============================================================================
class TestRunConfig:

    @pytest.mark.parametrize("text, expected", [('clean', math.inf), ('INF', math.inf), ('+inf', math.inf), ('-4', -4.0)])
    def test_parse_snr(self, text, expected):
        assert parse_snr(text) == expected

    @pytest.mark.parametrize("text", ['nan', '-inf', 'ruido'])
    def test_parse_snr_rejects(self, text):
        with pytest.raises(ValueError):
            parse_snr(text)

    def test_only_snr_keys_accept_clean(self):
        cfg = run_config_from_flat({'dataset.snr_list': 'clean', 'accel.clock_hz': '50e6', 'distill.lr': '0.02'})
        assert cfg.dataset.snr_list == (math.inf,)
        assert cfg.accel.clock_hz == 50e6
        assert cfg.distill.lr == 0.02

    def test_flat_keys_override_base(self):
        base = RunConfig(seed=5)
        cfg = run_config_from_flat({'distill.alpha': '0.5', 'dataset.snr_list': 'clean, 0', 'log_level': 'DEBUG'}, base)
        assert cfg.seed == 5
        assert cfg.distill.alpha == 0.5
        assert cfg.distill.T == 2.5
        assert cfg.dataset.snr_list == (math.inf, 0.0)
        assert cfg.log_level == 'DEBUG'

    def test_bool_and_optional(self):
        cfg = run_config_from_flat({'calibration.shared_fc_format': 'off', 'dataset.presets': 'none'})
        assert cfg.calibration.shared_fc_format is False
        assert cfg.dataset.presets is None

    @pytest.mark.parametrize("values", [
        {'nope.x': '1'},
        {'distill.unknown': '1'},
        {'colour': 'red'},
        {'teacher.epochs': 'many'},
        {'calibration.shared_fc_format': 'maybe'},
        {'distill.method': 'fitnet'},
        {'distill.alpha': '1.5'},
        {'distill.lr': 'clean'},
        {'teacher.lr': 'nan'},
        {'dataset.snr_list': 'clean, -inf'},
        {'dataset.snr_list': '0, nan'},
    ])
    def test_rejected_values(self, values):
        with pytest.raises(ConfigError):
            run_config_from_flat(values)

    def test_render_round_trip(self, tmp_path):
        cfg = run_config_from_flat({'seed': '9', 'distill.T': '4', 'dataset.snr_list': 'clean, 8, -2'})
        path = tmp_path / 'rendered.cfg'
        path.write_text(render_config(cfg), encoding='utf-8')
        assert run_config_from_flat(load_config_file(path)) == cfg

    def test_render_is_sorted_and_hash_stable(self):
        lines = render_config(RunConfig()).splitlines()
        keys = [line.split(' = ')[0] for line in lines]
        assert keys == sorted(keys)
        assert config_hash(RunConfig()) == config_hash(RunConfig())
        assert config_hash(RunConfig()) != config_hash(RunConfig(seed=1))
        assert len(config_hash(RunConfig())) == 64

    def test_section_validation(self):
        with pytest.raises(ConfigError):
            DatasetConfig(samples_per_class=3)
        with pytest.raises(ConfigError):
            DatasetConfig(num_classes=1)
        with pytest.raises(ConfigError):
            DatasetConfig(snr_list=())
        with pytest.raises(ConfigError):
            DistillConfig(T=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(momentum=1.0)
        with pytest.raises(ConfigError):
            CalibrationConfig(margin_bits=16)
        with pytest.raises(ConfigError):
            RunConfig(seed=-1)

    def test_control_cycles(self):
        assert AcceleratorConfig().control_cycles == 51
        assert AcceleratorConfig(control_overhead_cycles=14).control_cycles == 0


class TestPresets:

    def test_shipped_presets_match_defaults(self):
        assert load_presets(ARTIFACTS / 'synthetic_presets.json') == DEFAULT_PRESETS
        assert len(DEFAULT_PRESETS) == 10

    def test_malformed_presets(self, tmp_path):
        path = tmp_path / 'presets.json'
        path.write_text(json.dumps([{'name': 'x'}]), encoding='utf-8')
        with pytest.raises(ConfigError):
            load_presets(path)
        path.write_text('[]', encoding='utf-8')
        with pytest.raises(ConfigError):
            load_presets(path)
        path.write_text('{', encoding='utf-8')
        with pytest.raises(ConfigError):
            load_presets(path)

    def test_resonance_above_nyquist(self):
        entry = dict(name='x', impact_rate_hz=100.0, resonance_hz=7000.0, decay_per_s=500.0,
                     impact_amplitude=1.0, noise_std=0.1)
        with pytest.raises(ConfigError):
            SyntheticPreset(modulation_hz=0.0, harmonics=(), **entry)


# ==============================================================================
# UTILITÁRIOS DE ARTEFATOS
# ==============================================================================
class TestArtifacts:

    def test_sha256(self, tmp_path):
        path = tmp_path / 'a.bin'
        path.write_bytes(b'abc')
        assert sha256_file(path) == sha256_bytes(b'abc')
        assert sha256_bytes(b'abc').startswith('ba7816bf')
        with pytest.raises(ArtifactMissingError):
            sha256_file(tmp_path / 'absent.bin')

    def test_manifest_is_deterministic(self, tmp_path):
        data = tmp_path / 'data'
        data.mkdir()
        source = data / 'in.csv'
        source.write_text('x\n')
        target = tmp_path / 'reports' / 'out.csv'
        target.parent.mkdir()
        target.write_text('y\n')
        first = write_manifest(tmp_path / 'reports' / 'manifest_eval.json', 'eval', 'f' * 64, [source], [target], {'n': 1})
        content = first.read_bytes()
        write_manifest(first, 'eval', 'f' * 64, [source], [target], {'n': 1})
        assert first.read_bytes() == content

        manifest = read_manifest(first)
        assert manifest['command'] == 'eval'
        assert manifest['inputs'] == {'../data/in.csv': sha256_file(source)}
        assert list(manifest['outputs']) == ['out.csv']
        assert manifest['extra'] == {'n': 1}

    def test_manifest_requires_existing_files(self, tmp_path):
        with pytest.raises(ArtifactMissingError):
            write_manifest(tmp_path / 'm.json', 'eval', '0' * 64, [tmp_path / 'absent.csv'])
        with pytest.raises(ArtifactMissingError):
            read_manifest(tmp_path / 'm.json')

    def test_directory_lock_is_exclusive(self, tmp_path):
        with directory_lock(tmp_path / 'run') as root:
            assert (root / '.lock').is_file()
            with pytest.raises(ConfigError):
                with directory_lock(root):
                    pass
            assert (root / '.lock').is_file()
        assert not (tmp_path / 'run' / '.lock').exists()

    def test_environment_table(self):
        table = describe_environment()
        assert 'numpy' in table and 'colorlog' in table
        assert 'Versão do Python' in table


class TestLogging:

    def test_stage_indents_and_writes_file(self, tmp_path):
        log_file = tmp_path / 'logs' / 'run.log'
        setup_custom_logging('DEBUG', log_file)
        logger = IndentedLogger('bearing_pga.test')
        with logger.stage("etapa externa"):
            logger.info("dentro")
            with logger.stage("etapa interna"):
                logger.info("mais fundo")
        logger.info("fora")
        setup_custom_logging('INFO')
        lines = log_file.read_text(encoding='utf-8').splitlines()
        messages = [line.rsplit(' | ', 1)[-1] for line in lines]
        assert messages[:4] == ["etapa externa", "╰> dentro", "╰> etapa interna", "   ╰─> mais fundo"]
        assert messages[-1] == "fora"
        assert any("concluída em" in message for message in messages)

    def test_indentation_restored_after_error(self):
        logger = IndentedLogger('bearing_pga.test')
        with pytest.raises(ConfigError):
            with logger.stage("falha"):
                raise ConfigError("x")
        assert logger.indent_level == 0
