"""Interface de linha de comando do toolkit.

Verbos:
    gen-data       gera (ou lê de CSV) os registros e monta um dataset por SNR
    train-teacher  treina o professor WDCNN
    distill        destila o professor no estudante (dkd, kd ou ce)
    quantize       calibra e quantiza o estudante em 16 bits (.bpgq)
    export-rom     grava as memórias hex da ROM
    simulate       executa o simulador do acelerador sobre o conjunto de teste
    eval           compara estudante float e quantizado (F1, precisão, revocação)
    bench          tempo de host por amostra × latência simulada
    sweep          varredura de hiperparâmetros de destilação

Precedência da configuração: padrões < `--config` < flags explícitas.
Cada comando trava o diretório de saída e grava um manifesto JSON com o hash
da configuração e dos artefatos consumidos e produzidos.
"""

import argparse
import itertools
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from bearing_pga.core.config import (
    RunConfig,
    config_hash,
    load_config_file,
    load_presets,
    parse_snr,
    render_config,
    run_config_from_flat,
)
from bearing_pga.core.exceptions import ArtifactMissingError, BearingPgaError, ConfigError
from bearing_pga.core.log_configurator import IndentedLogger, setup_custom_logging
from bearing_pga.core.utils import describe_environment, directory_lock, write_manifest
from bearing_pga.evaluation.metrics import EvalReport, quantization_drop_report
from bearing_pga.hardware.accelerator import Accelerator
from bearing_pga.hardware.quantize import (
    CalibrationOptions,
    calibrate,
    export_model,
    export_rom,
    import_model,
    load_rom,
    quantization_error_report,
    quantize_model,
    quantized_forward_batch,
)
from bearing_pga.models.checkpoint import load_checkpoint, save_checkpoint
from bearing_pga.models.networks import StudentNet, TeacherNet, compression_report, model_summary, predict_batched
from bearing_pga.processing.datasets import build_dataset, load_csv, load_dataset, save_dataset, synthetic_records
from bearing_pga.processing.profiling import create_dataset_report, create_spectrum_report
from bearing_pga.training.trainer import train_student, train_teacher

logger = IndentedLogger('bearing_pga.cli')

FLOAT_FORMAT = '%.10g'
LOG_FILE = 'bearing_pga.log'

# flag da CLI -> chave plana do RunConfig
FLAG_KEYS = {
    'seed': 'seed',
    'output_dir': 'output_dir',
    'log_level': 'log_level',
    'source': 'dataset.source',
    'presets': 'dataset.presets',
    'samples_per_class': 'dataset.samples_per_class',
    'hop': 'dataset.hop',
    'snr_list': 'dataset.snr_list',
    'teacher_epochs': 'teacher.epochs',
    'method': 'distill.method',
    'T': 'distill.T',
    'alpha': 'distill.alpha',
    'beta': 'distill.beta',
    'gamma': 'distill.gamma',
    'epochs': 'distill.epochs',
    'batch_size': 'distill.batch_size',
    'lr': 'distill.lr',
    'calibration_size': 'calibration.size',
    'margin_bits': 'calibration.margin_bits',
    'clock_hz': 'accel.clock_hz',
}


# ==============================================================================
# LAYOUT DE ARTEFATOS
# ==============================================================================
def dataset_tag(snr_db: float) -> str:
    """'clean' para o modo sem ruído, senão 'snr_<±n>db'."""
    if math.isinf(snr_db) and snr_db > 0:
        return 'clean'
    return f"snr_{snr_db:+g}db"


@dataclass(frozen=True)
class Workspace:
    root: Path
    tag: str

    @property
    def data(self) -> Path:
        return self.root / 'data' / self.tag

    @property
    def models(self) -> Path:
        return self.root / 'models' / self.tag

    @property
    def quant(self) -> Path:
        return self.root / 'quant' / self.tag

    @property
    def rom(self) -> Path:
        return self.root / 'rom' / self.tag

    @property
    def reports(self) -> Path:
        return self.root / 'reports' / self.tag

    @property
    def teacher_checkpoint(self) -> Path:
        return self.models / 'teacher.bpgf'

    @property
    def student_checkpoint(self) -> Path:
        return self.models / 'student.bpgf'

    @property
    def quantized_model(self) -> Path:
        return self.quant / 'student.bpgq'


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise ArtifactMissingError(f"Artefato '{path}' ausente; execute '{hint}' antes.")
    return path


def _manifest(cfg: RunConfig, directory: Path, command: str, inputs=(), outputs=(), extra=None) -> Path:
    return write_manifest(directory / f"manifest_{command}.json", command, config_hash(cfg), inputs, outputs, extra)


def _seed_rng(cfg: RunConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, stream])


# ==============================================================================
# COMANDOS
# ==============================================================================
def cmd_gen_data(cfg: RunConfig, args: argparse.Namespace) -> int:
    ds = cfg.dataset
    if ds.source == 'synthetic':
        presets = load_presets(ds.presets) if ds.presets else None
        with logger.stage(f"Gerando {ds.num_classes} registros sintéticos ({ds.samples_per_class} janelas por classe)."):
            records = synthetic_records(ds.num_classes, ds.samples_per_class, ds.hop, cfg.seed, presets, ds.sample_rate)
        inputs = []
    else:
        source = Path(ds.source)
        records = load_csv(source, ds.num_classes)
        inputs = [source]

    root = Path(cfg.output_dir)
    for snr_db in ds.snr_list:
        ws = Workspace(root, dataset_tag(snr_db))
        sample_set = build_dataset(records, ds.samples_per_class, ds.hop, snr_db, cfg.seed, ds.num_classes)
        outputs = list(save_dataset(sample_set, ws.data))
        outputs.append(_write_csv(create_dataset_report(sample_set), ws.data / 'dataset_report.csv'))
        outputs.append(_write_csv(create_spectrum_report(sample_set), ws.data / 'spectrum_report.csv'))
        _manifest(cfg, ws.data, 'gen-data', inputs, outputs, {'snr_db': str(snr_db), 'seed': cfg.seed})
        logger.info(f"Dataset '{ws.tag}' salvo em '{ws.data}' ({len(sample_set)} amostras).")
    return 0


def _load_data(ws: Workspace):
    _require(ws.data, 'gen-data')
    return load_dataset(ws.data)


def cmd_train_teacher(cfg: RunConfig, args: argparse.Namespace) -> int:
    ws = args.workspace
    data = _load_data(ws)
    teacher = TeacherNet(rng=_seed_rng(cfg, 1), num_classes=data.num_classes)
    teacher, history = train_teacher(teacher, data, cfg.teacher, seed=cfg.seed)
    outputs = [
        save_checkpoint(teacher, ws.teacher_checkpoint),
        _write_csv(history, ws.models / 'teacher_history.csv'),
        _write_csv(model_summary(teacher), ws.models / 'teacher_summary.csv'),
    ]
    _manifest(cfg, ws.models, 'train-teacher', [ws.data / 'spectra.bpgs'], outputs)
    return 0


def _distill(cfg: RunConfig, ws: Workspace, data, distill_config):
    teacher = None
    if distill_config.method != 'ce' and distill_config.alpha > 0:
        teacher = load_checkpoint(_require(ws.teacher_checkpoint, 'train-teacher'))
    student = StudentNet(rng=_seed_rng(cfg, 2), num_classes=data.num_classes)
    student, history = train_student(teacher, student, data, distill_config, seed=cfg.seed)
    return teacher, student, history


def cmd_distill(cfg: RunConfig, args: argparse.Namespace) -> int:
    ws = args.workspace
    data = _load_data(ws)
    teacher, student, history = _distill(cfg, ws, data, cfg.distill)
    outputs = [
        save_checkpoint(student, ws.student_checkpoint),
        _write_csv(history, ws.models / 'student_history.csv'),
        _write_csv(model_summary(student), ws.models / 'student_summary.csv'),
    ]
    inputs = [ws.data / 'spectra.bpgs']
    if teacher is not None:
        outputs.append(_write_csv(compression_report(teacher, student), ws.models / 'compression.csv'))
        inputs.append(ws.teacher_checkpoint)
    _manifest(cfg, ws.models, 'distill', inputs, outputs, {'student_parameters': student.param_count()})
    return 0


def cmd_quantize(cfg: RunConfig, args: argparse.Namespace) -> int:
    ws = args.workspace
    data = _load_data(ws)
    student = load_checkpoint(_require(ws.student_checkpoint, 'distill'))
    x_train, _ = data.subset('train')
    calibration_set = x_train[:cfg.calibration.size]
    options = CalibrationOptions(cfg.calibration.margin_bits, cfg.calibration.shared_fc_format)
    formats, calibration_report = calibrate(student, calibration_set, options)
    qm = quantize_model(student, formats)
    outputs = [
        export_model(qm, ws.quantized_model),
        _write_csv(calibration_report, ws.quant / 'calibration.csv'),
        _write_csv(quantization_error_report(student, qm), ws.quant / 'quantization_error.csv'),
    ]
    extra = {
        'calibration_samples': len(calibration_set),
        'float_parameter_bytes': 4 * student.param_count(),
        'quantized_parameter_bytes': qm.parameter_bytes,
    }
    _manifest(cfg, ws.quant, 'quantize', [ws.student_checkpoint, ws.data / 'spectra.bpgs'], outputs, extra)
    return 0


def cmd_export_rom(cfg: RunConfig, args: argparse.Namespace) -> int:
    ws = args.workspace
    qm = import_model(_require(ws.quantized_model, 'quantize'))
    export_rom(qm, ws.rom)
    outputs = [ws.rom / name for name in ('conv_weights.hex', 'fc_weights.hex', 'bias.hex')]
    _manifest(cfg, ws.rom, 'export-rom', [ws.quantized_model], outputs)
    return 0


def _test_inputs(data, limit: Optional[int]):
    x_test, y_test = data.subset('test')
    if limit is not None:
        x_test, y_test = x_test[:limit], y_test[:limit]
    return x_test, y_test


def cmd_simulate(cfg: RunConfig, args: argparse.Namespace) -> int:
    ws = args.workspace
    data = _load_data(ws)
    qm = import_model(_require(ws.quantized_model, 'quantize'))
    rom = load_rom(_require(ws.rom, 'export-rom'))
    x_test, y_test = _test_inputs(data, args.limit)

    accelerator = Accelerator(rom, qm.formats, cfg.accel)
    with logger.stage(f"Simulando o acelerador sobre {len(x_test)} amostras."):
        predictions, logits, reports = accelerator.run_batch(x_test)
        reference_logits, _ = quantized_forward_batch(qm, x_test)
        mismatches = int(np.count_nonzero(np.any(logits != reference_logits, axis=1)))
        logger.info(f"Divergências frente ao forward quantizado de referência: {mismatches}.")

    predictions_frame = pd.DataFrame({'INDEX': np.arange(len(x_test)), 'LABEL': y_test, 'PRED': predictions})
    for j in range(logits.shape[1]):
        predictions_frame[f"LOGIT_{j}"] = logits[:, j]
    report = reports[0] if reports else None
    outputs = [_write_csv(predictions_frame, ws.reports / 'simulate_predictions.csv')]
    if report is not None:
        cycles_txt = ws.reports / 'cycles.txt'
        cycles_txt.write_text(report.to_text(), encoding='utf-8')
        outputs += [cycles_txt, _write_csv(report.to_frame(), ws.reports / 'cycles.csv')]
    summary = EvalReport.from_predictions(y_test, predictions, data.num_classes).to_frame('acelerador')
    summary['DIVERGENCIAS'] = mismatches
    outputs.append(_write_csv(summary, ws.reports / 'simulate_summary.csv'))
    _manifest(cfg, ws.reports, 'simulate', [ws.quantized_model, ws.rom / 'conv_weights.hex'], outputs)
    if mismatches:
        raise BearingPgaError(f"Simulador divergiu do forward de referência em {mismatches} amostras.")
    return 0


def cmd_eval(cfg: RunConfig, args: argparse.Namespace) -> int:
    ws = args.workspace
    data = _load_data(ws)
    student = load_checkpoint(_require(ws.student_checkpoint, 'distill'))
    qm = import_model(_require(ws.quantized_model, 'quantize'))
    x_test, y_test = data.subset('test')

    _, float_pred = predict_batched(student, x_test)
    _, quant_pred = quantized_forward_batch(qm, x_test)
    float_report = EvalReport.from_predictions(y_test, float_pred, data.num_classes)
    quant_report = EvalReport.from_predictions(y_test, quant_pred, data.num_classes)
    outputs = [
        _write_csv(float_report.to_frame('float'), ws.reports / 'eval_float.csv'),
        _write_csv(quant_report.to_frame('quantizado'), ws.reports / 'eval_quantized.csv'),
        _write_csv(float_report.confusion_frame(), ws.reports / 'confusion_float.csv'),
        _write_csv(quant_report.confusion_frame(), ws.reports / 'confusion_quantized.csv'),
        _write_csv(quantization_drop_report(float_report, quant_report), ws.reports / 'quantization_drop.csv'),
    ]
    logger.info(f"F1 float {100 * float_report.f1:.2f} | quantizado {100 * quant_report.f1:.2f}.")

    if args.compare_no_kd:
        with logger.stage("Treinando estudante sem destilação para comparação."):
            _, baseline, _ = _distill(cfg, ws, data, replace(cfg.distill, method='ce'))
        _, base_pred = predict_batched(baseline, x_test)
        base_report = EvalReport.from_predictions(y_test, base_pred, data.num_classes)
        comparison = pd.concat([
            float_report.to_frame(f"estudante_{cfg.distill.method}"),
            base_report.to_frame('estudante_sem_kd'),
        ], ignore_index=True)
        outputs.append(_write_csv(comparison, ws.reports / 'kd_comparison.csv'))
        logger.info(f"F1 com {cfg.distill.method}: {100 * float_report.f1:.2f} | sem KD: {100 * base_report.f1:.2f}.")

    _manifest(cfg, ws.reports, 'eval', [ws.student_checkpoint, ws.quantized_model, ws.data / 'spectra.bpgs'], outputs)
    return 0


def cmd_bench(cfg: RunConfig, args: argparse.Namespace) -> int:
    ws = args.workspace
    data = _load_data(ws)
    student = load_checkpoint(_require(ws.student_checkpoint, 'distill'))
    qm = import_model(_require(ws.quantized_model, 'quantize'))
    rom = load_rom(_require(ws.rom, 'export-rom'))
    x_test, _ = _test_inputs(data, args.limit)
    if len(x_test) == 0:
        raise ConfigError("bench: conjunto de teste vazio.")

    start = time.perf_counter()
    for row in x_test:
        student.forward(row)
    host_float_us = (time.perf_counter() - start) / len(x_test) * 1e6

    start = time.perf_counter()
    quantized_forward_batch(qm, x_test)
    host_quant_us = (time.perf_counter() - start) / len(x_test) * 1e6

    _, _, report = Accelerator(rom, qm.formats, cfg.accel).run_inference(x_test[0])
    bench = pd.DataFrame([{
        'QT_AMOSTRAS': len(x_test),
        'HOST_FLOAT_US_POR_AMOSTRA': host_float_us,
        'HOST_QUANTIZADO_US_POR_AMOSTRA': host_quant_us,
        'CICLOS_POR_AMOSTRA': report.total,
        'CICLOS_CONV_FC': report.conv + report.fc,
        'CLOCK_HZ': report.clock_hz,
        'SIMULADO_US_POR_AMOSTRA': report.latency_us,
        'RAZAO_HOST_SIMULADO': host_float_us / report.latency_us,
        'POTENCIA': 'não modelada',
    }])
    path = _write_csv(bench, ws.reports / 'bench.csv')
    logger.info(f"Host {host_float_us:.1f} µs/amostra | simulado {report.latency_us:.2f} µs/amostra ({report.total} ciclos).")
    _manifest(cfg, ws.reports, 'bench', [ws.student_checkpoint, ws.quantized_model], [path])
    return 0


def cmd_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    ws = args.workspace
    data = _load_data(ws)
    x_test, y_test = data.subset('test')
    x_val, y_val = data.subset('val')
    sw = cfg.sweep
    grid = list(itertools.product(sw.T, sw.alpha, sw.beta, sw.gamma, sw.lr, sw.batch_size))
    rows = []
    with logger.stage(f"Varredura de {len(grid)} combinações."):
        for T, alpha, beta, gamma, lr, batch_size in grid:
            distill_config = replace(cfg.distill, T=T, alpha=alpha, beta=beta, gamma=gamma, lr=lr, batch_size=batch_size)
            _, student, _ = _distill(cfg, ws, data, distill_config)
            val = EvalReport.from_predictions(y_val, predict_batched(student, x_val)[1], data.num_classes)
            test = EvalReport.from_predictions(y_test, predict_batched(student, x_test)[1], data.num_classes)
            rows.append({
                'T': T, 'ALPHA': alpha, 'BETA': beta, 'GAMMA': gamma, 'LR': lr, 'BATCH_SIZE': batch_size,
                'VAL_F1': round(100 * val.f1, 4), 'TEST_F1': round(100 * test.f1, 4),
            })
    path = _write_csv(pd.DataFrame(rows), ws.reports / 'sweep.csv')
    _manifest(cfg, ws.reports, 'sweep', [ws.data / 'spectra.bpgs'], [path])
    return 0


COMMANDS = {
    'gen-data': cmd_gen_data,
    'train-teacher': cmd_train_teacher,
    'distill': cmd_distill,
    'quantize': cmd_quantize,
    'export-rom': cmd_export_rom,
    'simulate': cmd_simulate,
    'eval': cmd_eval,
    'bench': cmd_bench,
    'sweep': cmd_sweep,
}


# ==============================================================================
# PARSER E PONTO DE ENTRADA
# ==============================================================================
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="Arquivo 'chave = valor' com a configuração da execução.")
    common.add_argument('--set', action='append', default=[], metavar='CHAVE=VALOR',
                        help="Sobrescreve uma chave do RunConfig (repetível).")
    common.add_argument('--snr', help="SNR do dataset usado pelos comandos a jusante ('clean' ou dB).")
    for flag in FLAG_KEYS:
        common.add_argument(f"--{flag.replace('_', '-')}", dest=flag, default=None, help=f"Sobrescreve '{FLAG_KEYS[flag]}'.")

    parser = argparse.ArgumentParser(prog='bearing-pga', description="Toolkit de diagnóstico de rolamentos em FPGA.")
    sub = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        command = sub.add_parser(name, parents=[common])
        if name in ('simulate', 'bench'):
            command.add_argument('--limit', type=int, default=None, help="Número máximo de amostras de teste.")
        if name == 'eval':
            command.add_argument('--compare-no-kd', action='store_true',
                                 help="Treina também um estudante sem destilação e compara os F1.")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = run_config_from_flat(load_config_file(args.config), cfg)
    overrides: Dict[str, str] = {}
    for item in args.set:
        key, separator, value = item.partition('=')
        if not separator:
            raise ConfigError(f"--set espera CHAVE=VALOR, recebido '{item}'.")
        overrides[key.strip()] = value.strip()
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return run_config_from_flat(overrides, cfg) if overrides else cfg


def _selected_snr(cfg: RunConfig, text: Optional[str]) -> float:
    if text is None:
        return cfg.dataset.snr_list[0]
    try:
        return parse_snr(text)
    except ValueError as e:
        raise ConfigError(f"--snr inválido: '{text}'.") from e


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_custom_logging(args.log_level or 'INFO')
    try:
        cfg = resolve_config(args)
        setup_custom_logging(cfg.log_level, Path(cfg.output_dir) / LOG_FILE)
        logger.debug(describe_environment())
        logger.debug(f"Configuração efetiva:\n{render_config(cfg)}")
        args.workspace = Workspace(Path(cfg.output_dir), dataset_tag(_selected_snr(cfg, args.snr)))
        with directory_lock(cfg.output_dir):
            with logger.stage(f"Comando '{args.command}' (semente {cfg.seed}, saída '{cfg.output_dir}')."):
                return COMMANDS[args.command](cfg, args)
    except BearingPgaError as e:
        logger.error(str(e))
        return 1


def run() -> None:
    sys.exit(main())
