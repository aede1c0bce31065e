"""Testes das redes estudante/professor, do SGD e do checkpoint BPGF."""

import math

import numpy as np
import pytest

from bearing_pga.core.exceptions import ArtifactMissingError, ModelFormatError, ShapeMismatchError
from bearing_pga.models.checkpoint import load_checkpoint, save_checkpoint
from bearing_pga.models.networks import (
    StudentNet,
    TeacherNet,
    build_model,
    compression_report,
    model_summary,
    predict,
    predict_batched,
)
from bearing_pga.models.optim import SgdState, cosine_lr, sgd_step


class TestStudentNet:

    def test_parameter_count(self, student):
        assert student.param_count() == 2830
        assert student.conv.params['weight'].shape == (4, 1, 64)
        assert student.fc.params['weight'].shape == (256, 10)

    def test_batch_of_one_matches_single(self, student, spectra):
        batch = student.forward(spectra)
        assert batch.shape == (6, 10)
        single = student.forward(spectra[2])
        assert single.shape == (10,)
        assert np.allclose(single, batch[2])
        assert np.array_equal(predict(student, spectra), np.argmax(batch, axis=1))

    def test_forward_stages(self, student, spectra):
        stages = student.forward_stages(spectra)
        assert stages['conv_out'].shape == (6, 4, 128)
        assert stages['pooled'].shape == (6, 4, 64)
        assert np.all(stages['pooled'] >= 0)
        assert np.allclose(stages['logits'], student.forward(spectra))

    def test_wrong_input_length(self, student):
        with pytest.raises(ShapeMismatchError):
            student.forward(np.zeros(1000))

    def test_predict_batched_chunks(self, student, spectra):
        logits, predictions = predict_batched(student, spectra, chunk=4)
        assert np.allclose(logits, student.forward(spectra))
        assert predictions.shape == (6,)

    def test_end_to_end_gradient(self, student, spectra):
        """Gradiente da soma ponderada dos logits contra diferenças finitas em alguns pesos."""
        upstream = np.random.default_rng(0).normal(size=(6, 10))
        student.forward(spectra, training=True)
        student.backward(upstream)
        grads = student.gradients()
        weight = student.conv.params['weight']
        for index in [(0, 0, 0), (2, 0, 31), (3, 0, 63)]:
            original = weight[index]
            weight[index] = original + 1e-6
            plus = np.sum(student.forward(spectra) * upstream)
            weight[index] = original - 1e-6
            minus = np.sum(student.forward(spectra) * upstream)
            weight[index] = original
            assert grads['conv.weight'][index] == pytest.approx((plus - minus) / 2e-6, rel=1e-4, abs=1e-6)


class TestTeacherNet:

    def test_size_and_shape(self, spectra):
        teacher = TeacherNet(rng=np.random.default_rng(0))
        assert teacher.param_count() == 50_090
        assert teacher.forward(spectra).shape == (6, 10)

    def test_without_hidden_fc(self, spectra):
        teacher = TeacherNet(rng=np.random.default_rng(0), fc_hidden=0)
        assert teacher.param_count() == 50_090 - (64 * 48 + 48 + 48 * 10 + 10) + (64 * 10 + 10)
        assert 'fc_hidden.weight' not in teacher.parameters()
        assert teacher.forward(spectra).shape == (6, 10)

    def test_training_then_inference(self, spectra):
        teacher = TeacherNet(rng=np.random.default_rng(0))
        teacher.forward(spectra, training=True)
        teacher.backward(np.ones((6, 10)))
        assert set(teacher.gradients()) == set(teacher.parameters())
        first = teacher.forward(spectra[:1])
        assert np.allclose(first[0], teacher.forward(spectra)[0])

    def test_exhausting_channel_plan(self):
        with pytest.raises(ShapeMismatchError):
            TeacherNet(channels=(8,) * 12)

    def test_summary_and_compression(self, student):
        teacher = TeacherNet(rng=np.random.default_rng(0))
        summary = model_summary(student)
        assert list(summary.columns) == ['CAMADA', 'TIPO', 'SAIDA', 'QT_PARAMETROS', 'QT_MACS']
        total = summary.iloc[-1]
        assert total['CAMADA'] == 'TOTAL'
        assert total['QT_PARAMETROS'] == 2830
        assert total['QT_MACS'] == 4 * 64 * 128 + 256 * 10
        report = compression_report(teacher, student)
        assert report['RAZAO_PARAMETROS'].iloc[1] == pytest.approx(teacher.param_count() / 2830, abs=0.01)
        assert report['FLOPS'].iloc[1] == 2 * total['QT_MACS']


# ==============================================================================
# OTIMIZADOR
# ==============================================================================
class TestOptim:

    def test_cosine_endpoints(self):
        assert cosine_lr(0, 75, 0.1) == pytest.approx(0.1)
        assert cosine_lr(75, 75, 0.1) == pytest.approx(0.0, abs=1e-15)
        assert cosine_lr(25, 50, 0.1) == pytest.approx(0.05)

    def test_two_momentum_steps(self):
        params = {'w': np.array([1.0, -2.0])}
        state = SgdState(base_lr=0.1, total_epochs=1000, momentum=0.9)
        lr = state.lr
        g1, g2 = np.array([0.5, 1.0]), np.array([-1.0, 2.0])
        sgd_step(params, {'w': g1}, state)
        sgd_step(params, {'w': g2}, state)
        expected = np.array([1.0, -2.0]) - lr * g1 - lr * (0.9 * g1 + g2)
        assert np.allclose(params['w'], expected)

    def test_learning_rate_follows_epoch(self):
        state = SgdState(base_lr=0.2, total_epochs=4)
        state.next_epoch()
        assert state.lr == pytest.approx(0.1 * (1 + math.cos(math.pi / 4)))

    def test_shape_mismatch(self):
        state = SgdState(0.1, 1)
        with pytest.raises(ShapeMismatchError):
            sgd_step({'w': np.zeros(3)}, {'w': np.zeros(2)}, state)
        with pytest.raises(ShapeMismatchError):
            sgd_step({'w': np.zeros(3)}, {}, state)


# ==============================================================================
# CHECKPOINT
# ==============================================================================
class TestCheckpoint:

    def test_student_round_trip(self, tmp_path, student, spectra):
        path = save_checkpoint(student, tmp_path / 'student.bpgf')
        assert path.read_bytes()[:4] == b'BPGF'
        restored = load_checkpoint(path)
        assert isinstance(restored, StudentNet)
        assert np.allclose(restored.forward(spectra), student.forward(spectra), atol=1e-4)

    def test_teacher_round_trip_keeps_running_stats(self, tmp_path, spectra):
        teacher = TeacherNet(rng=np.random.default_rng(1))
        teacher.forward(spectra, training=True)
        restored = load_checkpoint(save_checkpoint(teacher, tmp_path / 'teacher.bpgf'))
        assert isinstance(restored, TeacherNet)
        assert restored.fc_hidden == 48
        assert restored.param_count() == teacher.param_count()
        assert np.allclose(restored.forward(spectra), teacher.forward(spectra), atol=1e-4)
        for name, value in teacher.buffers().items():
            assert np.allclose(restored.buffers()[name], value, atol=1e-6)

    def test_errors(self, tmp_path, student):
        with pytest.raises(ArtifactMissingError):
            load_checkpoint(tmp_path / 'absent.bpgf')
        path = save_checkpoint(student, tmp_path / 'student.bpgf')
        payload = path.read_bytes()
        path.write_bytes(b'NOPE' + payload[4:])
        with pytest.raises(ModelFormatError):
            load_checkpoint(path)
        path.write_bytes(payload[:-8])
        with pytest.raises(ModelFormatError):
            load_checkpoint(path)

    def test_unknown_architecture(self):
        with pytest.raises(ModelFormatError):
            build_model({'kind': 'transformer'})
