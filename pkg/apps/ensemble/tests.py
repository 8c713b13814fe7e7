# -*- coding: utf-8 -*-
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
import torch
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.test import SimpleTestCase

from apps.classifiers.services.architectures import Architecture, ModelConfig, build_classifier
from apps.classifiers.services.cells import REPORT_FILE, SNAPSHOT_FILE
from apps.classifiers.services.labels import ClassLabel, ClassWeights, severity_argmax, validate_probabilities
from apps.classifiers.services.snapshots import SubmodelReport, relative_path, save_snapshot
from apps.classifiers.services.training import TrainingSettings
from apps.embeddings.services.featurizers import EmbeddingSpec, build_featurizer
from apps.ensemble.services.inference import (
    EnsembleManifest,
    EnsemblePrediction,
    load_ensemble,
    predict_ensemble,
    predict_ensemble_batch,
)
from apps.ensemble.services.stacking import (
    Stacker,
    StackerFit,
    build_features,
    load_stacker,
    save_stacker,
    select_models,
    train_stacker,
)
from apps.evaluation.services.metrics import f1_macro
from apps.textnorm.services.normalization import clean

UNIFORM = ClassWeights(1.0, 1.0, 1.0)
FAST = TrainingSettings(epochs=100, patience=20, batch_size=32, learning_rate=1e-2)


def stub_report(model_id, dev_f1=0.7, probabilities=None, n=6, ids=None, labels=None):
    if probabilities is None:
        probabilities = np.full((n, 3), 1 / 3)
    n = len(probabilities)
    return SubmodelReport(
        model_id=model_id,
        dev_f1=dev_f1,
        dev_ids=ids or [f's{i}' for i in range(n)],
        dev_labels=labels or [i % 3 for i in range(n)],
        dev_probabilities=probabilities,
    )


def confident(labels, rng, level=0.8):
    rows = np.full((len(labels), 3), (1 - level) / 2)
    rows[np.arange(len(labels)), labels] = level
    rows += rng.uniform(0, 0.02, size=rows.shape)
    return rows / rows.sum(axis=1, keepdims=True)


def fixed_stacker(probabilities, model_ids=()):
    """Modèle d'ensemble dont la sortie vaut ``probabilities`` quelle que soit l'entrée."""
    model = Stacker(3 * max(1, len(model_ids)), hidden=4)
    with torch.no_grad():
        for layer in (model.hidden, model.output):
            layer.weight.zero_()
        model.hidden.bias.zero_()
        model.output.bias.copy_(torch.log(torch.tensor(probabilities)))
    return StackerFit(model, 1.0, 0.0, list(model_ids))


class StubRunner:

    def __init__(self, model_id, rows):
        self.model_id = model_id
        self.rows = np.asarray(rows, dtype=np.float64)
        self.seen = None

    def predict_proba(self, cleaned_texts):
        self.seen = list(cleaned_texts)
        return self.rows[:len(cleaned_texts)]


class GateTests(SimpleTestCase):

    def setUp(self):
        self.reports = [
            stub_report('sarnn__comment_tokenize', 0.7167),
            stub_report('bilstm__roberta', 0.6345),
            stub_report('textcnn__comment_bpe', 0.6700),
            stub_report('vdcnn__fasttext', 0.6912),
        ]

    def test_reference_threshold(self):
        selected = select_models(self.reports, 0.67)
        self.assertEqual(selected, ['sarnn__comment_tokenize', 'vdcnn__fasttext'])
        self.assertNotIn('bilstm__roberta', selected)
        # Inégalité stricte
        self.assertNotIn('textcnn__comment_bpe', selected)

    def test_nothing_exceeds_one(self):
        with self.assertRaises(ValidationError) as ctx:
            select_models(self.reports, 1.0)
        self.assertEqual(ctx.exception.code, 'no_models_pass_gate')

    def test_zero_selects_all(self):
        self.assertEqual(select_models(self.reports, 0.0), sorted(report.model_id for report in self.reports))

    def test_monotonic(self):
        previous = None
        for threshold in np.linspace(0.0, 0.7, 15):
            selected = set(select_models(self.reports, float(threshold)))
            if previous is not None:
                self.assertLessEqual(selected, previous)
            previous = selected

    def test_invalid_threshold(self):
        with self.assertRaises(ValidationError) as ctx:
            select_models(self.reports, 1.5)
        self.assertEqual(ctx.exception.code, 'invalid_threshold')


class FeatureTests(SimpleTestCase):

    def setUp(self):
        rng = np.random.default_rng(0)
        self.reports = [
            stub_report(f'textcnn__e{m}', 0.7, rng.dirichlet(np.ones(3), size=8)) for m in range(5)
        ]

    def test_width(self):
        ids = [report.model_id for report in self.reports]
        features, labels, sample_ids = build_features(ids, self.reports)
        self.assertEqual(features.shape, (8, 15))
        self.assertEqual(sample_ids, [f's{i}' for i in range(8)])
        self.assertEqual(labels.tolist(), [i % 3 for i in range(8)])
        for m in range(5):
            np.testing.assert_allclose(features[:, 3 * m:3 * m + 3].sum(axis=1), 1.0, atol=1e-6)

    def test_single_model_is_identity(self):
        report = stub_report('sarnn__x', 0.7, np.array([[0.2, 0.3, 0.5]]))
        features, _, _ = build_features(['sarnn__x'], [report])
        np.testing.assert_array_equal(features, [[0.2, 0.3, 0.5]])

    def test_report_order_does_not_matter(self):
        ids = [report.model_id for report in self.reports]
        expected, _, _ = build_features(ids, self.reports)
        shuffled, _, _ = build_features(list(reversed(ids)), list(reversed(self.reports)))
        np.testing.assert_array_equal(shuffled, expected)

    def test_sample_mismatch(self):
        permuted = stub_report('bilstm__y', 0.7, n=8, ids=[f's{i}' for i in reversed(range(8))])
        with self.assertRaises(ValidationError) as ctx:
            build_features(['textcnn__e0', 'bilstm__y'], self.reports + [permuted])
        self.assertEqual(ctx.exception.code, 'sample_mismatch')

    def test_unknown_model(self):
        with self.assertRaises(ValidationError) as ctx:
            build_features(['lstmcnn__z'], self.reports)
        self.assertEqual(ctx.exception.code, 'unknown_model')


class StackerTests(SimpleTestCase):

    def test_learns_first_slice(self):
        rng = np.random.default_rng(1)
        labels = np.repeat([0, 1, 2], 100)
        features = np.concatenate([confident(labels, rng), rng.dirichlet(np.ones(3), size=300)], axis=1)
        fit = train_stacker(features, labels, UNIFORM, seed=2, settings=FAST, model_ids=['a', 'b'])
        self.assertGreaterEqual(fit.fit_f1, 0.99)
        self.assertEqual(fit.model_ids, ['a', 'b'])
        self.assertEqual(fit.model.hidden_size, 128)

    def test_complementary_errors(self):
        rng = np.random.default_rng(3)
        labels = np.tile([0, 1, 2], 80)
        half = len(labels) // 2
        wrong = (labels + 1) % 3

        def hesitant(rows_labels):
            rows = np.full((len(rows_labels), 3), 0.2)
            rows[np.arange(len(rows_labels)), (rows_labels + 1) % 3] = 0.45
            rows[np.arange(len(rows_labels)), rows_labels] = 0.35
            return rows

        first = np.vstack([confident(labels[:half], rng), hesitant(labels[half:])])
        second = np.vstack([hesitant(labels[:half]), confident(labels[half:], rng)])
        singles = [
            f1_macro([int(severity_argmax(row)) for row in outputs], labels.tolist())
            for outputs in (first, second)
        ]
        self.assertTrue(all(np.array([int(severity_argmax(r)) for r in first[half:]]) == wrong[half:]))

        fit = train_stacker(np.hstack([first, second]), labels, UNIFORM, seed=4, settings=FAST)
        self.assertGreaterEqual(fit.fit_f1, max(singles) - 0.01)

    def test_outputs_are_probabilities(self):
        model = Stacker(6)
        rows = np.random.default_rng(5).normal(scale=50.0, size=(20, 6))
        validate_probabilities(model.predict_proba(rows))

    def test_errors(self):
        with self.assertRaises(ValidationError) as ctx:
            train_stacker(np.full((4, 3), 1 / 3), [1, 1, 1, 1])
        self.assertEqual(ctx.exception.code, 'single_class')
        with self.assertRaises(ValidationError) as ctx:
            train_stacker(np.full((1, 3), 1 / 3), [1])
        self.assertEqual(ctx.exception.code, 'too_few_samples')
        with self.assertRaises(ValidationError) as ctx:
            train_stacker(np.full((3, 3), 1 / 3), [0, 1])
        self.assertEqual(ctx.exception.code, 'length_mismatch')

    def test_save_and_load(self):
        fit = fixed_stacker([0.2, 0.5, 0.3], model_ids=['a'])
        rows = np.random.default_rng(6).dirichlet(np.ones(3), size=4)
        with tempfile.TemporaryDirectory() as tmp:
            loaded = load_stacker(save_stacker(Path(tmp) / 'stacker.pt', fit))
        self.assertEqual(loaded.model_ids, ['a'])
        np.testing.assert_allclose(loaded.model.predict_proba(rows), fit.model.predict_proba(rows), atol=1e-7)
        with self.assertRaises(ValidationError) as ctx:
            load_stacker('/nonexistent/stacker.pt')
        self.assertEqual(ctx.exception.code, 'missing_snapshot')


class PredictionTests(SimpleTestCase):

    def runners(self):
        return [StubRunner('a__x', [[0.7, 0.2, 0.1]] * 2), StubRunner('b__y', [[0.1, 0.1, 0.8]] * 2)]

    def test_argmax(self):
        prediction = predict_ensemble(fixed_stacker([0.9, 0.05, 0.05], ['a__x', 'b__y']), self.runners(), 'ok')
        self.assertEqual(prediction.label, ClassLabel.CLEAN)

    def test_severity_tie_break(self):
        prediction = predict_ensemble(fixed_stacker([0.4, 0.4, 0.2], ['a__x', 'b__y']), self.runners(), 'hmm')
        self.assertEqual(prediction.label, ClassLabel.OFFENSIVE)
        self.assertEqual(prediction.as_line(), 'offensive\t0.400000\t0.400000\t0.200000')

    def test_output_equals_stacker_on_feature_row(self):
        torch.manual_seed(0)
        stacker = StackerFit(Stacker(6, hidden=8), 1.0, 0.0, ['a__x', 'b__y'])
        runners = self.runners()
        predictions = predict_ensemble_batch(stacker, runners, ['Thíêt Kế VL', 'hay'])
        expected = stacker.model.predict_proba(np.hstack([runners[0].rows, runners[1].rows]))
        np.testing.assert_array_equal(np.vstack([p.probabilities for p in predictions]), expected)
        self.assertEqual(runners[0].seen, [clean('Thíêt Kế VL'), 'hay'])

    def test_threads_give_same_result(self):
        stacker = fixed_stacker([0.2, 0.3, 0.5], ['a__x', 'b__y'])
        serial = predict_ensemble_batch(stacker, self.runners(), ['a', 'b'])
        threaded = predict_ensemble_batch(stacker, self.runners(), ['a', 'b'], workers=2)
        self.assertEqual([p.as_line() for p in serial], [p.as_line() for p in threaded])

    def test_submodel_mismatch(self):
        with self.assertRaises(ValidationError) as ctx:
            predict_ensemble_batch(fixed_stacker([0.2, 0.3, 0.5], ['b__y', 'a__x']), self.runners(), ['a'])
        self.assertEqual(ctx.exception.code, 'submodel_mismatch')

    def test_empty_input(self):
        self.assertEqual(predict_ensemble_batch(fixed_stacker([0.2, 0.3, 0.5]), self.runners(), []), [])

    def test_line_format(self):
        line = EnsemblePrediction(np.array([0.1, 0.2, 0.7]), ClassLabel.HATE).as_line()
        self.assertEqual(line, 'hate\t0.100000\t0.200000\t0.700000')


class EnsembleWorkspaceTests(SimpleTestCase):
    """Deux cellules non entraînées, leurs rapports dev, puis ensemble_train et predict."""

    DEV_TEXTS = ['thiết kế đẹp quá', 'nhổn làm gắt vl', 'làm ăn gì vl', 'phim hay quá', 'gắt quá vl', 'hay lắm']

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        featurizer = build_featurizer(EmbeddingSpec(name='comment', dim=4, window=2, epochs=1, max_len=6),
                                      self.DEV_TEXTS, seed=1)
        featurizer_dir = featurizer.save(self.root / 'embeddings' / 'comment')
        dev_texts = self.DEV_TEXTS * 5
        dev_labels = [i % 3 for i in range(len(dev_texts))]
        batch = featurizer.featurize(dev_texts)

        self.cell_dirs = []
        for architecture, dev_f1 in ((Architecture.TEXTCNN, 0.8), (Architecture.BILSTM, 0.75)):
            config = ModelConfig(architecture=architecture, embedding='comment', input_dim=4, max_len=6,
                                 kernel_sizes=(2, 3), filters=4, hidden=4, dense=8)
            torch.manual_seed(len(self.cell_dirs))
            model = build_classifier(config).eval()
            directory = self.root / 'cells' / config.model_id
            save_snapshot(directory / SNAPSHOT_FILE, config, model, 1.0,
                          featurizer=relative_path(featurizer_dir, directory))
            SubmodelReport(
                model_id=config.model_id,
                dev_f1=dev_f1,
                dev_ids=[f'd{i}' for i in range(len(dev_texts))],
                dev_labels=dev_labels,
                dev_probabilities=model.predict_proba(batch.inputs, batch.lengths),
                snapshot=SNAPSHOT_FILE,
            ).save(directory / REPORT_FILE)
            self.cell_dirs.append(directory)

    def tearDown(self):
        self.tmp.cleanup()

    def test_train_then_predict(self):
        out = StringIO()
        call_command('ensemble_train', '--reports', *map(str, self.cell_dirs), '--threshold', '0.67',
                     '--weights', '1,1,1', '--seed', '3', '--out', str(self.root / 'ensemble'), stdout=out)
        manifest = EnsembleManifest.load(self.root / 'ensemble' / 'manifest.json')
        self.assertEqual(manifest.model_ids, ['bilstm__comment', 'textcnn__comment'])
        self.assertEqual(manifest.submodels[0], '../cells/bilstm__comment/model.pt')
        self.assertEqual(manifest.threshold, 0.67)

        inputs = self.root / 'input.txt'
        inputs.write_text('Thiết kế ĐẸP quá!\nnhổn vl\n', encoding='utf-8')
        call_command('predict', str(inputs), '--manifest', str(self.root / 'ensemble' / 'manifest.json'),
                     '--out', str(self.root / 'pred.tsv'), stdout=StringIO())
        lines = (self.root / 'pred.tsv').read_text(encoding='utf-8').splitlines()

        ensemble = load_ensemble(self.root / 'ensemble' / 'manifest.json')
        expected = ensemble.predict(['Thiết kế ĐẸP quá!', 'nhổn vl'])
        self.assertEqual(lines, [prediction.as_line() for prediction in expected])
        for line in lines:
            fields = line.split('\t')
            self.assertIn(fields[0], ['clean', 'offensive', 'hate'])
            self.assertAlmostEqual(sum(float(value) for value in fields[1:]), 1.0, places=5)

    def test_gate_excludes_weak_cell(self):
        call_command('ensemble_train', '--reports', *map(str, self.cell_dirs), '--threshold', '0.78',
                     '--out', str(self.root / 'ensemble'), stdout=StringIO())
        manifest = EnsembleManifest.load(self.root / 'ensemble' / 'manifest.json')
        self.assertEqual(manifest.model_ids, ['textcnn__comment'])
        self.assertEqual(len(load_ensemble(self.root / 'ensemble' / 'manifest.json').submodels), 1)

    def test_missing_snapshot(self):
        manifest = EnsembleManifest(['../cells/none/model.pt'], ['textcnn__none'], 0.67, 'stacker.pt')
        path = manifest.save(self.root / 'broken' / 'manifest.json')
        with self.assertRaises(ValidationError) as ctx:
            load_ensemble(path)
        self.assertEqual(ctx.exception.code, 'missing_snapshot')
