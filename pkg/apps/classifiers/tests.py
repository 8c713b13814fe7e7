# -*- coding: utf-8 -*-
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
import torch
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.test import SimpleTestCase

from apps.classifiers.services.architectures import (
    SARNN,
    AdditiveAttention,
    Architecture,
    BiLSTM,
    ModelConfig,
    ResidualBlock,
    SentenceClassifier,
    build_classifier,
    length_mask,
)
from apps.classifiers.services.cells import REPORT_FILE, SNAPSHOT_FILE, train_cell
from apps.classifiers.services.gradcheck import GradientCheckResult, GradientSample, gradient_check
from apps.classifiers.services.labels import (
    REFERENCE_WEIGHTS,
    UNIFORM_WEIGHTS,
    ClassLabel,
    ClassWeights,
    parse_labels,
    severity_argmax,
    validate_probabilities,
)
from apps.classifiers.services.losses import weighted_ce_loss
from apps.classifiers.services.snapshots import (
    SubmodelReport,
    load_snapshot,
    save_snapshot,
    snapshot_digest,
    split_model_id,
)
from apps.classifiers.services.training import (
    LabeledBatch,
    TrainingSettings,
    fit_classifier,
    train_model,
)
from apps.embeddings.services.featurizers import EmbeddingSpec, InputKind, build_featurizer
from apps.evaluation.factories import build_dataset

SEQUENCE_ARCHITECTURES = Architecture.values


def small_config(architecture, **overrides):
    values = dict(
        architecture=architecture,
        embedding='toy',
        input_dim=3,
        max_len=6,
        kernel_sizes=(2, 3),
        filters=4,
        vdcnn_blocks=2,
        vdcnn_channels=4,
        hidden=4,
        dense=8,
        dropout=0.0,
    )
    values.update(overrides)
    return ModelConfig(**values)


def scalar_loss(probabilities, labels, weights):
    total = 0.0
    for row, label in zip(probabilities, labels):
        total += weights[label] * math.log(min(max(row[label], 1e-7), 1.0))
    return -total / len(labels)


def region_dataset(rng, counts):
    """Trois régions d'entrée ; chaque région mélange des classes dans les proportions ``counts``."""
    centers = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    inputs, labels = [], []
    for region, per_class in enumerate(counts):
        for label, count in enumerate(per_class):
            for _ in range(count):
                inputs.append(centers[region] + rng.normal(0.0, 0.05, size=(6, 3)))
                labels.append(label)
    inputs = np.asarray(inputs, dtype=np.float32)
    return LabeledBatch(inputs, np.full(len(labels), 6), labels)


class LabelTests(SimpleTestCase):

    def test_parse(self):
        self.assertEqual(ClassLabel.parse('hate'), ClassLabel.HATE)
        self.assertEqual(ClassLabel.parse(' Offensive '), ClassLabel.OFFENSIVE)
        self.assertEqual(ClassLabel.parse('0'), ClassLabel.CLEAN)
        self.assertEqual(ClassLabel.parse(np.int64(2)), ClassLabel.HATE)
        self.assertEqual(parse_labels('offensive,hate'), (ClassLabel.OFFENSIVE, ClassLabel.HATE))

    def test_unknown_label(self):
        with self.assertRaises(ValidationError) as ctx:
            ClassLabel.parse('spam')
        self.assertEqual(ctx.exception.code, 'unknown_label')

    def test_weights(self):
        self.assertEqual(ClassWeights.parse('0.09,0.95,0.96'), REFERENCE_WEIGHTS)
        self.assertEqual(str(REFERENCE_WEIGHTS), '0.09,0.95,0.96')
        for text in ('1,2', '1,0,1', '1,-1,1', 'a,b,c'):
            with self.assertRaises(ValidationError):
                ClassWeights.parse(text)

    def test_probabilities(self):
        validate_probabilities([[0.2, 0.3, 0.5]])
        for rows in ([[0.5, 0.5, 0.5]], [[-0.1, 0.6, 0.5]], [[0.5, 0.5]], [[math.nan, 0.5, 0.5]]):
            with self.assertRaises(ValidationError):
                validate_probabilities(rows)

    def test_severity_argmax(self):
        self.assertEqual(severity_argmax([0.9, 0.05, 0.05]), ClassLabel.CLEAN)
        self.assertEqual(severity_argmax([0.4, 0.4, 0.2]), ClassLabel.OFFENSIVE)
        self.assertEqual(severity_argmax([0.3, 0.35, 0.35]), ClassLabel.HATE)
        self.assertEqual(severity_argmax([1 / 3, 1 / 3, 1 / 3]), ClassLabel.HATE)


class WeightedLossTests(SimpleTestCase):

    def test_perfect_prediction(self):
        loss = weighted_ce_loss(torch.tensor([[1.0, 0.0, 0.0]]), torch.tensor([0]), REFERENCE_WEIGHTS)
        self.assertEqual(float(loss), 0.0)

    def test_single_sample(self):
        loss = weighted_ce_loss(torch.tensor([[0.5, 0.3, 0.2]], dtype=torch.float64), torch.tensor([0]),
                                REFERENCE_WEIGHTS)
        self.assertAlmostEqual(float(loss), -0.09 * math.log(0.5), places=12)
        self.assertAlmostEqual(float(loss), 0.062383, places=6)

    def test_two_samples(self):
        probabilities = torch.tensor([[0.5, 0.25, 0.25], [0.5, 0.25, 0.25]], dtype=torch.float64)
        loss = weighted_ce_loss(probabilities, torch.tensor([0, 2]), REFERENCE_WEIGHTS)
        self.assertAlmostEqual(float(loss), (0.09 * math.log(2) + 0.96 * math.log(4)) / 2, places=12)

    def test_one_hot_labels(self):
        probabilities = torch.tensor([[0.5, 0.3, 0.2], [0.1, 0.1, 0.8]], dtype=torch.float64)
        by_index = weighted_ce_loss(probabilities, torch.tensor([1, 2]), REFERENCE_WEIGHTS)
        by_vector = weighted_ce_loss(probabilities, torch.tensor([[0, 1, 0], [0, 0, 1]]), REFERENCE_WEIGHTS)
        self.assertEqual(float(by_index), float(by_vector))

    def test_matches_scalar_evaluation(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 8))
            probabilities = rng.dirichlet(np.ones(3), size=n)
            labels = rng.integers(0, 3, size=n)
            weights = tuple(rng.uniform(0.01, 2.0, size=3))
            loss = weighted_ce_loss(torch.as_tensor(probabilities), torch.as_tensor(labels), weights)
            self.assertAlmostEqual(float(loss), scalar_loss(probabilities, labels, weights), delta=1e-9)

    def test_uniform_weights_equal_cross_entropy(self):
        rng = np.random.default_rng(1)
        probabilities = torch.as_tensor(rng.dirichlet(np.ones(3), size=50))
        labels = torch.as_tensor(rng.integers(0, 3, size=50))
        expected = torch.nn.functional.nll_loss(torch.log(probabilities), labels)
        self.assertAlmostEqual(float(weighted_ce_loss(probabilities, labels, UNIFORM_WEIGHTS)),
                               float(expected), delta=1e-12)

    def test_linear_in_weights(self):
        rng = np.random.default_rng(2)
        probabilities = torch.as_tensor(rng.dirichlet(np.ones(3), size=20))
        labels = torch.as_tensor(rng.integers(0, 3, size=20))
        base = float(weighted_ce_loss(probabilities, labels, (0.09, 0.95, 0.96)))
        scaled = float(weighted_ce_loss(probabilities, labels, (0.27, 2.85, 2.88)))
        self.assertAlmostEqual(scaled, 3 * base, delta=1e-12)

    def test_clipping(self):
        loss = weighted_ce_loss(torch.tensor([[0.0, 1.0, 0.0]], dtype=torch.float64), torch.tensor([0]),
                                UNIFORM_WEIGHTS)
        self.assertAlmostEqual(float(loss), -math.log(1e-7), places=9)

    def test_length_mismatch(self):
        with self.assertRaises(ValidationError) as ctx:
            weighted_ce_loss(torch.ones(2, 3) / 3, torch.tensor([0]), UNIFORM_WEIGHTS)
        self.assertEqual(ctx.exception.code, 'length_mismatch')


class ArchitectureTests(SimpleTestCase):

    def setUp(self):
        torch.manual_seed(0)
        self.inputs = torch.randn(7, 6, 3)
        self.lengths = torch.tensor([6, 2, 5, 1, 6, 3, 4])

    def test_every_architecture_outputs_probabilities(self):
        for architecture in SEQUENCE_ARCHITECTURES:
            with self.subTest(architecture=architecture):
                model = build_classifier(small_config(architecture)).eval()
                probabilities = model(self.inputs, self.lengths)
                self.assertEqual(tuple(probabilities.shape), (7, 3))
                validate_probabilities(probabilities.detach().numpy())

    def test_large_inputs_stay_valid(self):
        for architecture in SEQUENCE_ARCHITECTURES:
            model = build_classifier(small_config(architecture)).eval()
            validate_probabilities(model.predict_proba(self.inputs.numpy() * 1e3, self.lengths.numpy()))

    def test_unknown_architecture(self):
        with self.assertRaises(ValidationError) as ctx:
            small_config('transformer')
        self.assertEqual(ctx.exception.code, 'unknown_architecture')

    def test_sequence_shorter_than_kernel(self):
        with self.assertRaises(ValidationError) as ctx:
            build_classifier(small_config(Architecture.TEXTCNN, max_len=2, kernel_sizes=(2, 3)))
        self.assertEqual(ctx.exception.code, 'sequence_too_short')

    def test_model_id(self):
        config = small_config(Architecture.SARNN, embedding='comment_tokenize')
        self.assertEqual(config.model_id, 'sarnn__comment_tokenize')
        self.assertEqual(split_model_id(config.model_id), ('sarnn', 'comment_tokenize'))
        self.assertEqual(ModelConfig.from_dict(config.to_dict()), config)

    def test_padding_is_ignored(self):
        # Les positions au-delà de la longueur réelle ne changent pas la sortie
        for architecture in (Architecture.BILSTM, Architecture.SARNN):
            model = build_classifier(small_config(architecture)).eval()
            noisy = self.inputs.clone()
            noisy[1, 2:] = 100.0
            with torch.no_grad():
                torch.testing.assert_close(model(noisy, self.lengths)[1], model(self.inputs, self.lengths)[1])


class ResidualTests(SimpleTestCase):

    def test_zeroed_block_is_identity(self):
        block = ResidualBlock(4, 4)
        for conv in (block.conv1, block.conv2):
            torch.nn.init.zeros_(conv.weight)
            torch.nn.init.zeros_(conv.bias)
        x = torch.randn(2, 4, 9)
        torch.testing.assert_close(block(x), x)

    def test_projection_when_widths_differ(self):
        block = ResidualBlock(3, 5)
        self.assertIsInstance(block.shortcut, torch.nn.Conv1d)
        self.assertEqual(tuple(block(torch.randn(2, 3, 7)).shape), (2, 5, 7))

    def test_zeroed_vdcnn_pools_input_convolution(self):
        model = build_classifier(small_config(Architecture.VDCNN, vdcnn_blocks=3)).eval()
        for block in model.blocks:
            for conv in (block.conv1, block.conv2):
                torch.nn.init.zeros_(conv.weight)
                torch.nn.init.zeros_(conv.bias)
        inputs = torch.randn(2, 6, 3)
        with torch.no_grad():
            expected = torch.relu(model.input_conv(inputs.transpose(1, 2))).max(dim=2).values
            torch.testing.assert_close(model.features(inputs), expected)


class RecurrentTests(SimpleTestCase):

    def test_bilstm_direction_symmetry(self):
        torch.manual_seed(3)
        model = build_classifier(small_config(Architecture.BILSTM)).double().eval()
        mirrored = build_classifier(small_config(Architecture.BILSTM)).double().eval()

        # Paramètres avant et arrière échangés à chaque couche ; la couche 1
        # reçoit [avant, arrière] de la couche 0, d'où l'échange des colonnes
        source = model.state_dict()
        swapped = {}
        for name, tensor in source.items():
            if name.startswith('encoder.lstm.'):
                other = name[:-len('_reverse')] if name.endswith('_reverse') else name + '_reverse'
                tensor = source[other].clone()
                if 'weight_ih_l1' in name:
                    half = tensor.shape[1] // 2
                    tensor = torch.cat([tensor[:, half:], tensor[:, :half]], dim=1)
            swapped[name] = tensor
        mirrored.load_state_dict(swapped)

        inputs = torch.randn(3, 6, 3, dtype=torch.float64)
        with torch.no_grad():
            pooled = model.pool(inputs)
            mirrored_pooled = mirrored.pool(torch.flip(inputs, dims=[1]))
        hidden = model.encoder.lstm.hidden_size
        torch.testing.assert_close(mirrored_pooled[:, :hidden], pooled[:, hidden:])
        torch.testing.assert_close(mirrored_pooled[:, hidden:], pooled[:, :hidden])

    def test_bilstm_is_stacked(self):
        model = build_classifier(small_config(Architecture.BILSTM))
        self.assertIsInstance(model, BiLSTM)
        self.assertGreaterEqual(model.encoder.lstm.num_layers, 2)
        self.assertTrue(model.encoder.lstm.bidirectional)

    def test_attention_sums_to_one_over_real_positions(self):
        model = build_classifier(small_config(Architecture.SARNN)).eval()
        self.assertIsInstance(model, SARNN)
        lengths = torch.tensor([6, 3, 1])
        with torch.no_grad():
            model(torch.randn(3, 6, 3), lengths)
        alpha = model.last_attention
        torch.testing.assert_close(alpha.sum(dim=1), torch.ones(3))
        self.assertTrue(torch.all(alpha >= 0))
        self.assertTrue(torch.all(alpha[~length_mask(lengths, 6)] == 0))

    def test_uniform_hidden_states_give_uniform_attention(self):
        attention = AdditiveAttention(4, 5)
        states = torch.randn(1, 1, 4).repeat(2, 5, 1)
        mask = length_mask(torch.tensor([5, 3]), 5)
        with torch.no_grad():
            alpha = attention(states, mask)
        torch.testing.assert_close(alpha[0], torch.full((5,), 0.2))
        torch.testing.assert_close(alpha[1], torch.tensor([1 / 3, 1 / 3, 1 / 3, 0.0, 0.0]))


class GradientCheckTests(SimpleTestCase):

    def test_every_architecture(self):
        torch.manual_seed(5)
        inputs = torch.randn(4, 6, 3, dtype=torch.float64)
        lengths = torch.tensor([6, 4, 5, 3])
        labels = torch.tensor([0, 1, 2, 1])

        def loss_fn(model):
            return weighted_ce_loss(model(inputs, lengths), labels, REFERENCE_WEIGHTS)

        for architecture in SEQUENCE_ARCHITECTURES:
            with self.subTest(architecture=architecture):
                model = build_classifier(small_config(architecture))
                result = gradient_check(model, loss_fn, n_samples=10, step=1e-5, tolerance=1e-4, seed=1)
                self.assertEqual(len(result.samples), 10)
                self.assertTrue(result.passed, result.failures())

    def test_attention_parameters(self):
        torch.manual_seed(6)
        inputs = torch.randn(4, 6, 3, dtype=torch.float64)
        lengths = torch.tensor([6, 2, 4, 5])
        model = build_classifier(small_config(Architecture.SARNN))
        names = [name for name, _ in model.named_parameters() if name.startswith('attention.')]
        result = gradient_check(
            model,
            lambda m: weighted_ce_loss(m(inputs, lengths), torch.tensor([2, 0, 1, 0]), REFERENCE_WEIGHTS),
            parameter_names=names,
            seed=2,
        )
        self.assertTrue(all(sample.parameter.startswith('attention.') for sample in result.samples))
        self.assertTrue(result.passed, result.failures())

    def test_absolute_fallback_is_reported(self):
        exact = GradientSample('w', (0,), 0.5, 0.50001)
        vanishing = GradientSample('w', (1,), 0.0, 3e-9)
        wrong = GradientSample('w', (2,), 1e-3, 1.2e-3)
        result = GradientCheckResult([exact, vanishing, wrong], tolerance=1e-4, absolute_tolerance=1e-7)
        self.assertEqual(result.absolute_only(), [vanishing])
        self.assertEqual(result.failures(), [wrong])
        self.assertFalse(result.passed)

        strict = GradientCheckResult([exact, vanishing], tolerance=1e-4, absolute_tolerance=0.0)
        self.assertEqual(strict.failures(), [vanishing])
        self.assertEqual(strict.absolute_only(), [])

    def test_absolute_fallback_is_logged(self):
        model = build_classifier(small_config(Architecture.TEXTCNN))
        inputs = torch.randn(4, 6, 3, dtype=torch.float64)
        labels = torch.tensor([0, 1, 2, 0])
        with self.assertLogs('apps.classifiers.services.gradcheck', level='DEBUG') as logs:
            result = gradient_check(model, lambda m: weighted_ce_loss(m(inputs), labels, UNIFORM_WEIGHTS), seed=4)
        warnings = [line for line in logs.output if line.startswith('WARNING')]
        self.assertEqual(len(warnings), len(result.absolute_only()))

    def test_original_model_untouched(self):
        model = build_classifier(small_config(Architecture.TEXTCNN))
        before = {name: tensor.clone() for name, tensor in model.state_dict().items()}
        inputs = torch.randn(4, 6, 3, dtype=torch.float64)
        gradient_check(model, lambda m: weighted_ce_loss(m(inputs), torch.tensor([0, 1, 2, 0]), UNIFORM_WEIGHTS))
        for name, tensor in model.state_dict().items():
            self.assertEqual(tensor.dtype, torch.float32)
            torch.testing.assert_close(tensor, before[name])


class TrainingTests(SimpleTestCase):

    def separable(self, seed, n=90):
        rng = np.random.default_rng(seed)
        return region_dataset(rng, [[n // 3, 0, 0], [0, n // 3, 0], [0, 0, n // 3]])

    def test_best_dev_loss_improves(self):
        settings = TrainingSettings(epochs=10, patience=3, batch_size=16, learning_rate=1e-2)
        trained = train_model(small_config(Architecture.TEXTCNN), self.separable(0), self.separable(1),
                              UNIFORM_WEIGHTS, settings)
        self.assertLess(trained.best_dev_loss, trained.fit.initial_dev_loss)
        self.assertEqual(trained.fit.best_dev_loss, min(trained.fit.dev_losses))
        validate_probabilities(trained.fit.dev_probabilities)

    def test_single_epoch_budget(self):
        settings = TrainingSettings(epochs=1, patience=0)
        trained = train_model(small_config(Architecture.BILSTM), self.separable(0, 30), self.separable(1, 30),
                              REFERENCE_WEIGHTS, settings)
        self.assertEqual(trained.fit.best_epoch, 1)
        self.assertEqual(len(trained.fit.dev_losses), 1)

    def test_deterministic(self):
        settings = TrainingSettings(epochs=3, patience=3, batch_size=8)
        runs = [
            train_model(small_config(Architecture.SARNN), self.separable(0, 30), self.separable(1, 30),
                        REFERENCE_WEIGHTS, settings).fit.dev_losses
            for _ in range(2)
        ]
        self.assertEqual(runs[0], runs[1])

    def test_non_finite_loss(self):
        train = self.separable(0, 30)
        train.inputs[0] = np.nan
        model = build_classifier(small_config(Architecture.TEXTCNN))
        with self.assertRaises(ValidationError) as ctx:
            fit_classifier(model, train, self.separable(1, 30), settings=TrainingSettings(epochs=1))
        self.assertEqual(ctx.exception.code, 'non_finite_loss')

    def test_invalid_budget(self):
        with self.assertRaises(ValidationError):
            TrainingSettings(epochs=0)
        with self.assertRaises(ValidationError):
            LabeledBatch(np.zeros((2, 6, 3)), [6, 6], [0])

    def test_class_weights_counter_skew(self):
        # 915/50/35 : les classes minoritaires partagent leurs régions avec clean
        rng = np.random.default_rng(7)
        train = region_dataset(rng, [[100, 50, 0], [70, 0, 35], [745, 0, 0]])
        dev = region_dataset(rng, [[20, 10, 0], [14, 0, 7], [149, 0, 0]])
        settings = TrainingSettings(epochs=40, patience=8, batch_size=32, learning_rate=1e-2)
        config = small_config(Architecture.TEXTCNN, filters=8, dense=16)

        unweighted = train_model(config, train, dev, UNIFORM_WEIGHTS, settings)
        predictions = np.array([int(severity_argmax(row)) for row in unweighted.fit.dev_probabilities])
        self.assertGreaterEqual(np.mean(predictions == ClassLabel.CLEAN), 0.99)

        weighted = train_model(config, train, dev, REFERENCE_WEIGHTS, settings)
        predictions = np.array([int(severity_argmax(row)) for row in weighted.fit.dev_probabilities])
        for label in (ClassLabel.OFFENSIVE, ClassLabel.HATE):
            gold = dev.labels == label
            self.assertGreater(np.mean(predictions[gold] == label), 0.5)

    def test_class_weights_on_separable_skew(self):
        # Même déséquilibre, une région par classe
        rng = np.random.default_rng(11)
        train = region_dataset(rng, [[915, 0, 0], [0, 50, 0], [0, 0, 35]])
        dev = region_dataset(rng, [[183, 0, 0], [0, 10, 0], [0, 0, 7]])
        settings = TrainingSettings(epochs=40, patience=8, batch_size=32, learning_rate=1e-2)
        config = small_config(Architecture.TEXTCNN, filters=8, dense=16)

        recalls = {}
        for name, weights in (('uniform', UNIFORM_WEIGHTS), ('reference', REFERENCE_WEIGHTS)):
            result = train_model(config, train, dev, weights, settings)
            predictions = np.array([int(severity_argmax(row)) for row in result.fit.dev_probabilities])
            recalls[name] = {
                label: np.mean(predictions[dev.labels == label] == label) for label in ClassLabel
            }

        for label in (ClassLabel.OFFENSIVE, ClassLabel.HATE):
            self.assertGreater(recalls['reference'][label], 0.9)
            self.assertGreaterEqual(recalls['reference'][label], recalls['uniform'][label])
        self.assertGreater(recalls['reference'][ClassLabel.CLEAN], 0.9)


class SentenceClassifierTests(SimpleTestCase):

    def test_all_architecture_slots(self):
        for architecture in SEQUENCE_ARCHITECTURES:
            config = small_config(architecture, embedding='roberta', input_dim=16, input_kind=InputKind.SENTENCE)
            model = build_classifier(config).eval()
            self.assertIsInstance(model, SentenceClassifier)
            validate_probabilities(model.predict_proba(np.random.default_rng(0).normal(size=(5, 16))))

    def test_rejects_sequences(self):
        config = small_config(Architecture.TEXTCNN, input_dim=16, input_kind=InputKind.SENTENCE)
        with self.assertRaises(ValidationError) as ctx:
            build_classifier(config)(torch.zeros(2, 6, 16))
        self.assertEqual(ctx.exception.code, 'invalid_input_shape')


class SnapshotTests(SimpleTestCase):

    def test_round_trip(self):
        config = small_config(Architecture.LSTMCNN)
        model = build_classifier(config).eval()
        inputs = np.random.default_rng(0).normal(size=(5, 6, 3))
        lengths = np.array([6, 5, 4, 3, 2])
        with tempfile.TemporaryDirectory() as tmp:
            path = save_snapshot(Path(tmp) / 'cell' / SNAPSHOT_FILE, config, model, 0.5, featurizer='../emb')
            snapshot = load_snapshot(path)
            digest = snapshot_digest(path)
            save_snapshot(Path(tmp) / 'copy.pt', config, snapshot.model, 0.5, featurizer='../emb')
            self.assertEqual(snapshot_digest(Path(tmp) / 'copy.pt'), digest)
        self.assertEqual(snapshot.config, config)
        self.assertEqual(snapshot.best_dev_loss, 0.5)
        self.assertEqual(snapshot.featurizer.name, 'emb')
        np.testing.assert_allclose(snapshot.model.predict_proba(inputs, lengths),
                                   model.predict_proba(inputs, lengths), atol=1e-6)

    def test_missing_snapshot(self):
        with self.assertRaises(ValidationError) as ctx:
            load_snapshot('/nonexistent/model.pt')
        self.assertEqual(ctx.exception.code, 'missing_snapshot')

    def test_report_validation(self):
        with self.assertRaises(ValidationError) as ctx:
            SubmodelReport('textcnn__toy', 0.5, ['a'], [0, 1], np.full((2, 3), 1 / 3))
        self.assertEqual(ctx.exception.code, 'sample_mismatch')
        with self.assertRaises(ValidationError) as ctx:
            SubmodelReport('textcnn__toy', 1.5, ['a'], [0], np.full((1, 3), 1 / 3))
        self.assertEqual(ctx.exception.code, 'invalid_f1')


class CellTests(SimpleTestCase):

    def setUp(self):
        self.train = build_dataset({ClassLabel.CLEAN: 12, ClassLabel.OFFENSIVE: 6, ClassLabel.HATE: 6}, prefix='t')
        self.dev = build_dataset({ClassLabel.CLEAN: 4, ClassLabel.OFFENSIVE: 2, ClassLabel.HATE: 2}, prefix='d')
        texts = [comment.text for comment in self.train]
        self.featurizer = build_featurizer(EmbeddingSpec(name='comment', dim=3, window=2, epochs=1, max_len=6),
                                           texts, seed=1)

    def test_train_cell_writes_snapshot_and_report(self):
        config = small_config(Architecture.TEXTCNN, embedding='comment')
        with tempfile.TemporaryDirectory() as tmp:
            featurizer_dir = self.featurizer.save(Path(tmp) / 'embeddings' / 'comment')
            directory = Path(tmp) / 'cells' / config.model_id
            report = train_cell(config, self.featurizer, featurizer_dir, self.train, self.dev, REFERENCE_WEIGHTS,
                                TrainingSettings(epochs=2), directory)
            reloaded = SubmodelReport.load(directory / REPORT_FILE)
            snapshot = load_snapshot(directory / SNAPSHOT_FILE)
            self.assertEqual(snapshot.featurizer.resolve(), featurizer_dir.resolve())
        self.assertEqual(report.model_id, 'textcnn__comment')
        self.assertEqual(reloaded.dev_ids, [comment.id for comment in self.dev])
        np.testing.assert_allclose(reloaded.dev_probabilities, report.dev_probabilities)
        self.assertTrue(0.0 <= report.dev_f1 <= 1.0)

    def test_train_model_command(self):
        from apps.evaluation.services.datasets import write_dataset

        out = StringIO()
        with tempfile.TemporaryDirectory() as tmp:
            featurizer_dir = self.featurizer.save(Path(tmp) / 'comment')
            write_dataset(self.train, Path(tmp) / 'train.tsv')
            write_dataset(self.dev, Path(tmp) / 'dev.tsv')
            call_command(
                'train_model',
                '--arch', 'bilstm',
                '--embedding', str(featurizer_dir),
                '--train', str(Path(tmp) / 'train.tsv'),
                '--dev', str(Path(tmp) / 'dev.tsv'),
                '--weights', '0.09,0.95,0.96',
                '--epochs', '1',
                '--seed', '3',
                '--out', str(Path(tmp) / 'cell'),
                stdout=out,
            )
            self.assertTrue((Path(tmp) / 'cell' / SNAPSHOT_FILE).exists())
            report = SubmodelReport.load(Path(tmp) / 'cell' / REPORT_FILE)
        self.assertEqual(report.model_id, 'bilstm__comment')
        self.assertIn('bilstm__comment', out.getvalue())
