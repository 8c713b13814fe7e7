# -*- coding: utf-8 -*-
import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.test import SimpleTestCase, override_settings

from apps.classifiers.services.labels import ClassLabel
from apps.evaluation.factories import LabeledCommentFactory, build_dataset
from apps.evaluation.services.analysis import (
    error_breakdown,
    error_set,
    error_token_ranking,
    token_error_share,
)
from apps.evaluation.services.datasets import (
    LabeledComment,
    escape_text,
    labels,
    read_dataset,
    read_predictions,
    unescape_text,
    write_dataset,
)
from apps.evaluation.services.metrics import class_distribution, confusion, f1_macro, f1_per_class
from apps.evaluation.services.splitting import allocate_train_counts, stratified_split

CLEAN, OFFENSIVE, HATE = ClassLabel.CLEAN, ClassLabel.OFFENSIVE, ClassLabel.HATE


def brute_force_f1(preds, golds):
    scores = []
    for label in range(3):
        tp = sum(1 for p, g in zip(preds, golds) if p == label and g == label)
        fp = sum(1 for p, g in zip(preds, golds) if p == label and g != label)
        fn = sum(1 for p, g in zip(preds, golds) if p != label and g == label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return sum(scores) / 3


def write_lines(directory, name, lines):
    path = Path(directory) / name
    path.write_text(''.join(f'{line}\n' for line in lines), encoding='utf-8')
    return path


def gold_dataset():
    return [
        LabeledComment('g1', 'một', 'clean'),
        LabeledComment('g2', 'hai', 'clean'),
        LabeledComment('g3', 'ba', 'offensive'),
        LabeledComment('g4', 'bốn', 'hate'),
    ]


class DatasetIOTests(SimpleTestCase):

    def test_write_then_read(self):
        dataset = [
            LabeledComment('a1', 'thiết kế đẹp', 'clean'),
            LabeledComment('a2', 'dòng 1\tcột\ndòng 2 \\ hết', 'hate'),
        ]
        with tempfile.TemporaryDirectory() as tmp:
            path = write_dataset(dataset, Path(tmp) / 'data.tsv')
            self.assertTrue(path.read_text(encoding='utf-8').startswith('id\tlabel\ttext\n'))
            self.assertEqual(read_dataset(path), dataset)

    def test_escaping(self):
        self.assertEqual(escape_text('a\tb\\n'), 'a\\tb\\\\n')
        self.assertEqual(unescape_text(escape_text('a\tb\\n\r')), 'a\tb\\n\r')

    def test_header_and_blank_lines_are_optional(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_lines(tmp, 'data.tsv', ['x\t2\tmột', '', 'y\toffensive\thai'])
            dataset = read_dataset(path)
        self.assertEqual([comment.label for comment in dataset], [HATE, OFFENSIVE])

    def test_errors_report_line(self):
        cases = [
            (['a\tclean'], 'malformed_line', 1),
            (['id\tlabel\ttext', 'a\tclean\tx', 'b\tspam\ty'], 'unknown_label', 3),
            (['a\tclean\tx', 'a\thate\ty'], 'duplicate_id', 2),
        ]
        for lines, code, line in cases:
            with self.subTest(code=code), tempfile.TemporaryDirectory() as tmp:
                with self.assertRaises(ValidationError) as ctx:
                    read_dataset(write_lines(tmp, 'data.tsv', lines))
                self.assertEqual(ctx.exception.code, code)
                self.assertEqual(ctx.exception.params['line'], line)

    def test_read_predictions(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_lines(tmp, 'pred.txt', ['hate', '0', 'offensive\t0.1\t0.8\t0.1'])
            self.assertEqual(read_predictions(path), [HATE, CLEAN, OFFENSIVE])

    def test_factory(self):
        comment = LabeledCommentFactory.build(label='hate')
        self.assertEqual(comment.label, HATE)
        dataset = build_dataset({CLEAN: 2, HATE: 1}, prefix='z')
        self.assertEqual([c.id for c in dataset], ['z00000', 'z00001', 'z00002'])
        self.assertEqual(labels(dataset), [0, 0, 2])


class SplitTests(SimpleTestCase):

    def test_largest_remainder(self):
        allocation = allocate_train_counts({CLEAN: 915, OFFENSIVE: 50, HATE: 35}, 0.9)
        self.assertEqual((allocation[CLEAN], allocation[OFFENSIVE], allocation[HATE]), (824, 45, 31))

    def test_split_counts(self):
        dataset = build_dataset({CLEAN: 915, OFFENSIVE: 50, HATE: 35})
        train, dev = stratified_split(dataset, 0.9, seed=13)
        self.assertEqual(class_distribution(train).counts, {'clean': 824, 'offensive': 45, 'hate': 31})
        self.assertEqual(class_distribution(dev).counts, {'clean': 91, 'offensive': 5, 'hate': 4})

    def test_balanced(self):
        train, dev = stratified_split(build_dataset({CLEAN: 10, OFFENSIVE: 10, HATE: 10}), 0.9, seed=1)
        self.assertEqual(class_distribution(train).counts, {'clean': 9, 'offensive': 9, 'hate': 9})
        self.assertEqual(len(dev), 3)

    def test_small_classes_keep_a_dev_sample(self):
        allocation = allocate_train_counts({CLEAN: 10, OFFENSIVE: 2, HATE: 2}, 0.9)
        self.assertEqual(allocation, {CLEAN: 9, OFFENSIVE: 1, HATE: 1})
        train, dev = stratified_split(build_dataset({CLEAN: 10, OFFENSIVE: 2, HATE: 2}), 0.9, seed=3)
        self.assertEqual(class_distribution(dev).counts, {'clean': 1, 'offensive': 1, 'hate': 1})
        self.assertEqual(class_distribution(train).counts, {'clean': 9, 'offensive': 1, 'hate': 1})

    def test_every_class_in_both_parts(self):
        for counts in ({CLEAN: 2, OFFENSIVE: 2, HATE: 2}, {CLEAN: 30, OFFENSIVE: 3, HATE: 2}):
            for frac in (0.1, 0.5, 0.9, 0.99):
                allocation = allocate_train_counts(counts, frac)
                for label, count in counts.items():
                    self.assertGreaterEqual(allocation[label], 1)
                    self.assertLessEqual(allocation[label], count - 1)

    def test_freed_seat_goes_to_next_class(self):
        # hate et offensive plafonnées, la place restante revient à clean
        allocation = allocate_train_counts({CLEAN: 20, OFFENSIVE: 3, HATE: 2}, 0.9)
        self.assertEqual(allocation, {CLEAN: 19, OFFENSIVE: 2, HATE: 1})

    def test_same_seed_same_split(self):
        dataset = build_dataset({CLEAN: 40, OFFENSIVE: 12, HATE: 9})
        first = stratified_split(dataset, 0.9, seed=5)
        self.assertEqual(stratified_split(dataset, 0.9, seed=5), first)
        self.assertNotEqual(stratified_split(dataset, 0.9, seed=6)[1], first[1])

    def test_partition_over_sizes(self):
        rng = np.random.default_rng(0)
        for total in (100, 257, 1000, 4321, 10000):
            counts = {CLEAN: int(total * 0.915), OFFENSIVE: int(total * 0.05)}
            counts[HATE] = total - counts[CLEAN] - counts[OFFENSIVE]
            dataset = build_dataset(counts)
            train, dev = stratified_split(dataset, 0.9, seed=int(rng.integers(1000)))
            self.assertEqual(len(train) + len(dev), total)
            self.assertEqual({c.id for c in train} | {c.id for c in dev}, {c.id for c in dataset})
            self.assertFalse({c.id for c in train} & {c.id for c in dev})
            dev_counts = class_distribution(dev).counts
            for label, count in counts.items():
                self.assertLessEqual(abs(dev_counts[label.label] - 0.1 * count), 1.0)

    def test_order_preserved(self):
        dataset = build_dataset({CLEAN: 20, OFFENSIVE: 5, HATE: 5})
        train, dev = stratified_split(dataset)
        position = {comment.id: index for index, comment in enumerate(dataset)}
        for part in (train, dev):
            self.assertEqual([position[c.id] for c in part], sorted(position[c.id] for c in part))

    def test_class_too_small(self):
        with self.assertRaises(ValidationError) as ctx:
            stratified_split(build_dataset({CLEAN: 10, OFFENSIVE: 10, HATE: 1}))
        self.assertEqual(ctx.exception.code, 'class_too_small')

    def test_invalid_fraction(self):
        with self.assertRaises(ValidationError) as ctx:
            stratified_split(build_dataset({CLEAN: 5, OFFENSIVE: 5, HATE: 5}), 1.0)
        self.assertEqual(ctx.exception.code, 'invalid_train_frac')


class MetricTests(SimpleTestCase):

    def test_all_clean_predictor(self):
        golds = [CLEAN, CLEAN, OFFENSIVE, HATE]
        self.assertAlmostEqual(f1_macro([0, 0, 0, 0], golds), 2 / 9, places=12)
        self.assertAlmostEqual(f1_macro([0, 0, 0, 0], golds), 0.2222, places=4)

    def test_perfect_predictions(self):
        self.assertEqual(f1_macro([0, 1, 2], [0, 1, 2]), 1.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 200))
            preds, golds = rng.integers(0, 3, size=n).tolist(), rng.integers(0, 3, size=n).tolist()
            self.assertAlmostEqual(f1_macro(preds, golds), brute_force_f1(preds, golds), delta=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        preds, golds = rng.integers(0, 3, size=60), rng.integers(0, 3, size=60)
        order = rng.permutation(60)
        self.assertAlmostEqual(f1_macro(preds[order], golds[order]), f1_macro(preds, golds), delta=1e-12)

    def test_relabeling_bijection(self):
        rng = np.random.default_rng(2)
        preds, golds = rng.integers(0, 3, size=80), rng.integers(0, 3, size=80)
        mapping = np.array([2, 0, 1])
        self.assertAlmostEqual(f1_macro(mapping[preds], mapping[golds]), f1_macro(preds, golds), delta=1e-12)
        np.testing.assert_array_equal(
            np.sort(f1_per_class(mapping[preds], mapping[golds])),
            np.sort(f1_per_class(preds, golds)),
        )

    def test_errors(self):
        with self.assertRaises(ValidationError) as ctx:
            f1_macro([0, 1], [0])
        self.assertEqual(ctx.exception.code, 'length_mismatch')
        with self.assertRaises(ValidationError) as ctx:
            f1_macro([], [])
        self.assertEqual(ctx.exception.code, 'empty_predictions')

    def test_confusion(self):
        np.testing.assert_array_equal(confusion([0, 1, 2], [0, 1, 2]), np.eye(3, dtype=np.int64))
        np.testing.assert_array_equal(confusion([0, 0, 0, 0], [0, 0, 1, 2]), [[2, 0, 0], [1, 0, 0], [1, 0, 0]])
        rng = np.random.default_rng(3)
        preds, golds = rng.integers(0, 3, size=100), rng.integers(0, 3, size=100)
        expected = np.zeros((3, 3), dtype=np.int64)
        for p, g in zip(preds, golds):
            expected[g, p] += 1
        np.testing.assert_array_equal(confusion(preds, golds), expected)

    def test_distribution(self):
        stats = class_distribution(build_dataset({CLEAN: 915, OFFENSIVE: 50, HATE: 35}))
        self.assertEqual(stats.total, 1000)
        self.assertEqual(stats.fractions, {'clean': 0.915, 'offensive': 0.05, 'hate': 0.035})
        with self.assertRaises(ValidationError):
            class_distribution([])


class ErrorAnalysisTests(SimpleTestCase):

    def dataset(self, texts, label):
        return [LabeledComment(f'e{i}', text, label) for i, text in enumerate(texts)]

    def test_all_errors_contain_token(self):
        dataset = self.dataset(['nhổn vl', 'gắt vl quá', 'vl'], OFFENSIVE)
        self.assertEqual(token_error_share(dataset, [0, 0, 0], 'offensive', 'clean', 'vl'), 1.0)

    def test_no_errors(self):
        dataset = self.dataset(['nhổn vl'], OFFENSIVE)
        self.assertEqual(token_error_share(dataset, [1], 'offensive', 'clean', 'vl'), 0.0)
        self.assertEqual(error_token_ranking(dataset, [1], 'offensive', 'clean'), [])

    def test_mixed_errors(self):
        texts = [f'câu {i} vl' for i in range(6)] + [f'câu {i}' for i in range(6, 10)]
        dataset = self.dataset(texts, OFFENSIVE) + self.dataset(['vl sạch'], CLEAN)
        preds = [0] * 10 + [0]
        self.assertAlmostEqual(token_error_share(dataset, preds, 'offensive', 'clean', 'vl'), 0.6)
        self.assertEqual(len(error_set(dataset, preds, OFFENSIVE, CLEAN)), 10)

    def test_ranking(self):
        dataset = self.dataset(['vl vl quá', 'vl gắt', 'gắt quá', 'khác'], HATE)
        ranking = error_token_ranking(dataset, [0, 0, 0, 2], 'hate', 'clean', top_k=2)
        # Comptes par document ; à égalité, ordre alphabétique
        self.assertEqual([entry.token for entry in ranking], ['gắt', 'quá'])
        self.assertAlmostEqual(ranking[0].share, 2 / 3)

    def test_empty_token(self):
        with self.assertRaises(ValidationError) as ctx:
            token_error_share(self.dataset(['a'], OFFENSIVE), [0], 'offensive', 'clean', '')
        self.assertEqual(ctx.exception.code, 'empty_token')

    def test_breakdown(self):
        cells = error_breakdown([0, 0, 0, 1, 2], [1, 1, 2, 1, 2])
        self.assertEqual(cells, [
            {'gold': 'offensive', 'pred': 'clean', 'count': 2},
            {'gold': 'hate', 'pred': 'clean', 'count': 1},
        ])


class EvaluationCommandTests(SimpleTestCase):

    def test_split_command(self):
        out = StringIO()
        with tempfile.TemporaryDirectory() as tmp:
            path = write_dataset(build_dataset({CLEAN: 20, OFFENSIVE: 10, HATE: 10}), Path(tmp) / 'all.tsv')
            call_command('split', str(path), '--train-frac', '0.8', '--seed', '2', '--out', tmp, stdout=out)
            train = read_dataset(Path(tmp) / 'train.tsv')
            dev = read_dataset(Path(tmp) / 'dev.tsv')
        self.assertEqual((len(train), len(dev)), (32, 8))
        self.assertIn('train : clean=16, offensive=8, hate=8', out.getvalue())

    def test_evaluate_command(self):
        out = StringIO()
        with tempfile.TemporaryDirectory() as tmp:
            gold = write_dataset(gold_dataset(), Path(tmp) / 'gold.tsv')
            pred = write_lines(tmp, 'pred.txt', ['clean', 'clean', 'clean', 'clean'])
            call_command('evaluate', '--gold', str(gold), '--pred', str(pred),
                         '--out', str(Path(tmp) / 'eval.json'), stdout=out)
            result = json.loads((Path(tmp) / 'eval.json').read_text(encoding='utf-8'))
        self.assertIn('macro-F1 : 0.2222', out.getvalue())
        self.assertEqual(result['confusion'], [[2, 0, 0], [1, 0, 0], [1, 0, 0]])

    def test_analyze_token_command(self):
        out = StringIO()
        dataset = [
            LabeledComment('a', 'nhổn vl', 'offensive'),
            LabeledComment('b', 'gắt quá', 'offensive'),
            LabeledComment('c', 'đẹp', 'clean'),
        ]
        with tempfile.TemporaryDirectory() as tmp:
            gold = write_dataset(dataset, Path(tmp) / 'gold.tsv')
            pred = write_lines(tmp, 'pred.txt', ['clean', 'clean', 'clean'])
            call_command('analyze_token', '--gold', str(gold), '--pred', str(pred), '--token', 'vl', stdout=out)
        self.assertIn('Erreurs offensive → clean : 2', out.getvalue())
        self.assertIn('vl : 50.00%', out.getvalue())

    def test_analyze_token_uses_emoticons_setting(self):
        out = StringIO()
        dataset = [
            LabeledComment('a', 'gắt :(', 'offensive'),
            LabeledComment('b', 'đẹp', 'clean'),
        ]
        with tempfile.TemporaryDirectory() as tmp:
            emoticons = Path(tmp) / 'emoticons.tsv'
            emoticons.write_text(':(\t💢\n', encoding='utf-8')
            gold = write_dataset(dataset, Path(tmp) / 'gold.tsv')
            pred = write_lines(tmp, 'pred.txt', ['clean', 'clean'])
            with override_settings(HSD_EMOTICONS_PATH=str(emoticons)):
                call_command('analyze_token', '--gold', str(gold), '--pred', str(pred), '--token', '💢', stdout=out)
        self.assertIn('💢 : 100.00%', out.getvalue())