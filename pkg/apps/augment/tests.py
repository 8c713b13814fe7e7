# -*- coding: utf-8 -*-
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.test import SimpleTestCase

from apps.augment.services.augmentation import (
    CommonWordSet,
    augment_dataset,
    augment_sentence,
    select_common_words,
)
from apps.classifiers.services.labels import ClassLabel
from apps.embeddings.services.featurizers import EmbeddingProvider, EmbeddingSpec, build_featurizer
from apps.evaluation.services.datasets import LabeledComment, read_dataset, write_dataset

VOCABULARY = ['làm', 'quá', 'thì', 'vl', 'gắt', 'đẹp', 'nhổn', 'trời', 'hay', 'không']
COMMON = CommonWordSet(frozenset({'làm', 'quá', 'thì', 'hay'}))


class RotatingProposer:
    """Propositions déterministes : le vocabulaire décalé selon la position."""

    def __init__(self, vocabulary=VOCABULARY):
        self.vocabulary = list(vocabulary)
        self.calls = []

    def propose_masked(self, tokens, position, top_k=10):
        self.calls.append((tuple(tokens), position))
        shift = (position + len(tokens)) % len(self.vocabulary)
        ranked = self.vocabulary[shift:] + self.vocabulary[:shift]
        return [(token, 1.0 / (rank + 1)) for rank, token in enumerate(ranked[:top_k])]


def comment(text, label=ClassLabel.OFFENSIVE, identifier='s1'):
    return LabeledComment(identifier, text, label)


class CommonWordTests(SimpleTestCase):

    def dataset(self, per_class):
        rows = []
        for label, texts in per_class.items():
            rows.extend(comment(text, label, f'{label.label}{i}') for i, text in enumerate(texts))
        return rows

    def test_token_in_every_class(self):
        dataset = self.dataset({
            ClassLabel.CLEAN: ['làm đẹp', 'làm hay', 'làm trời'],
            ClassLabel.OFFENSIVE: ['làm vl', 'làm gắt', 'làm quá'],
            ClassLabel.HATE: ['làm nhổn', 'làm nhổn', 'làm thì'],
        })
        common = select_common_words(dataset, min_per_class=3)
        self.assertIn('làm', common)
        self.assertNotIn('vl', common)
        self.assertEqual(list(common), ['làm'])

    def test_below_threshold(self):
        dataset = self.dataset({
            ClassLabel.CLEAN: ['làm làm làm'],
            ClassLabel.OFFENSIVE: ['làm làm'],
            ClassLabel.HATE: ['làm làm làm'],
        })
        self.assertNotIn('làm', select_common_words(dataset, min_per_class=3))
        self.assertIn('làm', select_common_words(dataset, min_per_class=2))

    def test_single_occurrence(self):
        dataset = self.dataset({
            ClassLabel.CLEAN: ['thì a'],
            ClassLabel.OFFENSIVE: ['thì b'],
            ClassLabel.HATE: ['thì c'],
        })
        self.assertEqual(list(select_common_words(dataset, min_per_class=1)), ['thì'])

    def test_missing_class(self):
        with self.assertRaises(ValidationError) as ctx:
            select_common_words(self.dataset({ClassLabel.CLEAN: ['a'], ClassLabel.HATE: ['a']}), 1)
        self.assertEqual(ctx.exception.code, 'missing_class')

    def test_invalid_threshold(self):
        with self.assertRaises(ValidationError) as ctx:
            select_common_words([], min_per_class=0)
        self.assertEqual(ctx.exception.code, 'invalid_min_per_class')


class AugmentSentenceTests(SimpleTestCase):

    def test_fuzzed_sentences(self):
        rng = np.random.default_rng(0)
        encoder = RotatingProposer()
        for case in range(1000):
            length = int(rng.integers(1, 12))
            tokens = [VOCABULARY[i] for i in rng.integers(0, len(VOCABULARY), size=length)]
            label = ClassLabel(int(rng.integers(0, 3)))
            sample = comment(' '.join(tokens), label, f'f{case}')
            n_positions = int(rng.integers(1, length + 1))
            seed = int(rng.integers(10 ** 6))

            outputs = augment_sentence(sample, encoder, COMMON, n_positions, n_outputs=3, seed=seed)
            self.assertEqual(len(outputs), 3)
            for output in outputs:
                self.assertEqual(len(output.tokens), length)
                self.assertEqual(output.label, label)
                for position, (before, after) in enumerate(zip(tokens, output.tokens)):
                    if position in output.replaced_positions:
                        self.assertIn(after, COMMON)
                        self.assertNotEqual(after, before)
                    else:
                        self.assertEqual(after, before)
                self.assertLessEqual(len(output.replaced_positions), n_positions)
            again = augment_sentence(sample, encoder, COMMON, n_positions, n_outputs=3, seed=seed)
            self.assertEqual(again, outputs)

    def test_best_common_candidate(self):
        # Position 0 d'une phrase de 2 jetons : propositions à partir de 'thì'
        outputs = augment_sentence(comment('vl gắt'), RotatingProposer(), COMMON, n_positions=2, n_outputs=1)
        self.assertEqual(outputs[0].tokens, ('thì', 'hay'))
        self.assertEqual(outputs[0].replaced_positions, frozenset({0, 1}))

    def test_masks_the_original_sentence(self):
        encoder = RotatingProposer()
        augment_sentence(comment('vl gắt nhổn'), encoder, COMMON, n_positions=3, n_outputs=1)
        self.assertEqual({tokens for tokens, _ in encoder.calls}, {('vl', 'gắt', 'nhổn')})
        self.assertEqual(sorted(position for _, position in encoder.calls), [0, 1, 2])

    def test_fallback_keeps_token(self):
        encoder = RotatingProposer(['vl', 'gắt'])
        outputs = augment_sentence(comment('nhổn quá'), encoder, COMMON, n_positions=1, n_outputs=2)
        for output in outputs:
            self.assertEqual(output.tokens, ('nhổn', 'quá'))
            self.assertEqual(output.replaced_positions, frozenset())

    def test_no_outputs(self):
        self.assertEqual(augment_sentence(comment('vl'), RotatingProposer(), COMMON, n_outputs=0), [])

    def test_errors(self):
        with self.assertRaises(ValidationError) as ctx:
            augment_sentence(comment('vl gắt'), RotatingProposer(), COMMON, n_positions=3)
        self.assertEqual(ctx.exception.code, 'invalid_positions')
        with self.assertRaises(ValidationError) as ctx:
            augment_sentence(comment('vl'), RotatingProposer(), CommonWordSet(frozenset()))
        self.assertEqual(ctx.exception.code, 'empty_common_words')


class AugmentDatasetTests(SimpleTestCase):

    def setUp(self):
        self.dataset = [
            comment('đẹp trời', ClassLabel.CLEAN, 'a'),
            comment('vl gắt', ClassLabel.OFFENSIVE, 'b'),
            comment('nhổn', ClassLabel.HATE, 'c'),
            comment('vl', ClassLabel.OFFENSIVE, 'd'),
        ]

    def test_only_selected_classes(self):
        augmented = augment_dataset(self.dataset, RotatingProposer(), COMMON, n_outputs=4, seed=3)
        self.assertTrue(augmented)
        sources = {sample.id.split('-aug')[0] for sample in augmented}
        self.assertNotIn('a', sources)
        for sample in augmented:
            source = next(c for c in self.dataset if c.id == sample.id.split('-aug')[0])
            self.assertEqual(sample.label, source.label)
            self.assertEqual(len(sample.text.split()), len(source.text.split()))
            self.assertNotEqual(sample.text, source.text)

    def test_ids_and_no_duplicates(self):
        augmented = augment_dataset(self.dataset, RotatingProposer(), COMMON, n_outputs=6, seed=3)
        self.assertEqual(len({sample.id for sample in augmented}), len(augmented))
        by_source = {}
        for sample in augmented:
            source, _, k = sample.id.partition('-aug')
            by_source.setdefault(source, []).append((int(k), sample.text))
        for entries in by_source.values():
            self.assertEqual([k for k, _ in entries], list(range(1, len(entries) + 1)))
            self.assertEqual(len({text for _, text in entries}), len(entries))

    def test_deterministic(self):
        first = augment_dataset(self.dataset, RotatingProposer(), COMMON, seed=11)
        self.assertEqual(augment_dataset(self.dataset, RotatingProposer(), COMMON, seed=11), first)

    def test_no_replacement_no_output(self):
        self.assertEqual(augment_dataset(self.dataset, RotatingProposer(['vl']), COMMON), [])


class AugmentCommandTests(SimpleTestCase):

    def test_augment_command(self):
        texts = ['làm quá vl', 'làm gắt quá', 'trời đẹp làm quá', 'nhổn làm quá']
        dataset = []
        for i in range(9):
            label = ClassLabel(i % 3)
            dataset.append(LabeledComment(f'x{i}', texts[i % len(texts)], label))
        spec = EmbeddingSpec(name='roberta', provider=EmbeddingProvider.MLM, dim=16, heads=2, ffn=32,
                             epochs=1, max_len=8)
        featurizer = build_featurizer(spec, [c.text for c in dataset] * 3, seed=1)

        out = StringIO()
        with tempfile.TemporaryDirectory() as tmp:
            encoder_dir = featurizer.save(Path(tmp) / 'roberta')
            path = write_dataset(dataset, Path(tmp) / 'train.tsv')
            call_command('augment', str(path), '--encoder', str(encoder_dir), '--min-per-class', '1',
                         '--n-outputs', '2', '--seed', '4', '--out', str(Path(tmp) / 'aug'), stdout=out)
            result = read_dataset(Path(tmp) / 'aug' / 'augmented.tsv')
        self.assertEqual(result[:len(dataset)], dataset)
        for sample in result[len(dataset):]:
            self.assertIn('-aug', sample.id)
            self.assertNotEqual(sample.label, ClassLabel.CLEAN)
        self.assertIn('commentaires ajoutés', out.getvalue())
