# -*- coding: utf-8 -*-
import json
import tempfile
from datetime import datetime, timedelta, timezone
from io import StringIO
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings

from apps.classifiers.services.labels import ClassWeights
from apps.classifiers.services.snapshots import SubmodelReport
from apps.ensemble.services.inference import EnsembleManifest, load_ensemble
from apps.evaluation.services.datasets import read_dataset

from .models import CellResult, ExperimentRun
from .services.config import Seeds, load_experiment_config
from .services.reporting import MANIFEST_FILE, results_table, write_file_manifest
from .services.runner import STAGES, ExperimentStageError, run_experiment

TOY_DIR = Path(settings.BASE_DIR) / 'data' / 'toy'

SMALL_EXPERIMENT = """
[dataset]
train = {train}

[split]
train_frac = 0.9
seed = 3

[training]
weights = 0.09, 0.95, 0.96
epochs = 2
patience = 1
batch_size = 32
kernel_sizes = 2, 3
filters = 4
hidden = 4
dense = 8
seed = 5

[embedding:comment]
dim = 8
window = 2
epochs = 1
max_len = 12

[cells]
textcnn = comment
bilstm = comment

[ensemble]
threshold = {threshold}
hidden = 8
seed = 7
"""


def write_config(directory, text, name='experiment.ini'):
    path = Path(directory) / name
    path.write_text(text, encoding='utf-8')
    return path


def small_config(directory, threshold=0.0, name='experiment.ini'):
    text = SMALL_EXPERIMENT.format(train=TOY_DIR / 'comments.tsv', threshold=threshold)
    return write_config(directory, text, name)


class ExperimentConfigTests(SimpleTestCase):

    def test_toy_experiment(self):
        config = load_experiment_config(TOY_DIR / 'experiment.ini')
        self.assertEqual(config.training.weights, ClassWeights(0.09, 0.95, 0.96))
        self.assertEqual(config.ensemble.threshold, 0.2)
        self.assertEqual(len(config.cells), 7)
        self.assertEqual([cell.model_id for cell in config.cells], sorted(cell.model_id for cell in config.cells))
        self.assertIn('sarnn__comment_tokenize', [cell.model_id for cell in config.cells])
        self.assertEqual(config.used_embeddings(), ['comment', 'comment_bpe', 'comment_tokenize', 'roberta'])
        self.assertTrue(config.embedding('comment_tokenize').lexicon_path.endswith('lexicon.txt'))
        self.assertTrue(config.augment.enabled)
        self.assertEqual(config.output_dir.resolve(), (Path(settings.BASE_DIR) / 'runs' / 'toy').resolve())

    def test_defaults(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, f'[dataset]\ntrain = {TOY_DIR / "comments.tsv"}\n')
            config = load_experiment_config(path)
        self.assertEqual(config.split.train_frac, 0.9)
        self.assertEqual(config.ensemble.threshold, 0.67)
        self.assertEqual(config.seeds, Seeds())
        self.assertEqual(config.cells, ())
        self.assertEqual(config.output_dir, Path(tmp).resolve() / 'runs' / 'experiment')

    def test_overrides(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = load_experiment_config(small_config(tmp))
        overridden = config.with_seed(21).with_output('/tmp/elsewhere')
        self.assertEqual(overridden.seeds, Seeds.uniform(21))
        self.assertEqual(overridden.output_dir, Path('/tmp/elsewhere'))
        self.assertIs(config.with_seed(None), config)
        self.assertEqual(config.seeds.training, 5)
        self.assertEqual(config.seeds.embedding, 5)

    def assertInvalid(self, text, code='invalid_config'):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_config(tmp, text)
            with self.assertRaises(ValidationError) as ctx:
                load_experiment_config(path)
        self.assertEqual(ctx.exception.code, code)
        return ctx.exception

    def test_validation(self):
        train = f'[dataset]\ntrain = {TOY_DIR / "comments.tsv"}\n'
        self.assertInvalid('[dataset]\ntrain = absent.tsv\n', code='missing_file')
        self.assertInvalid(train + '[training]\nweights = 0.1, -1, 1\n', code='invalid_weight')
        self.assertInvalid(train + '[ensemble]\nthreshold = 1.5\n')
        self.assertInvalid(train + '[split]\ntrain_frac = 1\n')
        self.assertInvalid(train + '[embedding:a]\ndim = 4\n[cells]\ntransformer = a\n')
        error = self.assertInvalid(train + '[cells]\ntextcnn = nowhere\n')
        self.assertEqual(error.params['section'], 'cells')
        self.assertInvalid(train + '[embedding:a]\nprovider = word2vec\n')
        self.assertInvalid(train + '[embedding:a]\nprovider = pretrained\n')
        self.assertInvalid(train + '[embedding:a]\ndim = 4\n[augment]\nenabled = yes\nencoder = a\n')
        self.assertInvalid(train + '[training]\nepochs = beaucoup\n')

    def test_normalization_reads_emoticons_setting(self):
        with tempfile.TemporaryDirectory() as tmp:
            emoticons = Path(tmp) / 'emoticons.tsv'
            emoticons.write_text(':(\t💢\n', encoding='utf-8')
            path = write_config(tmp, f'[dataset]\ntrain = {TOY_DIR / "comments.tsv"}\n')
            with override_settings(HSD_EMOTICONS_PATH=str(emoticons)):
                normalization = load_experiment_config(path).normalization
                self.assertEqual(normalization.emoticons_path, emoticons)
                self.assertEqual(normalization.build().emoticon_dict.lookup(':('), '💢')

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            load_experiment_config('/nonexistent/experiment.ini')


class ReportingTests(SimpleTestCase):

    def test_results_table(self):
        text = (
            f'[dataset]\ntrain = {TOY_DIR / "comments.tsv"}\n'
            '[embedding:a]\ndim = 4\n[embedding:b]\ndim = 4\n'
            '[cells]\nsarnn = a\ntextcnn = a, b\n'
        )
        with tempfile.TemporaryDirectory() as tmp:
            config = load_experiment_config(write_config(tmp, text))
        reports = [
            SubmodelReport(model_id, f1, ['s'], [0], np.array([[1.0, 0.0, 0.0]]))
            for model_id, f1 in (('textcnn__a', 0.71666), ('textcnn__b', 0.5), ('sarnn__a', 0.6345))
        ]
        self.assertEqual(results_table(config, reports), [
            ['embedding', 'textcnn', 'sarnn'],
            ['a', '0.7167', '0.6345'],
            ['b', '0.5000', '-'],
        ])

    def test_file_manifest(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            (root / 'cells' / 'x').mkdir(parents=True)
            (root / 'cells' / 'x' / 'report.json').write_text('{}\n', encoding='utf-8')
            (root / 'table.tsv').write_text('embedding\n', encoding='utf-8')
            first = write_file_manifest(root).read_bytes()
            second = write_file_manifest(root).read_bytes()
            entries = json.loads(first)['files']
        self.assertEqual(first, second)
        self.assertEqual([entry['path'] for entry in entries], ['cells/x/report.json', 'table.tsv'])
        self.assertNotIn(MANIFEST_FILE, [entry['path'] for entry in entries])
        self.assertEqual(len(entries[0]['sha256']), 64)


class RunnerTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def run_small(self, output, threshold=0.0, stages=None):
        config = load_experiment_config(small_config(self.root, threshold)).with_output(self.root / output)
        return run_experiment(config, stages.append if stages is not None else None)

    def test_two_cells(self):
        stages = []
        result = self.run_small('run', stages=stages)
        self.assertEqual(stages, list(STAGES))

        self.assertEqual([cell['model_id'] for cell in result.report['cells']], ['bilstm__comment', 'textcnn__comment'])
        self.assertEqual(result.selected, ['bilstm__comment', 'textcnn__comment'])
        self.assertEqual(result.report['selected_models'], result.selected)
        self.assertEqual(result.report['dataset']['all']['total'], 220)
        self.assertEqual(result.report['settings']['seeds']['ensemble'], 7)
        self.assertIn('offensive->clean', result.report['errors']['tokens'])

        table = (self.root / 'run' / 'table.tsv').read_text(encoding='utf-8').splitlines()
        self.assertEqual(table[0].split('\t'), ['embedding', 'textcnn', 'bilstm'])
        self.assertEqual(len(table), 2)

        dev = read_dataset(self.root / 'run' / 'split' / 'dev.tsv')
        self.assertEqual(len(dev), 22)
        manifest = EnsembleManifest.load(self.root / 'run' / 'ensemble' / 'manifest.json')
        self.assertEqual(manifest.submodels, ['../cells/bilstm__comment/model.pt', '../cells/textcnn__comment/model.pt'])
        predictions = load_ensemble(self.root / 'run' / 'ensemble' / 'manifest.json').predict(['gắt quá vl'])
        self.assertAlmostEqual(float(predictions[0].probabilities.sum()), 1.0, places=5)

        paths = [entry['path'] for entry in json.loads((self.root / 'run' / MANIFEST_FILE).read_text())['files']]
        self.assertEqual(paths, sorted(paths))
        for expected in ('report.json', 'table.tsv', 'ensemble/stacker.pt', 'cells/textcnn__comment/model.pt'):
            self.assertIn(expected, paths)

    def test_reruns_are_identical(self):
        self.run_small('run_a')
        self.run_small('run_b')
        for name in (MANIFEST_FILE, 'report.json', 'table.tsv', 'ensemble/manifest.json'):
            self.assertEqual(
                (self.root / 'run_a' / name).read_bytes(),
                (self.root / 'run_b' / name).read_bytes(),
                name,
            )

    def test_gate_failure_keeps_outputs(self):
        with self.assertRaises(ExperimentStageError) as ctx:
            self.run_small('run', threshold=1.0)
        self.assertEqual(ctx.exception.stage, 'gate')
        self.assertEqual(ctx.exception.cause.code, 'no_models_pass_gate')
        self.assertIn('gate', str(ctx.exception))
        self.assertTrue((self.root / 'run' / 'cells' / 'textcnn__comment' / 'report.json').exists())
        self.assertFalse((self.root / 'run' / 'report.json').exists())


class RunCommandTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_records_completed_run(self):
        out = StringIO()
        call_command('run', str(small_config(self.root)), '--out', str(self.root / 'run'), stdout=out)

        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'completed')
        self.assertEqual(run.current_stage, 'report')
        self.assertEqual(run.selected_models, 2)
        self.assertIsNotNone(run.completed_at)
        self.assertEqual(CellResult.objects.filter(run=run).count(), 2)
        cell = CellResult.objects.get(run=run, model_id='textcnn__comment')
        self.assertEqual((cell.architecture, cell.embedding), ('textcnn', 'comment'))
        self.assertTrue(cell.selected)
        self.assertIn('* textcnn__comment', out.getvalue())
        self.assertIn('Expérience terminée', out.getvalue())

    def test_records_failed_stage(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('run', '--config', str(small_config(self.root, threshold=1.0)),
                         '--out', str(self.root / 'run'), stdout=StringIO())
        self.assertIn('no_models_pass_gate', str(ctx.exception))

        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'failed')
        self.assertEqual(run.failed_stage, 'gate')
        self.assertIn('gate', run.error_message)
        self.assertFalse(run.cells.exists())

    def test_no_record(self):
        call_command('run', str(small_config(self.root)), '--out', str(self.root / 'run'), '--no-record',
                     '--seed', '4', stdout=StringIO())
        self.assertFalse(ExperimentRun.objects.exists())
        report = json.loads((self.root / 'run' / 'report.json').read_text(encoding='utf-8'))
        self.assertEqual(report['settings']['seeds']['split'], 4)

    def test_missing_configuration(self):
        with self.assertRaises(CommandError):
            call_command('run', stdout=StringIO())


class ExperimentRunModelTests(SimpleTestCase):

    def test_duration(self):
        started = datetime(2024, 3, 1, 9, 0, 0, tzinfo=timezone.utc)
        run = ExperimentRun(config_path='x.ini', started_at=started)
        self.assertIsNone(run.elapsed)
        self.assertIsNone(run.duration)
        run.completed_at = started + timedelta(hours=1, minutes=2, seconds=5, milliseconds=700)
        self.assertEqual(run.elapsed.total_seconds(), 3725.7)
        self.assertEqual(run.duration, '1:02:05')
        run.completed_at = started + timedelta(seconds=42)
        self.assertEqual(run.duration, '0:00:42')
