from pathlib import Path

from django.core.management.base import CommandError

from apps.classifiers.services.architectures import Architecture
from apps.classifiers.services.cells import train_cell
from apps.classifiers.services.labels import ClassWeights
from apps.classifiers.services.training import TrainingSettings
from apps.embeddings.services.featurizers import load_featurizer
from apps.evaluation.services.datasets import map_texts, read_dataset
from apps.experiments.management.base import PipelineCommand
from apps.experiments.services.config import TrainingSection, load_experiment_config
from apps.textnorm.services.normalization import clean


class Command(PipelineCommand):
    help = 'Entraîne un sous-modèle (architecture × plongement) et écrit son snapshot et son rapport dev'

    def add_pipeline_arguments(self, parser):
        parser.add_argument('--arch', choices=Architecture.values, required=True, help='Architecture')
        parser.add_argument(
            '--embedding',
            type=str,
            required=True,
            help='Répertoire du plongement sauvegardé par train_embedding'
        )
        parser.add_argument('--train', type=str, required=True, help="Jeu d'entraînement id<TAB>label<TAB>text")
        parser.add_argument('--dev', type=str, required=True, help='Jeu dev id<TAB>label<TAB>text')
        parser.add_argument('--weights', type=str, default=None, help='Poids clean,offensive,hate (0.09,0.95,0.96)')
        parser.add_argument('--epochs', type=int, default=None, help="Nombre maximal d'époques")
        parser.add_argument('--patience', type=int, default=None, help='Époques sans amélioration avant arrêt')

    def handle_pipeline(self, *args, **options):
        training, seed_fallback, normalization = TrainingSection(), None, None
        if options['config']:
            experiment = load_experiment_config(options['config'])
            training, seed_fallback = experiment.training, experiment.seeds.training
            normalization = experiment.normalization.build()

        weights = ClassWeights.parse(options['weights']) if options['weights'] else training.weights
        settings = TrainingSettings(
            epochs=options['epochs'] or training.epochs,
            patience=training.patience if options['patience'] is None else options['patience'],
            batch_size=training.batch_size,
            learning_rate=training.learning_rate,
        )

        featurizer_dir = Path(options['embedding'])
        if not featurizer_dir.is_dir():
            raise CommandError(f'Plongement introuvable : {featurizer_dir}')
        featurizer = load_featurizer(featurizer_dir)

        # Le nettoyage est idempotent : les jeux déjà nettoyés ne changent pas
        train = map_texts(read_dataset(options['train']), lambda text: clean(text, normalization))
        dev = map_texts(read_dataset(options['dev']), lambda text: clean(text, normalization))

        config = training.model_config(
            options['arch'],
            featurizer.name,
            featurizer.dim,
            featurizer.max_len,
            featurizer.input_kind,
            self.resolve_seed(options, seed_fallback),
        )
        directory = self.output_dir(options, f'cells/{config.model_id}')
        report = train_cell(config, featurizer, featurizer_dir, train, dev, weights, settings, directory)

        self.stdout.write(f'meilleur coût dev : {report.best_dev_loss:.6f}')
        self.stdout.write(
            self.style.SUCCESS(f'{report.model_id} : macro-F1 dev {report.dev_f1:.4f} (écrit dans {directory})')
        )
