from pathlib import Path

from django.core.management.base import CommandError

from apps.augment.services.augmentation import augment_dataset, select_common_words
from apps.classifiers.services.labels import parse_labels
from apps.embeddings.services.featurizers import SentenceFeaturizer, load_featurizer
from apps.evaluation.services.datasets import read_dataset, write_dataset
from apps.experiments.management.base import PipelineCommand
from apps.experiments.services.config import AugmentSection, load_experiment_config


class Command(PipelineCommand):
    help = 'Ajoute des variantes par mots masqués aux commentaires offensive et hate'

    def add_pipeline_arguments(self, parser):
        parser.add_argument('dataset', help="Jeu d'entraînement nettoyé id<TAB>label<TAB>text")
        parser.add_argument(
            '--encoder',
            type=str,
            required=True,
            help='Répertoire du plongement mlm (découpage space) utilisé pour proposer les mots'
        )
        parser.add_argument('--n-outputs', type=int, default=None, help='Variantes par phrase (4 par défaut)')
        parser.add_argument('--n-positions', type=int, default=None, help='Positions masquées (1 par défaut)')
        parser.add_argument('--classes', type=str, default=None, help='Classes augmentées (offensive,hate)')
        parser.add_argument('--min-per-class', type=int, default=None, help='Occurrences minimales par classe')
        parser.add_argument('--top-k', type=int, default=None, help='Candidats examinés par position')

    def handle_pipeline(self, *args, **options):
        section, seed_fallback = AugmentSection(), None
        if options['config']:
            experiment = load_experiment_config(options['config'])
            section, seed_fallback = experiment.augment, experiment.seeds.augment

        featurizer = load_featurizer(Path(options['encoder']))
        if not isinstance(featurizer, SentenceFeaturizer):
            raise CommandError(f"{options['encoder']} n'est pas un plongement mlm")

        dataset = read_dataset(options['dataset'])
        common = select_common_words(
            dataset,
            options['min_per_class'] if options['min_per_class'] is not None else section.min_per_class,
        )
        augmented = augment_dataset(
            dataset,
            featurizer.encoder,
            common,
            classes=parse_labels(options['classes']) if options['classes'] else section.classes,
            n_positions=options['n_positions'] if options['n_positions'] is not None else section.n_positions,
            n_outputs=options['n_outputs'] if options['n_outputs'] is not None else section.n_outputs,
            seed=self.resolve_seed(options, seed_fallback),
            top_k=options['top_k'] or section.top_k,
        )

        path = self.output_dir(options, 'augment') / 'augmented.tsv'
        write_dataset(list(dataset) + augmented, path)
        self.stdout.write(f'mots communs : {len(common)}')
        self.stdout.write(
            self.style.SUCCESS(f'{len(augmented)} commentaires ajoutés à {len(dataset)} (écrit dans {path})')
        )
