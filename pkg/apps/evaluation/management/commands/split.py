from django.core.management.base import CommandError

from apps.evaluation.services.datasets import read_dataset, write_dataset
from apps.evaluation.services.metrics import class_distribution
from apps.evaluation.services.splitting import stratified_split
from apps.experiments.management.base import PipelineCommand
from apps.experiments.services.config import load_experiment_config


class Command(PipelineCommand):
    help = 'Découpe un jeu étiqueté en train.tsv et dev.tsv (stratifié par classe)'

    def add_pipeline_arguments(self, parser):
        parser.add_argument('dataset', nargs='?', default=None, help='Jeu id<TAB>label<TAB>text')
        parser.add_argument(
            '--train-frac',
            type=float,
            default=None,
            help="Part d'entraînement (0.9 par défaut)"
        )

    def handle_pipeline(self, *args, **options):
        train_frac, seed_fallback, dataset_path = 0.9, None, options['dataset']
        if options['config']:
            experiment = load_experiment_config(options['config'])
            train_frac = experiment.split.train_frac
            seed_fallback = experiment.seeds.split
            dataset_path = dataset_path or experiment.dataset.train
        if options['train_frac'] is not None:
            train_frac = options['train_frac']
        if not dataset_path:
            raise CommandError('Jeu de données requis (argument ou section [dataset] de --config)')

        dataset = read_dataset(dataset_path)
        train, dev = stratified_split(dataset, train_frac, self.resolve_seed(options, seed_fallback))
        directory = self.output_dir(options, 'split')
        write_dataset(train, directory / 'train.tsv')
        write_dataset(dev, directory / 'dev.tsv')

        for name, part in (('train', train), ('dev', dev)):
            stats = class_distribution(part)
            counts = ', '.join(f'{label}={count}' for label, count in stats.counts.items())
            self.stdout.write(f'{name} : {counts}')
        self.stdout.write(self.style.SUCCESS(f'Découpage écrit dans {directory}'))
