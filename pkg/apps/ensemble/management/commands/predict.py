from django.core.management.base import CommandError

from apps.ensemble.services.inference import load_ensemble
from apps.experiments.management.base import PipelineCommand
from apps.experiments.services.config import load_experiment_config


class Command(PipelineCommand):
    help = "Prédit la classe de commentaires bruts avec un ensemble entraîné"

    def add_pipeline_arguments(self, parser):
        parser.add_argument(
            'input',
            nargs='?',
            default='-',
            help="Commentaires bruts, un par ligne ('-' pour l'entrée standard)"
        )
        parser.add_argument('--manifest', type=str, default=None, help="Manifeste de l'ensemble (manifest.json)")
        parser.add_argument('--workers', type=int, default=1, help='Sous-modèles évalués en parallèle')

    def handle_pipeline(self, *args, **options):
        manifest = options['manifest']
        if not manifest and options['config']:
            experiment = load_experiment_config(options['config'])
            manifest = experiment.output_dir / 'ensemble' / 'manifest.json'
        if not manifest:
            raise CommandError("Manifeste requis (--manifest ou --config)")

        ensemble = load_ensemble(manifest)
        texts = self.read_lines(options['input'])
        predictions = ensemble.predict(texts, workers=options['workers'])

        # Une ligne par commentaire : classe puis probabilités clean, offensive, hate
        with self.open_output(options['out']) as output:
            for prediction in predictions:
                output.write(prediction.as_line() + '\n')
