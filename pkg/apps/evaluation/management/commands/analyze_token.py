from apps.classifiers.services.labels import ClassLabel
from apps.evaluation.services.analysis import error_set, error_token_ranking, token_error_share
from apps.evaluation.services.datasets import map_texts, read_dataset, read_predictions
from apps.experiments.management.base import PipelineCommand
from apps.textnorm.services.normalization import NormalizationConfig, clean, configured_emoticons_path


class Command(PipelineCommand):
    help = "Part des erreurs d'un type donné contenant un jeton (ex. vl pour offensive → clean)"

    def add_pipeline_arguments(self, parser):
        parser.add_argument('--gold', type=str, required=True, help='Jeu de référence id<TAB>label<TAB>text')
        parser.add_argument('--pred', type=str, required=True, help='Prédictions, une classe par ligne')
        parser.add_argument('--token', type=str, default=None, help='Jeton analysé (ex. vl)')
        parser.add_argument(
            '--from',
            dest='from_class',
            choices=[label.label for label in ClassLabel],
            default='offensive',
            help='Classe réelle'
        )
        parser.add_argument(
            '--to',
            dest='to_class',
            choices=[label.label for label in ClassLabel],
            default='clean',
            help='Classe prédite'
        )
        parser.add_argument('--top-k', type=int, default=10, help='Taille du classement des jetons')

    def handle_pipeline(self, *args, **options):
        # Le nettoyage est idempotent : sans effet sur un jeu déjà nettoyé
        config = NormalizationConfig.default(emoticons_path=configured_emoticons_path())
        dataset = map_texts(read_dataset(options['gold']), lambda text: clean(text, config))
        preds = [int(label) for label in read_predictions(options['pred'])]
        from_class, to_class = options['from_class'], options['to_class']

        errors = error_set(dataset, preds, from_class, to_class)
        self.stdout.write(f'Erreurs {from_class} → {to_class} : {len(errors)}')

        if options['token']:
            share = token_error_share(dataset, preds, from_class, to_class, options['token'])
            self.stdout.write(self.style.SUCCESS(f'{options["token"]} : {share:.2%}'))

        for entry in error_token_ranking(dataset, preds, from_class, to_class, options['top_k']):
            self.stdout.write(f'{entry.token}\t{entry.share:.4f}\t{entry.count}')
