from apps.experiments.management.base import PipelineCommand
from apps.textnorm.services.normalization import NormalizationConfig, clean, configured_emoticons_path


class Command(PipelineCommand):
    help = 'Nettoie des commentaires bruts (une ligne par commentaire)'

    def add_pipeline_arguments(self, parser):
        parser.add_argument(
            'input',
            nargs='?',
            default='-',
            help="Fichier d'entrée UTF-8 ('-' pour l'entrée standard)"
        )
        parser.add_argument(
            '--emoticons',
            type=str,
            default=None,
            help="Dictionnaire d'émoticônes (clé<TAB>valeur)"
        )
        parser.add_argument(
            '--no-separate-punct',
            action='store_true',
            help='Ne pas séparer la ponctuation et les émojis des mots'
        )

    def handle_pipeline(self, *args, **options):
        config = NormalizationConfig.default(
            emoticons_path=configured_emoticons_path(options['emoticons']),
            separate_punct=not options['no_separate_punct'],
        )

        lines = self.read_lines(options['input'])
        with self.open_output(options['out']) as output:
            for line in lines:
                output.write(clean(line, config) + '\n')

        if options['out'] and options['out'] != '-':
            self.stdout.write(
                self.style.SUCCESS(f'{len(lines)} lignes nettoyées dans {options["out"]}')
            )
