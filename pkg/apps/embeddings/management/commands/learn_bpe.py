from apps.embeddings.services.bpe import learn_bpe, save_merges
from apps.experiments.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Apprend une table de fusions BPE sur des textes nettoyés'

    def add_pipeline_arguments(self, parser):
        parser.add_argument(
            'input',
            nargs='?',
            default='-',
            help="Textes nettoyés, un par ligne ('-' pour l'entrée standard)"
        )
        parser.add_argument(
            '--merges',
            type=int,
            default=1000,
            help='Nombre de fusions à apprendre (défaut: 1000)'
        )

    def handle_pipeline(self, *args, **options):
        table = learn_bpe(self.read_lines(options['input']), options['merges'])

        if not options['out'] or options['out'] == '-':
            for left, right in table.merges:
                self.stdout.write(f'{left} {right}')
            return

        save_merges(table, options['out'])
        self.stdout.write(
            self.style.SUCCESS(f'{len(table)} fusions écrites dans {options["out"]}')
        )
