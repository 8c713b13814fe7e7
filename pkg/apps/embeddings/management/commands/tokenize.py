from apps.embeddings.services.bpe import load_merges
from apps.embeddings.services.tokenizers import TokenizerKind, TokenizerResources, load_lexicon, tokenize
from apps.experiments.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Découpe des textes nettoyés en jetons (un texte par ligne, jetons séparés par des espaces)'

    def add_pipeline_arguments(self, parser):
        parser.add_argument(
            'input',
            nargs='?',
            default='-',
            help="Textes nettoyés ('-' pour l'entrée standard)"
        )
        parser.add_argument(
            '--kind',
            choices=TokenizerKind.values,
            default=TokenizerKind.SPACE,
            help='Découpage : space, bpe ou segmented'
        )
        parser.add_argument(
            '--merges',
            type=str,
            default=None,
            help='Fichier de fusions BPE (découpage bpe)'
        )
        parser.add_argument(
            '--lexicon',
            type=str,
            default=None,
            help='Lexique de mots composés (découpage segmented)'
        )

    def handle_pipeline(self, *args, **options):
        resources = TokenizerResources(
            merges=load_merges(options['merges']) if options['merges'] else None,
            lexicon=load_lexicon(options['lexicon']) if options['lexicon'] else None,
        )
        lines = self.read_lines(options['input'])
        with self.open_output(options['out']) as output:
            for line in lines:
                output.write(' '.join(tokenize(line, options['kind'], resources)) + '\n')
