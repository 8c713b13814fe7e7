from apps.embeddings.services.featurizers import EmbeddingProvider, EmbeddingSpec, build_featurizer
from apps.embeddings.services.tokenizers import TokenizerKind
from apps.experiments.management.base import PipelineCommand
from apps.experiments.services.config import load_experiment_config


class Command(PipelineCommand):
    help = 'Entraîne (ou charge) un plongement et le sauvegarde dans un répertoire'

    def add_pipeline_arguments(self, parser):
        parser.add_argument(
            'input',
            nargs='?',
            default='-',
            help="Textes nettoyés d'entraînement ('-' pour l'entrée standard)"
        )
        parser.add_argument(
            '--kind',
            choices=EmbeddingProvider.values,
            default=EmbeddingProvider.CBOW,
            help='Fournisseur : cbow, mlm ou pretrained'
        )
        parser.add_argument('--name', type=str, default='comment', help='Nom du plongement')
        parser.add_argument(
            '--tokenizer',
            choices=TokenizerKind.values,
            default=TokenizerKind.SPACE,
            help='Découpage des textes'
        )
        parser.add_argument('--dim', type=int, default=None, help='Dimension (200 pour cbow, 256 pour mlm)')
        parser.add_argument('--window', type=int, default=5, help='Fenêtre CBOW')
        parser.add_argument('--epochs', type=int, default=5, help="Nombre d'époques")
        parser.add_argument('--min-count', type=int, default=1, help='Fréquence minimale')
        parser.add_argument('--max-len', type=int, default=64, help='Longueur maximale des suites')
        parser.add_argument('--bpe-merges', type=int, default=1000, help='Fusions BPE à apprendre')
        parser.add_argument('--lexicon', type=str, default=None, help='Lexique (découpage segmented)')
        parser.add_argument('--vectors', type=str, default=None, help='Fichier word2vec (pretrained)')

    def handle_pipeline(self, *args, **options):
        if options['config']:
            # Le plongement est décrit par la section [embedding:<name>]
            experiment = load_experiment_config(options['config'])
            spec = experiment.embedding(options['name'])
            seed = self.resolve_seed(options, experiment.seeds.embedding)
        else:
            default_dim = 256 if options['kind'] == EmbeddingProvider.MLM else 200
            spec = EmbeddingSpec(
                name=options['name'],
                provider=options['kind'],
                tokenizer=options['tokenizer'],
                max_len=options['max_len'],
                dim=options['dim'] or default_dim,
                window=options['window'],
                epochs=options['epochs'],
                min_count=options['min_count'],
                n_merges=options['bpe_merges'],
                vectors_path=options['vectors'],
                lexicon_path=options['lexicon'],
            )
            seed = self.resolve_seed(options)

        texts = self.read_lines(options['input'])
        featurizer = build_featurizer(spec, texts, seed)
        directory = featurizer.save(self.output_dir(options, f'embeddings/{spec.name}'))

        self.stdout.write(
            self.style.SUCCESS(
                f'Plongement {spec.name} ({spec.provider}, dimension {featurizer.dim}) sauvegardé dans {directory}'
            )
        )
