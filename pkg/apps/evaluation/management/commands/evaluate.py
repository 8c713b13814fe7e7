import json

from apps.classifiers.services.labels import ClassLabel
from apps.evaluation.services.analysis import error_breakdown
from apps.evaluation.services.datasets import labels, read_dataset, read_predictions
from apps.evaluation.services.metrics import confusion, f1_macro, f1_per_class
from apps.experiments.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Calcule le macro-F1 et la matrice de confusion de prédictions'

    def add_pipeline_arguments(self, parser):
        parser.add_argument('--gold', type=str, required=True, help='Jeu de référence id<TAB>label<TAB>text')
        parser.add_argument('--pred', type=str, required=True, help='Prédictions, une classe par ligne')

    def handle_pipeline(self, *args, **options):
        golds = labels(read_dataset(options['gold']))
        preds = [int(label) for label in read_predictions(options['pred'])]

        score = f1_macro(preds, golds)
        per_class = f1_per_class(preds, golds)
        matrix = confusion(preds, golds)

        names = [label.label for label in ClassLabel]
        self.stdout.write(f'macro-F1 : {score:.4f}')
        for name, value in zip(names, per_class):
            self.stdout.write(f'  F1 {name} : {value:.4f}')
        self.stdout.write('confusion (lignes = référence, colonnes = prédiction) :')
        self.stdout.write('\t' + '\t'.join(names))
        for name, row in zip(names, matrix):
            self.stdout.write(name + '\t' + '\t'.join(str(int(value)) for value in row))

        if options['out']:
            result = {
                'f1_macro': score,
                'f1_per_class': dict(zip(names, (float(value) for value in per_class))),
                'confusion': matrix.tolist(),
                'errors': error_breakdown(preds, golds),
            }
            with self.open_output(options['out']) as output:
                output.write(json.dumps(result, ensure_ascii=False, indent=2, sort_keys=True) + '\n')
            self.stdout.write(self.style.SUCCESS(f'Évaluation écrite dans {options["out"]}'))
