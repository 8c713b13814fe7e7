from pathlib import Path

from django.core.management.base import CommandError

from apps.classifiers.services.cells import REPORT_FILE, SNAPSHOT_FILE
from apps.classifiers.services.labels import ClassWeights
from apps.classifiers.services.snapshots import SubmodelReport, relative_path
from apps.ensemble.services.inference import EnsembleManifest, normalization_descriptor
from apps.ensemble.services.stacking import build_features, save_stacker, select_models, train_stacker
from apps.experiments.management.base import PipelineCommand
from apps.experiments.services.config import (
    EnsembleSection,
    NormalizationSection,
    TrainingSection,
    load_experiment_config,
)


class Command(PipelineCommand):
    help = "Sélectionne les sous-modèles et entraîne le modèle d'ensemble sur leurs sorties dev"

    def add_pipeline_arguments(self, parser):
        parser.add_argument(
            '--reports',
            nargs='*',
            default=None,
            help='Répertoires de cellules (ou fichiers report.json) ; par défaut les cellules de --config'
        )
        parser.add_argument('--threshold', type=float, default=None, help='Seuil de macro-F1 dev (0.67)')
        parser.add_argument('--weights', type=str, default=None, help='Poids clean,offensive,hate')

    @staticmethod
    def report_path(value) -> Path:
        path = Path(value)
        return path / REPORT_FILE if path.is_dir() else path

    def handle_pipeline(self, *args, **options):
        training, ensemble, normalization = TrainingSection(), EnsembleSection(), NormalizationSection()
        seed_fallback, paths = None, []
        if options['config']:
            experiment = load_experiment_config(options['config'])
            training, ensemble = experiment.training, experiment.ensemble
            normalization, seed_fallback = experiment.normalization, experiment.seeds.ensemble
            paths = [experiment.output_dir / 'cells' / cell.model_id / REPORT_FILE for cell in experiment.cells]
        if options['reports']:
            paths = [self.report_path(value) for value in options['reports']]
        if not paths:
            raise CommandError('Aucun rapport de sous-modèle (--reports ou --config)')

        reports = [SubmodelReport.load(path) for path in paths]
        directories = {report.model_id: Path(path).parent for report, path in zip(reports, paths)}
        threshold = ensemble.threshold if options['threshold'] is None else options['threshold']
        weights = ClassWeights.parse(options['weights']) if options['weights'] else training.weights

        selected = select_models(reports, threshold)
        features, labels, _ = build_features(selected, reports)
        fit = train_stacker(
            features,
            labels,
            weights,
            seed=self.resolve_seed(options, seed_fallback),
            settings=training.settings(),
            hidden=ensemble.hidden,
            model_ids=selected,
        )

        directory = self.output_dir(options, 'ensemble')
        save_stacker(directory / 'stacker.pt', fit)
        by_id = {report.model_id: report for report in reports}
        manifest = EnsembleManifest(
            submodels=[
                relative_path(directories[model_id] / (by_id[model_id].snapshot or SNAPSHOT_FILE), directory)
                for model_id in selected
            ],
            model_ids=selected,
            threshold=threshold,
            stacker='stacker.pt',
            normalization=normalization_descriptor(normalization.emoticons_path, normalization.separate_punct, directory),
        )
        manifest.save(directory / 'manifest.json')

        for model_id in selected:
            self.stdout.write(f'  retenu : {model_id} (macro-F1 dev {by_id[model_id].dev_f1:.4f})')
        self.stdout.write(f"macro-F1 dev de l'ensemble : {fit.fit_f1:.4f}")
        self.stdout.write(self.style.SUCCESS(f'Ensemble de {len(selected)} sous-modèles écrit dans {directory}'))
