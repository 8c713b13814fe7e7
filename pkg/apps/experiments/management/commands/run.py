from django.core.management.base import CommandError
from django.utils import timezone

from apps.classifiers.services.snapshots import split_model_id
from apps.experiments.management.base import PipelineCommand
from apps.experiments.models import CellResult, ExperimentRun
from apps.experiments.services.config import load_experiment_config
from apps.experiments.services.runner import ExperimentStageError, run_experiment


class Command(PipelineCommand):
    help = "Exécute une expérience complète : nettoyage, découpage, plongements, cellules, ensemble, rapports"

    def add_pipeline_arguments(self, parser):
        parser.add_argument(
            'experiment',
            nargs='?',
            default=None,
            help="Fichier de configuration d'expérience (équivalent à --config)"
        )
        parser.add_argument(
            '--no-record',
            action='store_true',
            help="N'enregistre pas l'exécution en base de données"
        )

    def handle_pipeline(self, *args, **options):
        config_path = options['experiment'] or options['config']
        if not config_path:
            raise CommandError("Fichier de configuration requis (argument ou --config)")

        config = load_experiment_config(config_path).with_seed(options['seed']).with_output(options['out'])
        record = None
        if not options['no_record']:
            record = ExperimentRun.objects.create(
                config_path=str(config.source or config_path),
                output_dir=str(config.output_dir),
                seed=options['seed'],
                status='running',
            )

        def on_stage(stage):
            self.stdout.write(f'[{stage}]')
            if record is not None:
                record.current_stage = stage
                record.save(update_fields=['current_stage'])

        self.stdout.write(self.style.SUCCESS(f'Démarrage de l\'expérience {config_path}...'))
        try:
            result = run_experiment(config, on_stage)
        except ExperimentStageError as e:
            if record is not None:
                record.status = 'failed'
                record.failed_stage = e.stage
                record.error_message = str(e)
                record.completed_at = timezone.now()
                record.save()
            raise CommandError(str(e))

        if record is not None:
            record.status = 'completed'
            record.ensemble_f1 = result.ensemble_dev_f1
            record.selected_models = len(result.selected)
            record.completed_at = timezone.now()
            record.save()
            selected = set(result.selected)
            CellResult.objects.bulk_create([
                CellResult(
                    run=record,
                    model_id=report.model_id,
                    architecture=split_model_id(report.model_id)[0],
                    embedding=split_model_id(report.model_id)[1],
                    dev_f1=report.dev_f1,
                    best_dev_loss=report.best_dev_loss,
                    selected=report.model_id in selected,
                )
                for report in result.cell_reports
            ])

        for cell in result.report['cells']:
            marker = '*' if cell['selected'] else ' '
            self.stdout.write(f"  {marker} {cell['model_id']} : macro-F1 dev {cell['dev_f1']:.4f}")
        self.stdout.write(
            self.style.SUCCESS(
                f'Expérience terminée : macro-F1 dev de l\'ensemble {result.ensemble_dev_f1:.4f} '
                f'({len(result.selected)} sous-modèles, résultats dans {result.output_dir})'
            )
        )
