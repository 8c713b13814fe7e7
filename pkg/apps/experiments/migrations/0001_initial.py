from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('config_path', models.CharField(max_length=500, verbose_name='Fichier de configuration')),
                ('output_dir', models.CharField(max_length=500, verbose_name='Répertoire de sortie')),
                ('seed', models.IntegerField(blank=True, null=True, verbose_name='Graine imposée')),
                ('status', models.CharField(choices=[('running', 'En cours'), ('completed', 'Terminé'), ('failed', 'Échec')], default='running', max_length=20, verbose_name='Statut')),
                ('current_stage', models.CharField(blank=True, max_length=20, verbose_name='Étape en cours')),
                ('started_at', models.DateTimeField(auto_now_add=True, verbose_name='Démarré le')),
                ('completed_at', models.DateTimeField(blank=True, null=True, verbose_name='Terminé le')),
                ('ensemble_f1', models.FloatField(blank=True, null=True, verbose_name="Macro-F1 dev de l'ensemble")),
                ('selected_models', models.PositiveIntegerField(default=0, verbose_name='Sous-modèles retenus')),
                ('failed_stage', models.CharField(blank=True, max_length=20, verbose_name='Étape en échec')),
                ('error_message', models.TextField(blank=True, verbose_name="Message d'erreur")),
            ],
            options={
                'verbose_name': 'Expérience',
                'verbose_name_plural': 'Expériences',
                'ordering': ['-started_at'],
            },
        ),
        migrations.CreateModel(
            name='CellResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('model_id', models.CharField(max_length=100, verbose_name='Identifiant')),
                ('architecture', models.CharField(max_length=20, verbose_name='Architecture')),
                ('embedding', models.CharField(max_length=50, verbose_name='Plongement')),
                ('dev_f1', models.FloatField(verbose_name='Macro-F1 dev')),
                ('best_dev_loss', models.FloatField(blank=True, null=True, verbose_name='Meilleur coût dev')),
                ('selected', models.BooleanField(default=False, verbose_name="Retenu pour l'ensemble")),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='cells', to='experiments.experimentrun', verbose_name='Expérience')),
            ],
            options={
                'verbose_name': 'Résultat de cellule',
                'verbose_name_plural': 'Résultats de cellules',
                'ordering': ['run', 'model_id'],
                'unique_together': {('run', 'model_id')},
            },
        ),
    ]
