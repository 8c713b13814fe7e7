# -*- coding: utf-8 -*-
"""
Historique des expériences exécutées par la commande ``run``.

Les résultats de référence restent les fichiers du répertoire de sortie ;
ces modèles servent au suivi (statut, étape en échec, durée, F1 par cellule).
"""

from datetime import timedelta
from typing import Optional

from django.db import models


class ExperimentRun(models.Model):
    """
    Exécution d'une expérience
    """
    STATUS_CHOICES = [
        ('running', 'En cours'),
        ('completed', 'Terminé'),
        ('failed', 'Échec'),
    ]

    config_path = models.CharField('Fichier de configuration', max_length=500)
    output_dir = models.CharField('Répertoire de sortie', max_length=500)
    seed = models.IntegerField('Graine imposée', null=True, blank=True)
    status = models.CharField('Statut', max_length=20, choices=STATUS_CHOICES, default='running')
    current_stage = models.CharField('Étape en cours', max_length=20, blank=True)
    started_at = models.DateTimeField('Démarré le', auto_now_add=True)
    completed_at = models.DateTimeField('Terminé le', null=True, blank=True)

    # Résultats
    ensemble_f1 = models.FloatField('Macro-F1 dev de l\'ensemble', null=True, blank=True)
    selected_models = models.PositiveIntegerField('Sous-modèles retenus', default=0)

    # Erreurs
    failed_stage = models.CharField('Étape en échec', max_length=20, blank=True)
    error_message = models.TextField('Message d\'erreur', blank=True)

    class Meta:
        verbose_name = 'Expérience'
        verbose_name_plural = 'Expériences'
        ordering = ['-started_at']

    def __str__(self):
        return f"{self.config_path} - {self.get_status_display()} - {self.started_at}"

    @property
    def elapsed(self) -> Optional[timedelta]:
        if self.started_at is None or self.completed_at is None:
            return None
        return self.completed_at - self.started_at

    @property
    def duration(self) -> Optional[str]:
        """Durée au format ``h:mm:ss`` ; None tant que l'exécution n'est pas terminée."""
        elapsed = self.elapsed
        if elapsed is None:
            return None
        minutes, seconds = divmod(int(elapsed.total_seconds()), 60)
        hours, minutes = divmod(minutes, 60)
        return f'{hours}:{minutes:02d}:{seconds:02d}'


class CellResult(models.Model):
    """
    Score dev d'un sous-modèle (architecture × plongement)
    """
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='cells', verbose_name='Expérience')
    model_id = models.CharField('Identifiant', max_length=100)
    architecture = models.CharField('Architecture', max_length=20)
    embedding = models.CharField('Plongement', max_length=50)
    dev_f1 = models.FloatField('Macro-F1 dev')
    best_dev_loss = models.FloatField('Meilleur coût dev', null=True, blank=True)
    selected = models.BooleanField('Retenu pour l\'ensemble', default=False)

    class Meta:
        verbose_name = 'Résultat de cellule'
        verbose_name_plural = 'Résultats de cellules'
        ordering = ['run', 'model_id']
        unique_together = [['run', 'model_id']]

    def __str__(self):
        return f"{self.model_id} - {self.dev_f1:.4f}"
