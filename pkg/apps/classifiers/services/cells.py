# -*- coding: utf-8 -*-
"""
Entraînement d'une cellule (architecture × plongement).

Les textes nettoyés passent par le plongement de la cellule, le modèle est
entraîné jusqu'au meilleur coût dev, puis le snapshot ``model.pt`` et le
rapport dev ``report.json`` sont écrits dans le répertoire de la cellule.
"""

import logging
from pathlib import Path
from typing import Sequence

from apps.embeddings.services.featurizers import Featurizer
from apps.evaluation.services.datasets import LabeledComment, labels, texts
from apps.evaluation.services.metrics import f1_macro

from .architectures import ModelConfig
from .labels import ClassWeights, severity_argmax
from .snapshots import SubmodelReport, relative_path, save_snapshot
from .training import LabeledBatch, TrainingSettings, train_model

# Configuration du logger
logger = logging.getLogger(__name__)

SNAPSHOT_FILE = 'model.pt'
REPORT_FILE = 'report.json'


def labeled_batch(featurizer: Featurizer, dataset: Sequence[LabeledComment]) -> LabeledBatch:
    features = featurizer.featurize(texts(dataset))
    return LabeledBatch(features.inputs, features.lengths, labels(dataset))


def train_cell(
    config: ModelConfig,
    featurizer: Featurizer,
    featurizer_dir: Path,
    train: Sequence[LabeledComment],
    dev: Sequence[LabeledComment],
    weights: ClassWeights,
    settings: TrainingSettings,
    directory: Path,
) -> SubmodelReport:
    """
    Entraîne une cellule et écrit son snapshot et son rapport dev.

    Args:
        config (ModelConfig): Architecture et hyperparamètres
        featurizer (Featurizer): Plongement de la cellule
        featurizer_dir (Path): Répertoire du plongement sauvegardé (référencé par le snapshot)
        train: Jeu d'entraînement nettoyé
        dev: Jeu dev nettoyé
        weights (ClassWeights): Poids du coût
        settings (TrainingSettings): Budget d'entraînement
        directory (Path): Répertoire de la cellule

    Returns:
        SubmodelReport: Sorties dev, macro-F1 dev et meilleur coût dev
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    trained = train_model(config, labeled_batch(featurizer, train), labeled_batch(featurizer, dev), weights, settings)
    probabilities = trained.fit.dev_probabilities
    predictions = [int(severity_argmax(row)) for row in probabilities]
    dev_f1 = f1_macro(predictions, labels(dev))

    save_snapshot(
        directory / SNAPSHOT_FILE,
        config,
        trained.model,
        trained.best_dev_loss,
        featurizer=relative_path(featurizer_dir, directory),
    )
    report = SubmodelReport(
        model_id=config.model_id,
        dev_f1=dev_f1,
        dev_ids=[comment.id for comment in dev],
        dev_labels=labels(dev),
        dev_probabilities=probabilities,
        best_dev_loss=trained.best_dev_loss,
        snapshot=SNAPSHOT_FILE,
    )
    report.save(directory / REPORT_FILE)
    logger.info(f"Cellule {config.model_id} : macro-F1 dev {dev_f1:.4f}")
    return report
