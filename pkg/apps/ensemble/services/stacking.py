# -*- coding: utf-8 -*-
"""
Combinaison des sous-modèles par empilement (stacking).

Ce module fournit :
- La sélection des sous-modèles dont le macro-F1 dev dépasse le seuil
- La construction des caractéristiques : probabilités dev concaténées,
  dans l'ordre des identifiants de modèle
- Le modèle d'ensemble : couche dense cachée (128) puis softmax sur 3 classes,
  entraîné sur le jeu dev avec un découpage interne 80/20 pour l'arrêt anticipé
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from django.core.exceptions import ValidationError
from torch import nn

from apps.classifiers.services.architectures import predict_proba
from apps.classifiers.services.labels import (
    N_CLASSES,
    REFERENCE_WEIGHTS,
    ClassLabel,
    ClassWeights,
    severity_argmax,
)
from apps.classifiers.services.snapshots import SubmodelReport
from apps.classifiers.services.training import LabeledBatch, TrainingSettings, fit_classifier
from apps.evaluation.services.metrics import f1_macro
from apps.evaluation.services.splitting import allocate_train_counts

# Configuration du logger
logger = logging.getLogger(__name__)

STACKER_HIDDEN = 128
EARLY_STOP_FRAC = 0.8


def select_models(reports: Iterable[SubmodelReport], threshold: float = 0.67) -> List[str]:
    """
    Identifiants des sous-modèles dont le macro-F1 dev est strictement supérieur au seuil.

    Raises:
        ValidationError: Seuil hors de [0, 1], ou aucun modèle retenu
            (code ``no_models_pass_gate``)
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(
            f"Le seuil doit être dans [0, 1] (reçu {threshold})",
            code='invalid_threshold',
            params={'threshold': threshold},
        )
    reports = list(reports)
    selected = sorted(report.model_id for report in reports if report.dev_f1 > threshold)
    if not selected:
        best = max((report.dev_f1 for report in reports), default=None)
        raise ValidationError(
            f"Aucun sous-modèle ne dépasse le seuil {threshold} (meilleur macro-F1 : {best})",
            code='no_models_pass_gate',
            params={'threshold': threshold, 'best': best},
        )
    logger.info(f"{len(selected)}/{len(reports)} sous-modèles retenus au seuil {threshold}")
    return selected


def build_features(
    selected: Sequence[str],
    reports: Iterable[SubmodelReport],
) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """
    Concatène les probabilités dev des modèles retenus.

    Args:
        selected: Identifiants retenus (l'ordre canonique est l'ordre lexicographique)
        reports: Rapports dev des sous-modèles

    Returns:
        tuple: (caractéristiques (N, 3M), étiquettes (N,), identifiants des exemples)

    Raises:
        ValidationError: Si les rapports ne couvrent pas les mêmes exemples
            dans le même ordre (code ``sample_mismatch``)
    """
    by_id = {report.model_id: report for report in reports}
    ordered = sorted(selected)
    for model_id in ordered:
        if model_id not in by_id:
            raise ValidationError(
                f"Aucun rapport pour le sous-modèle {model_id}",
                code='unknown_model',
                params={'model_id': model_id},
            )

    reference = by_id[ordered[0]]
    for model_id in ordered[1:]:
        report = by_id[model_id]
        if list(report.dev_ids) != list(reference.dev_ids) or list(report.dev_labels) != list(reference.dev_labels):
            raise ValidationError(
                f"Les exemples dev de {model_id} diffèrent de ceux de {reference.model_id}",
                code='sample_mismatch',
                params={'model_id': model_id, 'reference': reference.model_id},
            )

    features = np.concatenate([by_id[model_id].dev_probabilities for model_id in ordered], axis=1)
    return features, np.asarray(reference.dev_labels, dtype=np.int64), list(reference.dev_ids)


class Stacker(nn.Module):
    """Entrée 3M → couche cachée (ReLU) → 3 classes (softmax)."""

    def __init__(self, input_dim: int, hidden: int = STACKER_HIDDEN):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_size = hidden
        self.hidden = nn.Linear(input_dim, hidden)
        self.output = nn.Linear(hidden, N_CLASSES)

    def forward(self, inputs: torch.Tensor, lengths: Optional[torch.Tensor] = None) -> torch.Tensor:
        return torch.softmax(self.output(torch.relu(self.hidden(inputs))), dim=1)

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return predict_proba(self, np.asarray(features, dtype=np.float32))


@dataclass
class StackerFit:
    model: Stacker
    fit_f1: float
    best_dev_loss: float
    model_ids: List[str]


def early_stop_split(labels: np.ndarray, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Indices (ajustement, arrêt anticipé) : 80/20 stratifié, les deux parties non vides."""
    counts = {ClassLabel(label): int((labels == label).sum()) for label in np.unique(labels)}
    allocation = allocate_train_counts(counts, EARLY_STOP_FRAC)
    if sum(allocation.values()) == len(labels):
        largest = max(allocation, key=lambda label: (allocation[label], -int(label)))
        allocation[largest] -= 1

    rng = np.random.default_rng(seed)
    fit, held_out = [], []
    for label in sorted(counts):
        indices = np.flatnonzero(labels == int(label))
        order = rng.permutation(len(indices))
        fit.extend(indices[order[:allocation[label]]])
        held_out.extend(indices[order[allocation[label]:]])
    return np.sort(np.asarray(fit, dtype=np.int64)), np.sort(np.asarray(held_out, dtype=np.int64))


def train_stacker(
    features: np.ndarray,
    labels: Sequence[int],
    weights: ClassWeights = REFERENCE_WEIGHTS,
    seed: int = 13,
    settings: TrainingSettings = TrainingSettings(),
    hidden: int = STACKER_HIDDEN,
    model_ids: Optional[Sequence[str]] = None,
) -> StackerFit:
    """
    Entraîne le modèle d'ensemble sur les sorties dev des sous-modèles.

    Args:
        features (ndarray): Caractéristiques (N, 3M)
        labels: Classes réelles (N,)
        weights (ClassWeights): Poids du coût
        seed (int): Graine (découpage interne, initialisation, lots)
        settings (TrainingSettings): Budget d'entraînement
        hidden (int): Largeur de la couche cachée
        model_ids: Identifiants des sous-modèles, conservés avec le modèle

    Returns:
        StackerFit: Modèle à son meilleur coût d'arrêt anticipé, macro-F1 sur tout le jeu fourni

    Raises:
        ValidationError: Moins de 2 exemples, tailles incohérentes ou une seule classe
    """
    features = np.asarray(features, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or len(features) != len(labels):
        raise ValidationError(
            f"{len(features)} lignes de caractéristiques pour {len(labels)} étiquettes",
            code='length_mismatch',
            params={'features': len(features), 'labels': len(labels)},
        )
    if len(labels) < 2:
        raise ValidationError("Au moins 2 exemples sont requis", code='too_few_samples')
    if len(np.unique(labels)) < 2:
        raise ValidationError(
            "Le modèle d'ensemble requiert au moins 2 classes",
            code='single_class',
            params={'classes': np.unique(labels).tolist()},
        )

    fit_indices, held_out_indices = early_stop_split(labels, seed)
    lengths = np.ones(len(labels), dtype=np.int64)
    fit_set = LabeledBatch(features[fit_indices], lengths[fit_indices], labels[fit_indices])
    held_out = LabeledBatch(features[held_out_indices], lengths[held_out_indices], labels[held_out_indices])

    torch.manual_seed(seed)
    model = Stacker(features.shape[1], hidden)
    result = fit_classifier(model, fit_set, held_out, weights, settings, seed=seed)

    predictions = [int(severity_argmax(row)) for row in model.predict_proba(features)]
    fit_f1 = f1_macro(predictions, labels.tolist())
    logger.info(f"Modèle d'ensemble : macro-F1 {fit_f1:.4f} sur {len(labels)} exemples")
    return StackerFit(model, fit_f1, result.best_dev_loss, list(model_ids or []))


def save_stacker(path: Union[str, Path], fit: StackerFit) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({
        'input_dim': fit.model.input_dim,
        'hidden': fit.model.hidden_size,
        'model_ids': list(fit.model_ids),
        'fit_f1': float(fit.fit_f1),
        'best_dev_loss': float(fit.best_dev_loss),
        'state_dict': {name: tensor.detach().cpu().float() for name, tensor in fit.model.state_dict().items()},
    }, path)
    return path


def load_stacker(path: Union[str, Path]) -> StackerFit:
    path = Path(path)
    if not path.exists():
        raise ValidationError(
            f"Modèle d'ensemble introuvable : {path}",
            code='missing_snapshot',
            params={'path': str(path)},
        )
    payload = torch.load(path, map_location='cpu', weights_only=True)
    model = Stacker(payload['input_dim'], payload['hidden'])
    model.load_state_dict(payload['state_dict'])
    model.eval()
    return StackerFit(model, payload['fit_f1'], payload['best_dev_loss'], list(payload['model_ids']))
