# -*- coding: utf-8 -*-
"""
Macro-F1, matrice de confusion et répartition des classes.

Convention : précision, rappel et F1 valent 0 quand leur dénominateur est nul ;
les trois classes comptent toujours dans la moyenne.
"""

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from django.core.exceptions import ValidationError
from sklearn.metrics import confusion_matrix, f1_score

from apps.classifiers.services.labels import ClassLabel

from .datasets import LabeledComment

CLASS_INDICES = [int(label) for label in ClassLabel]


def _check_pair(preds: Sequence[int], golds: Sequence[int]) -> None:
    if len(preds) != len(golds):
        raise ValidationError(
            f"{len(preds)} prédictions pour {len(golds)} étiquettes",
            code='length_mismatch',
            params={'preds': len(preds), 'golds': len(golds)},
        )
    if len(preds) == 0:
        raise ValidationError("Aucune prédiction à évaluer", code='empty_predictions')


def f1_per_class(preds: Sequence[int], golds: Sequence[int]) -> np.ndarray:
    _check_pair(preds, golds)
    return f1_score(
        np.asarray(golds, dtype=np.int64),
        np.asarray(preds, dtype=np.int64),
        labels=CLASS_INDICES,
        average=None,
        zero_division=0,
    )


def f1_macro(preds: Sequence[int], golds: Sequence[int]) -> float:
    """Moyenne non pondérée des F1 des trois classes."""
    return float(np.mean(f1_per_class(preds, golds)))


def confusion(preds: Sequence[int], golds: Sequence[int]) -> np.ndarray:
    """Matrice 3×3 : lignes = classe réelle, colonnes = classe prédite."""
    if len(preds) != len(golds):
        _check_pair(preds, golds)
    if len(preds) == 0:
        return np.zeros((len(CLASS_INDICES), len(CLASS_INDICES)), dtype=np.int64)
    return confusion_matrix(
        np.asarray(golds, dtype=np.int64),
        np.asarray(preds, dtype=np.int64),
        labels=CLASS_INDICES,
    ).astype(np.int64)


@dataclass(frozen=True)
class DatasetStats:
    counts: Dict[str, int]
    fractions: Dict[str, float]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {'total': self.total, 'counts': dict(self.counts), 'fractions': dict(self.fractions)}


def class_distribution(dataset: Sequence[LabeledComment]) -> DatasetStats:
    """Effectifs et proportions (clean, offensive, hate)."""
    if not dataset:
        raise ValidationError("Jeu de données vide", code='empty_dataset')
    counts = {label.label: 0 for label in ClassLabel}
    for comment in dataset:
        counts[comment.label.label] += 1
    fractions = {name: count / len(dataset) for name, count in counts.items()}
    return DatasetStats(counts, fractions)
