# -*- coding: utf-8 -*-
"""
Classes cibles, poids de classes et triplets de probabilités.

L'ordre des classes (clean, offensive, hate) est fixe : il indexe les poids,
les matrices de confusion et les vecteurs de probabilités.
"""

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
from django.core.exceptions import ValidationError
from django.db import models

N_CLASSES = 3
PROBABILITY_TOLERANCE = 1e-6


class ClassLabel(models.IntegerChoices):
    CLEAN = 0, 'clean'
    OFFENSIVE = 1, 'offensive'
    HATE = 2, 'hate'

    @classmethod
    def parse(cls, value: Union[str, int]) -> 'ClassLabel':
        """Accepte le nom (``hate``), l'indice (``2``) ou un ClassLabel."""
        if isinstance(value, (int, np.integer)):
            if int(value) in cls.values:
                return cls(int(value))
        else:
            text = str(value).strip().lower()
            if text.isdigit() and int(text) in cls.values:
                return cls(int(text))
            for label in cls:
                if label.label == text:
                    return label
        raise ValidationError(
            f"Classe inconnue : {value!r}",
            code='unknown_label',
            params={'value': value},
        )

    @property
    def slug(self) -> str:
        return self.label


def parse_labels(values: Iterable[Union[str, int]]) -> Tuple[ClassLabel, ...]:
    """Liste de classes depuis ``offensive,hate`` ou un itérable de noms."""
    if isinstance(values, str):
        values = [part for part in values.split(',') if part.strip()]
    return tuple(ClassLabel.parse(value) for value in values)


@dataclass(frozen=True)
class ClassWeights:
    """Poids (clean, offensive, hate) du coût pondéré, tous strictement positifs."""

    clean: float = 1.0
    offensive: float = 1.0
    hate: float = 1.0

    def __post_init__(self):
        for name, value in zip(('clean', 'offensive', 'hate'), self.as_tuple()):
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(
                    f"Le poids de la classe {name} doit être strictement positif (reçu {value})",
                    code='invalid_weight',
                    params={'label': name, 'value': value},
                )

    @classmethod
    def parse(cls, text: str) -> 'ClassWeights':
        """``0.09,0.95,0.96`` → ClassWeights."""
        parts = [part.strip() for part in str(text).split(',')]
        if len(parts) != N_CLASSES:
            raise ValidationError(
                f"Trois poids attendus, {len(parts)} reçus : {text!r}",
                code='invalid_weight',
                params={'value': text},
            )
        try:
            return cls(*(float(part) for part in parts))
        except ValueError:
            raise ValidationError(
                f"Poids non numérique : {text!r}",
                code='invalid_weight',
                params={'value': text},
            )

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.clean, self.offensive, self.hate)

    def __str__(self) -> str:
        return ','.join(f'{value:g}' for value in self.as_tuple())


UNIFORM_WEIGHTS = ClassWeights()
REFERENCE_WEIGHTS = ClassWeights(0.09, 0.95, 0.96)


def validate_probabilities(probabilities: np.ndarray, tolerance: float = PROBABILITY_TOLERANCE) -> np.ndarray:
    """Vérifie que chaque ligne est un triplet de probabilités valide."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.ndim != 2 or probabilities.shape[1] != N_CLASSES:
        raise ValidationError(
            f"Probabilités de forme (N, 3) attendues, reçu {probabilities.shape}",
            code='invalid_probabilities',
            params={'shape': probabilities.shape},
        )
    if (
        not np.all(np.isfinite(probabilities))
        or np.any(probabilities < 0)
        or np.any(np.abs(probabilities.sum(axis=1) - 1.0) > tolerance)
    ):
        raise ValidationError(
            "Les probabilités doivent être positives et sommer à 1",
            code='invalid_probabilities',
            params={'shape': probabilities.shape},
        )
    return probabilities


def severity_argmax(probabilities: Sequence[float]) -> ClassLabel:
    """Classe la plus probable ; à égalité, la plus grave (hate > offensive > clean)."""
    best = max(range(N_CLASSES), key=lambda index: (probabilities[index], index))
    return ClassLabel(best)


def one_hot(labels: Sequence[int]) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    matrix = np.zeros((len(labels), N_CLASSES), dtype=np.float64)
    matrix[np.arange(len(labels)), labels] = 1.0
    return matrix
