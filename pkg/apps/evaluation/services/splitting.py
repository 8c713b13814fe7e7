# -*- coding: utf-8 -*-
"""
Découpage stratifié train/dev.

Chaque classe reçoit floor(frac * n) exemples d'entraînement ; les places
restantes pour atteindre round(frac * N) vont aux plus grands restes, à
égalité dans l'ordre des classes (clean, offensive, hate). Le calcul est fait
en fractions exactes. Une classe d'au moins deux exemples garde toujours au
moins un exemple en dev.
"""

import logging
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import numpy as np
from django.core.exceptions import ValidationError

from apps.classifiers.services.labels import ClassLabel

from .datasets import LabeledComment

# Configuration du logger
logger = logging.getLogger(__name__)


def _bounds(count: int) -> Tuple[int, int]:
    # Une classe d'au moins 2 exemples garde au moins un exemple de chaque côté
    return (1, count - 1) if count >= 2 else (0, count)


def allocate_train_counts(counts: Dict[ClassLabel, int], train_frac: float) -> Dict[ClassLabel, int]:
    """
    Effectifs d'entraînement par classe (plus grands restes).

    Une classe de ``n >= 2`` exemples reçoit entre 1 et ``n - 1`` places :
    elle est présente dans les deux parties. Une place refusée à une classe
    pleine passe à la classe suivante par ordre de reste.
    """
    frac = Fraction(train_frac).limit_denominator(10 ** 6)
    ideal = {label: frac * count for label, count in counts.items()}
    bounds = {label: _bounds(count) for label, count in counts.items()}
    allocation = {
        label: min(max(int(value), bounds[label][0]), bounds[label][1])
        for label, value in ideal.items()
    }
    total = sum(counts.values())
    target = int(frac * total + Fraction(1, 2))
    seats = target - sum(allocation.values())

    by_remainder = sorted(ideal, key=lambda label: (-(ideal[label] - int(ideal[label])), int(label)))
    # Tours successifs dans l'ordre des restes : une place par classe et par tour
    while seats > 0 and any(allocation[label] < bounds[label][1] for label in by_remainder):
        for label in by_remainder:
            if seats > 0 and allocation[label] < bounds[label][1]:
                allocation[label] += 1
                seats -= 1
    while seats < 0 and any(allocation[label] > bounds[label][0] for label in by_remainder):
        for label in reversed(by_remainder):
            if seats < 0 and allocation[label] > bounds[label][0]:
                allocation[label] -= 1
                seats += 1
    return allocation


def stratified_split(
    dataset: Sequence[LabeledComment],
    train_frac: float = 0.9,
    seed: int = 13,
) -> Tuple[List[LabeledComment], List[LabeledComment]]:
    """
    Découpe ``dataset`` en (train, dev) en conservant la proportion des classes.

    Args:
        dataset: Commentaires étiquetés
        train_frac (float): Part d'entraînement, dans ]0, 1[
        seed (int): Graine du tirage à l'intérieur de chaque classe

    Returns:
        tuple: (train, dev), chacun dans l'ordre d'origine

    Raises:
        ValidationError: Si une classe compte moins de 2 exemples
    """
    if not 0.0 < train_frac < 1.0:
        raise ValidationError(
            f"La part d'entraînement doit être dans ]0, 1[ (reçu {train_frac})",
            code='invalid_train_frac',
            params={'train_frac': train_frac},
        )

    positions = {label: [] for label in ClassLabel}
    for index, comment in enumerate(dataset):
        positions[comment.label].append(index)
    counts = {label: len(indices) for label, indices in positions.items()}

    for label, count in counts.items():
        if count < 2:
            raise ValidationError(
                f"La classe {label.label} compte {count} exemple(s), 2 au minimum sont requis",
                code='class_too_small',
                params={'label': label.label, 'count': count},
            )

    allocation = allocate_train_counts(counts, train_frac)
    rng = np.random.default_rng(seed)
    train_indices = set()
    for label in ClassLabel:
        order = rng.permutation(counts[label])
        train_indices.update(positions[label][i] for i in order[:allocation[label]])

    train = [comment for index, comment in enumerate(dataset) if index in train_indices]
    dev = [comment for index, comment in enumerate(dataset) if index not in train_indices]
    logger.info(
        f"Découpage : {len(train)} en entraînement, {len(dev)} en dev "
        f"({', '.join(f'{label.label}={allocation[label]}' for label in ClassLabel)})"
    )
    return train, dev
