# -*- coding: utf-8 -*-
"""
Analyse des erreurs au niveau des jetons.

Pour un type d'erreur (classe réelle → classe prédite), on mesure la part
des exemples mal classés qui contiennent un jeton donné, et on classe les
jetons par cette part. Le découpage est l'espace, sur le texte nettoyé.
"""

from collections import Counter
from dataclasses import dataclass
from typing import List, Sequence, Union

from django.core.exceptions import ValidationError

from apps.classifiers.services.labels import ClassLabel

from .datasets import LabeledComment
from .metrics import CLASS_INDICES, confusion


@dataclass(frozen=True)
class TokenShare:
    token: str
    share: float
    count: int

    def to_dict(self) -> dict:
        return {'token': self.token, 'share': self.share, 'count': self.count}


def error_set(
    dataset: Sequence[LabeledComment],
    preds: Sequence[int],
    from_class: Union[str, int],
    to_class: Union[str, int],
) -> List[LabeledComment]:
    """Exemples de classe réelle ``from_class`` prédits ``to_class``."""
    if len(dataset) != len(preds):
        raise ValidationError(
            f"{len(preds)} prédictions pour {len(dataset)} commentaires",
            code='length_mismatch',
            params={'preds': len(preds), 'dataset': len(dataset)},
        )
    gold, predicted = ClassLabel.parse(from_class), ClassLabel.parse(to_class)
    return [
        comment for comment, pred in zip(dataset, preds)
        if comment.label == gold and int(pred) == predicted
    ]


def token_error_share(
    dataset: Sequence[LabeledComment],
    preds: Sequence[int],
    from_class: Union[str, int],
    to_class: Union[str, int],
    token: str,
) -> float:
    """Part des erreurs ``from_class → to_class`` dont le texte contient ``token`` (0 si aucune erreur)."""
    if not token:
        raise ValidationError("Le jeton analysé ne peut pas être vide", code='empty_token')
    errors = error_set(dataset, preds, from_class, to_class)
    if not errors:
        return 0.0
    return sum(token in comment.text.split() for comment in errors) / len(errors)


def error_token_ranking(
    dataset: Sequence[LabeledComment],
    preds: Sequence[int],
    from_class: Union[str, int],
    to_class: Union[str, int],
    top_k: int = 10,
) -> List[TokenShare]:
    """Jetons les plus présents dans les erreurs, par part décroissante puis ordre alphabétique."""
    errors = error_set(dataset, preds, from_class, to_class)
    if not errors:
        return []
    counts = Counter()
    for comment in errors:
        counts.update(set(comment.text.split()))
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))[:top_k]
    return [TokenShare(token, count / len(errors), count) for token, count in ranked]


def error_breakdown(preds: Sequence[int], golds: Sequence[int]) -> List[dict]:
    """Effectifs hors diagonale de la matrice de confusion, du plus fréquent au moins fréquent."""
    matrix = confusion(preds, golds)
    cells = [
        {'gold': ClassLabel(gold).label, 'pred': ClassLabel(pred).label, 'count': int(matrix[gold, pred])}
        for gold in CLASS_INDICES for pred in CLASS_INDICES
        if gold != pred and matrix[gold, pred] > 0
    ]
    return sorted(cells, key=lambda cell: -cell['count'])
