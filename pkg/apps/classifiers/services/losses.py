# -*- coding: utf-8 -*-
"""
Coût d'entropie croisée pondéré par classe.

J = -(1/N) * somme_i w[classe(i)] * log(p_i[classe(i)]), les probabilités étant
bornées à [1e-7, 1] avant le logarithme.
"""

from typing import Sequence, Union

import torch
from django.core.exceptions import ValidationError

from .labels import ClassWeights

PROBABILITY_FLOOR = 1e-7


def weighted_ce_loss(
    probabilities: torch.Tensor,
    labels: torch.Tensor,
    weights: Union[ClassWeights, Sequence[float], torch.Tensor],
) -> torch.Tensor:
    """
    Calcule le coût pondéré moyen d'un lot.

    Args:
        probabilities (Tensor): Probabilités (N, 3) issues d'un softmax
        labels (Tensor): Indices de classe (N,) ou vecteurs one-hot (N, 3)
        weights: Poids (clean, offensive, hate)

    Returns:
        Tensor: Scalaire positif, différentiable

    Raises:
        ValidationError: Si les longueurs diffèrent ou si le lot est vide
    """
    if isinstance(weights, ClassWeights):
        weights = weights.as_tuple()
    weights = torch.as_tensor(weights, dtype=probabilities.dtype, device=probabilities.device)

    if labels.dim() == 2:
        labels = labels.argmax(dim=1)
    if probabilities.shape[0] != labels.shape[0] or probabilities.shape[0] == 0:
        raise ValidationError(
            f"{probabilities.shape[0]} lignes de probabilités pour {labels.shape[0]} étiquettes",
            code='length_mismatch',
            params={'probabilities': probabilities.shape[0], 'labels': labels.shape[0]},
        )

    labels = labels.long()
    picked = probabilities.gather(1, labels.unsqueeze(1)).squeeze(1)
    log_likelihood = torch.log(picked.clamp(min=PROBABILITY_FLOOR, max=1.0))
    return -(weights[labels] * log_likelihood).mean()
