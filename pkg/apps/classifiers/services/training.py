# -*- coding: utf-8 -*-
"""
Boucle d'entraînement commune aux sous-modèles et au modèle d'ensemble.

Descente de gradient par mini-lots (Adam) sur le coût pondéré, évaluation du
coût sur le jeu dev à chaque époque, conservation des paramètres de la
meilleure époque et arrêt après ``patience`` époques sans amélioration.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import torch
from django.core.exceptions import ValidationError
from torch import nn
from torch.utils.data import DataLoader, TensorDataset

from .architectures import Classifier, ModelConfig, build_classifier, predict_proba
from .labels import ClassWeights, REFERENCE_WEIGHTS
from .losses import weighted_ce_loss

# Configuration du logger
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingSettings:
    epochs: int = 30
    patience: int = 5
    batch_size: int = 32
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.epochs < 1 or self.patience < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValidationError(
                "Budget d'entraînement invalide",
                code='invalid_budget',
                params={
                    'epochs': self.epochs, 'patience': self.patience,
                    'batch_size': self.batch_size, 'learning_rate': self.learning_rate,
                },
            )


@dataclass
class LabeledBatch:
    """Entrées (N, L, dim) ou (N, dim), longueurs (N,) et indices de classe (N,)."""

    inputs: np.ndarray
    lengths: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float32)
        self.lengths = np.asarray(self.lengths, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not (len(self.inputs) == len(self.lengths) == len(self.labels)):
            raise ValidationError(
                "Entrées, longueurs et étiquettes de tailles différentes",
                code='length_mismatch',
                params={'inputs': len(self.inputs), 'lengths': len(self.lengths), 'labels': len(self.labels)},
            )
        if len(self.labels) == 0:
            raise ValidationError("Lot vide", code='empty_batch')

    def __len__(self) -> int:
        return len(self.labels)

    def tensors(self, dtype: torch.dtype = torch.float32):
        return (
            torch.as_tensor(self.inputs, dtype=dtype),
            torch.as_tensor(self.lengths),
            torch.as_tensor(self.labels),
        )


@dataclass
class FitResult:
    model: nn.Module
    initial_dev_loss: float
    best_dev_loss: float
    best_epoch: int
    dev_losses: List[float] = field(default_factory=list)
    dev_probabilities: Optional[np.ndarray] = None


@torch.no_grad()
def evaluate_loss(model: nn.Module, batch: LabeledBatch, weights: ClassWeights, chunk: int = 256) -> float:
    """Coût pondéré moyen sur tout ``batch`` (mode évaluation)."""
    model.eval()
    inputs, lengths, labels = batch.tensors(next(model.parameters()).dtype)
    probabilities = torch.cat([
        model(inputs[start:start + chunk], lengths[start:start + chunk])
        for start in range(0, len(batch), chunk)
    ])
    return weighted_ce_loss(probabilities, labels, weights).item()


def fit_classifier(
    model: nn.Module,
    train: LabeledBatch,
    dev: LabeledBatch,
    weights: ClassWeights = REFERENCE_WEIGHTS,
    settings: TrainingSettings = TrainingSettings(),
    seed: int = 13,
) -> FitResult:
    """
    Entraîne ``model`` jusqu'au meilleur coût dev.

    Args:
        model (nn.Module): Modèle renvoyant des probabilités (N, 3)
        train (LabeledBatch): Jeu d'entraînement
        dev (LabeledBatch): Jeu dev (arrêt anticipé et sélection de l'époque)
        weights (ClassWeights): Poids du coût
        settings (TrainingSettings): Budget (époques, patience, lots, pas)
        seed (int): Graine (ordre des lots, dropout)

    Returns:
        FitResult: Le modèle restauré à sa meilleure époque et l'historique du coût dev

    Raises:
        ValidationError: Si le coût devient non fini (gradients explosifs)
    """
    torch.manual_seed(seed)
    generator = torch.Generator().manual_seed(seed)
    loader = DataLoader(
        TensorDataset(*train.tensors(next(model.parameters()).dtype)),
        batch_size=settings.batch_size,
        shuffle=True,
        generator=generator,
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=settings.learning_rate)

    initial_dev_loss = evaluate_loss(model, dev, weights)
    best_loss, best_epoch, best_state = math.inf, 0, None
    dev_losses = []
    waited = 0

    for epoch in range(1, settings.epochs + 1):
        model.train()
        for step, (inputs, lengths, labels) in enumerate(loader, start=1):
            optimizer.zero_grad()
            loss = weighted_ce_loss(model(inputs, lengths), labels, weights)
            if not torch.isfinite(loss):
                raise ValidationError(
                    f"Coût non fini à l'époque {epoch}, lot {step}",
                    code='non_finite_loss',
                    params={'epoch': epoch, 'batch': step, 'loss': loss.item()},
                )
            loss.backward()
            optimizer.step()

        dev_loss = evaluate_loss(model, dev, weights)
        dev_losses.append(dev_loss)
        if not math.isfinite(dev_loss):
            raise ValidationError(
                f"Coût dev non fini à l'époque {epoch}",
                code='non_finite_loss',
                params={'epoch': epoch, 'loss': dev_loss},
            )
        logger.debug(f"Époque {epoch} : coût dev {dev_loss:.6f}")

        if dev_loss < best_loss:
            best_loss, best_epoch, waited = dev_loss, epoch, 0
            best_state = copy.deepcopy(model.state_dict())
        else:
            waited += 1
            if waited > settings.patience:
                logger.info(f"Arrêt anticipé à l'époque {epoch} (meilleure époque : {best_epoch})")
                break

    model.load_state_dict(best_state)
    model.eval()
    dev_probabilities = predict_proba(model, dev.inputs, dev.lengths)
    return FitResult(model, initial_dev_loss, best_loss, best_epoch, dev_losses, dev_probabilities)


@dataclass
class TrainedModel:
    config: ModelConfig
    fit: FitResult

    @property
    def model(self) -> Classifier:
        return self.fit.model

    @property
    def best_dev_loss(self) -> float:
        return self.fit.best_dev_loss


def train_model(
    config: ModelConfig,
    train: LabeledBatch,
    dev: LabeledBatch,
    weights: ClassWeights = REFERENCE_WEIGHTS,
    settings: TrainingSettings = TrainingSettings(),
) -> TrainedModel:
    """Construit le modèle de ``config`` (graine ``config.seed``) et l'entraîne."""
    torch.manual_seed(config.seed)
    model = build_classifier(config)
    logger.info(f"Entraînement de {config.model_id} ({len(train)} exemples, {len(dev)} en dev)")
    fit = fit_classifier(model, train, dev, weights, settings, seed=config.seed)
    logger.info(f"{config.model_id} : meilleur coût dev {fit.best_dev_loss:.4f} (époque {fit.best_epoch})")
    return TrainedModel(config, fit)
