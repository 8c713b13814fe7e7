# -*- coding: utf-8 -*-
"""
Sauvegarde des sous-modèles entraînés et de leurs rapports dev.

Un snapshot (``model.pt``) contient la configuration, la référence du
plongement utilisé, les tenseurs des paramètres et le meilleur coût dev.
Le rapport (``report.json``) garde les sorties dev nécessaires à
l'entraînement de l'ensemble, qui peut ainsi tourner séparément.
"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import torch
from django.core.exceptions import ValidationError

from .architectures import Classifier, ModelConfig, build_classifier
from .labels import validate_probabilities

# Configuration du logger
logger = logging.getLogger(__name__)

SNAPSHOT_FORMAT = 1


def save_snapshot(
    path: Union[str, Path],
    config: ModelConfig,
    model: Classifier,
    best_dev_loss: float,
    featurizer: Optional[str] = None,
) -> Path:
    """
    Écrit le snapshot d'un sous-modèle.

    Args:
        path: Fichier de destination
        config (ModelConfig): Configuration du modèle
        model (Classifier): Modèle entraîné
        best_dev_loss (float): Coût dev de l'époque retenue
        featurizer (str): Répertoire du plongement, relatif au snapshot de préférence

    Returns:
        Path: Chemin écrit
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        'format': SNAPSHOT_FORMAT,
        'config': config.to_dict(),
        'featurizer': featurizer,
        'best_dev_loss': float(best_dev_loss),
        'state_dict': {name: tensor.detach().cpu().float() for name, tensor in model.state_dict().items()},
    }
    torch.save(payload, path)
    return path


@dataclass
class Snapshot:
    config: ModelConfig
    model: Classifier
    best_dev_loss: float
    featurizer: Optional[Path]


def load_snapshot(path: Union[str, Path]) -> Snapshot:
    """Recharge un snapshot ; le modèle est rendu en mode évaluation."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(
            f"Snapshot introuvable : {path}",
            code='missing_snapshot',
            params={'path': str(path)},
        )
    payload = torch.load(path, map_location='cpu', weights_only=True)
    config = ModelConfig.from_dict(payload['config'])
    model = build_classifier(config)
    model.load_state_dict(payload['state_dict'])
    model.eval()
    featurizer = payload.get('featurizer')
    if featurizer is not None:
        featurizer = Path(featurizer)
        if not featurizer.is_absolute():
            featurizer = path.parent / featurizer
    return Snapshot(config, model, payload['best_dev_loss'], featurizer)


def snapshot_digest(path: Union[str, Path]) -> str:
    """
    Empreinte sha256 du contenu canonique d'un snapshot.

    Calculée sur la configuration (JSON trié) puis sur chaque tenseur, par
    nom croissant, et non sur les octets du conteneur.
    """
    payload = torch.load(Path(path), map_location='cpu', weights_only=True)
    digest = hashlib.sha256()
    header = {key: value for key, value in payload.items() if key != 'state_dict'}
    digest.update(json.dumps(header, sort_keys=True, ensure_ascii=False).encode('utf-8'))
    for name in sorted(payload['state_dict']):
        tensor = payload['state_dict'][name].contiguous()
        digest.update(name.encode('utf-8'))
        digest.update(str(tuple(tensor.shape)).encode('utf-8'))
        digest.update(tensor.numpy().tobytes())
    return digest.hexdigest()


@dataclass
class SubmodelReport:
    """Sorties dev d'un sous-modèle : base de la sélection et de l'ensemble."""

    model_id: str
    dev_f1: float
    dev_ids: List[str]
    dev_labels: List[int]
    dev_probabilities: np.ndarray
    best_dev_loss: float = float('nan')
    snapshot: Optional[str] = None

    def __post_init__(self):
        self.dev_probabilities = validate_probabilities(self.dev_probabilities)
        if not (len(self.dev_ids) == len(self.dev_labels) == len(self.dev_probabilities)):
            raise ValidationError(
                f"Rapport {self.model_id} : tailles dev incohérentes",
                code='sample_mismatch',
                params={'model_id': self.model_id},
            )
        if not 0.0 <= self.dev_f1 <= 1.0:
            raise ValidationError(
                f"Rapport {self.model_id} : F1 hors de [0, 1] ({self.dev_f1})",
                code='invalid_f1',
                params={'model_id': self.model_id, 'dev_f1': self.dev_f1},
            )

    def to_dict(self) -> dict:
        return {
            'model_id': self.model_id,
            'dev_f1': float(self.dev_f1),
            'best_dev_loss': float(self.best_dev_loss),
            'snapshot': self.snapshot,
            'dev_ids': list(self.dev_ids),
            'dev_labels': [int(label) for label in self.dev_labels],
            'dev_probabilities': [[float(value) for value in row] for row in self.dev_probabilities],
        }

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(self.to_dict(), handle, ensure_ascii=False, indent=2)
            handle.write('\n')
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'SubmodelReport':
        with open(path, 'r', encoding='utf-8') as handle:
            data = json.load(handle)
        return cls(
            model_id=data['model_id'],
            dev_f1=data['dev_f1'],
            dev_ids=data['dev_ids'],
            dev_labels=data['dev_labels'],
            dev_probabilities=np.asarray(data['dev_probabilities'], dtype=np.float64),
            best_dev_loss=data.get('best_dev_loss', float('nan')),
            snapshot=data.get('snapshot'),
        )


def split_model_id(model_id: str) -> Tuple[str, str]:
    """``sarnn__comment_tokenize`` → (``sarnn``, ``comment_tokenize``)."""
    architecture, _, embedding = model_id.partition('__')
    return architecture, embedding


def relative_path(target: Union[str, Path], start: Union[str, Path]) -> str:
    """Chemin de ``target`` relatif au répertoire ``start``, séparateurs '/'."""
    return Path(os.path.relpath(Path(target).resolve(), Path(start).resolve())).as_posix()
