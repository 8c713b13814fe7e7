# -*- coding: utf-8 -*-
"""
Prédiction de bout en bout avec l'ensemble.

texte brut → nettoyage → plongement propre à chaque sous-modèle →
probabilités des sous-modèles → ligne de caractéristiques → modèle
d'ensemble → classe (égalités tranchées vers la classe la plus grave).

Le manifeste d'ensemble (JSON) liste les snapshots des sous-modèles dans
l'ordre des caractéristiques, le seuil de sélection, le modèle d'ensemble
et la configuration de nettoyage.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from django.core.exceptions import ValidationError

from apps.classifiers.services.architectures import Classifier
from apps.classifiers.services.labels import ClassLabel, severity_argmax
from apps.classifiers.services.snapshots import load_snapshot, relative_path
from apps.embeddings.services.featurizers import Featurizer, load_featurizer
from apps.textnorm.services.normalization import NormalizationConfig, clean

from .stacking import StackerFit, load_stacker

# Configuration du logger
logger = logging.getLogger(__name__)

MANIFEST_FORMAT = 1


@dataclass
class EnsembleManifest:
    submodels: List[str]
    model_ids: List[str]
    threshold: float
    stacker: str
    normalization: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'format': MANIFEST_FORMAT,
            'model_ids': list(self.model_ids),
            'submodels': list(self.submodels),
            'threshold': self.threshold,
            'stacker': self.stacker,
            'normalization': dict(self.normalization),
        }

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(self.to_dict(), handle, ensure_ascii=False, indent=2, sort_keys=True)
            handle.write('\n')
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'EnsembleManifest':
        with open(path, 'r', encoding='utf-8') as handle:
            data = json.load(handle)
        return cls(
            submodels=data['submodels'],
            model_ids=data['model_ids'],
            threshold=data['threshold'],
            stacker=data['stacker'],
            normalization=data.get('normalization', {}),
        )


def normalization_descriptor(config_path: Optional[Path], separate_punct: bool, start: Path) -> Dict[str, object]:
    return {
        'emoticons': relative_path(config_path, start) if config_path else None,
        'separate_punct': separate_punct,
    }


class SubmodelRunner:
    """Un sous-modèle et son plongement : textes nettoyés → probabilités (N, 3)."""

    def __init__(self, model_id: str, model: Classifier, featurizer: Featurizer):
        self.model_id = model_id
        self.model = model
        self.featurizer = featurizer

    def predict_proba(self, cleaned_texts: Sequence[str]) -> np.ndarray:
        batch = self.featurizer.featurize(cleaned_texts)
        return self.model.predict_proba(batch.inputs, batch.lengths)


@dataclass(frozen=True)
class EnsemblePrediction:
    probabilities: np.ndarray
    label: ClassLabel

    def as_line(self) -> str:
        values = '\t'.join(f'{value:.6f}' for value in self.probabilities)
        return f'{self.label.label}\t{values}'


def predict_ensemble_batch(
    stacker: StackerFit,
    submodels: Sequence[SubmodelRunner],
    texts: Sequence[str],
    normalization: Optional[NormalizationConfig] = None,
    workers: int = 1,
) -> List[EnsemblePrediction]:
    """
    Prédit la classe de chaque texte brut.

    Args:
        stacker (StackerFit): Modèle d'ensemble
        submodels: Sous-modèles, dans l'ordre des caractéristiques
        texts: Commentaires bruts
        normalization (NormalizationConfig): Nettoyage (configuration par défaut si None)
        workers (int): Sous-modèles évalués en parallèle (threads)

    Returns:
        List[EnsemblePrediction]: Probabilités et classe par texte
    """
    if not texts:
        return []
    if stacker.model_ids and list(stacker.model_ids) != [runner.model_id for runner in submodels]:
        raise ValidationError(
            "Les sous-modèles ne correspondent pas à ceux du modèle d'ensemble",
            code='submodel_mismatch',
            params={'expected': list(stacker.model_ids)},
        )
    cleaned = [clean(text, normalization) for text in texts]

    if workers > 1 and len(submodels) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outputs = list(executor.map(lambda runner: runner.predict_proba(cleaned), submodels))
    else:
        outputs = [runner.predict_proba(cleaned) for runner in submodels]

    features = np.concatenate(outputs, axis=1)
    probabilities = stacker.model.predict_proba(features)
    return [EnsemblePrediction(row, severity_argmax(row)) for row in probabilities]


def predict_ensemble(
    stacker: StackerFit,
    submodels: Sequence[SubmodelRunner],
    text: str,
    normalization: Optional[NormalizationConfig] = None,
) -> EnsemblePrediction:
    return predict_ensemble_batch(stacker, submodels, [text], normalization)[0]


@dataclass
class Ensemble:
    """Ensemble chargé depuis un manifeste, prêt pour l'inférence."""

    stacker: StackerFit
    submodels: List[SubmodelRunner]
    normalization: NormalizationConfig
    threshold: float

    def predict(self, texts: Sequence[str], workers: int = 1) -> List[EnsemblePrediction]:
        return predict_ensemble_batch(self.stacker, self.submodels, texts, self.normalization, workers)


def load_ensemble(manifest_path: Union[str, Path]) -> Ensemble:
    """
    Charge le modèle d'ensemble, les sous-modèles et leurs plongements.

    Raises:
        ValidationError: Snapshot manquant (code ``missing_snapshot``)
    """
    manifest_path = Path(manifest_path)
    base_dir = manifest_path.parent
    manifest = EnsembleManifest.load(manifest_path)

    featurizers: Dict[Path, Featurizer] = {}
    submodels = []
    for model_id, snapshot_path in zip(manifest.model_ids, manifest.submodels):
        snapshot = load_snapshot(base_dir / snapshot_path)
        if snapshot.featurizer is None:
            raise ValidationError(
                f"Le snapshot {snapshot_path} ne référence aucun plongement",
                code='missing_featurizer',
                params={'snapshot': snapshot_path},
            )
        directory = snapshot.featurizer.resolve()
        if directory not in featurizers:
            featurizers[directory] = load_featurizer(directory)
        submodels.append(SubmodelRunner(model_id, snapshot.model, featurizers[directory]))

    emoticons = manifest.normalization.get('emoticons')
    normalization = NormalizationConfig.default(
        emoticons_path=base_dir / emoticons if emoticons else None,
        separate_punct=manifest.normalization.get('separate_punct', True),
    )
    stacker = load_stacker(base_dir / manifest.stacker)
    logger.info(f"Ensemble chargé : {len(submodels)} sous-modèles ({manifest_path})")
    return Ensemble(stacker, submodels, normalization, manifest.threshold)
