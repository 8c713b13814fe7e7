# -*- coding: utf-8 -*-
"""
Rapports d'une expérience.

- ``report.json`` : F1 dev par cellule, modèles retenus, ensemble, statistiques
  du jeu de données et analyse des erreurs (clés triées, sans horodatage)
- ``table.tsv`` : une ligne par plongement, une colonne par architecture
- ``manifest.json`` : empreinte sha256 de chaque fichier produit

Deux exécutions de la même configuration produisent des manifestes
identiques octet pour octet.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

from apps.classifiers.services.architectures import Architecture
from apps.classifiers.services.snapshots import SubmodelReport, snapshot_digest, split_model_id

from .config import ExperimentConfig

# Configuration du logger
logger = logging.getLogger(__name__)

MANIFEST_FILE = 'manifest.json'
MISSING_CELL = '-'


def _write_json(data, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        json.dump(data, handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write('\n')
    return path


def build_report(
    config: ExperimentConfig,
    statistics: dict,
    reports: Sequence[SubmodelReport],
    selected: Sequence[str],
    ensemble: dict,
    errors: dict,
) -> dict:
    """Assemble le contenu de ``report.json``."""
    chosen = set(selected)
    cells = []
    for report in sorted(reports, key=lambda item: item.model_id):
        architecture, embedding = split_model_id(report.model_id)
        cells.append({
            'model_id': report.model_id,
            'architecture': architecture,
            'embedding': embedding,
            'dev_f1': float(report.dev_f1),
            'best_dev_loss': float(report.best_dev_loss),
            'selected': report.model_id in chosen,
        })
    return {
        'settings': {
            'seeds': {
                'split': config.seeds.split,
                'embedding': config.seeds.embedding,
                'augment': config.seeds.augment,
                'training': config.seeds.training,
                'ensemble': config.seeds.ensemble,
            },
            'train_frac': config.split.train_frac,
            'weights': list(config.training.weights.as_tuple()),
            'threshold': config.ensemble.threshold,
            'augment': config.augment.enabled,
        },
        'dataset': statistics,
        'cells': cells,
        'selected_models': sorted(selected),
        'ensemble': ensemble,
        'errors': errors,
    }


def write_report(report: dict, path: Union[str, Path]) -> Path:
    return _write_json(report, Path(path))


def results_table(config: ExperimentConfig, reports: Sequence[SubmodelReport]) -> List[List[str]]:
    """
    Tableau des F1 dev : plongements en lignes, architectures en colonnes.

    Les cellules absentes de la configuration valent ``-``.
    """
    scores: Dict[tuple, float] = {}
    for report in reports:
        scores[split_model_id(report.model_id)] = report.dev_f1

    architectures = [value for value in Architecture.values if any(cell.architecture == value for cell in config.cells)]
    embeddings = [name for name in config.embeddings if any(cell.embedding == name for cell in config.cells)]

    rows = [['embedding', *architectures]]
    for embedding in embeddings:
        row = [embedding]
        for architecture in architectures:
            score = scores.get((architecture, embedding))
            row.append(MISSING_CELL if score is None else f'{score:.4f}')
        rows.append(row)
    return rows


def write_table(config: ExperimentConfig, reports: Sequence[SubmodelReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = results_table(config, reports)
    path.write_text(''.join('\t'.join(row) + '\n' for row in rows), encoding='utf-8')
    return path


def file_digest(path: Path) -> str:
    """sha256 d'un fichier ; contenu canonique pour les snapshots torch."""
    if path.suffix == '.pt':
        return snapshot_digest(path)
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_file_manifest(output_dir: Union[str, Path]) -> Path:
    """Écrit ``manifest.json`` : chemins relatifs triés et leurs empreintes."""
    output_dir = Path(output_dir)
    manifest_path = output_dir / MANIFEST_FILE
    files = sorted(
        path for path in output_dir.rglob('*')
        if path.is_file() and path != manifest_path
    )
    entries = [
        {'path': path.relative_to(output_dir).as_posix(), 'sha256': file_digest(path)}
        for path in files
    ]
    logger.info(f"Manifeste : {len(entries)} fichiers")
    return _write_json({'files': entries}, manifest_path)
