# -*- coding: utf-8 -*-
"""
Exécution complète d'une expérience.

Étapes, dans l'ordre : clean → split → embeddings → augment → cells → gate →
stacker → evaluate → report. Chaque étape est encadrée : un échec lève
``ExperimentStageError`` avec le nom de l'étape et la cause, et les fichiers
déjà produits restent sur le disque.

Arborescence du répertoire de sortie :
- ``split/train.tsv``, ``split/dev.tsv`` (textes nettoyés), ``split/augmented.tsv``
- ``embeddings/<nom>/`` : plongements sauvegardés
- ``cells/<architecture>__<plongement>/`` : ``model.pt`` et ``report.json``
- ``ensemble/`` : ``stacker.pt`` et ``manifest.json``
- ``report.json``, ``table.tsv``, ``manifest.json``
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

from apps.augment.services.augmentation import augment_dataset, select_common_words
from apps.classifiers.services.cells import REPORT_FILE, SNAPSHOT_FILE, train_cell
from apps.classifiers.services.labels import ClassLabel, ClassWeights, severity_argmax
from apps.classifiers.services.snapshots import SubmodelReport, relative_path
from apps.classifiers.services.training import TrainingSettings
from apps.embeddings.services.featurizers import Featurizer, build_featurizer, load_featurizer
from apps.ensemble.services.inference import EnsembleManifest, load_ensemble, normalization_descriptor
from apps.ensemble.services.stacking import build_features, save_stacker, select_models, train_stacker
from apps.evaluation.services.analysis import error_breakdown, error_token_ranking
from apps.evaluation.services.datasets import (
    LabeledComment,
    labels,
    map_texts,
    read_dataset,
    texts,
    write_dataset,
)
from apps.evaluation.services.metrics import class_distribution, f1_macro
from apps.evaluation.services.splitting import stratified_split
from apps.textnorm.services.normalization import clean

from .config import Cell, ExperimentConfig
from .reporting import build_report, write_file_manifest, write_report, write_table

# Configuration du logger
logger = logging.getLogger(__name__)

STAGES = ('clean', 'split', 'embeddings', 'augment', 'cells', 'gate', 'stacker', 'evaluate', 'report')

# Types d'erreurs analysés au niveau des jetons (classe réelle, classe prédite)
ERROR_DIRECTIONS = (
    (ClassLabel.OFFENSIVE, ClassLabel.CLEAN),
    (ClassLabel.HATE, ClassLabel.CLEAN),
    (ClassLabel.CLEAN, ClassLabel.OFFENSIVE),
    (ClassLabel.CLEAN, ClassLabel.HATE),
)
TOP_TOKENS = 10


class ExperimentStageError(Exception):
    """Échec d'une étape de l'expérience ; ``cause`` garde l'exception d'origine."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        messages = getattr(cause, 'messages', None)
        detail = '; '.join(messages) if messages else str(cause)
        code = getattr(cause, 'code', None)
        if code:
            detail = f'[{code}] {detail}'
        super().__init__(f"Échec de l'étape {stage} : {detail}")


@dataclass
class ExperimentResult:
    output_dir: Path
    report: dict
    cell_reports: List[SubmodelReport] = field(default_factory=list)
    selected: List[str] = field(default_factory=list)
    ensemble_dev_f1: Optional[float] = None


def _train_cell_task(task: dict) -> str:
    """Entraîne une cellule à partir de fichiers (utilisable dans un processus séparé)."""
    import torch

    from apps.classifiers.services.architectures import ModelConfig

    torch.set_num_threads(1)
    featurizer = load_featurizer(task['featurizer_dir'])
    report = train_cell(
        ModelConfig.from_dict(task['model_config']),
        featurizer,
        Path(task['featurizer_dir']),
        read_dataset(task['train']),
        read_dataset(task['dev']),
        ClassWeights(*task['weights']),
        TrainingSettings(**task['settings']),
        Path(task['directory']),
    )
    return report.model_id


class ExperimentRunner:
    """
    Enchaîne les étapes d'une expérience.

    Args:
        config (ExperimentConfig): Configuration validée
        on_stage: Appelé avec le nom de chaque étape au moment où elle démarre
    """

    def __init__(self, config: ExperimentConfig, on_stage: Optional[Callable[[str], None]] = None):
        self.config = config
        self.on_stage = on_stage
        self.output_dir = Path(config.output_dir)
        self.featurizers: Dict[str, Featurizer] = {}

    @contextmanager
    def stage(self, name: str):
        logger.info(f"Étape {name}")
        if self.on_stage is not None:
            self.on_stage(name)
        try:
            yield
        except ExperimentStageError:
            raise
        except Exception as e:
            logger.error(f"Échec de l'étape {name} : {e}")
            raise ExperimentStageError(name, e) from e

    def embedding_dir(self, name: str) -> Path:
        return self.output_dir / 'embeddings' / name

    def cell_dir(self, cell: Cell) -> Path:
        return self.output_dir / 'cells' / cell.model_id

    # ------------------------------------------------------------------
    # Étapes
    # ------------------------------------------------------------------

    def clean_dataset(self) -> List[LabeledComment]:
        normalization = self.config.normalization.build()
        dataset = read_dataset(self.config.dataset.train)
        return map_texts(dataset, lambda text: clean(text, normalization))

    def split(self, dataset: List[LabeledComment]):
        train, dev = stratified_split(dataset, self.config.split.train_frac, self.config.seeds.split)
        write_dataset(train, self.output_dir / 'split' / 'train.tsv')
        write_dataset(dev, self.output_dir / 'split' / 'dev.tsv')
        return train, dev

    def build_embeddings(self, train: List[LabeledComment]) -> None:
        train_texts = texts(train)
        for name in self.config.used_embeddings():
            featurizer = build_featurizer(self.config.embedding(name), train_texts, self.config.seeds.embedding)
            featurizer.save(self.embedding_dir(name))
            self.featurizers[name] = featurizer

    def augment(self, train: List[LabeledComment]) -> List[LabeledComment]:
        settings = self.config.augment
        if not settings.enabled:
            return []
        encoder = self.featurizers[settings.encoder].encoder
        common = select_common_words(train, settings.min_per_class)
        augmented = augment_dataset(
            train,
            encoder,
            common,
            classes=settings.classes,
            n_positions=settings.n_positions,
            n_outputs=settings.n_outputs,
            seed=self.config.seeds.augment,
            top_k=settings.top_k,
        )
        write_dataset(augmented, self.output_dir / 'split' / 'augmented.tsv')
        return augmented

    def train_cells(self, train: List[LabeledComment]) -> List[SubmodelReport]:
        training = self.config.training
        train_path = self.output_dir / 'split' / 'train_full.tsv'
        write_dataset(train, train_path)

        tasks = []
        for cell in self.config.cells:
            featurizer = self.featurizers[cell.embedding]
            model_config = training.model_config(
                cell.architecture,
                cell.embedding,
                featurizer.dim,
                featurizer.max_len,
                featurizer.input_kind,
                self.config.seeds.training,
            )
            tasks.append({
                'model_config': model_config.to_dict(),
                'featurizer_dir': str(self.embedding_dir(cell.embedding)),
                'train': str(train_path),
                'dev': str(self.output_dir / 'split' / 'dev.tsv'),
                'weights': list(training.weights.as_tuple()),
                'settings': asdict(training.settings()),
                'directory': str(self.cell_dir(cell)),
            })

        if training.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=training.workers) as executor:
                list(executor.map(_train_cell_task, tasks))
        else:
            for task in tasks:
                _train_cell_task(task)

        return [SubmodelReport.load(self.cell_dir(cell) / REPORT_FILE) for cell in self.config.cells]

    def train_ensemble(self, reports: List[SubmodelReport], selected: List[str]):
        features, dev_labels, _ = build_features(selected, reports)
        fit = train_stacker(
            features,
            dev_labels,
            self.config.training.weights,
            seed=self.config.seeds.ensemble,
            settings=self.config.training.settings(),
            hidden=self.config.ensemble.hidden,
            model_ids=selected,
        )
        ensemble_dir = self.output_dir / 'ensemble'
        save_stacker(ensemble_dir / 'stacker.pt', fit)
        manifest = EnsembleManifest(
            submodels=[
                relative_path(self.output_dir / 'cells' / model_id / SNAPSHOT_FILE, ensemble_dir)
                for model_id in selected
            ],
            model_ids=list(selected),
            threshold=self.config.ensemble.threshold,
            stacker='stacker.pt',
            normalization=normalization_descriptor(
                self.config.normalization.emoticons_path,
                self.config.normalization.separate_punct,
                ensemble_dir,
            ),
        )
        manifest.save(ensemble_dir / 'manifest.json')
        dev_predictions = [int(severity_argmax(row)) for row in fit.model.predict_proba(features)]
        return fit, dev_predictions

    def evaluate(self, dev: List[LabeledComment], dev_predictions: List[int]) -> dict:
        golds = labels(dev)
        analysis = {
            'breakdown': error_breakdown(dev_predictions, golds),
            'tokens': {
                f'{gold.label}->{pred.label}': [
                    entry.to_dict()
                    for entry in error_token_ranking(dev, dev_predictions, gold, pred, TOP_TOKENS)
                ]
                for gold, pred in ERROR_DIRECTIONS
            },
        }
        if self.config.dataset.test is not None:
            test = read_dataset(self.config.dataset.test)
            ensemble = load_ensemble(self.output_dir / 'ensemble' / 'manifest.json')
            predictions = [int(prediction.label) for prediction in ensemble.predict(texts(test))]
            analysis['test_f1'] = f1_macro(predictions, labels(test))
        return analysis

    # ------------------------------------------------------------------

    def run(self) -> ExperimentResult:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        config = self.config

        with self.stage('clean'):
            dataset = self.clean_dataset()
        with self.stage('split'):
            train, dev = self.split(dataset)
        with self.stage('embeddings'):
            self.build_embeddings(train)
        with self.stage('augment'):
            augmented = self.augment(train)
        with self.stage('cells'):
            reports = self.train_cells(train + augmented)
        with self.stage('gate'):
            selected = select_models(reports, config.ensemble.threshold)
        with self.stage('stacker'):
            fit, dev_predictions = self.train_ensemble(reports, selected)
        with self.stage('evaluate'):
            analysis = self.evaluate(dev, dev_predictions)
        with self.stage('report'):
            report = build_report(
                config,
                statistics={
                    'all': class_distribution(dataset).to_dict(),
                    'train': class_distribution(train).to_dict(),
                    'dev': class_distribution(dev).to_dict(),
                    'augmented': len(augmented),
                },
                reports=reports,
                selected=selected,
                ensemble={
                    'dev_f1': fit.fit_f1,
                    'best_dev_loss': fit.best_dev_loss,
                    **({'test_f1': analysis.pop('test_f1')} if 'test_f1' in analysis else {}),
                },
                errors=analysis,
            )
            write_report(report, self.output_dir / 'report.json')
            write_table(config, reports, self.output_dir / 'table.tsv')
            write_file_manifest(self.output_dir)

        logger.info(f"Expérience terminée : macro-F1 dev de l'ensemble {fit.fit_f1:.4f}")
        return ExperimentResult(self.output_dir, report, reports, selected, fit.fit_f1)


def run_experiment(config: ExperimentConfig, on_stage: Optional[Callable[[str], None]] = None) -> ExperimentResult:
    """Exécute toutes les étapes de ``config`` ; voir ``ExperimentRunner``."""
    return ExperimentRunner(config, on_stage).run()
