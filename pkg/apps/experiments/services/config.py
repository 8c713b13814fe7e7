# -*- coding: utf-8 -*-
"""
Fichier de configuration d'une expérience.

Format INI (en-têtes de section et lignes ``clé = valeur``), lu avec
configparser. Les chemins relatifs sont résolus depuis le répertoire du
fichier. Voir ``docs/experiment_config.md`` pour la liste des clés.

Sections :
- ``[dataset]`` : jeu étiqueté (``train``), jeu de test facultatif (``test``)
- ``[normalization]`` : dictionnaire d'émoticônes, séparation de la ponctuation
- ``[split]`` : part d'entraînement et graine
- ``[training]`` : poids de classes, budget, hyperparamètres, graines, workers
- ``[augment]`` : augmentation par mots masqués (désactivée par défaut)
- ``[embedding:<nom>]`` : un plongement nommé par section
- ``[cells]`` : ``architecture = plongement1, plongement2``
- ``[ensemble]`` : seuil de sélection, couche cachée du modèle d'ensemble
- ``[output]`` : répertoire de sortie
"""

import configparser
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from django.core.exceptions import ValidationError

from apps.classifiers.services.architectures import Architecture, ModelConfig
from apps.classifiers.services.labels import ClassLabel, ClassWeights, REFERENCE_WEIGHTS, parse_labels
from apps.classifiers.services.training import TrainingSettings
from apps.embeddings.services.featurizers import EmbeddingProvider, EmbeddingSpec
from apps.embeddings.services.tokenizers import TokenizerKind
from apps.textnorm.services.normalization import NormalizationConfig, configured_emoticons_path

# Configuration du logger
logger = logging.getLogger(__name__)

EMBEDDING_PREFIX = 'embedding:'
DEFAULT_SEED = 13


@dataclass(frozen=True)
class DatasetSection:
    train: Path
    test: Optional[Path] = None


@dataclass(frozen=True)
class NormalizationSection:
    emoticons: Optional[Path] = None
    separate_punct: bool = True

    @property
    def emoticons_path(self) -> Optional[Path]:
        return configured_emoticons_path(self.emoticons)

    def build(self) -> NormalizationConfig:
        return NormalizationConfig.default(emoticons_path=self.emoticons_path, separate_punct=self.separate_punct)


@dataclass(frozen=True)
class SplitSection:
    train_frac: float = 0.9


@dataclass(frozen=True)
class TrainingSection:
    weights: ClassWeights = REFERENCE_WEIGHTS
    epochs: int = 30
    patience: int = 5
    batch_size: int = 32
    learning_rate: float = 1e-3
    kernel_sizes: Tuple[int, ...] = (2, 3, 4, 5)
    filters: int = 64
    vdcnn_blocks: int = 4
    vdcnn_channels: int = 64
    hidden: int = 128
    dense: int = 128
    dropout: float = 0.3
    workers: int = 1

    def settings(self) -> TrainingSettings:
        return TrainingSettings(self.epochs, self.patience, self.batch_size, self.learning_rate)

    def model_config(self, architecture: str, embedding: str, input_dim: int, max_len: int,
                     input_kind: str, seed: int) -> ModelConfig:
        return ModelConfig(
            architecture=architecture,
            embedding=embedding,
            input_dim=input_dim,
            max_len=max_len,
            input_kind=input_kind,
            kernel_sizes=self.kernel_sizes,
            filters=self.filters,
            vdcnn_blocks=self.vdcnn_blocks,
            vdcnn_channels=self.vdcnn_channels,
            hidden=self.hidden,
            dense=self.dense,
            dropout=self.dropout,
            seed=seed,
        )


@dataclass(frozen=True)
class AugmentSection:
    enabled: bool = False
    encoder: Optional[str] = None
    classes: Tuple[ClassLabel, ...] = (ClassLabel.OFFENSIVE, ClassLabel.HATE)
    min_per_class: int = 3
    n_positions: int = 1
    n_outputs: int = 4
    top_k: int = 20


@dataclass(frozen=True)
class EnsembleSection:
    threshold: float = 0.67
    hidden: int = 128


@dataclass(frozen=True)
class Seeds:
    split: int = DEFAULT_SEED
    embedding: int = DEFAULT_SEED
    augment: int = DEFAULT_SEED
    training: int = DEFAULT_SEED
    ensemble: int = DEFAULT_SEED

    @classmethod
    def uniform(cls, seed: int) -> 'Seeds':
        return cls(seed, seed, seed, seed, seed)


@dataclass(frozen=True)
class Cell:
    architecture: str
    embedding: str

    @property
    def model_id(self) -> str:
        return f'{self.architecture}__{self.embedding}'


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuration complète et validée d'une expérience."""

    dataset: DatasetSection
    output_dir: Path
    normalization: NormalizationSection = NormalizationSection()
    split: SplitSection = SplitSection()
    training: TrainingSection = TrainingSection()
    augment: AugmentSection = AugmentSection()
    ensemble: EnsembleSection = EnsembleSection()
    embeddings: Dict[str, EmbeddingSpec] = field(default_factory=dict)
    cells: Tuple[Cell, ...] = ()
    seeds: Seeds = Seeds()
    source: Optional[Path] = None

    def embedding(self, name: str) -> EmbeddingSpec:
        if name not in self.embeddings:
            raise ValidationError(
                f"Plongement non défini : {name!r} (sections [embedding:<nom>])",
                code='unknown_embedding',
                params={'embedding': name},
            )
        return self.embeddings[name]

    def used_embeddings(self) -> List[str]:
        """Plongements requis par les cellules et l'augmentation, dans l'ordre de déclaration."""
        needed = {cell.embedding for cell in self.cells}
        if self.augment.enabled and self.augment.encoder:
            needed.add(self.augment.encoder)
        return [name for name in self.embeddings if name in needed]

    def with_seed(self, seed: Optional[int]) -> 'ExperimentConfig':
        return self if seed is None else replace(self, seeds=Seeds.uniform(seed))

    def with_output(self, output_dir: Optional[Union[str, Path]]) -> 'ExperimentConfig':
        return self if not output_dir else replace(self, output_dir=Path(output_dir))


# ----------------------------------------------------------------------
# Lecture
# ----------------------------------------------------------------------

class _SectionReader:
    """Lecture typée d'une section, avec erreurs rattachées à la section et à la clé."""

    def __init__(self, parser: configparser.ConfigParser, name: str, base_dir: Path):
        self.name = name
        self.base_dir = base_dir
        self.section = parser[name] if parser.has_section(name) else {}

    def invalid(self, key: str, value, expected: str) -> ValidationError:
        return ValidationError(
            f"[{self.name}] {key} = {value!r} : {expected}",
            code='invalid_config',
            params={'section': self.name, 'key': key, 'value': value},
        )

    def raw(self, key: str, default: Optional[str] = None) -> Optional[str]:
        value = self.section.get(key)
        return default if value is None or value.strip() == '' else value.strip()

    def string(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.raw(key, default)

    def integer(self, key: str, default: int, minimum: Optional[int] = None) -> int:
        value = self.raw(key)
        if value is None:
            return default
        try:
            number = int(value)
        except ValueError:
            raise self.invalid(key, value, 'entier attendu')
        if minimum is not None and number < minimum:
            raise self.invalid(key, value, f'valeur >= {minimum} attendue')
        return number

    def real(self, key: str, default: float) -> float:
        value = self.raw(key)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError:
            raise self.invalid(key, value, 'nombre attendu')

    def boolean(self, key: str, default: bool) -> bool:
        value = self.raw(key)
        if value is None:
            return default
        lowered = value.lower()
        if lowered in configparser.ConfigParser.BOOLEAN_STATES:
            return configparser.ConfigParser.BOOLEAN_STATES[lowered]
        raise self.invalid(key, value, 'booléen attendu (yes/no, true/false, on/off, 1/0)')

    def integers(self, key: str, default: Tuple[int, ...]) -> Tuple[int, ...]:
        value = self.raw(key)
        if value is None:
            return default
        try:
            numbers = tuple(int(part) for part in value.split(',') if part.strip())
        except ValueError:
            raise self.invalid(key, value, "liste d'entiers attendue")
        if not numbers or min(numbers) < 1:
            raise self.invalid(key, value, "liste d'entiers positifs attendue")
        return numbers

    def path(self, key: str, required: bool = False) -> Optional[Path]:
        value = self.raw(key)
        if value is None:
            if required:
                raise self.invalid(key, value, 'chemin requis')
            return None
        path = Path(value)
        return path if path.is_absolute() else self.base_dir / path

    def existing_path(self, key: str, required: bool = False) -> Optional[Path]:
        path = self.path(key, required)
        if path is not None and not path.exists():
            raise ValidationError(
                f"[{self.name}] {key} : fichier introuvable {path}",
                code='missing_file',
                params={'section': self.name, 'key': key, 'path': str(path)},
            )
        return path

    def choice(self, key: str, default: str, choices) -> str:
        value = self.raw(key, default)
        if value not in choices:
            raise self.invalid(key, value, f"valeur parmi {', '.join(choices)} attendue")
        return value


def _read_embedding(reader: _SectionReader, name: str) -> EmbeddingSpec:
    provider = reader.choice('provider', EmbeddingProvider.CBOW, EmbeddingProvider.values)
    spec = EmbeddingSpec(
        name=name,
        provider=provider,
        tokenizer=reader.choice('tokenizer', TokenizerKind.SPACE, TokenizerKind.values),
        max_len=reader.integer('max_len', 64, minimum=1),
        dim=reader.integer('dim', 256 if provider == EmbeddingProvider.MLM else 200, minimum=1),
        window=reader.integer('window', 5, minimum=1),
        epochs=reader.integer('epochs', 5, minimum=0),
        min_count=reader.integer('min_count', 1, minimum=1),
        n_merges=reader.integer('bpe_merges', 1000, minimum=0),
        vectors_path=_optional_str(reader.existing_path('vectors')),
        lexicon_path=_optional_str(reader.existing_path('lexicon')),
        layers=reader.integer('layers', 2, minimum=1),
        heads=reader.integer('heads', 4, minimum=1),
        ffn=reader.integer('ffn', 512, minimum=1),
    )
    if spec.provider == EmbeddingProvider.PRETRAINED and not spec.vectors_path:
        raise reader.invalid('vectors', None, 'fichier de vecteurs requis pour provider = pretrained')
    if spec.tokenizer == TokenizerKind.SEGMENTED and not spec.lexicon_path:
        raise reader.invalid('lexicon', None, 'lexique requis pour tokenizer = segmented')
    return spec


def _optional_str(path: Optional[Path]) -> Optional[str]:
    return None if path is None else str(path)


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Lit et valide un fichier de configuration d'expérience.

    Args:
        path: Fichier INI

    Returns:
        ExperimentConfig: Configuration validée (chemins absolus)

    Raises:
        ValidationError: Clé invalide, fichier référencé absent, poids non
            positif, seuil hors de [0, 1], architecture ou fournisseur inconnu
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(2, 'Fichier de configuration introuvable', str(path))

    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            parser.read_file(handle)
    except configparser.Error as e:
        raise ValidationError(
            f"Fichier de configuration illisible : {e}",
            code='invalid_config',
            params={'path': str(path)},
        )
    base_dir = path.parent.resolve()

    def section(name: str) -> _SectionReader:
        return _SectionReader(parser, name, base_dir)

    dataset = section('dataset')
    dataset_section = DatasetSection(
        train=dataset.existing_path('train', required=True),
        test=dataset.existing_path('test'),
    )

    normalization = section('normalization')
    normalization_section = NormalizationSection(
        emoticons=normalization.existing_path('emoticons'),
        separate_punct=normalization.boolean('separate_punct', True),
    )

    split = section('split')
    train_frac = split.real('train_frac', 0.9)
    if not 0.0 < train_frac < 1.0:
        raise split.invalid('train_frac', train_frac, 'valeur dans ]0, 1[ attendue')

    training = section('training')
    weights_text = training.raw('weights')
    training_section = TrainingSection(
        weights=ClassWeights.parse(weights_text) if weights_text else REFERENCE_WEIGHTS,
        epochs=training.integer('epochs', 30, minimum=1),
        patience=training.integer('patience', 5, minimum=0),
        batch_size=training.integer('batch_size', 32, minimum=1),
        learning_rate=training.real('learning_rate', 1e-3),
        kernel_sizes=training.integers('kernel_sizes', (2, 3, 4, 5)),
        filters=training.integer('filters', 64, minimum=1),
        vdcnn_blocks=training.integer('vdcnn_blocks', 4, minimum=1),
        vdcnn_channels=training.integer('vdcnn_channels', 64, minimum=1),
        hidden=training.integer('hidden', 128, minimum=1),
        dense=training.integer('dense', 128, minimum=1),
        dropout=training.real('dropout', 0.3),
        workers=training.integer('workers', 1, minimum=1),
    )
    training_seed = training.integer('seed', DEFAULT_SEED)

    embeddings = {}
    for name in parser.sections():
        if name.startswith(EMBEDDING_PREFIX):
            embedding_name = name[len(EMBEDDING_PREFIX):].strip()
            embeddings[embedding_name] = _read_embedding(section(name), embedding_name)

    cells = []
    if parser.has_section('cells'):
        for architecture, value in parser['cells'].items():
            if architecture not in Architecture.values:
                raise section('cells').invalid(architecture, value, 'architecture inconnue')
            for embedding_name in (part.strip() for part in value.split(',')):
                if not embedding_name:
                    continue
                if embedding_name not in embeddings:
                    raise section('cells').invalid(architecture, embedding_name, 'plongement non défini')
                cells.append(Cell(architecture, embedding_name))
    cells = tuple(sorted(set(cells), key=lambda cell: cell.model_id))

    augment = section('augment')
    augment_section = AugmentSection(
        enabled=augment.boolean('enabled', False),
        encoder=augment.string('encoder'),
        classes=parse_labels(augment.raw('classes', 'offensive,hate')),
        min_per_class=augment.integer('min_per_class', 3, minimum=1),
        n_positions=augment.integer('n_positions', 1, minimum=1),
        n_outputs=augment.integer('n_outputs', 4, minimum=0),
        top_k=augment.integer('top_k', 20, minimum=1),
    )
    if augment_section.enabled:
        encoder = augment_section.encoder
        if encoder not in embeddings or embeddings[encoder].provider != EmbeddingProvider.MLM:
            raise augment.invalid('encoder', encoder, 'nom d\'un plongement provider = mlm attendu')
        if embeddings[encoder].tokenizer != TokenizerKind.SPACE:
            raise augment.invalid('encoder', encoder, 'le plongement doit utiliser tokenizer = space')

    ensemble = section('ensemble')
    threshold = ensemble.real('threshold', 0.67)
    if not 0.0 <= threshold <= 1.0:
        raise ensemble.invalid('threshold', threshold, 'seuil dans [0, 1] attendu')
    ensemble_section = EnsembleSection(threshold=threshold, hidden=ensemble.integer('hidden', 128, minimum=1))

    output = section('output')
    output_dir = output.path('directory') or base_dir / 'runs' / path.stem

    seeds = Seeds(
        split=split.integer('seed', DEFAULT_SEED),
        embedding=training.integer('embedding_seed', training_seed),
        augment=augment.integer('seed', DEFAULT_SEED),
        training=training_seed,
        ensemble=ensemble.integer('seed', DEFAULT_SEED),
    )

    config = ExperimentConfig(
        dataset=dataset_section,
        output_dir=output_dir,
        normalization=normalization_section,
        split=SplitSection(train_frac),
        training=training_section,
        augment=augment_section,
        ensemble=ensemble_section,
        embeddings=embeddings,
        cells=cells,
        seeds=seeds,
        source=path.resolve(),
    )
    logger.info(f"Configuration {path} : {len(cells)} cellule(s), {len(embeddings)} plongement(s)")
    return config
