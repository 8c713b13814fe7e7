# -*- coding: utf-8 -*-
"""
Registre des plongements et transformation des textes en entrées de modèles.

Chaque plongement nommé associe un découpage (space, bpe, segmented) à un
fournisseur de vecteurs :
- ``cbow`` : vecteurs CBOW entraînés sur le corpus d'entraînement
- ``pretrained`` : fichier word2vec texte (fasttext, etc.)
- ``mlm`` : vecteur de phrase produit par l'encodeur masqué

Un Featurizer se sauvegarde dans un répertoire et se recharge à l'identique
pour l'inférence.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from django.core.exceptions import ImproperlyConfigured, ValidationError
from django.db import models

from .bpe import learn_bpe, load_merges, save_merges
from .cbow import CbowSettings, train_cbow
from .mlm import MlmSettings, SentenceEncoder, train_mlm_encoder
from .tokenizers import Lexicon, TokenizerKind, TokenizerResources, load_lexicon, tokenize
from .vectors import DEFAULT_MAX_LEN, EmbeddingMatrix, embed_sequence, load_pretrained, save_word2vec

# Configuration du logger
logger = logging.getLogger(__name__)

DESCRIPTOR_FILE = 'featurizer.json'
MERGES_FILE = 'merges.txt'
LEXICON_FILE = 'lexicon.txt'
VECTORS_FILE = 'vectors.txt'
ENCODER_FILE = 'encoder.pt'


class EmbeddingProvider(models.TextChoices):
    CBOW = 'cbow', 'CBOW entraîné'
    PRETRAINED = 'pretrained', 'Vecteurs pré-entraînés'
    MLM = 'mlm', 'Encodeur de phrases'


class InputKind(models.TextChoices):
    SEQUENCE = 'sequence', 'Suite de vecteurs'
    SENTENCE = 'sentence', 'Vecteur de phrase'


@dataclass(frozen=True)
class EmbeddingSpec:
    """Description d'un plongement nommé (une section ``[embedding:<nom>]``)."""

    name: str
    provider: str = EmbeddingProvider.CBOW
    tokenizer: str = TokenizerKind.SPACE
    max_len: int = DEFAULT_MAX_LEN
    dim: int = 200
    window: int = 5
    epochs: int = 5
    min_count: int = 1
    n_merges: int = 1000
    vectors_path: Optional[str] = None
    lexicon_path: Optional[str] = None
    layers: int = 2
    heads: int = 4
    ffn: int = 512

    def cbow_settings(self) -> CbowSettings:
        return CbowSettings(dim=self.dim, window=self.window, epochs=self.epochs, min_count=self.min_count)

    def mlm_settings(self) -> MlmSettings:
        return MlmSettings(
            dim=self.dim, layers=self.layers, heads=self.heads, ffn=self.ffn,
            max_len=self.max_len, epochs=self.epochs, min_count=self.min_count,
        )


@dataclass
class FeatureBatch:
    """Entrées d'un lot : (N, max_len, dim) ou (N, dim), et longueurs réelles."""

    inputs: np.ndarray
    lengths: np.ndarray

    def __len__(self) -> int:
        return int(self.inputs.shape[0])


class Featurizer:
    """Découpage + vecteurs. Les sous-classes implémentent ``featurize``."""

    input_kind: str = InputKind.SEQUENCE

    def __init__(self, name: str, tokenizer: str, resources: TokenizerResources, max_len: int):
        self.name = name
        self.tokenizer = tokenizer
        self.resources = resources
        self.max_len = max_len

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def tokenize(self, text: str):
        return tokenize(text, self.tokenizer, self.resources)

    def featurize(self, texts: Sequence[str]) -> FeatureBatch:
        raise NotImplementedError

    def _descriptor(self) -> dict:
        return {
            'name': self.name,
            'input_kind': str(self.input_kind),
            'tokenizer': str(self.tokenizer),
            'max_len': self.max_len,
        }

    def save(self, directory: Union[str, Path]) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if self.resources.merges is not None:
            save_merges(self.resources.merges, directory / MERGES_FILE)
        if self.resources.lexicon is not None:
            lines = sorted(' '.join(word) for word in self.resources.lexicon.words)
            (directory / LEXICON_FILE).write_text(''.join(f'{line}\n' for line in lines), encoding='utf-8')
        self._save_vectors(directory)
        with open(directory / DESCRIPTOR_FILE, 'w', encoding='utf-8') as handle:
            json.dump(self._descriptor(), handle, ensure_ascii=False, indent=2, sort_keys=True)
            handle.write('\n')
        return directory

    def _save_vectors(self, directory: Path) -> None:
        raise NotImplementedError


class SequenceFeaturizer(Featurizer):
    input_kind = InputKind.SEQUENCE

    def __init__(self, name: str, tokenizer: str, resources: TokenizerResources,
                 matrix: EmbeddingMatrix, max_len: int = DEFAULT_MAX_LEN):
        super().__init__(name, tokenizer, resources, max_len)
        self.matrix = matrix

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def featurize(self, texts: Sequence[str]) -> FeatureBatch:
        inputs = np.zeros((len(texts), self.max_len, self.dim), dtype=np.float32)
        lengths = np.ones(len(texts), dtype=np.int64)
        for row, text in enumerate(texts):
            tokens = self.tokenize(text)
            inputs[row] = embed_sequence(tokens, self.matrix, self.max_len)
            lengths[row] = max(1, min(len(tokens), self.max_len))
        return FeatureBatch(inputs, lengths)

    def _save_vectors(self, directory: Path) -> None:
        save_word2vec(self.matrix, directory / VECTORS_FILE)


class SentenceFeaturizer(Featurizer):
    input_kind = InputKind.SENTENCE

    def __init__(self, name: str, tokenizer: str, resources: TokenizerResources,
                 encoder: SentenceEncoder):
        super().__init__(name, tokenizer, resources, encoder.settings.max_len)
        self.encoder = encoder

    @property
    def dim(self) -> int:
        return self.encoder.dim

    def featurize(self, texts: Sequence[str]) -> FeatureBatch:
        tokenized = [self.tokenize(text) for text in texts]
        return FeatureBatch(self.encoder.encode_batch(tokenized), np.ones(len(texts), dtype=np.int64))

    def _save_vectors(self, directory: Path) -> None:
        self.encoder.save(directory / ENCODER_FILE)


def build_resources(spec: EmbeddingSpec, texts: Sequence[str]) -> TokenizerResources:
    """Ressources du découpage : table BPE apprise sur ``texts`` ou lexique chargé."""
    if spec.tokenizer == TokenizerKind.BPE:
        return TokenizerResources(merges=learn_bpe(texts, spec.n_merges))
    if spec.tokenizer == TokenizerKind.SEGMENTED:
        if not spec.lexicon_path:
            raise ImproperlyConfigured(f"Plongement {spec.name} : lexique requis pour le découpage segmented")
        return TokenizerResources(lexicon=load_lexicon(spec.lexicon_path))
    return TokenizerResources()


def build_featurizer(spec: EmbeddingSpec, texts: Sequence[str], seed: int) -> Featurizer:
    """
    Construit (et entraîne si besoin) le plongement décrit par ``spec``.

    Args:
        spec (EmbeddingSpec): Description du plongement
        texts: Textes nettoyés du jeu d'entraînement
        seed (int): Graine des entraînements

    Returns:
        Featurizer: Prêt à transformer des textes nettoyés
    """
    resources = build_resources(spec, texts)
    tokenized = [tokenize(text, spec.tokenizer, resources) for text in texts]
    logger.info(f"Plongement {spec.name} : fournisseur {spec.provider}, découpage {spec.tokenizer}")

    if spec.provider == EmbeddingProvider.CBOW:
        matrix = train_cbow(tokenized, spec.cbow_settings(), seed=seed)
        return SequenceFeaturizer(spec.name, spec.tokenizer, resources, matrix, spec.max_len)
    if spec.provider == EmbeddingProvider.PRETRAINED:
        if not spec.vectors_path:
            raise ImproperlyConfigured(f"Plongement {spec.name} : fichier de vecteurs requis")
        matrix = load_pretrained(spec.vectors_path)
        return SequenceFeaturizer(spec.name, spec.tokenizer, resources, matrix, spec.max_len)
    if spec.provider == EmbeddingProvider.MLM:
        encoder = train_mlm_encoder(tokenized, spec.mlm_settings(), seed=seed)
        return SentenceFeaturizer(spec.name, spec.tokenizer, resources, encoder)
    raise ValidationError(f"Fournisseur inconnu : {spec.provider!r}", code='unknown_provider')


def load_featurizer(directory: Union[str, Path]) -> Featurizer:
    """Recharge un Featurizer sauvegardé par ``Featurizer.save``."""
    directory = Path(directory)
    with open(directory / DESCRIPTOR_FILE, 'r', encoding='utf-8') as handle:
        descriptor = json.load(handle)

    merges = load_merges(directory / MERGES_FILE) if (directory / MERGES_FILE).exists() else None
    lexicon = load_lexicon(directory / LEXICON_FILE) if (directory / LEXICON_FILE).exists() else None
    resources = TokenizerResources(merges=merges, lexicon=lexicon)

    if descriptor['input_kind'] == InputKind.SENTENCE:
        encoder = SentenceEncoder.load(directory / ENCODER_FILE)
        return SentenceFeaturizer(descriptor['name'], descriptor['tokenizer'], resources, encoder)
    matrix = load_pretrained(directory / VECTORS_FILE)
    return SequenceFeaturizer(
        descriptor['name'], descriptor['tokenizer'], resources, matrix, descriptor['max_len']
    )
