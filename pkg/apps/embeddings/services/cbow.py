# -*- coding: utf-8 -*-
"""
Entraînement de vecteurs CBOW (sac de mots continu, échantillonnage négatif).

L'entraînement est délégué à gensim ; l'initialisation des vecteurs est
refaite ici avec un générateur numpy graine afin que le résultat ne dépende
que de (corpus, paramètres, graine).
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from django.core.exceptions import ValidationError
from gensim.models import Word2Vec
from gensim.models.callbacks import CallbackAny2Vec

from .vectors import EmbeddingMatrix
from .vocabulary import SPECIAL_TOKENS, Vocabulary, build_vocab

# Configuration du logger
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CbowSettings:
    dim: int = 200
    window: int = 5
    epochs: int = 5
    negative: int = 5
    alpha: float = 0.025
    min_alpha: float = 0.0001
    min_count: int = 1
    sample: float = 1e-3


class CbowLossLogger(CallbackAny2Vec):
    """Relève la perte de chaque époque (gensim ne fournit qu'un cumul)."""

    def __init__(self):
        self.losses: List[float] = []
        self._previous = 0.0

    def on_epoch_end(self, model):
        cumulated = model.get_latest_training_loss()
        self.losses.append(float(cumulated - self._previous))
        self._previous = cumulated
        logger.info(f"CBOW époque {len(self.losses)} : perte {self.losses[-1]:.4f}")


def initial_cbow_vectors(vocab: Vocabulary, dim: int, seed: int) -> np.ndarray:
    """Tirage uniforme dans [-0.5/dim, 0.5/dim] ; lignes spéciales nulles."""
    rng = np.random.default_rng(seed)
    vectors = np.zeros((len(vocab), dim), dtype=np.float32)
    regular = len(vocab) - len(SPECIAL_TOKENS)
    if regular > 0:
        bound = 0.5 / dim
        vectors[len(SPECIAL_TOKENS):] = rng.uniform(-bound, bound, size=(regular, dim)).astype(np.float32)
    return vectors


def train_cbow(corpus: Sequence[Sequence[str]], settings: CbowSettings = CbowSettings(), seed: int = 13) -> EmbeddingMatrix:
    """
    Entraîne des vecteurs CBOW.

    Args:
        corpus: Phrases segmentées (listes de jetons)
        settings (CbowSettings): Hyperparamètres (dimension 200 par défaut)
        seed (int): Graine de l'initialisation et de l'échantillonnage

    Returns:
        EmbeddingMatrix: Matrice finie ; ``metadata['epoch_losses']`` contient
        la perte de chaque époque

    Raises:
        ValidationError: Dimension invalide, corpus plus petit que la fenêtre
            ou vocabulaire vide
    """
    if settings.dim < 1:
        raise ValidationError(f"Dimension invalide : {settings.dim}", code='invalid_dim')
    sentences = [list(sentence) for sentence in corpus if len(sentence) > 0]
    total_tokens = sum(len(sentence) for sentence in sentences)
    if total_tokens < settings.window:
        raise ValidationError(
            f"Corpus trop petit ({total_tokens} jetons) pour une fenêtre de {settings.window}",
            code='corpus_too_small',
            params={'tokens': total_tokens, 'window': settings.window},
        )

    vocab = build_vocab(sentences, min_count=settings.min_count)
    if len(vocab) == len(SPECIAL_TOKENS):
        raise ValidationError('Aucun jeton ne dépasse min_count', code='empty_vocabulary')
    initial = initial_cbow_vectors(vocab, settings.dim, seed)

    model = Word2Vec(
        vector_size=settings.dim,
        window=settings.window,
        min_count=settings.min_count,
        sg=0,
        hs=0,
        negative=settings.negative,
        alpha=settings.alpha,
        min_alpha=settings.min_alpha,
        sample=settings.sample,
        seed=seed,
        workers=1,
    )
    model.build_vocab(corpus_iterable=sentences)
    for token in vocab.regular_tokens:
        if token in model.wv.key_to_index:
            model.wv.vectors[model.wv.key_to_index[token]] = initial[vocab.index(token)]

    loss_logger = CbowLossLogger()
    if settings.epochs > 0:
        model.train(
            corpus_iterable=sentences,
            total_examples=model.corpus_count,
            epochs=settings.epochs,
            compute_loss=True,
            callbacks=[loss_logger],
        )

    vectors = initial.copy()
    for token in vocab.regular_tokens:
        if token in model.wv.key_to_index:
            vectors[vocab.index(token)] = model.wv.vectors[model.wv.key_to_index[token]]

    logger.info(
        f"CBOW entraîné : {len(vocab)} entrées, dimension {settings.dim}, {settings.epochs} époques"
    )
    return EmbeddingMatrix(vocab, vectors, metadata={'epoch_losses': loss_logger.losses})
