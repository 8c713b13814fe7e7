# -*- coding: utf-8 -*-
"""
Encodeur de phrases entraîné par prédiction de jetons masqués.

Ce module fournit :
- L'entraînement d'un petit encodeur de type RoBERTa (transformers)
- L'encodage d'une phrase en un vecteur (moyenne des états cachés finaux)
- La proposition de remplaçants pour une position masquée (augmentation)
- La sauvegarde et le rechargement de l'encodeur
"""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import torch
from django.core.exceptions import ValidationError
from transformers import RobertaConfig, RobertaForMaskedLM

from .vocabulary import MASK_INDEX, PAD_INDEX, SPECIAL_TOKENS, UNK_INDEX, Vocabulary, build_vocab

# Configuration du logger
logger = logging.getLogger(__name__)

IGNORE_LABEL = -100


@dataclass(frozen=True)
class MlmSettings:
    dim: int = 256
    layers: int = 2
    heads: int = 4
    ffn: int = 512
    max_len: int = 64
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 5e-4
    mask_prob: float = 0.15
    holdout_fraction: float = 0.1
    min_count: int = 1
    dropout: float = 0.1


def _roberta_config(settings: MlmSettings, vocab_size: int) -> RobertaConfig:
    # Positions RoBERTa : décalées de pad_token_id + 1
    return RobertaConfig(
        vocab_size=vocab_size,
        hidden_size=settings.dim,
        num_hidden_layers=settings.layers,
        num_attention_heads=settings.heads,
        intermediate_size=settings.ffn,
        max_position_embeddings=settings.max_len + PAD_INDEX + 2,
        hidden_dropout_prob=settings.dropout,
        attention_probs_dropout_prob=settings.dropout,
        type_vocab_size=1,
        pad_token_id=PAD_INDEX,
    )


def _mask_count(length: int, mask_prob: float) -> int:
    return min(length, max(1, int(round(length * mask_prob))))


def _pad_batch(sequences: Sequence[Sequence[int]]) -> Tuple[torch.Tensor, torch.Tensor]:
    width = max(len(sequence) for sequence in sequences)
    ids = torch.full((len(sequences), width), PAD_INDEX, dtype=torch.long)
    for row, sequence in enumerate(sequences):
        ids[row, :len(sequence)] = torch.tensor(sequence, dtype=torch.long)
    return ids, (ids != PAD_INDEX).long()


def _masked_batch(
    sequences: Sequence[Sequence[int]],
    rng: np.random.Generator,
    mask_prob: float,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Masque ``mask_prob`` des positions de chaque suite (au moins une)."""
    ids, attention = _pad_batch(sequences)
    labels = torch.full_like(ids, IGNORE_LABEL)
    for row, sequence in enumerate(sequences):
        positions = rng.choice(len(sequence), size=_mask_count(len(sequence), mask_prob), replace=False)
        for position in sorted(int(p) for p in positions):
            labels[row, position] = ids[row, position]
            ids[row, position] = MASK_INDEX
    return ids, attention, labels


class SentenceEncoder:
    """Encodeur entraîné ; toutes les méthodes publiques travaillent en mode inférence."""

    def __init__(self, model: RobertaForMaskedLM, vocab: Vocabulary, settings: MlmSettings,
                 initial_loss: float = float('nan'), final_loss: float = float('nan')):
        self.model = model
        self.vocab = vocab
        self.settings = settings
        self.initial_loss = initial_loss
        self.final_loss = final_loss
        self.model.eval()

    @property
    def dim(self) -> int:
        return self.settings.dim

    def _ids(self, tokens: Sequence[str]) -> List[int]:
        ids = self.vocab.encode(list(tokens)[:self.settings.max_len])
        return ids or [UNK_INDEX]

    @torch.no_grad()
    def encode_batch(self, sentences: Sequence[Sequence[str]]) -> np.ndarray:
        """Moyenne des états cachés finaux sur les positions non PAD : (N, dim)."""
        self.model.eval()
        if not sentences:
            return np.zeros((0, self.dim), dtype=np.float32)
        ids, attention = _pad_batch([self._ids(tokens) for tokens in sentences])
        hidden = self.model.roberta(input_ids=ids, attention_mask=attention).last_hidden_state
        weights = attention.unsqueeze(-1).to(hidden.dtype)
        pooled = (hidden * weights).sum(dim=1) / weights.sum(dim=1)
        return pooled.numpy().astype(np.float32)

    def encode(self, tokens: Union[str, Sequence[str]]) -> np.ndarray:
        if isinstance(tokens, str):
            tokens = tokens.split()
        return self.encode_batch([tokens])[0]

    @torch.no_grad()
    def propose_masked(self, tokens: Sequence[str], position: int, top_k: int = 10) -> List[Tuple[str, float]]:
        """
        Propositions pour la position ``position`` une fois masquée.

        Returns:
            List[Tuple[str, float]]: Au plus ``top_k`` jetons du vocabulaire
            (hors jetons spéciaux) par probabilité décroissante

        Raises:
            ValidationError: Position hors de la phrase ou top_k < 1
        """
        tokens = list(tokens)
        if not 0 <= position < len(tokens):
            raise ValidationError(
                f"Position {position} hors de la phrase ({len(tokens)} jetons)",
                code='position_out_of_range',
                params={'position': position, 'length': len(tokens)},
            )
        if top_k < 1:
            raise ValidationError(f"top_k doit être >= 1 (reçu {top_k})", code='invalid_top_k')

        self.model.eval()
        # Fenêtre de max_len jetons contenant la position
        start = max(0, position - self.settings.max_len + 1)
        window = self.vocab.encode(tokens[start:start + self.settings.max_len])
        window[position - start] = MASK_INDEX
        ids = torch.tensor([window], dtype=torch.long)
        logits = self.model(input_ids=ids, attention_mask=torch.ones_like(ids)).logits[0, position - start]
        probabilities = torch.softmax(logits, dim=-1)
        probabilities[:len(SPECIAL_TOKENS)] = 0.0

        k = min(top_k, len(self.vocab) - len(SPECIAL_TOKENS))
        if k <= 0:
            return []
        values, indexes = torch.topk(probabilities, k)
        return [(self.vocab.token(int(index)), float(value)) for value, index in zip(values, indexes)]

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save({
            'settings': asdict(self.settings),
            'vocab': self.vocab.regular_tokens,
            'state_dict': self.model.state_dict(),
            'initial_loss': self.initial_loss,
            'final_loss': self.final_loss,
        }, path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'SentenceEncoder':
        payload = torch.load(path, map_location='cpu', weights_only=True)
        settings = MlmSettings(**payload['settings'])
        vocab = Vocabulary(payload['vocab'])
        model = RobertaForMaskedLM(_roberta_config(settings, len(vocab)))
        model.load_state_dict(payload['state_dict'])
        return cls(model, vocab, settings, payload['initial_loss'], payload['final_loss'])


@torch.no_grad()
def _heldout_loss(model: RobertaForMaskedLM, batches) -> float:
    model.eval()
    total, count = 0.0, 0
    for ids, attention, labels in batches:
        masked = int((labels != IGNORE_LABEL).sum())
        loss = model(input_ids=ids, attention_mask=attention, labels=labels).loss
        total += loss.item() * masked
        count += masked
    return total / count


def train_mlm_encoder(corpus: Sequence[Sequence[str]], settings: MlmSettings = MlmSettings(), seed: int = 13) -> SentenceEncoder:
    """
    Entraîne l'encodeur par prédiction de jetons masqués.

    Une tranche du corpus est mise de côté avec des masques fixes ; sa perte
    est mesurée avant et après l'entraînement.

    Args:
        corpus: Phrases segmentées (listes de jetons)
        settings (MlmSettings): Architecture et entraînement
        seed (int): Graine des masques, de l'ordre des lots et des poids

    Returns:
        SentenceEncoder: Encodeur en mode inférence, pertes initiale et finale renseignées

    Raises:
        ValidationError: dim non divisible par heads ou corpus trop petit
    """
    if settings.dim % settings.heads != 0:
        raise ValidationError(
            f"dim ({settings.dim}) doit être divisible par heads ({settings.heads})",
            code='invalid_heads',
        )
    vocab = build_vocab(corpus, min_count=settings.min_count)
    sequences = [vocab.encode(list(sentence)[:settings.max_len]) for sentence in corpus if len(sentence) > 0]
    n_holdout = max(1, int(round(len(sequences) * settings.holdout_fraction)))
    if len(sequences) < 2 or len(sequences) - n_holdout < 1:
        raise ValidationError(
            f"Corpus trop petit ({len(sequences)} phrases) pour réserver une tranche de validation",
            code='corpus_too_small',
        )

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(sequences))
    holdout = [sequences[i] for i in order[:n_holdout]]
    train = [sequences[i] for i in order[n_holdout:]]
    holdout_batches = [
        _masked_batch(holdout[i:i + settings.batch_size], rng, settings.mask_prob)
        for i in range(0, len(holdout), settings.batch_size)
    ]

    torch.manual_seed(seed)
    model = RobertaForMaskedLM(_roberta_config(settings, len(vocab)))
    optimizer = torch.optim.AdamW(model.parameters(), lr=settings.learning_rate)

    initial_loss = _heldout_loss(model, holdout_batches)
    logger.info(f"MLM : perte de validation initiale {initial_loss:.4f}")

    for epoch in range(1, settings.epochs + 1):
        model.train()
        permutation = rng.permutation(len(train))
        epoch_loss = 0.0
        for start in range(0, len(train), settings.batch_size):
            batch = [train[i] for i in permutation[start:start + settings.batch_size]]
            ids, attention, labels = _masked_batch(batch, rng, settings.mask_prob)
            loss = model(input_ids=ids, attention_mask=attention, labels=labels).loss
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(batch)
        logger.info(f"MLM époque {epoch} : perte d'entraînement {epoch_loss / len(train):.4f}")

    final_loss = _heldout_loss(model, holdout_batches)
    logger.info(f"MLM : perte de validation finale {final_loss:.4f} (initiale {initial_loss:.4f})")
    return SentenceEncoder(model, vocab, settings, initial_loss, final_loss)
