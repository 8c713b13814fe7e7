# -*- coding: utf-8 -*-
"""
Vocabulaire indexé partagé par tous les fournisseurs de plongements.

Les indices 0, 1 et 2 sont réservés aux jetons spéciaux PAD, UNK et MASK.
"""

from collections import Counter
from typing import Dict, Iterable, List, Sequence, Union

from django.core.exceptions import ValidationError

PAD_TOKEN = '<pad>'
UNK_TOKEN = '<unk>'
MASK_TOKEN = '<mask>'
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, MASK_TOKEN)

PAD_INDEX = 0
UNK_INDEX = 1
MASK_INDEX = 2


class Vocabulary:
    """Table bijective jeton <-> indice, indices contigus à partir de 0."""

    def __init__(self, tokens: Iterable[str] = ()):
        self._itos: List[str] = list(SPECIAL_TOKENS)
        self._stoi: Dict[str, int] = {token: index for index, token in enumerate(self._itos)}
        for token in tokens:
            self.add(token)

    def add(self, token: str) -> int:
        if token not in self._stoi:
            self._stoi[token] = len(self._itos)
            self._itos.append(token)
        return self._stoi[token]

    def index(self, token: str) -> int:
        return self._stoi.get(token, UNK_INDEX)

    def token(self, index: int) -> str:
        return self._itos[index]

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.index(token) for token in tokens]

    @property
    def tokens(self) -> List[str]:
        return list(self._itos)

    @property
    def regular_tokens(self) -> List[str]:
        return self._itos[len(SPECIAL_TOKENS):]

    def __contains__(self, token: str) -> bool:
        return token in self._stoi

    def __len__(self) -> int:
        return len(self._itos)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._itos == other._itos

    def __repr__(self) -> str:
        return f'Vocabulary(size={len(self)})'


def build_vocab(corpus: Iterable[Union[str, Sequence[str]]], min_count: int = 1) -> Vocabulary:
    """
    Construit le vocabulaire d'un corpus.

    Args:
        corpus: Phrases déjà segmentées (listes de jetons) ou textes nettoyés
            (découpés sur les espaces)
        min_count (int): Fréquence minimale (>= 1)

    Returns:
        Vocabulary: Jetons spéciaux puis jetons retenus, par fréquence
        décroissante puis ordre lexicographique
    """
    if min_count < 1:
        raise ValidationError(
            f"min_count doit être >= 1 (reçu {min_count})",
            code='invalid_min_count',
        )
    counts: Counter = Counter()
    for sentence in corpus:
        tokens = sentence.split() if isinstance(sentence, str) else sentence
        counts.update(token for token in tokens if token not in SPECIAL_TOKENS)
    kept = sorted(
        (token for token, count in counts.items() if count >= min_count),
        key=lambda token: (-counts[token], token),
    )
    return Vocabulary(kept)
