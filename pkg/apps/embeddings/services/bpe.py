# -*- coding: utf-8 -*-
"""
Segmentation en sous-mots par fusion de paires (BPE).

Apprentissage :
- Chaque mot est découpé en caractères, le dernier portant le marqueur ``</w>``
- À chaque tour, la paire adjacente la plus fréquente est fusionnée
- Égalité de fréquence : la paire la plus petite dans l'ordre lexicographique

Application : les fusions sont rejouées par rang croissant. Les morceaux
non finaux d'un mot portent le suffixe ``@@`` ("abc" sans fusion donne
``a@@ b@@ c``).
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from django.core.exceptions import ValidationError

# Configuration du logger
logger = logging.getLogger(__name__)

END_OF_WORD = '</w>'
CONTINUATION = '@@'

Pair = Tuple[str, str]


@dataclass(frozen=True)
class BpeMergeTable:
    """Liste ordonnée des fusions apprises (rang 0 = priorité maximale)."""

    merges: Tuple[Pair, ...] = ()
    ranks: Dict[Pair, int] = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        for rank, pair in enumerate(self.merges):
            if pair in self.ranks:
                raise ValidationError(
                    f"Fusion dupliquée : {pair!r}",
                    code='duplicate_merge',
                )
            self.ranks[pair] = rank

    def __len__(self) -> int:
        return len(self.merges)

    def truncated(self, n_merges: int) -> 'BpeMergeTable':
        return BpeMergeTable(self.merges[:n_merges])


def _word_symbols(word: str) -> Tuple[str, ...]:
    return tuple(word[:-1]) + (word[-1] + END_OF_WORD,)


def _merge_pair(symbols: Tuple[str, ...], pair: Pair) -> Tuple[str, ...]:
    merged: List[str] = []
    index = 0
    while index < len(symbols):
        if index < len(symbols) - 1 and (symbols[index], symbols[index + 1]) == pair:
            merged.append(symbols[index] + symbols[index + 1])
            index += 2
        else:
            merged.append(symbols[index])
            index += 1
    return tuple(merged)


def learn_bpe(corpus: Iterable[Union[str, Sequence[str]]], n_merges: int) -> BpeMergeTable:
    """
    Apprend une table de fusions.

    Args:
        corpus: Phrases (textes découpés sur les espaces, ou listes de mots)
        n_merges (int): Nombre maximal de fusions (>= 0)

    Returns:
        BpeMergeTable: Au plus ``n_merges`` fusions, moins si plus aucune paire n'existe

    Raises:
        ValidationError: Si le corpus est vide ou si n_merges est négatif
    """
    if n_merges < 0:
        raise ValidationError(
            f"n_merges doit être >= 0 (reçu {n_merges})",
            code='invalid_merge_count',
        )

    word_counts: Counter = Counter()
    for sentence in corpus:
        words = sentence.split() if isinstance(sentence, str) else sentence
        word_counts.update(word for word in words if word)
    if not word_counts:
        raise ValidationError('Corpus vide : impossible d\'apprendre des fusions', code='empty_corpus')

    vocab: Dict[Tuple[str, ...], int] = {}
    for word, count in word_counts.items():
        symbols = _word_symbols(word)
        vocab[symbols] = vocab.get(symbols, 0) + count

    merges: List[Pair] = []
    for _ in range(n_merges):
        pair_counts: Counter = Counter()
        for symbols, count in vocab.items():
            for pair in zip(symbols, symbols[1:]):
                pair_counts[pair] += count
        if not pair_counts:
            logger.info(f"Plus aucune paire à fusionner après {len(merges)} fusions")
            break

        best = min(pair_counts, key=lambda pair: (-pair_counts[pair], pair))
        merges.append(best)

        updated: Dict[Tuple[str, ...], int] = {}
        for symbols, count in vocab.items():
            merged = _merge_pair(symbols, best)
            updated[merged] = updated.get(merged, 0) + count
        vocab = updated

    logger.info(f"{len(merges)} fusions BPE apprises sur {len(word_counts)} mots distincts")
    return BpeMergeTable(tuple(merges))


def apply_bpe_word(word: str, table: BpeMergeTable) -> List[str]:
    """Découpe un mot selon la table ; les morceaux non finaux portent ``@@``."""
    if not word:
        return []
    symbols = _word_symbols(word)
    while len(symbols) > 1:
        candidates = [pair for pair in zip(symbols, symbols[1:]) if pair in table.ranks]
        if not candidates:
            break
        best = min(candidates, key=table.ranks.__getitem__)
        symbols = _merge_pair(symbols, best)

    pieces = [symbol + CONTINUATION for symbol in symbols[:-1]]
    pieces.append(symbols[-1][:-len(END_OF_WORD)])
    return pieces


def apply_bpe(text: str, table: BpeMergeTable) -> List[str]:
    """Applique la table à chaque mot d'un texte nettoyé."""
    pieces: List[str] = []
    for word in text.split():
        pieces.extend(apply_bpe_word(word, table))
    return pieces


def save_merges(table: BpeMergeTable, path: Union[str, Path]) -> None:
    """Écrit une fusion par ligne (``gauche droite``), dans l'ordre de priorité."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        for left, right in table.merges:
            handle.write(f'{left} {right}\n')


def load_merges(path: Union[str, Path]) -> BpeMergeTable:
    """
    Relit un fichier de fusions.

    Raises:
        ValidationError: Ligne mal formée (numéro de ligne inclus)
    """
    merges: List[Pair] = []
    with open(path, 'r', encoding='utf-8') as handle:
        for line_number, raw_line in enumerate(handle, start=1):
            line = raw_line.rstrip('\n')
            if not line:
                continue
            parts = line.split(' ')
            if len(parts) != 2 or not all(parts):
                raise ValidationError(
                    f"{path}:{line_number} : fusion mal formée",
                    code='malformed_line',
                    params={'line': line_number},
                )
            merges.append((parts[0], parts[1]))
    return BpeMergeTable(tuple(merges))
