# -*- coding: utf-8 -*-
"""
Les trois découpages en jetons d'un texte nettoyé :
- ``space`` : découpage sur les espaces
- ``bpe`` : sous-mots appris (table de fusions requise)
- ``segmented`` : mots composés reconnus dans un lexique et joints par "_"
"""

import logging
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, List, Optional, Tuple, Union

from django.core.exceptions import ImproperlyConfigured, ValidationError
from django.db import models

from .bpe import BpeMergeTable, apply_bpe

# Configuration du logger
logger = logging.getLogger(__name__)

WORD_JOINER = '_'


class TokenizerKind(models.TextChoices):
    SPACE = 'space', 'Espaces'
    BPE = 'bpe', 'Sous-mots (BPE)'
    SEGMENTED = 'segmented', 'Mots segmentés'


@dataclass(frozen=True)
class Lexicon:
    """Mots de plusieurs syllabes, chaque mot étant un tuple de syllabes."""

    words: FrozenSet[Tuple[str, ...]] = frozenset()

    @property
    def max_syllables(self) -> int:
        return max((len(word) for word in self.words), default=0)

    def __contains__(self, syllables: Tuple[str, ...]) -> bool:
        return syllables in self.words

    def __len__(self) -> int:
        return len(self.words)


def _normalize_entry(line: str) -> str:
    return unicodedata.normalize('NFC', line).lower()


def load_lexicon(path: Union[str, Path]) -> Lexicon:
    """
    Charge un lexique : un mot par ligne, syllabes séparées par des espaces.

    Les entrées sont composées (NFC) et mises en minuscules pour
    correspondre aux textes nettoyés. Les mots d'une seule syllabe sont
    ignorés (ils n'ont rien à joindre).
    """
    words = set()
    with open(path, 'r', encoding='utf-8') as handle:
        for raw_line in handle:
            line = raw_line.strip()
            if not line or line.startswith('#'):
                continue
            syllables = tuple(_normalize_entry(line).split())
            if len(syllables) > 1:
                words.add(syllables)
    logger.info(f"Lexique chargé : {len(words)} mots composés depuis {path}")
    return Lexicon(frozenset(words))


def segment(text: str, lexicon: Lexicon) -> List[str]:
    """Segmentation gloutonne : à chaque position, le plus long mot du lexique."""
    syllables = text.split()
    longest = lexicon.max_syllables
    tokens: List[str] = []
    index = 0
    while index < len(syllables):
        size = min(longest, len(syllables) - index)
        while size > 1 and tuple(syllables[index:index + size]) not in lexicon:
            size -= 1
        size = max(size, 1)
        tokens.append(WORD_JOINER.join(syllables[index:index + size]))
        index += size
    return tokens


@dataclass(frozen=True)
class TokenizerResources:
    merges: Optional[BpeMergeTable] = None
    lexicon: Optional[Lexicon] = None


def tokenize(
    text: str,
    kind: Union[TokenizerKind, str],
    resources: Optional[TokenizerResources] = None,
) -> List[str]:
    """
    Découpe un texte nettoyé selon ``kind``.

    Raises:
        ImproperlyConfigured: Table de fusions ou lexique absent pour le découpage demandé
        ValidationError: Découpage inconnu
    """
    resources = resources or TokenizerResources()
    if kind == TokenizerKind.SPACE:
        return text.split()
    if kind == TokenizerKind.BPE:
        if resources.merges is None:
            raise ImproperlyConfigured('Le découpage bpe requiert une table de fusions')
        return apply_bpe(text, resources.merges)
    if kind == TokenizerKind.SEGMENTED:
        if resources.lexicon is None:
            raise ImproperlyConfigured('Le découpage segmented requiert un lexique')
        return segment(text, resources.lexicon)
    raise ValidationError(f"Découpage inconnu : {kind!r}", code='unknown_tokenizer')
