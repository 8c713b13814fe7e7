# -*- coding: utf-8 -*-
"""
Service de normalisation des commentaires bruts.

Ce module fournit les étapes de nettoyage appliquées à l'identique avant
l'entraînement et avant l'inférence :
- Unification de l'encodage et placement canonique des accents
- Remplacement des émoticônes composées par un seul caractère
- Suppression des caractères invisibles et séparation de la ponctuation
- Passage en minuscules

La segmentation en mots appartient à l'application ``embeddings``.
"""

import logging
import re
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

from django.conf import settings
from django.core.exceptions import ValidationError

# Configuration du logger
logger = logging.getLogger(__name__)

DEFAULT_EMOTICONS_PATH = Path(__file__).resolve().parent.parent / 'data' / 'emoticons.tsv'

# Grave, aigu, tilde, crochet, point souscrit
TONE_MARKS = frozenset('\u0300\u0301\u0303\u0309\u0323')
# Voyelles qui portent déjà un signe (circonflexe, brève, corne)
MARKED_VOWELS = frozenset('ăâêôơư')
# Syllabes ouvertes où le ton va sur la seconde voyelle (orthographe moderne)
SECOND_VOWEL_CLUSTERS = frozenset({'oa', 'oe', 'uy'})

_VOWEL_RUN = re.compile('[aăâeêioôơuưy]+')
_COMBINING_RANGES = '\u0300-\u036f\u1ab0-\u1aff\u1dc0-\u1dff\u20d0-\u20ff\ufe20-\ufe2f'
_MULTIPLE_SPACES = re.compile(' {2,}')


def _default_invisible_charset() -> FrozenSet[str]:
    """Caractères de contrôle (hors tabulation et saut de ligne) et caractères de largeur nulle."""
    chars = {chr(code) for code in range(0x00, 0x20) if chr(code) not in '\t\n'}
    chars |= {chr(code) for code in range(0x7F, 0xA0)}
    chars |= {'\u200b', '\u200c', '\u200d', '\ufeff', '\u00ad'}
    return frozenset(chars)


DEFAULT_INVISIBLE_CHARSET = _default_invisible_charset()


@dataclass(frozen=True)
class EmoticonDictionary:
    """
    Dictionnaire immuable des émoticônes composées.

    Les clés sont comparées sans tenir compte de la casse ; chaque clé fait
    au moins deux caractères et chaque valeur est un unique point de code
    qui n'apparaît dans aucune clé (un seul passage suffit).
    """

    entries: Tuple[Tuple[str, str], ...] = ()
    _table: Dict[str, str] = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        table: Dict[str, str] = {}
        values = {value for _, value in self.entries}
        for key, value in self.entries:
            if len(key) < 2:
                raise ValidationError(
                    f"Clé d'émoticône trop courte : {key!r}",
                    code='invalid_emoticon',
                )
            if len(value) != 1:
                raise ValidationError(
                    f"La valeur de {key!r} doit être un seul caractère",
                    code='invalid_emoticon',
                )
            if values & set(key):
                raise ValidationError(
                    f"La clé {key!r} contient un caractère de remplacement",
                    code='invalid_emoticon',
                )
            folded = _fold(key)
            if table.get(folded, value) != value:
                raise ValidationError(
                    f"Clé {key!r} définie deux fois avec des valeurs différentes",
                    code='invalid_emoticon',
                )
            table[folded] = value
        self._table.update(table)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> 'EmoticonDictionary':
        return cls(tuple(mapping.items()))

    @property
    def max_key_length(self) -> int:
        return max((len(key) for key in self._table), default=0)

    def lookup(self, folded_key: str) -> Optional[str]:
        return self._table.get(folded_key)

    def __len__(self) -> int:
        return len(self._table)


@dataclass(frozen=True)
class NormalizationConfig:
    """Paramètres du nettoyage (jeu de caractères invisibles, émoticônes, ponctuation)."""

    invisible_charset: FrozenSet[str] = DEFAULT_INVISIBLE_CHARSET
    emoticon_dict: EmoticonDictionary = field(default_factory=EmoticonDictionary)
    separate_punct: bool = True

    def __post_init__(self):
        for char in self.invisible_charset:
            if len(char) != 1:
                raise ValidationError(
                    f"Entrée invalide dans le jeu invisible : {char!r}",
                    code='invalid_charset',
                )
            if char.isalnum() or char in ' \t\n':
                raise ValidationError(
                    f"Le jeu invisible ne peut pas contenir {char!r}",
                    code='invalid_charset',
                )

    @classmethod
    def default(cls, emoticons_path: Optional[Path] = None, separate_punct: bool = True) -> 'NormalizationConfig':
        """Configuration par défaut avec le dictionnaire d'émoticônes fourni."""
        path = Path(emoticons_path) if emoticons_path else DEFAULT_EMOTICONS_PATH
        return cls(
            emoticon_dict=load_emoticon_dictionary(path),
            separate_punct=separate_punct,
        )


def configured_emoticons_path(explicit: Optional[Path] = None) -> Optional[Path]:
    """
    Dictionnaire d'émoticônes à utiliser : ``explicit`` s'il est donné,
    sinon le réglage ``HSD_EMOTICONS_PATH`` (None : dictionnaire fourni).
    """
    path = explicit or getattr(settings, 'HSD_EMOTICONS_PATH', '') or None
    return Path(path) if path else None


def _fold(text: str) -> str:
    return ''.join(_fold_char(char) for char in text)


def _fold_char(char: str) -> str:
    lowered = char.lower()
    return lowered if len(lowered) == 1 else char


@lru_cache(maxsize=32)
def load_emoticon_dictionary(path: Path) -> EmoticonDictionary:
    """
    Charge un dictionnaire d'émoticônes au format ``clé<TAB>valeur``.

    Les lignes vides et celles qui commencent par ``#`` sont ignorées.

    Raises:
        ValidationError: Si une ligne est mal formée (numéro de ligne inclus)
    """
    entries: List[Tuple[str, str]] = []
    with open(path, 'r', encoding='utf-8') as handle:
        for line_number, raw_line in enumerate(handle, start=1):
            line = raw_line.rstrip('\r\n')
            if not line.strip() or line.startswith('#'):
                continue
            parts = line.split('\t')
            if len(parts) != 2:
                raise ValidationError(
                    f"{path}:{line_number} : ligne d'émoticône mal formée",
                    code='malformed_line',
                    params={'line': line_number},
                )
            entries.append((parts[0], parts[1]))
    logger.info(f"{len(entries)} émoticônes chargées depuis {path}")
    return EmoticonDictionary(tuple(entries))


@lru_cache(maxsize=8)
def _word_pattern(ignorable: FrozenSet[str]) -> 're.Pattern[str]':
    extra = ''.join(re.escape(char) for char in sorted(ignorable))
    inner = f'[^\\W\\d_]|[{_COMBINING_RANGES}]'
    if extra:
        inner += f'|[{extra}]'
    return re.compile(f'[^\\W\\d_](?:{inner})*')


@lru_cache(maxsize=8)
def _hidden_in_marks_pattern(ignorable: FrozenSet[str]) -> Optional['re.Pattern[str]']:
    if not ignorable:
        return None
    extra = ''.join(re.escape(char) for char in sorted(ignorable))
    return re.compile(f'[{extra}]+(?:[{extra}]|[{_COMBINING_RANGES}])*[{_COMBINING_RANGES}]')


def _push_hidden_after_marks(text: str, ignorable: FrozenSet[str]) -> str:
    # Un caractère invisible ne sépare jamais deux marques combinantes
    pattern = _hidden_in_marks_pattern(ignorable)
    if pattern is None:
        return text

    def _reorder(match):
        run = match.group(0)
        return ''.join(c for c in run if c not in ignorable) + ''.join(c for c in run if c in ignorable)

    return pattern.sub(_reorder, text)


def _tone_position(base: str) -> Optional[int]:
    """
    Index de la voyelle qui doit porter le ton, ou None si le mot n'a pas
    la forme d'une syllabe (plusieurs groupes de voyelles, aucune voyelle).
    """
    lowered = base.lower()
    if len(lowered) != len(base):
        return None
    runs = list(_VOWEL_RUN.finditer(lowered))
    if len(runs) != 1:
        return None
    start, end = runs[0].span()

    # "qu" et "gi" : la semi-voyelle fait partie de la consonne initiale
    if end - start > 1:
        if lowered[start] == 'u' and start > 0 and lowered[start - 1] == 'q':
            start += 1
        elif lowered[start] == 'i' and start == 1 and lowered[0] == 'g':
            start += 1

    cluster = lowered[start:end]
    marked = [index for index, char in enumerate(cluster) if char in MARKED_VOWELS]
    if marked:
        return start + marked[-1]
    if len(cluster) == 1:
        return start
    if end < len(lowered):
        return end - 1
    if cluster in SECOND_VOWEL_CLUSTERS or len(cluster) == 3:
        return start + 1
    return start


def _place_tone(word: str, ignorable: FrozenSet[str]) -> str:
    # Les caractères invisibles sont repoussés en fin de mot
    hidden = ''.join(char for char in word if char in ignorable)
    visible = ''.join(char for char in word if char not in ignorable)

    decomposed = unicodedata.normalize('NFD', visible)
    tones = [char for char in decomposed if char in TONE_MARKS]
    base = unicodedata.normalize('NFC', ''.join(char for char in decomposed if char not in TONE_MARKS))
    if not tones:
        return base + hidden

    target = _tone_position(base)
    if target is None:
        return unicodedata.normalize('NFC', visible) + hidden

    toned = unicodedata.normalize('NFC', base[target] + tones[-1])
    return base[:target] + toned + base[target + 1:] + hidden


def normalize_encoding(text: str, ignorable: Iterable[str] = frozenset()) -> str:
    """
    Composition canonique et placement du ton sur la voyelle principale.

    Exemple : "thíêt kê\\u0301" devient "thiết kế".

    Args:
        text (str): Texte brut
        ignorable (Iterable[str]): Caractères transparents à l'intérieur d'un mot

    Returns:
        str: Texte composé (NFC), idempotent
    """
    if not text:
        return text
    ignorable = frozenset(ignorable)
    text = unicodedata.normalize('NFC', _push_hidden_after_marks(text, ignorable))
    pattern = _word_pattern(ignorable)
    placed = pattern.sub(lambda match: _place_tone(match.group(0), ignorable), text)
    return unicodedata.normalize('NFC', placed)


def canonicalize_emoticons(
    text: str,
    dictionary: EmoticonDictionary,
    ignorable: Iterable[str] = frozenset(),
) -> str:
    """
    Remplace chaque émoticône composée par son caractère unique.

    Parcours unique de gauche à droite, correspondance la plus longue en
    premier. Les caractères ``ignorable`` situés à l'intérieur d'une
    émoticône sont absorbés par le remplacement.
    """
    max_length = dictionary.max_key_length
    if not text or max_length == 0:
        return text
    ignorable = frozenset(ignorable)

    output: List[str] = []
    position = 0
    length = len(text)
    while position < length:
        char = text[position]
        if char in ignorable:
            output.append(char)
            position += 1
            continue

        folded: List[str] = []
        indexes: List[int] = []
        cursor = position
        while cursor < length and len(folded) < max_length:
            candidate = text[cursor]
            if candidate not in ignorable:
                folded.append(_fold_char(candidate))
                indexes.append(cursor)
            cursor += 1

        for size in range(len(folded), 1, -1):
            replacement = dictionary.lookup(''.join(folded[:size]))
            if replacement is None:
                continue
            end = indexes[size - 1] + 1
            # Une clé qui commence ou finit par une lettre ne coupe jamais un mot ("toxDai")
            if _is_letter(text[position]) and _letter_before(text, position, ignorable):
                continue
            if _is_letter(text[end - 1]) and _letter_after(text, end, ignorable):
                continue
            output.append(replacement)
            position = end
            break
        else:
            output.append(char)
            position += 1
    return ''.join(output)


def _is_letter(char: str) -> bool:
    return unicodedata.category(char)[0] == 'L'


def _letter_before(text: str, index: int, ignorable: FrozenSet[str]) -> bool:
    # Remonte les caractères invisibles et les marques jusqu'au caractère de base
    cursor = index - 1
    while cursor >= 0:
        char = text[cursor]
        if char in ignorable or unicodedata.category(char)[0] == 'M':
            cursor -= 1
            continue
        return _is_letter(char)
    return False


def _letter_after(text: str, index: int, ignorable: FrozenSet[str]) -> bool:
    cursor = index
    while cursor < len(text) and text[cursor] in ignorable:
        cursor += 1
    return cursor < len(text) and unicodedata.category(text[cursor])[0] in 'LM'


def _boundary_class(char: str, previous: str) -> str:
    category = unicodedata.category(char)
    if category[0] in 'LN':
        return 'word'
    if category[0] in 'PS':
        return 'punct'
    if category[0] == 'M':
        # Une marque combinante suit la classe de son caractère de base
        return previous
    return 'other'


def _separate_punctuation(text: str) -> str:
    output: List[str] = []
    previous = 'other'
    for char in text:
        current = _boundary_class(char, previous)
        if {previous, current} == {'word', 'punct'}:
            output.append(' ')
        output.append(char)
        previous = current
    return ''.join(output)


def strip_invisible(text: str, config: NormalizationConfig) -> str:
    """
    Supprime les caractères invisibles et, si ``separate_punct``
    est actif, insère une espace entre les mots et la ponctuation ou les
    émojis. Le résultat ne contient jamais deux espaces consécutives.
    """
    stripped = ''.join(char for char in text if char not in config.invisible_charset)
    if config.separate_punct:
        stripped = _separate_punctuation(stripped)
    return _MULTIPLE_SPACES.sub(' ', stripped).strip(' ')


def lowercase(text: str, ignorable: Iterable[str] = frozenset()) -> str:
    """
    Passage en minuscules (Unicode), suivi d'une recomposition.

    Certaines majuscules ("İ", "ẞ", "ǅ") changent de décomposition en
    minuscule : le résultat repasse par ``normalize_encoding``.
    """
    return normalize_encoding(text.lower(), ignorable)


@lru_cache(maxsize=1)
def default_config() -> NormalizationConfig:
    return NormalizationConfig.default()


def clean(text: str, config: Optional[NormalizationConfig] = None) -> str:
    """
    Chaîne complète : encodage, émoticônes, caractères invisibles puis minuscules.

    Args:
        text (str): Commentaire brut
        config (NormalizationConfig): Paramètres (défaut : dictionnaire fourni)

    Returns:
        str: Texte nettoyé ; ``clean(clean(x)) == clean(x)``
    """
    config = config or default_config()
    ignorable = config.invisible_charset
    text = normalize_encoding(text, ignorable)
    text = canonicalize_emoticons(text, config.emoticon_dict, ignorable)
    text = strip_invisible(text, config)
    return lowercase(text, ignorable)


def clean_lines(lines: Iterable[str], config: Optional[NormalizationConfig] = None) -> List[str]:
    """Nettoie une suite de lignes (le saut de ligne final est retiré)."""
    config = config or default_config()
    return [clean(line.rstrip('\n'), config) for line in lines]
