# -*- coding: utf-8 -*-
"""
Jeux de commentaires étiquetés.

Format de fichier : UTF-8, une ligne par commentaire, trois colonnes
séparées par des tabulations ``id<TAB>label<TAB>text``. Dans le texte, la
tabulation, le retour à la ligne et la barre oblique inverse sont échappés
(``\\t``, ``\\n``, ``\\\\``). Une ligne d'en-tête ``id<TAB>label<TAB>text``
est tolérée en tête de fichier.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, List, Sequence, Union

from django.core.exceptions import ValidationError

from apps.classifiers.services.labels import ClassLabel

# Configuration du logger
logger = logging.getLogger(__name__)

HEADER = ('id', 'label', 'text')
_ESCAPES = {'\\': '\\\\', '\t': '\\t', '\n': '\\n', '\r': '\\r'}
_UNESCAPES = {'\\': '\\', 't': '\t', 'n': '\n', 'r': '\r'}


@dataclass(frozen=True)
class LabeledComment:
    id: str
    text: str
    label: ClassLabel

    def __post_init__(self):
        object.__setattr__(self, 'label', ClassLabel.parse(self.label))

    def with_text(self, text: str) -> 'LabeledComment':
        return replace(self, text=text)


def escape_text(text: str) -> str:
    return ''.join(_ESCAPES.get(char, char) for char in text)


def unescape_text(text: str) -> str:
    chars = []
    position = 0
    while position < len(text):
        char = text[position]
        if char == '\\' and position + 1 < len(text) and text[position + 1] in _UNESCAPES:
            chars.append(_UNESCAPES[text[position + 1]])
            position += 2
            continue
        chars.append(char)
        position += 1
    return ''.join(chars)


def check_unique_ids(dataset: Sequence[LabeledComment]) -> None:
    seen = set()
    for comment in dataset:
        if comment.id in seen:
            raise ValidationError(
                f"Identifiant en double : {comment.id}",
                code='duplicate_id',
                params={'id': comment.id},
            )
        seen.add(comment.id)


def read_dataset(path: Union[str, Path]) -> List[LabeledComment]:
    """
    Lit un jeu ``id<TAB>label<TAB>text``.

    Raises:
        ValidationError: Ligne mal formée, classe inconnue ou identifiant en
            double ; ``params['line']`` donne le numéro de ligne (à partir de 1)
    """
    dataset = []
    seen = set()
    with open(path, 'r', encoding='utf-8') as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.rstrip('\n').rstrip('\r')
            if not line:
                continue
            fields = line.split('\t')
            if number == 1 and tuple(fields) == HEADER:
                continue
            if len(fields) != 3:
                raise ValidationError(
                    f"{path}, ligne {number} : trois colonnes attendues, {len(fields)} trouvées",
                    code='malformed_line',
                    params={'line': number, 'path': str(path)},
                )
            identifier, label, text = fields
            try:
                label = ClassLabel.parse(label)
            except ValidationError:
                raise ValidationError(
                    f"{path}, ligne {number} : classe inconnue {label!r}",
                    code='unknown_label',
                    params={'line': number, 'path': str(path)},
                )
            if identifier in seen:
                raise ValidationError(
                    f"{path}, ligne {number} : identifiant en double {identifier!r}",
                    code='duplicate_id',
                    params={'line': number, 'path': str(path)},
                )
            seen.add(identifier)
            dataset.append(LabeledComment(identifier, unescape_text(text), label))

    logger.info(f"{len(dataset)} commentaires lus depuis {path}")
    return dataset


def write_dataset(dataset: Iterable[LabeledComment], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write('\t'.join(HEADER) + '\n')
        for comment in dataset:
            handle.write(f'{comment.id}\t{comment.label.label}\t{escape_text(comment.text)}\n')
    return path


def read_predictions(path: Union[str, Path]) -> List[ClassLabel]:
    """
    Lit des prédictions : une classe par ligne, en première colonne.

    Accepte aussi la sortie de ``predict`` (``label<TAB>p_clean<TAB>...``).
    """
    predictions = []
    with open(path, 'r', encoding='utf-8') as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.rstrip('\n')
            if not line:
                continue
            try:
                predictions.append(ClassLabel.parse(line.split('\t')[0]))
            except ValidationError:
                raise ValidationError(
                    f"{path}, ligne {number} : classe inconnue",
                    code='unknown_label',
                    params={'line': number, 'path': str(path)},
                )
    return predictions


def map_texts(dataset: Iterable[LabeledComment], transform: Callable[[str], str]) -> List[LabeledComment]:
    return [comment.with_text(transform(comment.text)) for comment in dataset]


def texts(dataset: Iterable[LabeledComment]) -> List[str]:
    return [comment.text for comment in dataset]


def labels(dataset: Iterable[LabeledComment]) -> List[int]:
    return [int(comment.label) for comment in dataset]
