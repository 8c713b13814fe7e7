# -*- coding: utf-8 -*-
"""
Augmentation par remplacement de mots masqués.

Une ou plusieurs positions de la phrase sont masquées ; l'encodeur propose
des remplaçants et l'on retient la meilleure proposition appartenant aux
mots communs (présents dans les trois classes), pour ne pas déplacer
l'étiquette de la phrase.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Protocol, Sequence, Tuple

import numpy as np
from django.core.exceptions import ValidationError

from apps.classifiers.services.labels import ClassLabel
from apps.evaluation.services.datasets import LabeledComment

# Configuration du logger
logger = logging.getLogger(__name__)

DEFAULT_CLASSES = (ClassLabel.OFFENSIVE, ClassLabel.HATE)


class MaskedProposer(Protocol):
    def propose_masked(self, tokens: Sequence[str], position: int, top_k: int = 10) -> List[Tuple[str, float]]:
        ...


@dataclass(frozen=True)
class CommonWordSet:
    words: FrozenSet[str]
    min_per_class: int = 3
    class_counts: Dict[int, Counter] = field(default_factory=dict, compare=False, repr=False)

    def __contains__(self, token: str) -> bool:
        return token in self.words

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self):
        return iter(sorted(self.words))


@dataclass(frozen=True)
class AugmentedSample:
    source: LabeledComment
    tokens: Tuple[str, ...]
    replaced_positions: FrozenSet[int]

    @property
    def label(self) -> ClassLabel:
        return self.source.label

    @property
    def text(self) -> str:
        return ' '.join(self.tokens)


def select_common_words(dataset: Sequence[LabeledComment], min_per_class: int = 3) -> CommonWordSet:
    """
    Mots présents au moins ``min_per_class`` fois dans chacune des trois classes.

    Raises:
        ValidationError: Si une classe est absente du jeu ou si ``min_per_class`` < 1
    """
    if min_per_class < 1:
        raise ValidationError(
            f"min_per_class doit être >= 1 (reçu {min_per_class})",
            code='invalid_min_per_class',
            params={'min_per_class': min_per_class},
        )
    counts = {int(label): Counter() for label in ClassLabel}
    for comment in dataset:
        counts[int(comment.label)].update(comment.text.split())

    present = {int(comment.label) for comment in dataset}
    for label in ClassLabel:
        if int(label) not in present:
            raise ValidationError(
                f"La classe {label.label} est absente du jeu de données",
                code='missing_class',
                params={'label': label.label},
            )

    vocabulary = set().union(*(counter.keys() for counter in counts.values()))
    words = frozenset(
        token for token in vocabulary
        if all(counter[token] >= min_per_class for counter in counts.values())
    )
    logger.info(f"{len(words)} mots communs aux trois classes (seuil {min_per_class})")
    return CommonWordSet(words, min_per_class, counts)


def augment_sentence(
    sample: LabeledComment,
    encoder: MaskedProposer,
    common: CommonWordSet,
    n_positions: int = 1,
    n_outputs: int = 4,
    seed: int = 13,
    top_k: int = 20,
) -> List[AugmentedSample]:
    """
    Génère ``n_outputs`` variantes de ``sample``.

    Chaque variante tire ``n_positions`` positions distinctes ; à chacune, le
    jeton est remplacé par la proposition la mieux classée qui est un mot
    commun différent du jeton d'origine, ou conservé à défaut.

    Args:
        sample (LabeledComment): Commentaire nettoyé (découpage par espaces)
        encoder: Objet exposant ``propose_masked(tokens, position, top_k)``
        common (CommonWordSet): Remplaçants autorisés
        n_positions (int): Positions remplacées par variante
        n_outputs (int): Nombre de variantes
        seed (int): Graine du tirage des positions
        top_k (int): Propositions examinées par position

    Returns:
        List[AugmentedSample]: Les variantes, même longueur et même étiquette que ``sample``

    Raises:
        ValidationError: Mots communs vides, ou phrase plus courte que ``n_positions``
    """
    if not len(common):
        raise ValidationError("Aucun mot commun disponible pour l'augmentation", code='empty_common_words')
    tokens = sample.text.split()
    if not 1 <= n_positions <= len(tokens):
        raise ValidationError(
            f"{n_positions} position(s) demandée(s) pour une phrase de {len(tokens)} jeton(s)",
            code='invalid_positions',
            params={'n_positions': n_positions, 'length': len(tokens), 'id': sample.id},
        )

    rng = np.random.default_rng(seed)
    outputs = []
    for _ in range(n_outputs):
        positions = sorted(int(p) for p in rng.choice(len(tokens), size=n_positions, replace=False))
        result = list(tokens)
        replaced = set()
        for position in positions:
            original = tokens[position]
            for candidate, _score in encoder.propose_masked(tokens, position, top_k):
                if candidate in common and candidate != original:
                    result[position] = candidate
                    replaced.add(position)
                    break
        outputs.append(AugmentedSample(sample, tuple(result), frozenset(replaced)))
    return outputs


def augment_dataset(
    dataset: Sequence[LabeledComment],
    encoder: MaskedProposer,
    common: CommonWordSet,
    classes: Iterable[ClassLabel] = DEFAULT_CLASSES,
    n_positions: int = 1,
    n_outputs: int = 4,
    seed: int = 13,
    top_k: int = 20,
) -> List[LabeledComment]:
    """
    Nouveaux commentaires ``<id>-aug<k>`` pour les classes ``classes``.

    Les phrases trop courtes sont ignorées ; les variantes sans remplacement
    et les doublons d'une même source ne sont pas gardés.
    """
    classes = {int(label) for label in classes}
    rng = np.random.default_rng(seed)
    augmented = []
    for comment in dataset:
        if int(comment.label) not in classes:
            continue
        sample_seed = int(rng.integers(2 ** 31))
        if len(comment.text.split()) < n_positions:
            logger.debug(f"{comment.id} ignoré : moins de {n_positions} jeton(s)")
            continue

        seen = {comment.text}
        k = 0
        for sample in augment_sentence(comment, encoder, common, n_positions, n_outputs, sample_seed, top_k):
            if not sample.replaced_positions or sample.text in seen:
                continue
            seen.add(sample.text)
            k += 1
            augmented.append(LabeledComment(f'{comment.id}-aug{k}', sample.text, comment.label))

    logger.info(f"Augmentation : {len(augmented)} commentaires ajoutés")
    return augmented
