# -*- coding: utf-8 -*-
"""Fabriques de commentaires étiquetés pour les tests."""

from typing import Dict, List

import factory

from apps.classifiers.services.labels import ClassLabel

from .services.datasets import LabeledComment


class LabeledCommentFactory(factory.Factory):
    class Meta:
        model = LabeledComment

    id = factory.Sequence(lambda n: f'c{n:05d}')
    text = factory.Iterator([
        'thiết kế đẹp quá',
        'nhổn làm gắt vl',
        'hôm nay trời đẹp',
        'sản phẩm tốt lắm',
        'làm ăn như vậy à',
    ])
    label = ClassLabel.CLEAN


def build_dataset(counts: Dict[ClassLabel, int], prefix: str = 'c') -> List[LabeledComment]:
    """Jeu de ``counts[classe]`` commentaires par classe, identifiants ``<prefix><n>``."""
    dataset = []
    for label in ClassLabel:
        for _ in range(counts.get(label, 0)):
            dataset.append(LabeledCommentFactory.build(id=f'{prefix}{len(dataset):05d}', label=label))
    return dataset
