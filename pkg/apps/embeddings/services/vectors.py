# -*- coding: utf-8 -*-
"""
Matrices de plongements indexées par un vocabulaire.

Ce module fournit :
- Le type EmbeddingMatrix (une ligne par entrée du vocabulaire)
- La lecture et l'écriture du format texte word2vec ("count dim" puis une ligne par mot)
- La projection d'une suite de jetons en matrice max_len x dim
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
from django.core.exceptions import ValidationError

from .vocabulary import PAD_INDEX, SPECIAL_TOKENS, Vocabulary

# Configuration du logger
logger = logging.getLogger(__name__)

DEFAULT_MAX_LEN = 64


@dataclass
class EmbeddingMatrix:
    """
    Vecteurs denses (float32) d'un vocabulaire.

    La ligne UNK est nulle par défaut : un mot inconnu ne porte aucune information.
    """

    vocab: Vocabulary
    vectors: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 1:
            raise ValidationError(
                f"Matrice de forme invalide : {self.vectors.shape}",
                code='invalid_matrix',
            )
        if self.vectors.shape[0] != len(self.vocab):
            raise ValidationError(
                f"{self.vectors.shape[0]} lignes pour un vocabulaire de {len(self.vocab)} entrées",
                code='invalid_matrix',
            )
        if not np.isfinite(self.vectors).all():
            raise ValidationError('La matrice contient des valeurs non finies', code='non_finite_matrix')

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self.vocab.index(token)]

    def cosine(self, left: str, right: str) -> float:
        a, b = self.vector(left), self.vector(right)
        norm = float(np.linalg.norm(a) * np.linalg.norm(b))
        return float(a @ b) / norm if norm > 0 else 0.0

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EmbeddingMatrix)
            and self.vocab == other.vocab
            and np.array_equal(self.vectors, other.vectors)
        )


def save_word2vec(matrix: EmbeddingMatrix, path: Union[str, Path]) -> None:
    """
    Écrit la matrice au format texte word2vec (9 chiffres significatifs).

    Les jetons spéciaux sont écrits aussi, ce qui rend la relecture exacte.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(f'{len(matrix.vocab)} {matrix.dim}\n')
        for token, row in zip(matrix.vocab.tokens, matrix.vectors):
            values = ' '.join('%.9g' % value for value in row.tolist())
            handle.write(f'{token} {values}\n')


def _parse_header(line: str, path) -> Tuple[int, int]:
    parts = line.split()
    try:
        count, dim = int(parts[0]), int(parts[1])
    except (IndexError, ValueError):
        count, dim = -1, -1
    if len(parts) != 2 or count < 0 or dim < 1:
        raise ValidationError(
            f"{path}:1 : en-tête word2vec invalide (attendu 'count dim')",
            code='malformed_line',
            params={'line': 1},
        )
    return count, dim


def load_pretrained(path: Union[str, Path]) -> EmbeddingMatrix:
    """
    Charge des vecteurs au format texte word2vec.

    Args:
        path: Fichier dont la première ligne est "count dim"

    Returns:
        EmbeddingMatrix: Jetons spéciaux puis mots du fichier, dans l'ordre du fichier

    Raises:
        ValidationError: Ligne mal formée, avec son numéro (1 = en-tête)
    """
    with open(path, 'r', encoding='utf-8') as handle:
        lines = handle.read().split('\n')
    if not lines or not lines[0].strip():
        raise ValidationError(f"{path} : fichier vide", code='malformed_line', params={'line': 1})
    count, dim = _parse_header(lines[0], path)

    special_rows: Dict[str, np.ndarray] = {}
    tokens: List[str] = []
    rows: List[np.ndarray] = []
    seen = set()
    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.rstrip(' \r').split(' ')
        if len(parts) != dim + 1:
            raise ValidationError(
                f"{path}:{line_number} : {len(parts) - 1} valeurs au lieu de {dim}",
                code='malformed_line',
                params={'line': line_number},
            )
        try:
            row = np.asarray([float(value) for value in parts[1:]], dtype=np.float32)
        except ValueError:
            raise ValidationError(
                f"{path}:{line_number} : valeur non numérique",
                code='malformed_line',
                params={'line': line_number},
            )
        if not np.isfinite(row).all():
            raise ValidationError(
                f"{path}:{line_number} : valeur non finie",
                code='malformed_line',
                params={'line': line_number},
            )
        token = parts[0]
        if token in seen:
            raise ValidationError(
                f"{path}:{line_number} : mot dupliqué {token!r}",
                code='malformed_line',
                params={'line': line_number},
            )
        seen.add(token)
        if token in SPECIAL_TOKENS:
            special_rows[token] = row
        else:
            tokens.append(token)
            rows.append(row)

    if len(seen) != count:
        raise ValidationError(
            f"{path} : l'en-tête annonce {count} mots, {len(seen)} lus",
            code='malformed_line',
            params={'line': 1},
        )

    vocab = Vocabulary(tokens)
    vectors = np.zeros((len(vocab), dim), dtype=np.float32)
    for index, token in enumerate(SPECIAL_TOKENS):
        if token in special_rows:
            vectors[index] = special_rows[token]
    if rows:
        vectors[len(SPECIAL_TOKENS):] = np.stack(rows)
    logger.info(f"{len(tokens)} vecteurs de dimension {dim} chargés depuis {path}")
    return EmbeddingMatrix(vocab, vectors)


def embed_sequence(tokens: Sequence[str], matrix: EmbeddingMatrix, max_len: int = DEFAULT_MAX_LEN) -> np.ndarray:
    """
    Projette une suite de jetons en matrice (max_len, dim).

    Les suites trop longues sont tronquées à la fin, les trop courtes
    complétées par la ligne PAD ; un jeton inconnu prend la ligne UNK.
    """
    if max_len < 1:
        raise ValidationError(f"max_len doit être >= 1 (reçu {max_len})", code='invalid_max_len')
    output = np.tile(matrix.vectors[PAD_INDEX], (max_len, 1))
    indexes = matrix.vocab.encode(list(tokens)[:max_len])
    if indexes:
        output[:len(indexes)] = matrix.vectors[indexes]
    return output
