# -*- coding: utf-8 -*-
"""
Les cinq architectures de classification.

Ce module fournit :
- TextCNN : convolutions parallèles de tailles différentes, max-pooling global
- VDCNN : blocs convolutifs empilés avec connexions résiduelles
- BiLSTM : blocs LSTM bidirectionnels empilés, pooling masqué
- LSTMCNN : encodage BiLSTM suivi de la tête convolutive de TextCNN
- SARNN : LSTM, auto-attention additive, second LSTM
- Un adaptateur dense pour les vecteurs de phrase (plongement ``mlm``)

Tous les modèles prennent ``(inputs, lengths)`` et renvoient des
probabilités (N, 3) issues d'un softmax.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from django.core.exceptions import ValidationError
from django.db import models
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from apps.embeddings.services.featurizers import InputKind

from .labels import N_CLASSES

# Configuration du logger
logger = logging.getLogger(__name__)


class Architecture(models.TextChoices):
    TEXTCNN = 'textcnn', 'TextCNN'
    VDCNN = 'vdcnn', 'VDCNN'
    BILSTM = 'bilstm', 'BiLSTM'
    LSTMCNN = 'lstmcnn', 'LSTM + CNN'
    SARNN = 'sarnn', 'SARNN'


@dataclass(frozen=True)
class ModelConfig:
    """Architecture, source d'entrée et hyperparamètres d'un sous-modèle."""

    architecture: str
    embedding: str
    input_dim: int
    max_len: int = 64
    input_kind: str = InputKind.SEQUENCE
    kernel_sizes: Tuple[int, ...] = (2, 3, 4, 5)
    filters: int = 64
    vdcnn_blocks: int = 4
    vdcnn_channels: int = 64
    hidden: int = 128
    dense: int = 128
    dropout: float = 0.3
    seed: int = 13

    def __post_init__(self):
        if self.architecture not in Architecture.values:
            raise ValidationError(
                f"Architecture inconnue : {self.architecture!r}",
                code='unknown_architecture',
                params={'architecture': self.architecture},
            )
        if self.input_kind not in InputKind.values:
            raise ValidationError(
                f"Type d'entrée inconnu : {self.input_kind!r}",
                code='unknown_input_kind',
                params={'input_kind': self.input_kind},
            )
        object.__setattr__(self, 'kernel_sizes', tuple(int(k) for k in self.kernel_sizes))

    @property
    def model_id(self) -> str:
        return f'{self.architecture}__{self.embedding}'

    def to_dict(self) -> dict:
        data = asdict(self)
        data['architecture'] = str(self.architecture)
        data['input_kind'] = str(self.input_kind)
        data['kernel_sizes'] = list(self.kernel_sizes)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'ModelConfig':
        return cls(**{**data, 'kernel_sizes': tuple(data.get('kernel_sizes', (2, 3, 4, 5)))})


# ----------------------------------------------------------------------
# Briques communes
# ----------------------------------------------------------------------

def length_mask(lengths: torch.Tensor, max_len: int) -> torch.Tensor:
    """Masque booléen (N, L) : True aux positions réelles."""
    positions = torch.arange(max_len, device=lengths.device).unsqueeze(0)
    return positions < lengths.unsqueeze(1)


def masked_max_pool(sequence: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Max sur le temps de (N, L, C) en ignorant les positions de remplissage."""
    filled = sequence.masked_fill(~mask.unsqueeze(-1), float('-inf'))
    return filled.max(dim=1).values


def _full_lengths(inputs: torch.Tensor, lengths: Optional[torch.Tensor]) -> torch.Tensor:
    if lengths is None:
        return torch.full((inputs.shape[0],), inputs.shape[1], dtype=torch.long)
    return lengths.long().clamp(min=1, max=inputs.shape[1]).cpu()


class DenseHead(nn.Module):
    """Couche cachée, ReLU, dropout puis projection sur les 3 classes."""

    def __init__(self, in_features: int, hidden: int, dropout: float):
        super().__init__()
        self.hidden = nn.Linear(in_features, hidden)
        self.dropout = nn.Dropout(dropout)
        self.output = nn.Linear(hidden, N_CLASSES)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.output(self.dropout(F.relu(self.hidden(features))))


class ConvolutionHead(nn.Module):
    """Convolutions 1D parallèles sur l'axe des jetons, max-pooling global, concaténation."""

    def __init__(self, in_channels: int, kernel_sizes: Sequence[int], filters: int):
        super().__init__()
        self.kernel_sizes = tuple(kernel_sizes)
        self.convs = nn.ModuleList(
            nn.Conv1d(in_channels, filters, kernel_size) for kernel_size in self.kernel_sizes
        )

    @property
    def out_features(self) -> int:
        return len(self.convs) * self.convs[0].out_channels

    def forward(self, sequence: torch.Tensor) -> torch.Tensor:
        check_sequence_length(sequence.shape[1], max(self.kernel_sizes))
        channels_first = sequence.transpose(1, 2)
        pooled = [F.relu(conv(channels_first)).max(dim=2).values for conv in self.convs]
        return torch.cat(pooled, dim=1)


def check_sequence_length(max_len: int, kernel_size: int) -> None:
    if max_len < kernel_size:
        raise ValidationError(
            f"Longueur de séquence {max_len} inférieure au plus grand noyau ({kernel_size})",
            code='sequence_too_short',
            params={'max_len': max_len, 'kernel_size': kernel_size},
        )


class BiLstmEncoder(nn.Module):
    """LSTM bidirectionnel sur séquences empaquetées ; sortie nulle au remplissage."""

    def __init__(self, input_dim: int, hidden: int, layers: int = 1, dropout: float = 0.0):
        super().__init__()
        self.lstm = nn.LSTM(
            input_dim,
            hidden,
            num_layers=layers,
            bidirectional=True,
            batch_first=True,
            dropout=dropout if layers > 1 else 0.0,
        )

    @property
    def out_features(self) -> int:
        return 2 * self.lstm.hidden_size

    def forward(self, sequence: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        packed = pack_padded_sequence(sequence, lengths, batch_first=True, enforce_sorted=False)
        output, _ = self.lstm(packed)
        output, _ = pad_packed_sequence(output, batch_first=True, total_length=sequence.shape[1])
        return output


class AdditiveAttention(nn.Module):
    """Score v·tanh(W h + b) par position, softmax sur les positions réelles."""

    def __init__(self, features: int, hidden: int):
        super().__init__()
        self.projection = nn.Linear(features, hidden)
        self.score = nn.Linear(hidden, 1, bias=False)

    def forward(self, hidden_states: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        scores = self.score(torch.tanh(self.projection(hidden_states))).squeeze(-1)
        scores = scores.masked_fill(~mask, float('-inf'))
        return torch.softmax(scores, dim=1)


@torch.no_grad()
def predict_proba(model: nn.Module, inputs: np.ndarray, lengths: Optional[np.ndarray] = None,
                  batch_size: int = 256) -> np.ndarray:
    """Probabilités (N, 3) en mode évaluation, par lots."""
    model.eval()
    dtype = next(model.parameters()).dtype
    inputs = torch.as_tensor(np.asarray(inputs), dtype=dtype)
    lengths = None if lengths is None else torch.as_tensor(np.asarray(lengths), dtype=torch.long)
    rows = []
    for start in range(0, inputs.shape[0], batch_size):
        batch_lengths = None if lengths is None else lengths[start:start + batch_size]
        rows.append(model(inputs[start:start + batch_size], batch_lengths))
    if not rows:
        return np.zeros((0, N_CLASSES), dtype=np.float64)
    return torch.cat(rows).double().numpy()


# ----------------------------------------------------------------------
# Modèles
# ----------------------------------------------------------------------

class Classifier(nn.Module):
    """Base : ``logits`` à implémenter, ``forward`` renvoie les probabilités."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config

    def logits(self, inputs: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def forward(self, inputs: torch.Tensor, lengths: Optional[torch.Tensor] = None) -> torch.Tensor:
        return torch.softmax(self.logits(inputs, _full_lengths(inputs, lengths)), dim=1)

    def predict_proba(self, inputs: np.ndarray, lengths: Optional[np.ndarray] = None) -> np.ndarray:
        return predict_proba(self, inputs, lengths)


class TextCNN(Classifier):

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        check_sequence_length(config.max_len, max(config.kernel_sizes))
        self.convolution = ConvolutionHead(config.input_dim, config.kernel_sizes, config.filters)
        self.dropout = nn.Dropout(config.dropout)
        self.head = DenseHead(self.convolution.out_features, config.dense, config.dropout)

    def logits(self, inputs, lengths):
        return self.head(self.dropout(self.convolution(inputs)))


class ResidualBlock(nn.Module):
    """Bloc pré-activé : shortcut(x) + conv2(relu(conv1(relu(x))))."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3):
        super().__init__()
        padding = kernel_size // 2
        self.conv1 = nn.Conv1d(in_channels, out_channels, kernel_size, padding=padding)
        self.conv2 = nn.Conv1d(out_channels, out_channels, kernel_size, padding=padding)
        if in_channels == out_channels:
            self.shortcut = nn.Identity()
        else:
            self.shortcut = nn.Conv1d(in_channels, out_channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.shortcut(x) + self.conv2(F.relu(self.conv1(F.relu(x))))


class VDCNN(Classifier):
    KERNEL_SIZE = 3

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        check_sequence_length(config.max_len, self.KERNEL_SIZE)
        channels = config.vdcnn_channels
        self.input_conv = nn.Conv1d(config.input_dim, channels, self.KERNEL_SIZE, padding=1)
        self.blocks = nn.ModuleList(
            ResidualBlock(channels, channels, self.KERNEL_SIZE) for _ in range(config.vdcnn_blocks)
        )
        self.head = DenseHead(channels, config.dense, config.dropout)

    def features(self, inputs: torch.Tensor) -> torch.Tensor:
        check_sequence_length(inputs.shape[1], self.KERNEL_SIZE)
        x = self.input_conv(inputs.transpose(1, 2))
        for position, block in enumerate(self.blocks):
            x = block(x)
            if position < len(self.blocks) - 1 and x.shape[2] >= 2:
                x = F.max_pool1d(x, kernel_size=2, ceil_mode=True)
        return F.relu(x).max(dim=2).values

    def logits(self, inputs, lengths):
        return self.head(self.features(inputs))


class BiLSTM(Classifier):
    LAYERS = 2

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        self.encoder = BiLstmEncoder(config.input_dim, config.hidden, self.LAYERS, config.dropout)
        self.head = DenseHead(self.encoder.out_features, config.dense, config.dropout)

    def pool(self, inputs: torch.Tensor, lengths: Optional[torch.Tensor] = None) -> torch.Tensor:
        """État regroupé (N, 2H) : max sur les positions réelles."""
        lengths = _full_lengths(inputs, lengths)
        output = self.encoder(inputs, lengths)
        return masked_max_pool(output, length_mask(lengths, inputs.shape[1]))

    def logits(self, inputs, lengths):
        return self.head(self.pool(inputs, lengths))


class LSTMCNN(Classifier):

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        check_sequence_length(config.max_len, max(config.kernel_sizes))
        self.encoder = BiLstmEncoder(config.input_dim, config.hidden)
        self.convolution = ConvolutionHead(self.encoder.out_features, config.kernel_sizes, config.filters)
        self.dropout = nn.Dropout(config.dropout)
        self.head = DenseHead(self.convolution.out_features, config.dense, config.dropout)

    def logits(self, inputs, lengths):
        encoded = self.encoder(inputs, lengths)
        return self.head(self.dropout(self.convolution(encoded)))


class SARNN(Classifier):
    """
    LSTM bidirectionnel, auto-attention additive, second LSTM bidirectionnel.

    Les poids d'attention du dernier appel sont conservés dans
    ``last_attention`` (N, L), nuls aux positions de remplissage.
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        self.encoder = BiLstmEncoder(config.input_dim, config.hidden)
        self.attention = AdditiveAttention(self.encoder.out_features, config.hidden)
        self.decoder = BiLstmEncoder(self.encoder.out_features, config.hidden)
        self.head = DenseHead(self.decoder.out_features, config.dense, config.dropout)
        self.last_attention: Optional[torch.Tensor] = None

    def logits(self, inputs, lengths):
        mask = length_mask(lengths, inputs.shape[1])
        hidden_states = self.encoder(inputs, lengths)
        alpha = self.attention(hidden_states, mask)
        self.last_attention = alpha.detach()
        # α uniforme laisse la séquence inchangée
        scale = alpha * lengths.to(alpha.dtype).unsqueeze(1)
        weighted = hidden_states * scale.unsqueeze(-1)
        decoded = self.decoder(weighted, lengths)
        return self.head(masked_max_pool(decoded, mask))


class SentenceClassifier(Classifier):
    """Adaptateur dense à deux couches pour les vecteurs de phrase (N, dim)."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        self.adapter = nn.Sequential(
            nn.Linear(config.input_dim, config.dense),
            nn.ReLU(),
            nn.Dropout(config.dropout),
            nn.Linear(config.dense, config.dense),
            nn.ReLU(),
            nn.Dropout(config.dropout),
        )
        self.head = DenseHead(config.dense, config.dense, config.dropout)

    def forward(self, inputs: torch.Tensor, lengths: Optional[torch.Tensor] = None) -> torch.Tensor:
        if inputs.dim() != 2:
            raise ValidationError(
                f"Vecteurs de phrase (N, dim) attendus, reçu {tuple(inputs.shape)}",
                code='invalid_input_shape',
                params={'shape': tuple(inputs.shape)},
            )
        return torch.softmax(self.head(self.adapter(inputs)), dim=1)


SEQUENCE_MODELS = {
    Architecture.TEXTCNN: TextCNN,
    Architecture.VDCNN: VDCNN,
    Architecture.BILSTM: BiLSTM,
    Architecture.LSTMCNN: LSTMCNN,
    Architecture.SARNN: SARNN,
}


def build_classifier(config: ModelConfig) -> Classifier:
    """Instancie le modèle de ``config`` (adaptateur dense pour les vecteurs de phrase)."""
    if config.input_kind == InputKind.SENTENCE:
        return SentenceClassifier(config)
    return SEQUENCE_MODELS[Architecture(config.architecture)](config)
