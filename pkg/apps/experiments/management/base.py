# -*- coding: utf-8 -*-
"""
Base commune des commandes du pipeline.

Toutes les commandes acceptent les options globales ``--config``, ``--seed``
et ``--out`` et convertissent les erreurs des services en ``CommandError``.
"""

import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional, TextIO

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured, ValidationError
from django.core.management.base import BaseCommand, CommandError

# Configuration du logger
logger = logging.getLogger(__name__)


def format_validation_error(error: ValidationError) -> str:
    """Message lisible d'une ValidationError (code inclus quand il existe)."""
    messages = '; '.join(error.messages)
    code = getattr(error, 'code', None)
    return f'[{code}] {messages}' if code else messages


class PipelineCommand(BaseCommand):
    """
    Commande de base du pipeline.

    Les sous-classes déclarent leurs options dans ``add_pipeline_arguments``
    et implémentent ``handle_pipeline``.
    """

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            type=str,
            default=None,
            help="Fichier de configuration d'expérience (INI)"
        )
        parser.add_argument(
            '--seed',
            type=int,
            default=None,
            help='Graine aléatoire (remplace celles du fichier de configuration)'
        )
        parser.add_argument(
            '--out',
            type=str,
            default=None,
            help='Répertoire ou fichier de sortie'
        )
        self.add_pipeline_arguments(parser)

    def add_pipeline_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        self.configure_torch()
        try:
            return self.handle_pipeline(*args, **options)
        except CommandError:
            raise
        except ValidationError as e:
            logger.error(f"Erreur de validation : {format_validation_error(e)}")
            raise CommandError(format_validation_error(e))
        except ImproperlyConfigured as e:
            raise CommandError(f'Configuration incomplète : {e}')
        except FileNotFoundError as e:
            raise CommandError(f'Fichier introuvable : {e.filename}')
        except Exception as e:
            # Les erreurs d'étape du runner portent déjà le nom de l'étape
            logger.exception(f"Échec de la commande {self.__class__.__module__}")
            raise CommandError(str(e))

    def handle_pipeline(self, *args, **options):
        raise NotImplementedError('Les sous-classes doivent implémenter handle_pipeline()')

    # ------------------------------------------------------------------
    # Utilitaires
    # ------------------------------------------------------------------

    @staticmethod
    def configure_torch():
        """Nombre de threads torch fixé par HSD_TORCH_THREADS (déterminisme)."""
        try:
            import torch
        except ImportError:
            return
        threads = getattr(settings, 'HSD_TORCH_THREADS', 1)
        if threads > 0:
            torch.set_num_threads(threads)

    @staticmethod
    def resolve_seed(options, fallback: Optional[int] = None) -> int:
        if options.get('seed') is not None:
            return options['seed']
        if fallback is not None:
            return fallback
        return settings.HSD_DEFAULT_SEED

    @staticmethod
    def output_dir(options, default_name: str) -> Path:
        """Répertoire de sortie : --out, sinon HSD_OUTPUT_DIR/<default_name>."""
        if options.get('out'):
            path = Path(options['out'])
        else:
            path = Path(settings.HSD_OUTPUT_DIR) / default_name
        path.mkdir(parents=True, exist_ok=True)
        return path

    @staticmethod
    def read_lines(path: Optional[str]) -> List[str]:
        """Lit des lignes UTF-8 depuis un fichier, ou l'entrée standard pour '-'."""
        if not path or path == '-':
            return [line.rstrip('\n') for line in sys.stdin]
        with open(path, 'r', encoding='utf-8') as handle:
            return [line.rstrip('\n') for line in handle]

    @contextmanager
    def open_output(self, path: Optional[str]) -> Iterator[TextIO]:
        """Ouvre la sortie : un fichier, ou la sortie de la commande pour '-'."""
        if not path or path == '-':
            yield self.stdout
            return
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as handle:
            yield handle
