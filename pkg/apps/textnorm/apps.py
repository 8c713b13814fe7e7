from django.apps import AppConfig


class TextnormConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.textnorm'
    verbose_name = 'Normalisation du texte'
