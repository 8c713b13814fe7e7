from django.apps import AppConfig


class AugmentConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.augment'
    verbose_name = 'Augmentation des données'
