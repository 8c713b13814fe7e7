from django.contrib import admin
from django.urls import path
from django.views.generic import RedirectView

# Seule l'interface d'administration est exposée : consultation des
# expériences (ExperimentRun) et des résultats par cellule (CellResult).
admin.site.site_header = 'Détection de discours haineux'
admin.site.site_title = 'HSD'

urlpatterns = [
    path('admin/', admin.site.urls),
    path('', RedirectView.as_view(url='/admin/', permanent=False)),
]
