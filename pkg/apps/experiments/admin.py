from django.contrib import admin
from .models import ExperimentRun, CellResult


class CellResultInline(admin.TabularInline):
    model = CellResult
    extra = 0
    readonly_fields = ['model_id', 'architecture', 'embedding', 'dev_f1', 'best_dev_loss', 'selected']


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ['config_path', 'status', 'ensemble_f1', 'selected_models', 'started_at', 'duration_display']
    list_filter = ['status', 'started_at']
    search_fields = ['config_path', 'output_dir', 'error_message']
    readonly_fields = ['started_at', 'duration_display']
    date_hierarchy = 'started_at'
    inlines = [CellResultInline]

    def duration_display(self, obj):
        return obj.duration or '-'
    duration_display.short_description = 'Durée'

    fieldsets = (
        ('Informations générales', {
            'fields': ('config_path', 'output_dir', 'seed', 'status', 'current_stage')
        }),
        ('Timing', {
            'fields': ('started_at', 'completed_at', 'duration_display')
        }),
        ('Résultats', {
            'fields': ('ensemble_f1', 'selected_models')
        }),
        ('Erreurs', {
            'fields': ('failed_stage', 'error_message'),
            'classes': ('collapse',)
        })
    )


@admin.register(CellResult)
class CellResultAdmin(admin.ModelAdmin):
    list_display = ['model_id', 'run', 'dev_f1', 'best_dev_loss', 'selected']
    list_filter = ['architecture', 'embedding', 'selected']
    search_fields = ['model_id']
