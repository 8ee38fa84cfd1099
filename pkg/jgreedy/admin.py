import logging
from django.contrib import admin
from jutil.admin import ModelAdminBase
from jgreedy.models import ExperimentRun, TrialResult

logger = logging.getLogger(__name__)


class TrialResultInlineAdmin(admin.TabularInline):
    model = TrialResult
    extra = 0
    can_delete = False
    fields = (
        "trial",
        "seed",
        "iterations",
        "converged",
        "exact_recovery",
        "relative_error",
        "bound",
        "error",
    )
    readonly_fields = fields


class ExperimentRunAdmin(ModelAdminBase):
    save_on_top = False
    date_hierarchy = "created"
    inlines = [TrialResultInlineAdmin]
    fields = (
        "id",
        "created",
        "algorithm",
        "m",
        "n",
        "k",
        "distribution",
        "noise_sigma",
        "master_seed",
        "trials",
        "success_fraction",
        "max_iterations",
        "hypothesis_met_count",
        "violations",
    )
    readonly_fields = list_display = fields
    list_filter = ("algorithm", "distribution")


class TrialResultAdmin(ModelAdminBase):
    save_on_top = False
    fields = (
        "id",
        "run",
        "trial",
        "seed",
        "iterations",
        "converged",
        "exact_recovery",
        "relative_error",
        "bound",
        "error",
    )
    readonly_fields = list_display = fields
    raw_id_fields = ("run",)
    list_filter = ("converged", "exact_recovery", "run__algorithm")


admin.site.register(ExperimentRun, ExperimentRunAdmin)
admin.site.register(TrialResult, TrialResultAdmin)
