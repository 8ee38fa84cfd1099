from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class JgreedyConfig(AppConfig):
    name = "jgreedy"
    verbose_name = _("Greedy Sparse Recovery")
    default_auto_field = "django.db.models.AutoField"
