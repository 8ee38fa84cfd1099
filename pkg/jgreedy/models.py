import logging
from django.db import models
from django.utils.timezone import now
from django.utils.translation import gettext_lazy as _
from jutil.modelfields import SafeCharField, SafeTextField

logger = logging.getLogger(__name__)

ALGORITHM_CHOICES = (
    ("cosamp", "CoSaMP"),
    ("sp", _("Subspace Pursuit")),
)

DISTRIBUTION_CHOICES = (
    ("gaussian", _("Gaussian")),
    ("flat", _("Flat")),
    ("geometric", _("Geometric")),
)


class ExperimentRun(models.Model):
    algorithm = SafeCharField(_("algorithm"), max_length=8, choices=ALGORITHM_CHOICES, db_index=True)
    m = models.PositiveIntegerField(_("measurements"))
    n = models.PositiveIntegerField(_("signal length"))
    k = models.PositiveIntegerField(_("sparsity"))
    distribution = SafeCharField(_("signal distribution"), max_length=16, choices=DISTRIBUTION_CHOICES)
    noise_sigma = models.FloatField(_("noise sigma"), default=0.0)
    master_seed = SafeCharField(_("master seed"), max_length=32)
    trials = models.PositiveIntegerField(_("trials"))
    success_fraction = models.FloatField(_("success fraction"))
    max_iterations = models.PositiveIntegerField(_("max iterations"))
    hypothesis_met_count = models.PositiveIntegerField(_("hypothesis met count"), default=0)
    violations = models.PositiveIntegerField(_("violations"), default=0)
    created = models.DateTimeField(_("created"), default=now, db_index=True, blank=True, editable=False)

    class Meta:
        verbose_name = _("experiment run")
        verbose_name_plural = _("experiment runs")

    def __str__(self):
        return "{alg} m={m} n={n} K={k} ({trials} trials)".format(alg=self.algorithm, m=self.m, n=self.n, k=self.k, trials=self.trials)


class TrialResult(models.Model):
    run = models.ForeignKey(ExperimentRun, verbose_name=_("experiment run"), related_name="trial_set", on_delete=models.CASCADE)
    trial = models.PositiveIntegerField(_("trial"), db_index=True)
    seed = SafeCharField(_("seed"), max_length=32)
    iterations = models.PositiveIntegerField(_("iterations"))
    converged = models.BooleanField(_("converged"), db_index=True)
    exact_recovery = models.BooleanField(_("exact recovery"), db_index=True)
    relative_error = models.FloatField(_("relative error"), null=True, default=None, blank=True)
    bound = models.PositiveIntegerField(_("iteration bound"), null=True, default=None, blank=True)
    error = SafeTextField(_("error"), blank=True, default="")

    class Meta:
        verbose_name = _("trial result")
        verbose_name_plural = _("trial results")
        ordering = ("run", "trial")

    def __str__(self):
        return "{run_id}/{trial}".format(run_id=self.run_id, trial=self.trial)
