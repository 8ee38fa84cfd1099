from django.db import migrations, models
import django.db.models.deletion
import django.utils.timezone
import jutil.modelfields


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                ("id", models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                (
                    "algorithm",
                    jutil.modelfields.SafeCharField(choices=[("cosamp", "CoSaMP"), ("sp", "Subspace Pursuit")], db_index=True, max_length=8, verbose_name="algorithm"),
                ),
                ("m", models.PositiveIntegerField(verbose_name="measurements")),
                ("n", models.PositiveIntegerField(verbose_name="signal length")),
                ("k", models.PositiveIntegerField(verbose_name="sparsity")),
                (
                    "distribution",
                    jutil.modelfields.SafeCharField(
                        choices=[("gaussian", "Gaussian"), ("flat", "Flat"), ("geometric", "Geometric")], max_length=16, verbose_name="signal distribution"
                    ),
                ),
                ("noise_sigma", models.FloatField(default=0.0, verbose_name="noise sigma")),
                ("master_seed", jutil.modelfields.SafeCharField(max_length=32, verbose_name="master seed")),
                ("trials", models.PositiveIntegerField(verbose_name="trials")),
                ("success_fraction", models.FloatField(verbose_name="success fraction")),
                ("max_iterations", models.PositiveIntegerField(verbose_name="max iterations")),
                ("hypothesis_met_count", models.PositiveIntegerField(default=0, verbose_name="hypothesis met count")),
                ("violations", models.PositiveIntegerField(default=0, verbose_name="violations")),
                (
                    "created",
                    models.DateTimeField(blank=True, db_index=True, default=django.utils.timezone.now, editable=False, verbose_name="created"),
                ),
            ],
            options={
                "verbose_name": "experiment run",
                "verbose_name_plural": "experiment runs",
            },
        ),
        migrations.CreateModel(
            name="TrialResult",
            fields=[
                ("id", models.AutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("trial", models.PositiveIntegerField(db_index=True, verbose_name="trial")),
                ("seed", jutil.modelfields.SafeCharField(max_length=32, verbose_name="seed")),
                ("iterations", models.PositiveIntegerField(verbose_name="iterations")),
                ("converged", models.BooleanField(db_index=True, verbose_name="converged")),
                ("exact_recovery", models.BooleanField(db_index=True, verbose_name="exact recovery")),
                ("relative_error", models.FloatField(blank=True, default=None, null=True, verbose_name="relative error")),
                ("bound", models.PositiveIntegerField(blank=True, default=None, null=True, verbose_name="iteration bound")),
                ("error", jutil.modelfields.SafeTextField(blank=True, default="", verbose_name="error")),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE, related_name="trial_set", to="jgreedy.experimentrun", verbose_name="experiment run"
                    ),
                ),
            ],
            options={
                "verbose_name": "trial result",
                "verbose_name_plural": "trial results",
                "ordering": ("run", "trial"),
            },
        ),
    ]
