import logging
from collections import OrderedDict
from django.core.management.base import CommandParser
from jgreedy.command import GreedyCommand
from jgreedy.errors import PropertyViolation
from jgreedy.experiments import DEFAULT_GEOMETRIC_RATIO, DEFAULT_PERTURBATION, DISTRIBUTIONS, ENSEMBLES, GAUSSIAN, TrialConfig, decay_validation, iteration_bound_experiment
from jgreedy.helpers import json_dumps
from jgreedy.pursuit import ALGORITHMS

logger = logging.getLogger(__name__)


class Command(GreedyCommand):
    help = "Checks the per-iteration decay inequalities on seeded instances with exactly computed RIC"

    def add_arguments(self, parser: CommandParser):
        parser.add_argument("--m", type=int, required=True, help="number of measurements")
        parser.add_argument("--n", type=int, required=True, help="signal length")
        parser.add_argument("--k", type=int, required=True, help="sparsity K")
        parser.add_argument("--algorithm", type=str, choices=ALGORITHMS, required=True, help="recovery algorithm")
        parser.add_argument("--trials", type=int, default=50, help="number of trials")
        parser.add_argument("--seed", type=int, default=0, help="master seed")
        parser.add_argument("--noise-sigma", type=float, default=0.0, help="standard deviation of additive measurement noise (CoSaMP only)")
        parser.add_argument("--distribution", type=str, default=GAUSSIAN, help="signal distribution: {}".format(", ".join(DISTRIBUTIONS)))
        parser.add_argument("--ratio", type=float, default=DEFAULT_GEOMETRIC_RATIO, help="magnitude ratio of the geometric distribution")
        parser.add_argument("--ensemble", type=str, choices=ENSEMBLES, default=GAUSSIAN, help="sensing matrix ensemble (perturbed_identity needs m == n)")
        parser.add_argument("--perturbation", type=float, default=DEFAULT_PERTURBATION, help="entry standard deviation added to the identity by perturbed_identity")
        parser.add_argument("--check-bound", action="store_true", help="also check iterations against ceil(cK) (noiseless only)")
        parser.add_argument("--jobs", type=int, default=1, help="worker processes")
        parser.add_argument("--out", type=str, default="-", help="report JSON file")

    def do(self, *args, **kwargs):
        config = TrialConfig(
            m=kwargs["m"],
            n=kwargs["n"],
            k=kwargs["k"],
            algorithm=kwargs["algorithm"],
            distribution=kwargs["distribution"],
            ratio=kwargs["ratio"],
            ensemble=kwargs["ensemble"],
            perturbation=kwargs["perturbation"],
            noise_sigma=kwargs["noise_sigma"],
            master_seed=kwargs["seed"],
            trials=kwargs["trials"],
        )
        report = decay_validation(config, jobs=kwargs["jobs"])
        data = OrderedDict([("decay", report.as_dict())])
        violations = report.violation_count
        if kwargs["check_bound"]:
            summary = iteration_bound_experiment(config, jobs=kwargs["jobs"])
            data["iteration_bound"] = summary.as_dict()
            violations += summary.violations
        self.emit(json_dumps(data), kwargs["out"])
        if violations:
            raise PropertyViolation("{} inequality violations on hypothesis-met instances".format(violations), violations)
