import logging
from django.core.management.base import CommandParser
from jgreedy.command import GreedyCommand
from jgreedy.errors import PropertyViolation
from jgreedy.experiments import DEFAULT_GEOMETRIC_RATIO, DEFAULT_PERTURBATION, DISTRIBUTIONS, ENSEMBLES, GAUSSIAN, TrialConfig, format_experiment_csv, run_trials, store_trial_records, summarize_trials
from jgreedy.helpers import json_dumps
from jgreedy.management.commands.recover import epsilon_type
from jgreedy.parsers import write_text_file
from jgreedy.pursuit import ALGORITHMS, RELATIVE_EPSILON

logger = logging.getLogger(__name__)


class Command(GreedyCommand):
    help = "Runs seeded random recovery trials and writes per-trial records (CSV) and a summary (JSON)"

    def add_arguments(self, parser: CommandParser):
        parser.add_argument("--m", type=int, required=True, help="number of measurements")
        parser.add_argument("--n", type=int, required=True, help="signal length")
        parser.add_argument("--k", type=int, required=True, help="sparsity K")
        parser.add_argument("--algorithm", type=str, choices=ALGORITHMS, required=True, help="recovery algorithm")
        parser.add_argument("--trials", type=int, default=1, help="number of trials")
        parser.add_argument("--seed", type=int, default=0, help="master seed")
        parser.add_argument("--noise-sigma", type=float, default=0.0, help="standard deviation of additive measurement noise")
        parser.add_argument("--distribution", type=str, default=GAUSSIAN, help="signal distribution: {}".format(", ".join(DISTRIBUTIONS)))
        parser.add_argument("--ratio", type=float, default=DEFAULT_GEOMETRIC_RATIO, help="magnitude ratio of the geometric distribution")
        parser.add_argument("--ensemble", type=str, choices=ENSEMBLES, default=GAUSSIAN, help="sensing matrix ensemble (perturbed_identity needs m == n)")
        parser.add_argument("--perturbation", type=float, default=DEFAULT_PERTURBATION, help="entry standard deviation added to the identity by perturbed_identity")
        parser.add_argument("--epsilon", type=epsilon_type, default=RELATIVE_EPSILON, help='stopping residual norm, or "relative"')
        parser.add_argument("--max-iter", type=int, default=None, help="maximum number of iterations (default 6K + 10)")
        parser.add_argument("--certify", action="store_true", help="compute exact RIC per trial and check ceil(cK)")
        parser.add_argument("--jobs", type=int, default=1, help="worker processes")
        parser.add_argument("--out", type=str, default="-", help="trial records CSV file")
        parser.add_argument("--summary", type=str, default="", help="summary JSON file")
        parser.add_argument("--commit", action="store_true", help="store the run in the database")

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
            epsilon=kwargs["epsilon"],
            max_iterations=kwargs["max_iter"],
            certify=kwargs["certify"],
        )
        records = run_trials(config, jobs=kwargs["jobs"])
        self.emit(format_experiment_csv(config, records), kwargs["out"])
        summary = summarize_trials(config, records)
        if kwargs["summary"]:
            write_text_file(kwargs["summary"], json_dumps(summary))
        self.stderr.write("success_fraction={} max_iterations={}".format(summary["success_fraction"], summary["max_iterations"]))
        if kwargs["commit"]:
            store_trial_records(config, records)
        if summary["violations"]:
            raise PropertyViolation("{} certified trials exceeded the ceil(cK) iteration bound".format(summary["violations"]), summary["violations"])
