import argparse
import logging
from django.core.management.base import CommandParser
from jgreedy.command import GreedyCommand
from jgreedy.parsers import format_vector, read_matrix_file, read_vector_file, write_text_file
from jgreedy.pursuit import ALGORITHMS, RELATIVE_EPSILON, RecoveryConfig, exact_recovery, format_trace_csv, run
from jgreedy.sparse import SparseSignal

logger = logging.getLogger(__name__)


def epsilon_type(value: str):
    if value == RELATIVE_EPSILON:
        return value
    try:
        return float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError('expected a number or "{}", got "{}"'.format(RELATIVE_EPSILON, value)) from exc


class Command(GreedyCommand):
    help = "Recovers a sparse signal from measurements y = Ax with CoSaMP or Subspace Pursuit"

    def add_arguments(self, parser: CommandParser):
        parser.add_argument("--algorithm", type=str, choices=ALGORITHMS, required=True, help="recovery algorithm")
        parser.add_argument("--matrix", type=str, required=True, help="sensing matrix CSV file")
        parser.add_argument("--measurements", type=str, required=True, help="measurement vector file")
        parser.add_argument("--sparsity", type=int, required=True, help="sparsity K")
        parser.add_argument("--epsilon", type=epsilon_type, default=RELATIVE_EPSILON, help='stopping residual norm, or "relative" for 1e-10 ||y||')
        parser.add_argument("--max-iter", type=int, default=None, help="maximum number of iterations (default 6K + 10)")
        parser.add_argument("--trace", type=str, default="", help="per-iteration trace CSV output file")
        parser.add_argument("--truth", type=str, default="", help="true signal file, fills missed energy columns of the trace")
        parser.add_argument("--out", type=str, default="-", help="estimate output file")

    def do(self, *args, **kwargs):
        a = read_matrix_file(kwargs["matrix"])
        y = read_vector_file(kwargs["measurements"])
        truth = SparseSignal(read_vector_file(kwargs["truth"])) if kwargs["truth"] else None
        config = RecoveryConfig(sparsity=kwargs["sparsity"], epsilon=kwargs["epsilon"], max_iterations=kwargs["max_iter"])
        res = run(kwargs["algorithm"], a, y, config, ground_truth=truth)
        self.stderr.write(
            "{alg}: converged={converged} iterations={iterations} residual_norm={residual}".format(
                alg=kwargs["algorithm"], converged=res.converged, iterations=res.iterations_used, residual=res.residual_norm
            )
        )
        if truth is not None:
            exact, relative_error = exact_recovery(res.estimate, truth)
            self.stderr.write("exact_recovery={} relative_error={}".format(exact, relative_error))
        if kwargs["trace"]:
            write_text_file(kwargs["trace"], format_trace_csv(res.trace))
        self.emit(format_vector(res.estimate.values), kwargs["out"])
