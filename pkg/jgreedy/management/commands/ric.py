import logging
from django.core.management.base import CommandParser
from jgreedy.command import GreedyCommand
from jgreedy.helpers import format_csv
from jgreedy.parsers import read_matrix_file
from jgreedy.rip import EXACT, compute_ric

logger = logging.getLogger(__name__)

RIC_CSV_HEADER = ("order", "delta", "method", "subsets_examined", "valid", "extremal_support")


class Command(GreedyCommand):
    help = "Computes the restricted isometry constant delta_K of a matrix, exactly or as a Monte-Carlo lower bound"

    def add_arguments(self, parser: CommandParser):
        parser.add_argument("--matrix", type=str, required=True, help="sensing matrix CSV file")
        parser.add_argument("--order", type=int, required=True, help="RIC order K")
        parser.add_argument("--method", type=str, choices=(EXACT, "monte-carlo"), default=EXACT, help="exact enumeration or sampled lower bound")
        parser.add_argument("--trials", type=int, default=1000, help="sampled subsets for monte-carlo")
        parser.add_argument("--seed", type=int, default=0, help="random seed for monte-carlo")
        parser.add_argument("--jobs", type=int, default=1, help="worker processes for exact enumeration")
        parser.add_argument("--out", type=str, default="-", help="output file")

    def do(self, *args, **kwargs):
        a = read_matrix_file(kwargs["matrix"])
        est = compute_ric(a, kwargs["order"], kwargs["method"], trials=kwargs["trials"], seed=kwargs["seed"], jobs=kwargs["jobs"])
        row = [est.order, est.delta, est.method, est.subsets_examined, int(est.is_valid), ";".join(str(i) for i in est.extremal_support)]
        self.emit(format_csv(RIC_CSV_HEADER, [row]), kwargs["out"])
